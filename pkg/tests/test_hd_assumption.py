import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from core.basis import BasisFamily, DensityFn, l2_norm_sq
from core.errors import ChainDomainError, ValidationError
from core.hd_assumption import (
    GramMatrix, ZeroRowSumMatrix, chain_check_K2, chain_consistency, density_gram, determinant_H,
    evaluate_P5, explicit_K2_coefficients, explicit_K2_D, gram_matrix, hd_form_matrix, hd_report, k2_gram,
    k2_transition, p5_checksum, quadratic_form_D, random_chain_point, random_histogram_coefficients,
    second_order_term, sos_identities, stationary_denominator,
)
from core.hmm_model import JointModel, random_transition_matrix
from utils.io_utils import make_rng


def _random_instance(seed, K=3, M=6):
    rng = make_rng(seed)
    Q = random_transition_matrix(rng, K)
    A = random_histogram_coefficients(rng, M, K)
    U = ZeroRowSumMatrix.from_free(rng.standard_normal((K, K - 1)))
    return Q, A, U


@settings(max_examples=25)
@given(st.integers(min_value=0, max_value=10 ** 6), st.integers(min_value=2, max_value=3))
def test_form_is_nonnegative_and_equals_second_order_term(seed, K):
    Q, A, U = _random_instance(seed, K=K)
    value = quadratic_form_D(Q, gram_matrix(A), U)
    direct = second_order_term(Q, A, A @ U.U.T)
    assert value >= -1e-12 * max(1.0, abs(direct))
    assert value == pytest.approx(direct, rel=1e-9, abs=1e-12)


def _coefficient_tensor(model):
    return np.einsum('xyz,ax,by,cz->abc', model.weights, model.A, model.A, model.A, optimize=True)


def test_form_matches_finite_difference_of_joint_density():
    basis = BasisFamily('histogram', 6)
    eps = 1e-4
    for seed in range(100):
        Q, A, U = _random_instance(seed, K=2 + seed % 2)
        B = A @ U.U.T
        base = _coefficient_tensor(JointModel.build(Q, A, basis))
        # ε³ 항은 ±ε 평균에서 상쇄된다
        sq = [np.sum((_coefficient_tensor(JointModel.build(Q, A + s * eps * B, basis)) - base) ** 2)
              for s in (1.0, -1.0)]
        expected = quadratic_form_D(Q, gram_matrix(A), U)
        assert 0.5 * (sq[0] + sq[1]) / eps ** 2 == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize("seed", range(6))
def test_explicit_K2_matches_general_form(seed):
    rng = make_rng(seed)
    p, q = rng.uniform(0.05, 0.95, size=2)
    G = gram_matrix(random_histogram_coefficients(rng, 5, 2))
    alpha, beta = rng.standard_normal(2)
    U = [[alpha, -alpha], [beta, -beta]]
    expected = quadratic_form_D(k2_transition(p, q), G, U)
    assert explicit_K2_D(p, q, G, alpha, beta) == pytest.approx(expected, rel=1e-9)


def test_explicit_K2_relabel_symmetry():
    p, q = 0.3, 0.6
    N1, N2, g = 2.0, 1.5, 0.4
    original = explicit_K2_coefficients(p, q, [[N1, g], [g, N2]])
    swapped = explicit_K2_coefficients(q, p, [[N2, g], [g, N1]])
    assert original.D11 == pytest.approx(swapped.D22, rel=1e-10)
    assert original.D22 == pytest.approx(swapped.D11, rel=1e-10)
    assert original.D12 == pytest.approx(swapped.D12, rel=1e-10)


def test_explicit_K2_domain():
    with pytest.raises(ValidationError):
        explicit_K2_coefficients(0.0, 0.5, np.eye(2))
    with pytest.raises(ValidationError):
        explicit_K2_coefficients(0.5, 0.5, np.eye(3))


def test_stationary_denominator_two_states():
    assert stationary_denominator(k2_transition(0.3, 0.4)) == pytest.approx(0.7)


def test_form_matrix_is_symmetric_positive_semidefinite():
    Q, A, _ = _random_instance(4)
    form = hd_form_matrix(Q, gram_matrix(A))
    assert form.shape == (6, 6)
    np.testing.assert_allclose(form, form.T, atol=1e-12)
    assert np.linalg.eigvalsh(form)[0] >= -1e-10 * np.abs(form).max()


@pytest.mark.parametrize("seed", range(8))
def test_random_two_state_models_have_positive_H(seed):
    rng = make_rng(seed)
    Q = random_transition_matrix(rng, 2)
    G = gram_matrix(random_histogram_coefficients(rng, 8, 2))
    assert determinant_H(Q, G) > 0


def test_random_two_state_models_have_positive_H_at_scale():
    rng = make_rng(11)
    for _ in range(1000):
        Q = random_transition_matrix(rng, 2)
        G = gram_matrix(random_histogram_coefficients(rng, 8, 2))
        assert determinant_H(Q, G) > 0


@pytest.mark.parametrize("q", [0.1, 0.25, 0.5, 0.7, 0.9])
def test_memoryless_chains_are_degenerate(q):
    # p = 1 − q이면 두 행이 같아 관측이 독립
    G = gram_matrix(random_histogram_coefficients(make_rng(int(q * 100)), 8, 2))
    report = hd_report(k2_transition(1.0 - q, q), G)
    assert abs(report["H"]) <= 1e-10 * report["scale"]
    assert report["form_min_eigenvalue"] <= 1e-9 * np.trace(hd_form_matrix(k2_transition(1.0 - q, q), G))


def test_identical_emissions_are_degenerate():
    f = DensityFn.beta(2, 5)
    report = hd_report(k2_transition(0.3, 0.4), density_gram([f, f]))
    assert report["gram_min_eigenvalue"] <= 1e-10 * 2 * l2_norm_sq(f)


def test_report_fields(two_state_spec):
    report = hd_report(two_state_spec.Q, density_gram(two_state_spec.emissions))
    assert set(report) == {"K", "H", "raw_determinant", "scale", "form_min_eigenvalue", "gram_min_eigenvalue"}
    assert report["K"] == 2
    assert report["H"] > 0
    assert report["form_min_eigenvalue"] > 0


def test_density_gram_diagonal_matches_norms(two_state_spec):
    G = density_gram(two_state_spec.emissions)
    for k, f in enumerate(two_state_spec.emissions):
        assert G.G[k, k] == pytest.approx(l2_norm_sq(f), rel=1e-6)
    assert G.min_eigenvalue() > 0


def test_gram_matrix_validation():
    with pytest.raises(ValidationError):
        GramMatrix([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(ValidationError):
        GramMatrix(np.ones((2, 3)))
    assert GramMatrix(np.eye(3)).K == 3


def test_zero_row_sum_validation():
    with pytest.raises(ValidationError):
        ZeroRowSumMatrix([[1.0, 0.0], [0.0, 1.0]])
    U = ZeroRowSumMatrix.from_free([[1.0, 2.0], [0.5, -0.5], [0.0, 3.0]])
    np.testing.assert_allclose(U.U.sum(axis=1), 0.0)


def test_P5_checksum_and_origin():
    assert p5_checksum() == (843, 4589568)
    assert evaluate_P5(0.0, 0.0, 0.0, 0.0) == pytest.approx(144.0)
    assert evaluate_P5(1.0, 1.0, 1.0, 1.0) == pytest.approx(4589568.0)


def test_P5_vectorized_matches_scalar():
    rng = make_rng(2)
    points = rng.uniform(0.0, 1.5, size=(5, 4))
    vectorized = evaluate_P5(*points.T)
    scalar = [evaluate_P5(*row) for row in points]
    np.testing.assert_allclose(vectorized, scalar, rtol=1e-12)


def test_P5_is_positive_on_samples():
    rng = make_rng(3)
    points = rng.uniform(0.0, 1.5, size=(200, 4))
    assert np.all(evaluate_P5(*points.T) > 0)


def test_P5_is_positive_on_wide_box():
    points = make_rng(13).uniform(-10.0, 10.0, size=(20000, 4))
    assert np.all(evaluate_P5(*points.T) > 0)


@pytest.mark.slow
def test_P5_is_positive_on_wide_box_dense():
    rng = make_rng(17)
    for _ in range(10):
        points = rng.uniform(-10.0, 10.0, size=(100000, 4))
        assert np.all(evaluate_P5(*points.T) > 0)


def test_sos_identities_hold():
    rng = make_rng(5)
    x, t = rng.uniform(-1.5, 1.5, size=(2, 64))
    for identity in sos_identities():
        lhs, rhs = identity.lhs(x, t), identity.rhs(x, t)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


def test_chain_closes_on_random_points():
    rng = make_rng(7)
    summary = chain_consistency([random_chain_point(rng) for _ in range(20)])
    assert summary["points"] == 20
    assert summary["max_relative_mismatch"] <= 1e-6
    assert summary["reference_ratio"] == pytest.approx(1.0, rel=1e-6)


def test_chain_single_point():
    result = chain_check_K2(2.0, 1.0, 0.3, 0.4, 0.1)
    assert result.lhs > 0
    assert result.relative_mismatch <= 1e-6


def test_chain_domain_errors():
    with pytest.raises(ChainDomainError):
        chain_check_K2(0.5, 0.3, 0.2, 0.4, 0.1)
    with pytest.raises(ChainDomainError):
        chain_check_K2(2.0, 3.0, 0.2, 0.4, 0.1)
    with pytest.raises(ChainDomainError):
        chain_check_K2(2.0, 1.0, 1.0, 0.4, 0.1)
    with pytest.raises(ChainDomainError):
        chain_check_K2(2.0, 1.0, 0.2, 0.4, 0.0)
    with pytest.raises(ChainDomainError):
        chain_check_K2(2.0, 1.0, 0.2, 0.4, 0.5)


def test_k2_gram_builder():
    G = k2_gram(2.0, 1.0, 0.25)
    np.testing.assert_allclose(G.G, [[4.0, 0.5], [0.5, 1.0]])
