import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st
from scipy import stats

from core.basis import (
    BasisFamily, DensityFn, bias_sq, density_from_coefficients, eta3, evaluate_basis,
    inner_product, integrate, l2_norm_sq, project, quadrature_grid, valid_dimensions,
)
from core.errors import ValidationError


def test_histogram_value_inside_bin():
    assert evaluate_basis(BasisFamily('histogram', 4), 2, 0.3) == pytest.approx(2.0)


def test_histogram_right_endpoint_belongs_to_last_bin():
    b = BasisFamily('histogram', 4)
    assert evaluate_basis(b, 4, 1.0) == pytest.approx(2.0)
    assert evaluate_basis(b, 3, 1.0) == 0.0


def test_trig_constant_function():
    assert evaluate_basis(BasisFamily('trig', 3), 1, 0.7) == pytest.approx(1.0)


def test_trig_cos_and_sin_columns():
    b = BasisFamily('trig', 5)
    y = 0.1
    assert evaluate_basis(b, 2, y) == pytest.approx(math.sqrt(2) * math.cos(2 * math.pi * y))
    assert evaluate_basis(b, 3, y) == pytest.approx(math.sqrt(2) * math.sin(2 * math.pi * y))
    assert evaluate_basis(b, 4, y) == pytest.approx(math.sqrt(2) * math.cos(4 * math.pi * y))


def test_trig_requires_odd_dimension():
    with pytest.raises(ValidationError):
        BasisFamily('trig', 4)


def test_index_out_of_range():
    with pytest.raises(ValidationError):
        evaluate_basis(BasisFamily('histogram', 4), 5, 0.5)
    with pytest.raises(ValidationError):
        evaluate_basis(BasisFamily('histogram', 4), 1, 1.5)


@pytest.mark.parametrize("kind,M", [('histogram', 1), ('histogram', 7), ('trig', 1), ('trig', 9)])
def test_orthonormal_gram(kind, M):
    b = BasisFamily(kind, M)
    gram = integrate(lambda y: b.design_matrix(y)[:, :, None] * b.design_matrix(y)[:, None, :], b.breakpoints())
    np.testing.assert_allclose(gram, np.eye(M), atol=1e-10)


@given(st.integers(min_value=1, max_value=12), st.sampled_from(['histogram', 'trig']))
def test_integral_coefficients_match_quadrature(M, kind):
    if kind == 'trig' and M % 2 == 0:
        M += 1
    b = BasisFamily(kind, M)
    np.testing.assert_allclose(integrate(b.design_matrix, b.breakpoints()), b.integral_coeffs(), atol=1e-10)


def test_histogram_projection_matches_bin_integrals():
    b = BasisFamily('histogram', 16)
    F = stats.beta(2, 5).cdf
    edges = np.linspace(0, 1, 17)
    expected = 4.0 * (F(edges[1:]) - F(edges[:-1]))
    np.testing.assert_allclose(project(DensityFn.beta(2, 5), b), expected, atol=1e-9)


def test_projection_of_uniform():
    coeffs = project(DensityFn.uniform(), BasisFamily('trig', 5))
    np.testing.assert_allclose(coeffs, [1, 0, 0, 0, 0], atol=1e-12)


def test_parseval_bound():
    f = DensityFn.beta(4, 2)
    for M in (4, 8, 16):
        coeffs = project(f, BasisFamily('histogram', M))
        assert inner_product(coeffs, coeffs) <= l2_norm_sq(f) + 1e-9


def test_bias_decreases_over_dyadic_histograms():
    f = DensityFn.beta(2, 5)
    biases = [bias_sq(f, BasisFamily('histogram', M)) for M in (2, 4, 8, 16, 32)]
    assert all(later < earlier for earlier, later in zip(biases, biases[1:]))


def test_bias_identity_with_projection_norm():
    f = DensityFn.beta(2, 5)
    b = BasisFamily('histogram', 8)
    coeffs = project(f, b)
    assert bias_sq(f, b) == pytest.approx(l2_norm_sq(f) - coeffs @ coeffs, abs=1e-8)


def test_beta_integrates_to_one():
    for alpha, beta in [(2, 5), (4, 2), (1.5, 5), (6, 6), (7, 2)]:
        assert integrate(DensityFn.beta(alpha, beta)) == pytest.approx(1.0, abs=1e-5)


def test_expansion_density_roundtrip():
    b = BasisFamily('histogram', 4)
    f = density_from_coefficients(b, [0.5, 0.5, 0.5, 0.5])
    np.testing.assert_allclose(project(f, b), [0.5, 0.5, 0.5, 0.5], atol=1e-12)
    assert DensityFn.from_dict(f.to_dict()).params == f.params


def test_beta_sampling_mean():
    rng = np.random.default_rng(0)
    draws = DensityFn.beta(2, 5).sample(rng, 100000)
    assert draws.min() >= 0 and draws.max() <= 1
    assert draws.mean() == pytest.approx(2 / 7, abs=0.005)


def test_inverse_cdf_sampling_of_expansion():
    b = BasisFamily('histogram', 2)
    f = density_from_coefficients(b, [math.sqrt(2) * 0.25, math.sqrt(2) * 0.75])
    draws = f.sample(np.random.default_rng(1), 50000)
    assert np.mean(draws >= 0.5) == pytest.approx(0.75, abs=0.01)


def test_eta3_histogram():
    assert eta3(BasisFamily('histogram', 1)) == 0.0
    assert eta3(BasisFamily('histogram', 4)) == pytest.approx(math.sqrt(2) * 8)


def test_eta3_trig():
    assert eta3(BasisFamily('trig', 1)) == 0.0
    assert eta3(BasisFamily('trig', 3)) == pytest.approx(math.sqrt(72))


def test_quadrature_grid_respects_breakpoints():
    x, w = quadrature_grid([1 / 3, 2 / 3], panels=4)
    assert w.sum() == pytest.approx(1.0)
    assert not np.any(np.isclose(x, 1 / 3, atol=1e-15))


def test_valid_dimensions():
    assert valid_dimensions('histogram', 3, 6) == [3, 4, 5, 6]
    assert valid_dimensions('trig', 2, 9) == [3, 5, 7, 9]


def test_basis_dict_roundtrip():
    b = BasisFamily('trig', 7)
    assert BasisFamily.from_dict(b.to_dict()) == b


def test_sup_norm():
    assert BasisFamily('histogram', 9).sup_norm() == pytest.approx(3.0)
    assert BasisFamily('trig', 1).sup_norm() == 1.0
    assert BasisFamily('trig', 5).sup_norm() == pytest.approx(math.sqrt(2))
