import math

import numpy as np
import pytest

from core.basis import BasisFamily
from core.errors import ValidationError
from core.hd_assumption import random_histogram_coefficients
from core.hmm_model import JointModel, random_transition_matrix, sample_chain
from core.moments import MomentSet, empirical_moments, frobenius_distance, population_moments
from utils.io_utils import make_rng


def _random_model(seed, K=2, M=6, kind='histogram'):
    rng = make_rng(seed)
    return JointModel.build(random_transition_matrix(rng, K), random_histogram_coefficients(rng, M, K),
                            BasisFamily(kind, M))


def test_single_sample_histogram():
    mom = empirical_moments(np.array([[0.2, 0.7, 0.3]]), BasisFamily('histogram', 2))
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 0] = 2 ** 1.5
    np.testing.assert_allclose(mom.Mtens, expected)
    np.testing.assert_allclose(mom.L, [math.sqrt(2), 0.0])
    assert mom.n_samples == 1


def test_constant_trig_basis():
    samples = make_rng(0).random((37, 3))
    mom = empirical_moments(samples, BasisFamily('trig', 1))
    np.testing.assert_allclose(mom.L, [1.0])
    np.testing.assert_allclose(mom.Nmat, [[1.0]])
    np.testing.assert_allclose(mom.P, [[1.0]])
    np.testing.assert_allclose(mom.Mtens, [[[1.0]]])


def test_matches_direct_definition():
    samples = make_rng(1).random((50, 3))
    b = BasisFamily('trig', 5)
    phi = [b.design_matrix(samples[:, j]) for j in range(3)]
    mom = empirical_moments(samples, b, chunk_size=7)
    np.testing.assert_allclose(mom.L, phi[0].mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(mom.Nmat, phi[0].T @ phi[1] / 50, atol=1e-12)
    np.testing.assert_allclose(mom.P, phi[0].T @ phi[2] / 50, atol=1e-12)
    np.testing.assert_allclose(mom.Mtens, np.einsum('na,nb,nc->abc', *phi) / 50, atol=1e-12)


def test_sparse_and_dense_paths_agree():
    samples = make_rng(2).random((300, 3))
    b = BasisFamily('histogram', 5)
    sparse = empirical_moments(samples, b, sparse=True, chunk_size=64)
    dense = empirical_moments(samples, b, sparse=False, chunk_size=64)
    np.testing.assert_allclose(sparse.Mtens, dense.Mtens, atol=1e-12)
    np.testing.assert_allclose(sparse.Nmat, dense.Nmat, atol=1e-12)


def test_threaded_accumulation_is_bitwise_identical():
    samples = make_rng(3).random((5000, 3))
    b = BasisFamily('trig', 3)
    serial = empirical_moments(samples, b, n_jobs=1, chunk_size=256)
    threaded = empirical_moments(samples, b, n_jobs=4, chunk_size=256)
    np.testing.assert_array_equal(serial.Mtens, threaded.Mtens)


def test_merge_equals_concatenation():
    samples = make_rng(4).random((120, 3))
    b = BasisFamily('histogram', 4)
    merged = empirical_moments(samples[:70], b).merge(empirical_moments(samples[70:], b))
    whole = empirical_moments(samples, b)
    np.testing.assert_allclose(merged.Mtens, whole.Mtens, atol=1e-12)
    assert merged.n_samples == 120


def test_bytes_roundtrip_and_corruption():
    mom = empirical_moments(make_rng(5).random((10, 3)), BasisFamily('histogram', 3))
    restored = MomentSet.from_bytes(mom.to_bytes())
    np.testing.assert_array_equal(restored.Mtens, mom.Mtens)
    assert restored.n_samples == 10
    with pytest.raises(ValidationError):
        MomentSet.from_bytes(b'garbage')
    with pytest.raises(ValidationError):
        MomentSet.from_bytes(mom.to_bytes()[:-8])


def test_rejects_out_of_range_samples():
    with pytest.raises(ValidationError):
        empirical_moments(np.array([[0.1, 1.1, 0.2]]), BasisFamily('histogram', 2))
    with pytest.raises(ValidationError):
        empirical_moments(np.empty((0, 3)), BasisFamily('histogram', 2))


def test_population_rank_one_for_single_state():
    b = BasisFamily('histogram', 3)
    a = np.array([0.5, 0.7, 0.532])
    a = a / (b.integral_coeffs() @ a)
    model = JointModel.build([[1.0]], a[:, None], b)
    np.testing.assert_allclose(population_moments(model).Mtens, np.einsum('a,b,c->abc', a, a, a), atol=1e-12)


def test_population_marginalization_reproduces_Nmat():
    model = _random_model(6, K=3, M=5)
    mom = population_moments(model)
    c = model.basis.integral_coeffs()
    np.testing.assert_allclose(np.tensordot(mom.Mtens, c, axes=([2], [0])), mom.Nmat, atol=1e-12)


def test_population_P_has_rank_K():
    mom = population_moments(_random_model(7, K=3, M=6))
    singular = np.linalg.svd(mom.P, compute_uv=False)
    assert singular[2] > 1e-8 * singular[0]
    assert singular[3] < 1e-10 * singular[0]


def test_empirical_converges_to_population(two_state_spec):
    b = BasisFamily('histogram', 4)
    model = JointModel.from_spec(two_state_spec, b)
    truth = population_moments(model)
    errors = [frobenius_distance(empirical_moments(sample_chain(two_state_spec, N, 'A', seed=2), b), truth)
              for N in (1000, 100000)]
    assert errors[1] < errors[0]
    assert errors[1] < 5 * math.sqrt(4 ** 3) / math.sqrt(100000)
