import numpy as np
import pytest

from core.errors import NonFiniteObjective, ValidationError
from core.optimizer import OptimizerConfig, StopReason, cmaes_minimize, default_population


def sphere(x):
    return float(np.sum((x - 0.5) ** 2))


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


def test_default_population():
    assert default_population(1) == 4
    assert default_population(10) == 10


def test_sphere_converges():
    outcome = cmaes_minimize(sphere, np.full(5, 2.0), OptimizerConfig(dim=5, max_evals=5000, seed=1))
    assert outcome.f_best < 1e-8
    np.testing.assert_allclose(outcome.x_best, 0.5, atol=1e-4)


def test_rosenbrock_converges():
    outcome = cmaes_minimize(rosenbrock, [-1.0, 1.0], OptimizerConfig(dim=2, sigma0=0.5, max_evals=8000, seed=2))
    assert outcome.f_best < 1e-6
    np.testing.assert_allclose(outcome.x_best, [1.0, 1.0], atol=1e-2)


def test_budget_is_respected():
    calls = []

    def counted(x):
        calls.append(1)
        return rosenbrock(x)

    outcome = cmaes_minimize(counted, [-1.0, 1.0], OptimizerConfig(dim=2, max_evals=100, seed=0))
    assert outcome.evals == len(calls) <= 100
    assert outcome.stop_reason == StopReason.BUDGET


def test_best_never_worse_than_start():
    outcome = cmaes_minimize(sphere, [0.5, 0.5], OptimizerConfig(dim=2, max_evals=60, seed=0))
    assert outcome.f_best == 0.0
    np.testing.assert_array_equal(outcome.x_best, [0.5, 0.5])


def test_same_seed_same_result():
    cfg = OptimizerConfig(dim=3, max_evals=400, seed=7)
    first = cmaes_minimize(sphere, np.zeros(3), cfg)
    second = cmaes_minimize(sphere, np.zeros(3), cfg)
    np.testing.assert_array_equal(first.x_best, second.x_best)
    assert first.f_best == second.f_best


def test_threaded_evaluation_matches_serial():
    serial = cmaes_minimize(sphere, np.zeros(3), OptimizerConfig(dim=3, max_evals=300, seed=7))
    threaded = cmaes_minimize(sphere, np.zeros(3), OptimizerConfig(dim=3, max_evals=300, seed=7, n_jobs=2))
    np.testing.assert_array_equal(serial.x_best, threaded.x_best)


def test_streams_are_independent():
    first = cmaes_minimize(sphere, np.zeros(3), OptimizerConfig(dim=3, max_evals=200, seed=7, stream=0))
    second = cmaes_minimize(sphere, np.zeros(3), OptimizerConfig(dim=3, max_evals=200, seed=7, stream=1))
    assert not np.array_equal(first.x_best, second.x_best)


def test_nonfinite_everywhere_but_start():
    start = np.zeros(2)

    def objective(x):
        return 0.0 if np.array_equal(x, start) else float('nan')

    with pytest.raises(NonFiniteObjective):
        cmaes_minimize(objective, start, OptimizerConfig(dim=2, max_evals=1000, seed=0))


def test_nonfinite_start_rejected():
    with pytest.raises(ValidationError):
        cmaes_minimize(lambda x: float('inf'), np.zeros(2), OptimizerConfig(dim=2))


def test_config_validation():
    with pytest.raises(ValidationError):
        OptimizerConfig(dim=0)
    with pytest.raises(ValidationError):
        OptimizerConfig(dim=5, max_evals=1)
    with pytest.raises(ValidationError):
        OptimizerConfig(dim=5, max_evals=3, population=6)
    with pytest.raises(ValidationError):
        OptimizerConfig(dim=2, tol_fun=0.0)
    with pytest.raises(ValidationError):
        OptimizerConfig(dim=2, scale=(1.0,))


def test_config_adapted_to_start():
    cfg = OptimizerConfig(dim=1, max_evals=500, seed=3).adapted_to(np.array([0.0, 2.0, -0.5]))
    assert cfg.dim == 3
    assert cfg.population == default_population(3)
    assert cfg.scale == (0.1, 2.0, 0.5)
    assert cfg.max_evals == 500 and cfg.seed == 3


def test_default_population_shrinks_to_budget():
    cfg = OptimizerConfig(dim=5, max_evals=3)
    assert cfg.population == 2


def test_adapted_to_small_budget_runs():
    template = OptimizerConfig(dim=1, max_evals=7, seed=0)
    cfg = template.adapted_to(np.full(6, 2.0))
    assert cfg.population == 6 < default_population(6)
    outcome = cmaes_minimize(sphere, np.full(6, 2.0), cfg)
    assert outcome.evals == 7 and outcome.generations == 1
    assert np.isfinite(outcome.f_best)
