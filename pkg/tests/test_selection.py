import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
import hypothesis.strategies as st

from core.errors import CalibrationFailed, NoJump, ValidationError
from core.selection import (
    CalibrationMethod, SelectionTrace, calibrate, calibrate_dimension_jump, calibrate_slope_fit,
    adaptive_rho_grid, default_M_max, default_rho_grid, penalty, select_M, select_path,
)

N = 10000
UNIT = math.log(N) / N


def kinked_trace(s=0.5 * UNIT, first=None, M_max=20):
    """M ≥ 2에서 γ = -sM인 선형, M=1은 따로 높게 둔 기록"""
    Ms = np.arange(1, M_max + 1)
    gammas = -s * Ms.astype(float)
    gammas[0] = 10 * s if first is None else first
    return SelectionTrace(N, Ms, gammas)


def test_penalty_is_linear():
    assert penalty(N, 6, 1.5) == pytest.approx(2 * penalty(N, 3, 1.5))
    assert penalty(N, 3, 3.0) == pytest.approx(2 * penalty(N, 3, 1.5))
    assert penalty(N, 1, 1.0) == pytest.approx(UNIT)
    np.testing.assert_allclose(penalty(N, np.array([1, 2]), 1.0), [UNIT, 2 * UNIT])


def test_penalty_validation():
    with pytest.raises(ValidationError):
        penalty(1, 3, 1.0)
    with pytest.raises(ValidationError):
        penalty(N, 0, 1.0)
    with pytest.raises(ValidationError):
        penalty(N, 3, -1.0)


def test_select_extremes():
    trace = kinked_trace()
    assert select_M(trace, 0.0) == 20
    assert select_M(trace, math.inf) == 1
    with pytest.raises(ValidationError):
        select_M(trace, -0.1)


def test_ties_choose_smaller_dimension():
    trace = SelectionTrace(N, [1, 2, 3], [0.0, 0.0, 0.0])
    assert select_M(trace, 0.0) == 1


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=15))
def test_selected_dimension_is_monotone_in_rho(gammas):
    trace = SelectionTrace(N, np.arange(1, len(gammas) + 1), gammas)
    path = select_path(trace, default_rho_grid(50, (1e-2, 1e5)))
    assert np.all(np.diff(path) <= 0)


def test_dimension_jump_on_kinked_trace():
    grid = default_rho_grid()
    result = calibrate_dimension_jump(kinked_trace())
    rho_jump = grid[grid > 0.5][0]
    assert result.diagnostics["rho_jump"] == pytest.approx(rho_jump)
    assert result.diagnostics["M_before"] == 20
    assert result.diagnostics["M_after"] == 2
    assert result.rho_hat == pytest.approx(2 * rho_jump)
    assert result.M_hat == 2
    assert result.method is CalibrationMethod.DIMENSION_JUMP


def test_no_jump_when_path_is_constant():
    with pytest.raises(NoJump):
        calibrate_dimension_jump(SelectionTrace(N, [1, 2, 3], [0.0, 1.0, 2.0]))
    with pytest.raises(NoJump):
        calibrate_dimension_jump(SelectionTrace(N, [4], [-1.0]))


def test_adaptive_grid_matches_default_when_switches_fit():
    trace = kinked_trace(first=-0.25 * UNIT)
    np.testing.assert_allclose(adaptive_rho_grid(trace), default_rho_grid(), rtol=1e-12)


def test_adaptive_grid_reaches_steep_switches():
    trace = kinked_trace(s=50 * UNIT)
    with pytest.raises(NoJump):
        calibrate_dimension_jump(trace, rho_grid=default_rho_grid())
    grid = adaptive_rho_grid(trace)
    assert grid[0] == pytest.approx(default_rho_grid()[0])
    assert grid[-1] >= 2 * 600
    result = calibrate_dimension_jump(trace)
    assert 50 < result.diagnostics["rho_jump"] < 50 * 1.05
    assert result.diagnostics["M_before"] == 20
    assert result.M_hat == 2


def test_jump_calibration_falls_back_to_slope_fit():
    result = calibrate(kinked_trace(), CalibrationMethod.DIMENSION_JUMP, rho_grid=[10.0, 20.0, 30.0])
    assert result.method is CalibrationMethod.SLOPE_FIT
    assert result.diagnostics["fallback_from"] == 'jump'
    assert result.M_hat == 2


def test_jump_grid_validation():
    with pytest.raises(ValidationError):
        calibrate_dimension_jump(kinked_trace(), rho_grid=[1.0, 0.5, 2.0])


def test_slope_fit_recovers_linear_tail():
    s = 0.5 * UNIT
    result = calibrate_slope_fit(kinked_trace(s))
    assert result.rho_hat == pytest.approx(2 * s * N / math.log(N), rel=1e-9)
    assert result.diagnostics["window"] == [11, 20]
    assert result.diagnostics["r_squared"] == pytest.approx(1.0)
    assert result.M_hat == 2


def test_slope_fit_with_explicit_window():
    result = calibrate(kinked_trace(), 'slope', window=(5, 12))
    assert result.diagnostics["points"] == 8
    assert result.rho_hat == pytest.approx(1.0, rel=1e-9)


def test_slope_fit_failures():
    with pytest.raises(CalibrationFailed):
        calibrate_slope_fit(SelectionTrace(N, [1, 2, 3], [0.0, -1.0, -2.0]))
    with pytest.raises(CalibrationFailed):
        calibrate_slope_fit(SelectionTrace(N, np.arange(1, 7), np.arange(6, dtype=float)))
    with pytest.raises(CalibrationFailed):
        calibrate_slope_fit(kinked_trace(), window=(18, 25))


def test_trace_validation():
    with pytest.raises(ValidationError):
        SelectionTrace(N, [2, 1], [0.0, 0.0])
    with pytest.raises(ValidationError):
        SelectionTrace(N, [1, 2], [0.0, float('nan')])
    with pytest.raises(ValidationError):
        SelectionTrace(1, [1], [0.0])


def test_trace_frame_roundtrip():
    trace = kinked_trace(M_max=6)
    restored = SelectionTrace.from_frame(trace.to_frame().iloc[::-1], N)
    np.testing.assert_array_equal(restored.Ms, trace.Ms)
    np.testing.assert_array_equal(restored.gammas, trace.gammas)
    with pytest.raises(ValidationError):
        SelectionTrace.from_frame(pd.DataFrame({'M': [1]}), N)


def test_default_M_max():
    assert default_M_max(1000) == 12
    assert default_M_max(10 ** 7) == 50


def test_calibration_result_dict():
    payload = calibrate(kinked_trace(), CalibrationMethod.DIMENSION_JUMP).to_dict()
    assert payload["method"] == 'jump'
    assert set(payload) == {"rho_hat", "M_hat", "method", "diagnostics"}
