# core/selection.py
"""
벌점 pen(N,M), 차원 선택 M̂(ρ), 슬로프 휴리스틱 보정 (기울기 적합, 차원 점프)
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .errors import CalibrationFailed, NoJump, ValidationError

logger = logging.getLogger(__name__)

RHO_GRID_SIZE = 200
RHO_GRID_BOUNDS = (1e-3, 10.0)
RHO_GRID_LIMITS = (1e-9, 1e9)
SLOPE_MIN_POINTS = 4
SLOPE_R2_TARGET = 0.99
M_MAX_CAP = 50


class CalibrationMethod(str, Enum):
    SLOPE_FIT = 'slope'
    DIMENSION_JUMP = 'jump'


@dataclass(frozen=True, eq=False)
class SelectionTrace:
    """(M, γ_N(ĝ_M)) 기록"""
    N: int
    Ms: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        Ms = np.asarray(self.Ms, dtype=np.int64)
        gammas = np.asarray(self.gammas, dtype=float)
        if Ms.ndim != 1 or Ms.shape != gammas.shape or Ms.size == 0:
            raise ValidationError("선택 기록은 같은 길이의 비어 있지 않은 M, γ 열이어야 합니다")
        if np.any(np.diff(Ms) <= 0):
            raise ValidationError("선택 기록의 M은 순증가해야 합니다")
        if not np.all(np.isfinite(gammas)):
            raise ValidationError("선택 기록의 γ 값은 유한해야 합니다")
        if self.N < 2:
            raise ValidationError(f"표본 수 N은 2 이상이어야 합니다: {self.N}")
        Ms.setflags(write=False)
        gammas.setflags(write=False)
        object.__setattr__(self, 'Ms', Ms)
        object.__setattr__(self, 'gammas', gammas)

    @property
    def records(self):
        return list(zip(self.Ms.tolist(), self.gammas.tolist()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'M': self.Ms, 'gamma': self.gammas})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, N: int) -> 'SelectionTrace':
        missing = {'M', 'gamma'} - set(frame.columns)
        if missing:
            raise ValidationError(f"선택 기록 CSV에 필수 열이 없습니다: {', '.join(sorted(missing))}")
        ordered = frame.sort_values('M')
        return cls(N, ordered['M'].to_numpy(), ordered['gamma'].to_numpy())


@dataclass(frozen=True)
class CalibrationResult:
    rho_hat: float
    M_hat: int
    method: CalibrationMethod
    diagnostics: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {"rho_hat": self.rho_hat, "M_hat": self.M_hat, "method": self.method.value,
                "diagnostics": self.diagnostics}


def penalty(N: int, M, rho: float):
    """pen(N,M) = ρ M log N / N"""
    if N < 2:
        raise ValidationError(f"N은 2 이상이어야 합니다: {N}")
    if np.any(np.asarray(M) < 1):
        raise ValidationError(f"M은 1 이상이어야 합니다: {M}")
    if rho < 0:
        raise ValidationError(f"ρ는 음수가 될 수 없습니다: {rho}")
    value = rho * np.asarray(M, dtype=float) * math.log(N) / N
    return float(value) if np.ndim(M) == 0 else value


def _selected_indices(trace: SelectionTrace, rhos: np.ndarray) -> np.ndarray:
    """각 ρ에 대한 argmin 인덱스 (동률이면 작은 M)"""
    slope = trace.Ms.astype(float) * math.log(trace.N) / trace.N
    criterion = trace.gammas[None, :] + np.asarray(rhos, dtype=float)[:, None] * slope[None, :]
    return np.argmin(criterion, axis=1)


def select_M(trace: SelectionTrace, rho: float) -> int:
    """M̂(ρ) ∈ argmin {γ_N(ĝ_M) + pen(N,M)}"""
    if rho < 0:
        raise ValidationError(f"ρ는 음수가 될 수 없습니다: {rho}")
    if math.isinf(rho):
        return int(trace.Ms[0])
    return int(trace.Ms[_selected_indices(trace, np.array([rho]))[0]])


def select_path(trace: SelectionTrace, rho_grid: Sequence[float]) -> np.ndarray:
    """ρ 격자 위의 M̂(ρ)"""
    return trace.Ms[_selected_indices(trace, np.asarray(rho_grid, dtype=float))]


def default_rho_grid(size: int = RHO_GRID_SIZE, bounds: Tuple[float, float] = RHO_GRID_BOUNDS) -> np.ndarray:
    return np.geomspace(bounds[0], bounds[1], size)


def adaptive_rho_grid(trace: SelectionTrace, size: int = RHO_GRID_SIZE,
                      bounds: Tuple[float, float] = RHO_GRID_BOUNDS) -> np.ndarray:
    """기본 격자를 같은 로그 간격으로 넓혀 M̂(ρ)의 모든 전환점을 포함

    M̂(ρ)는 ρ = (γ_a − γ_b) / ((b − a) log N / N), a < b 에서만 바뀐다. 격자 양 끝이
    가장 작은/큰 전환점의 2배 바깥에 오도록 기본 격자의 눈금을 이어 붙인다.
    """
    log_lo, log_hi = math.log10(bounds[0]), math.log10(bounds[1])
    step = (log_hi - log_lo) / (size - 1)
    unit = math.log(trace.N) / trace.N
    dM = trace.Ms[None, :] - trace.Ms[:, None]
    dgamma = trace.gammas[:, None] - trace.gammas[None, :]
    upper = dM > 0
    switches = dgamma[upper] / (unit * dM[upper])
    switches = switches[switches > 0]

    k_lo, k_hi = 0, size - 1
    if switches.size:
        need_lo = max(float(switches.min()) / 2.0, RHO_GRID_LIMITS[0])
        need_hi = min(float(switches.max()) * 2.0, RHO_GRID_LIMITS[1])
        k_lo = min(k_lo, int(math.floor((math.log10(need_lo) - log_lo) / step)))
        k_hi = max(k_hi, int(math.ceil((math.log10(need_hi) - log_lo) / step)))
    if (k_lo, k_hi) != (0, size - 1):
        logger.info(f"ρ 격자 확장: [{10 ** (log_lo + k_lo * step):.3g}, {10 ** (log_lo + k_hi * step):.3g}]")
    return 10.0 ** (log_lo + step * np.arange(k_lo, k_hi + 1))


def default_M_max(N: int) -> int:
    """min(50, ⌊(N/log N)^{1/2}⌋)"""
    return max(1, min(M_MAX_CAP, int(math.floor(math.sqrt(N / math.log(N))))))


def calibrate_dimension_jump(trace: SelectionTrace, rho_grid: Optional[Sequence[float]] = None) -> CalibrationResult:
    """M̂(ρ)의 가장 큰 하락 위치 ρ_jump에서 ρ̂ = 2ρ_jump"""
    grid = adaptive_rho_grid(trace) if rho_grid is None else np.asarray(rho_grid, dtype=float)
    if grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ValidationError("ρ 격자는 3개 이상의 증가하는 값이어야 합니다")
    path = select_path(trace, grid)
    drops = path[:-1] - path[1:]
    if drops.max() <= 0:
        raise NoJump("ρ 격자 전체에서 M̂(ρ)가 변하지 않습니다 (차원 점프 없음)", stage='calibration')

    i = int(np.argmax(drops))
    rho_jump = float(grid[i + 1])
    rho_hat = 2.0 * rho_jump
    M_hat = select_M(trace, rho_hat)
    diagnostics = {
        "rho_jump": rho_jump,
        "jump_size": int(drops[i]),
        "M_before": int(path[i]),
        "M_after": int(path[i + 1]),
    }
    logger.info(f"차원 점프 보정: ρ_jump={rho_jump:.4g}, ρ̂={rho_hat:.4g}, M̂={M_hat}")
    return CalibrationResult(rho_hat, M_hat, CalibrationMethod.DIMENSION_JUMP, diagnostics)


def _window_mask(trace: SelectionTrace, window: Tuple[int, int]) -> np.ndarray:
    lo, hi = window
    return (trace.Ms >= lo) & (trace.Ms <= hi)


def default_slope_window(trace: SelectionTrace) -> Tuple[int, int]:
    """M 상위 절반에서 시작해 R² ≥ 0.99 또는 4점이 될 때까지 아래쪽을 줄인 창"""
    count = trace.Ms.size
    if count < SLOPE_MIN_POINTS:
        raise CalibrationFailed(f"기울기 적합에는 최소 {SLOPE_MIN_POINTS}개 점이 필요합니다 (현재 {count})",
                                stage='calibration')
    start = min(count // 2, count - SLOPE_MIN_POINTS)
    while True:
        fit = stats.linregress(trace.Ms[start:], trace.gammas[start:])
        if fit.rvalue ** 2 >= SLOPE_R2_TARGET or count - start <= SLOPE_MIN_POINTS:
            break
        start += 1
    return int(trace.Ms[start]), int(trace.Ms[-1])


def calibrate_slope_fit(trace: SelectionTrace, window: Optional[Tuple[int, int]] = None) -> CalibrationResult:
    """창 안의 (M, γ_M) 최소제곱 직선 기울기에서 ρ̂ = 2|기울기|N/log N"""
    if window is None:
        window = default_slope_window(trace)
    mask = _window_mask(trace, window)
    if mask.sum() < SLOPE_MIN_POINTS:
        raise CalibrationFailed(f"기울기 적합 창 {window}에 점이 {int(mask.sum())}개뿐입니다", stage='calibration')
    fit = stats.linregress(trace.Ms[mask], trace.gammas[mask])
    if fit.slope >= 0:
        raise CalibrationFailed(f"적합된 기울기가 양수입니다 ({fit.slope:.3e}): 대비함수는 M에 대해 감소해야 합니다",
                                stage='calibration')
    rho_hat = 2.0 * abs(fit.slope) * trace.N / math.log(trace.N)
    M_hat = select_M(trace, rho_hat)
    diagnostics = {
        "window": [int(window[0]), int(window[1])],
        "slope": float(fit.slope),
        "intercept": float(fit.intercept),
        "r_squared": float(fit.rvalue ** 2),
        "points": int(mask.sum()),
    }
    logger.info(f"기울기 적합 보정: 창={window}, 기울기={fit.slope:.4g}, ρ̂={rho_hat:.4g}, M̂={M_hat}")
    return CalibrationResult(rho_hat, M_hat, CalibrationMethod.SLOPE_FIT, diagnostics)


def calibrate(trace: SelectionTrace, method: CalibrationMethod, rho_grid=None, window=None) -> CalibrationResult:
    method = CalibrationMethod(method)
    if method is CalibrationMethod.DIMENSION_JUMP:
        try:
            return calibrate_dimension_jump(trace, rho_grid)
        except NoJump as e:
            logger.warning(f"차원 점프를 찾지 못해 기울기 적합으로 대체합니다: {e}")
            result = calibrate_slope_fit(trace, window)
            return CalibrationResult(result.rho_hat, result.M_hat, result.method,
                                     {**result.diagnostics, "fallback_from": CalibrationMethod.DIMENSION_JUMP.value})
    return calibrate_slope_fit(trace, window)
