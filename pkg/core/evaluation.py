# core/evaluation.py
"""
라벨 정렬, 분산·위험 지표, 전체 추정 파이프라인과 복제 실험
"""

import time
import logging
import itertools
from enum import Enum
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import integrate

from utils.data_utils import summarize_frame
from .basis import BasisFamily, BasisKind, DensityFn, bias_sq, project, valid_dimensions
from .contrast import ContrastContext, FitResult, minimize_gamma
from .errors import NPHMMError, StageError, ValidationError
from .hd_assumption import gram_matrix
from .hmm_model import HMMSpec, Scenario, sample_chain
from .moments import MomentSet, empirical_moments
from .optimizer import OptimizerConfig
from .selection import (
    CalibrationMethod, CalibrationResult, SelectionTrace, calibrate, penalty, select_M,
)
from .spectral import SpectralEstimate, spectral_estimate

logger = logging.getLogger(__name__)

MAX_ALIGN_K = 8
DENSITY_GRID_SIZE = 201
CURVE_COLUMNS = ['M', 'gamma', 'pen', 'variance_spectral', 'variance_ls', 'risk_total']

MomentProvider = Callable[[np.ndarray, BasisFamily], MomentSet]


@dataclass(frozen=True)
class AlignedComparison:
    """라벨 정렬 후 비교 (permutation[k]: 참 상태 k에 대응하는 추정 열)"""
    permutation: Tuple[int, ...]
    per_state_l2: np.ndarray
    total: float
    max_sq: float
    max_permutation: Tuple[int, ...]
    Q_error: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "permutation": list(self.permutation),
            "per_state_l2": np.asarray(self.per_state_l2).tolist(),
            "total": self.total,
            "max_sq": self.max_sq,
            "max_permutation": list(self.max_permutation),
            "Q_error": self.Q_error,
        }


def align(A_hat, A_ref, Q_hat=None, Q_ref=None) -> AlignedComparison:
    """K! 순열 전수 탐색으로 제곱 거리 합을 최소화하는 라벨 정렬

    최대값 형태(min_τ max_k)도 별도 순열로 함께 보고한다.
    """
    A_hat = np.asarray(A_hat, dtype=float)
    A_ref = np.asarray(A_ref, dtype=float)
    if A_hat.shape != A_ref.shape:
        raise ValidationError(f"계수 행렬 크기가 다릅니다: {A_hat.shape} vs {A_ref.shape}")
    K = A_ref.shape[1]
    if K > MAX_ALIGN_K:
        raise ValidationError(f"전수 정렬은 K ≤ {MAX_ALIGN_K}에서만 지원합니다: K={K}")

    # cost[j, k] = ‖Â(·,j) − A_ref(·,k)‖²
    cost = np.sum((A_hat[:, :, None] - A_ref[:, None, :]) ** 2, axis=0)
    states = np.arange(K)
    best_sum, best_max = None, None
    for perm in itertools.permutations(range(K)):
        matched = cost[list(perm), states]
        total, worst = float(matched.sum()), float(matched.max())
        if best_sum is None or total < best_sum[0]:
            best_sum = (total, perm, matched)
        if best_max is None or worst < best_max[0]:
            best_max = (worst, perm)

    total, tau, matched = best_sum
    Q_error = None
    if Q_hat is not None and Q_ref is not None:
        Q_hat = getattr(Q_hat, 'Q', Q_hat)
        Q_ref = getattr(Q_ref, 'Q', Q_ref)
        Q_error = float(np.linalg.norm(np.asarray(Q_ref) - np.asarray(Q_hat)[np.ix_(tau, tau)]))
    return AlignedComparison(tuple(int(t) for t in tau), np.sqrt(matched), total,
                             best_max[0], tuple(int(t) for t in best_max[1]), Q_error)


def true_coefficients(f_true: Sequence[DensityFn], b: BasisFamily) -> np.ndarray:
    """참 밀도들의 투영 계수 (M×K)"""
    return np.column_stack([project(f, b) for f in f_true])


def variance_term(A_hat, f_true: Sequence[DensityFn], b: BasisFamily) -> float:
    """min_τ max_k ‖f̂_{τ(k)} − f*_{M,k}‖²"""
    return align(A_hat, true_coefficients(f_true, b)).max_sq


def risk_l2(A_hat, f_true: Sequence[DensityFn], b: BasisFamily) -> np.ndarray:
    """상태별 ‖f*_k − f̂_{τ(k)}‖² = 편향² + 계수 공간 거리²"""
    comparison = align(A_hat, true_coefficients(f_true, b))
    bias = np.array([bias_sq(f, b) for f in f_true])
    return bias + np.asarray(comparison.per_state_l2) ** 2


def clip_density_coefficients(b: BasisFamily, coeffs, grid_size: int = DENSITY_GRID_SIZE) -> Tuple[np.ndarray, np.ndarray]:
    """표시용: 격자 위 밀도를 0 아래에서 자르고 적분 1로 재정규화 (최적화에는 쓰지 않음)"""
    grid = np.linspace(0.0, 1.0, grid_size)
    values = np.clip(b.design_matrix(grid) @ np.asarray(coeffs, dtype=float), 0.0, None)
    mass = integrate.trapezoid(values, grid)
    if mass <= 0:
        logger.warning("잘라낸 밀도의 질량이 0입니다. 재정규화를 건너뜁니다")
        return grid, values
    return grid, values / mass


def density_curves(b: BasisFamily, A: np.ndarray, clip: bool = False,
                   grid_size: int = DENSITY_GRID_SIZE) -> Dict[str, List[float]]:
    """추정 밀도들을 격자 위에서 평가 (열 순서 유지)"""
    grid = np.linspace(0.0, 1.0, grid_size)
    curves = {"y": grid.tolist()}
    for k in range(A.shape[1]):
        if clip:
            _, values = clip_density_coefficients(b, A[:, k], grid_size)
        else:
            values = b.design_matrix(grid) @ A[:, k]
        curves[f"f{k + 1}"] = np.asarray(values).tolist()
    return curves


# --- 차원별 적합 ---

@dataclass(frozen=True, eq=False)
class DimensionFit:
    """한 M에서의 모멘트, 스펙트럴 추정, 최소제곱 적합과 지표"""
    basis: BasisFamily
    spectral: SpectralEstimate
    fit: FitResult
    metrics: Dict[str, float]


def _run_stage(stage: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except NPHMMError as e:
        if isinstance(e, StageError):
            raise
        logger.error(f"[{stage}] 단계 실패: {e}")
        raise StageError(stage, e) from e


def fit_dimension(samples: np.ndarray, spec: HMMSpec, basis: BasisFamily, seed: int, stream: int = 0,
                  optimizer: Optional[OptimizerConfig] = None,
                  moment_provider: Optional[MomentProvider] = None) -> DimensionFit:
    """모멘트, 스펙트럴 추정 후 그 점에서 γ_N 최소화"""
    label = f"M={basis.M}"
    provider = moment_provider or empirical_moments
    mom = _run_stage(f"moments[{label}]", provider, samples, basis)
    estimate = _run_stage(f"spectral[{label}]", spectral_estimate, mom, spec.K, seed, stream)
    ctx = _run_stage(f"fit[{label}]", ContrastContext.build, mom, estimate.Q_hat, basis)
    fit = _run_stage(f"fit[{label}]", minimize_gamma, ctx, estimate.O_hat, optimizer)

    A_true = _run_stage(f"metrics[{label}]", true_coefficients, spec.emissions, basis)
    bias = np.array([bias_sq(f, basis) for f in spec.emissions])
    spectral_cmp = align(estimate.O_hat, A_true, estimate.Q_hat, spec.Q)
    ls_cmp = align(fit.A_hat, A_true)
    metrics = {
        "M": basis.M,
        "gamma": fit.gamma_value,
        "variance_spectral": spectral_cmp.max_sq,
        "variance_ls": ls_cmp.max_sq,
        "risk_spectral": float(np.sum(bias + spectral_cmp.per_state_l2 ** 2)),
        "risk_total": float(np.sum(bias + ls_cmp.per_state_l2 ** 2)),
        "Q_error_spectral": spectral_cmp.Q_error,
        "evals": fit.evals_used,
    }
    logger.info(f"M={basis.M} 적합 완료: γ={fit.gamma_value:.6g}, 분산(스펙트럴/LS)="
                f"{spectral_cmp.max_sq:.3e}/{ls_cmp.max_sq:.3e}, 평가 {fit.evals_used}회")
    return DimensionFit(basis, estimate, fit, metrics)


def _fit_all(samples, spec, kind, Ms, seed, stream, optimizer, moment_provider, n_jobs) -> List[DimensionFit]:
    jobs = [BasisFamily(kind, M) for M in Ms]
    if n_jobs == 1 or len(jobs) == 1:
        return [fit_dimension(samples, spec, b, seed, stream, optimizer, moment_provider) for b in jobs]
    return Parallel(n_jobs=n_jobs)(
        delayed(fit_dimension)(samples, spec, b, seed, stream, optimizer, moment_provider) for b in jobs
    )


# --- 파이프라인 ---

@dataclass(frozen=True, eq=False)
class PipelineReport:
    """파이프라인 결과: 선택 기록, 보정, M̂에서의 두 추정량 비교"""
    N: int
    K: int
    scenario: Scenario
    basis_kind: BasisKind
    seed: int
    trace: SelectionTrace
    calibration: CalibrationResult
    curves: pd.DataFrame
    spectral_at_M_hat: SpectralEstimate
    fit_at_M_hat: FitResult
    spectral_comparison: AlignedComparison
    ls_comparison: AlignedComparison
    densities: Dict
    diagnostics: Dict = field(default_factory=dict)
    resolved_config: Dict = field(default_factory=dict)

    @property
    def M_hat(self) -> int:
        return self.calibration.M_hat

    def to_dict(self) -> Dict:
        return {
            "N": self.N,
            "K": self.K,
            "scenario": self.scenario.value,
            "basis": self.basis_kind.value,
            "seed": self.seed,
            "M_hat": self.M_hat,
            "calibration": self.calibration.to_dict(),
            "trace": {"M": self.trace.Ms.tolist(), "gamma": self.trace.gammas.tolist()},
            "spectral": {"estimate": self.spectral_at_M_hat.to_dict(),
                         "comparison": self.spectral_comparison.to_dict()},
            "least_squares": {"fit": {k: v for k, v in self.fit_at_M_hat.to_dict().items() if k != 'seconds'},
                              "comparison": self.ls_comparison.to_dict()},
            "densities": self.densities,
            "diagnostics": self.diagnostics,
            "resolved_config": self.resolved_config,
        }


def run_pipeline(spec: HMMSpec, N: int, scenario, b_kind, M_max: int, seed: int, *,
                 calibration=CalibrationMethod.DIMENSION_JUMP, rho: Optional[float] = None,
                 optimizer: Optional[OptimizerConfig] = None, stream: int = 0, n_jobs: int = 1,
                 samples: Optional[np.ndarray] = None, moment_provider: Optional[MomentProvider] = None,
                 fit_recorder: Optional[Callable[[int, FitResult], None]] = None,
                 clip_display: bool = False, rho_grid=None, slope_window=None,
                 resolved_config: Optional[Dict] = None) -> PipelineReport:
    """표본 → M별 (모멘트, 스펙트럴, γ_N 최소화) → 보정 → M̂ 선택 → 보고"""
    scenario = Scenario(scenario)
    kind = BasisKind(b_kind)
    started = time.perf_counter()

    if samples is None:
        samples = _run_stage('sampling', sample_chain, spec, N, scenario, seed, stream)
    samples = np.asarray(samples, dtype=float)
    N = samples.shape[0]

    Ms = valid_dimensions(kind, spec.K, M_max)
    if len(Ms) < 2:
        raise StageError('selection', ValidationError(
            f"M_max={M_max}에서 가능한 차원이 {len(Ms)}개뿐입니다 (K={spec.K}, 선택에는 2개 이상 필요)"))
    logger.info(f"파이프라인 시작: N={N}, K={spec.K}, 기저={kind.value}, M={Ms[0]}..{Ms[-1]}, 시드={seed}")

    fits = _fit_all(samples, spec, kind, Ms, seed, stream, optimizer, moment_provider, n_jobs)
    if fit_recorder is not None:
        for item in fits:
            fit_recorder(item.basis.M, item.fit)

    trace = _run_stage('selection', SelectionTrace, N, Ms, [item.fit.gamma_value for item in fits])
    if rho is not None:
        result = CalibrationResult(float(rho), select_M(trace, rho), CalibrationMethod(calibration),
                                   {"rho_override": float(rho)})
    else:
        result = _run_stage('calibration', calibrate, trace, calibration, rho_grid, slope_window)

    curves = pd.DataFrame([item.metrics for item in fits])
    curves['pen'] = penalty(N, curves['M'].to_numpy(), result.rho_hat)
    curves = curves[CURVE_COLUMNS + [c for c in curves.columns if c not in CURVE_COLUMNS]]

    chosen = next(item for item in fits if item.basis.M == result.M_hat)
    A_true = true_coefficients(spec.emissions, chosen.basis)
    spectral_cmp = align(chosen.spectral.O_hat, A_true, chosen.spectral.Q_hat, spec.Q)
    ls_cmp = align(chosen.fit.A_hat, A_true, chosen.spectral.Q_hat, spec.Q)

    densities = {
        "least_squares": density_curves(chosen.basis, chosen.fit.A_hat[:, list(ls_cmp.permutation)], clip_display),
        "spectral": density_curves(chosen.basis, chosen.spectral.O_hat[:, list(spectral_cmp.permutation)],
                                   clip_display),
        "truth": {"y": np.linspace(0, 1, DENSITY_GRID_SIZE).tolist(),
                  **{f"f{k + 1}": f(np.linspace(0, 1, DENSITY_GRID_SIZE)).tolist()
                     for k, f in enumerate(spec.emissions)}},
        "clipped": bool(clip_display),
    }
    diagnostics = {"gram_min_eigenvalue": gram_matrix(chosen.fit.A_hat).min_eigenvalue()}
    logger.info(f"파이프라인 완료 ({time.perf_counter() - started:.1f}초): M̂={result.M_hat}, ρ̂={result.rho_hat:.4g}, "
                f"LS 분산={ls_cmp.max_sq:.3e}, 스펙트럴 분산={spectral_cmp.max_sq:.3e}")
    return PipelineReport(N, spec.K, scenario, kind, seed, trace, result, curves, chosen.spectral,
                          chosen.fit, spectral_cmp, ls_cmp, densities, diagnostics, dict(resolved_config or {}))


# --- 복제 실험 ---

def replicate_curves(spec: HMMSpec, N: int, scenario, b_kind, Ms: Sequence[int], seed: int, replicate: int = 0,
                     optimizer: Optional[OptimizerConfig] = None) -> pd.DataFrame:
    """복제 하나: 고정된 M들에서 두 추정량의 지표 (보정 없이)"""
    samples = _run_stage('sampling', sample_chain, spec, N, scenario, seed, replicate)
    rows = []
    for M in Ms:
        item = fit_dimension(samples, spec, BasisFamily(b_kind, M), seed, replicate, optimizer)
        rows.append({"replicate": replicate, "seed": seed, "N": N, **item.metrics})
    return pd.DataFrame(rows)


def run_replicates(spec: HMMSpec, Ns: Sequence[int], scenario, b_kind, Ms: Sequence[int], replicates: int,
                   seed: int, optimizer: Optional[OptimizerConfig] = None, n_jobs: int = 1) -> pd.DataFrame:
    """복제 i는 시드 seed+i와 독립 스트림 i를 사용한다"""
    if replicates < 1:
        raise ValidationError(f"복제 수는 1 이상이어야 합니다: {replicates}")
    jobs = [(N, i) for N in Ns for i in range(replicates)]
    logger.info(f"복제 실험 시작: N={list(Ns)}, M={list(Ms)}, 복제 {replicates}회")
    frames = Parallel(n_jobs=n_jobs)(
        delayed(replicate_curves)(spec, N, scenario, b_kind, Ms, seed + i, i, optimizer) for N, i in jobs
    )
    return pd.concat(frames, ignore_index=True)


def summarize_replicates(frame: pd.DataFrame,
                         metrics: Sequence[str] = ('variance_spectral', 'variance_ls', 'risk_total',
                                                   'Q_error_spectral')) -> pd.DataFrame:
    """(N, M)별 중앙값과 사분위수"""
    present = [m for m in metrics if m in frame.columns]
    return summarize_frame(frame, ['N', 'M'], present)


class BenchCheck(str, Enum):
    VARIANCE = 'variance'
    RATE = 'rate'
    RISK = 'risk'


RATE_RATIO_BAND = (0.3, 0.8)


def acceptance_check(summary: pd.DataFrame, check) -> Dict:
    """복제 요약표에 대한 수용 판정

    variance: 모든 (N, M)에서 LS 분산 중앙값 < 스펙트럴 분산 중앙값
    rate: 가장 큰 N과 가장 작은 N의 스펙트럴 Q 오차 중앙값 비율이 밴드 안
    risk: 모든 M에서 가장 큰 N의 위험 중앙값 < 가장 작은 N의 위험 중앙값
    """
    check = BenchCheck(check)
    if check is BenchCheck.VARIANCE:
        better = summary['variance_ls_median'] < summary['variance_spectral_median']
        return {"check": check.value, "passed": bool(better.all()),
                "failing_M": summary.loc[~better, 'M'].tolist()}

    Ns = sorted(summary['N'].unique())
    if len(Ns) < 2:
        raise ValidationError(f"{check.value} 판정에는 서로 다른 N이 둘 이상 필요합니다")
    small = summary[summary['N'] == Ns[0]].set_index('M')
    large = summary[summary['N'] == Ns[-1]].set_index('M')
    if check is BenchCheck.RATE:
        ratios = large['Q_error_spectral_median'] / small['Q_error_spectral_median']
        lo, hi = RATE_RATIO_BAND
        return {"check": check.value, "passed": bool(((ratios >= lo) & (ratios <= hi)).all()),
                "ratios": {int(M): float(r) for M, r in ratios.items()}, "band": [lo, hi]}
    decreased = large['risk_total_median'] < small['risk_total_median']
    return {"check": check.value, "passed": bool(decreased.all()),
            "failing_M": [int(M) for M in decreased.index[~decreased.to_numpy()]]}
