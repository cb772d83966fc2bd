# core/optimizer.py
"""
CMA-ES 무미분 최소화기 ((μ/μ_w, λ) 재조합, CSA, rank-one + rank-μ 공분산 갱신)
"""

import math
import logging
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from joblib import Parallel, delayed

from utils.io_utils import RngStream, make_rng
from .errors import NonFiniteObjective, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_SIGMA0 = 0.3
SCALE_FLOOR = 0.1
DEFAULT_TOL_FUN = 1e-12
MIN_POPULATION = 2
STAGNATION_GENERATIONS = 50
EIGEN_FLOOR = 1e-14


class StopReason:
    TOL_FUN = 'tol_fun'
    STAGNATION = 'stagnation'
    TOL_X = 'tol_x'
    BUDGET = 'budget'


def default_population(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


@dataclass(frozen=True)
class OptimizerConfig:
    """CMA-ES 설정 (scale: 좌표별 초기 스케일, None이면 1)"""
    dim: int
    sigma0: float = DEFAULT_SIGMA0
    max_evals: int = 10000
    seed: int = 0
    population: Optional[int] = None
    tol_fun: float = DEFAULT_TOL_FUN
    stream: int = 0
    n_jobs: int = 1
    scale: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"최적화 차원은 1 이상이어야 합니다: {self.dim}")
        if self.population is None:
            population = default_population(self.dim)
            if self.max_evals < population:
                logger.warning(f"평가 예산({self.max_evals})이 기본 모집단 크기({population})보다 작아 모집단을 줄입니다")
                population = max(self.max_evals - 1, MIN_POPULATION)
            object.__setattr__(self, 'population', population)
        if self.population < MIN_POPULATION:
            raise ValidationError(f"모집단 크기는 2 이상이어야 합니다: {self.population}")
        if self.max_evals < self.population:
            raise ValidationError(f"평가 예산({self.max_evals})이 모집단 크기({self.population})보다 작습니다")
        if self.tol_fun <= 0:
            raise ValidationError(f"tol_fun은 양수여야 합니다: {self.tol_fun}")
        if self.sigma0 <= 0:
            raise ValidationError(f"sigma0은 양수여야 합니다: {self.sigma0}")
        if self.scale is not None and len(self.scale) != self.dim:
            raise ValidationError("scale 길이가 dim과 다릅니다")

    @classmethod
    def for_start(cls, x0, **kwargs) -> 'OptimizerConfig':
        """시작점 x0의 좌표별 크기(하한 0.1)를 초기 스케일로 쓰는 설정"""
        x0 = np.asarray(x0, dtype=float).ravel()
        scale = tuple(np.maximum(np.abs(x0), SCALE_FLOOR).tolist())
        return cls(dim=x0.size, scale=scale, **kwargs)

    def adapted_to(self, x0) -> 'OptimizerConfig':
        """같은 예산·시드로 시작점에 맞춘 설정"""
        x0 = np.asarray(x0, dtype=float).ravel()
        return replace(self, dim=x0.size, population=None if self.dim != x0.size else self.population,
                       scale=tuple(np.maximum(np.abs(x0), SCALE_FLOOR).tolist()))


class OptimizeOutcome(NamedTuple):
    x_best: np.ndarray
    f_best: float
    evals: int
    stop_reason: str
    generations: int


def cmaes_minimize(objective: Callable[[np.ndarray], float], x0, cfg: OptimizerConfig) -> OptimizeOutcome:
    """CMA-ES로 objective 최소화, 지금까지의 최선 점을 반환"""
    x0 = np.asarray(x0, dtype=float).ravel()
    n = cfg.dim
    if x0.size != n:
        raise ValidationError(f"시작점 차원({x0.size})이 설정 차원({n})과 다릅니다")
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise ValidationError(f"시작점에서 목적함수가 유한하지 않습니다: {f0}")

    rng = make_rng(cfg.seed, cfg.stream, RngStream.OPTIMIZER)
    lam = cfg.population
    mu = lam // 2
    weights = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights /= weights.sum()
    mueff = 1.0 / np.sum(weights ** 2)

    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

    scale = np.ones(n) if cfg.scale is None else np.asarray(cfg.scale, dtype=float)
    mean = x0.copy()
    sigma = cfg.sigma0
    C = np.diag(scale ** 2)
    B = np.eye(n)
    D = scale.copy()
    pc = np.zeros(n)
    ps = np.zeros(n)

    x_best, f_best = x0.copy(), f0
    evals = 1
    history = [f_best]
    nonfinite_streak = 0
    generation = 0
    stop_reason = StopReason.BUDGET
    parallel = Parallel(n_jobs=cfg.n_jobs, prefer='threads') if cfg.n_jobs != 1 else None

    while evals + lam <= cfg.max_evals:
        z = rng.standard_normal((lam, n))
        y = (z * D[None, :]) @ B.T
        candidates = mean[None, :] + sigma * y
        if parallel is None:
            values = np.array([objective(x) for x in candidates], dtype=float)
        else:
            values = np.array(parallel(delayed(objective)(x) for x in candidates), dtype=float)
        evals += lam
        generation += 1

        finite = np.isfinite(values)
        if not finite.any():
            nonfinite_streak += 1
            if nonfinite_streak >= lam:
                raise NonFiniteObjective(f"{nonfinite_streak}세대 연속으로 목적함수가 유한하지 않습니다",
                                         stage='optimizer')
            continue
        nonfinite_streak = 0
        values = np.where(finite, values, np.inf)

        order = np.argsort(values, kind='stable')
        if values[order[0]] < f_best:
            f_best = float(values[order[0]])
            x_best = candidates[order[0]].copy()
        history.append(f_best)

        selected = y[order[:mu]]
        y_w = weights @ selected
        mean = mean + sigma * y_w

        inv_sqrt = B @ np.diag(1.0 / D) @ B.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ y_w)
        ps_norm = np.linalg.norm(ps)
        hsig = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * generation)) / chi_n < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_w

        rank_mu = (selected * weights[:, None]).T @ selected
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
             + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (ps_norm / chi_n - 1))

        C = 0.5 * (C + C.T)
        eigvals, B = np.linalg.eigh(C)
        eigvals = np.maximum(eigvals, EIGEN_FLOOR * np.trace(C))
        D = np.sqrt(eigvals)
        C = (B * eigvals[None, :]) @ B.T

        finite_values = values[np.isfinite(values)]
        if finite_values.size == lam and finite_values.max() - finite_values.min() < cfg.tol_fun:
            stop_reason = StopReason.TOL_FUN
            break
        if len(history) > STAGNATION_GENERATIONS and history[-STAGNATION_GENERATIONS - 1] - f_best < cfg.tol_fun:
            stop_reason = StopReason.STAGNATION
            break
        if sigma * D.max() < 1e-20 * max(1.0, np.abs(mean).max()):
            stop_reason = StopReason.TOL_X
            break

    logger.debug(f"CMA-ES 종료: 사유={stop_reason}, 평가 {evals}회, f_best={f_best:.6g}")
    return OptimizeOutcome(x_best, f_best, evals, stop_reason, generation)
