# core/contrast.py
"""
경험적 최소제곱 대비함수 γ_N과 S(Q̂, M) 위의 최소화
"""

import time
import logging
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .basis import BasisFamily
from .errors import ConstraintViolation, ValidationError
from .hmm_model import (
    JointModel, StationaryDistribution, TransitionMatrix,
    joint_density, joint_norm_sq, stationary, transition_weights,
)
from .moments import MomentSet
from .optimizer import OptimizerConfig, StopReason, cmaes_minimize

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class ContrastContext:
    """고정된 (Q̂, π̂)와 모멘트로 γ_N을 평가하는 데 필요한 모든 것"""
    mom: MomentSet
    Q_fixed: TransitionMatrix
    pi_fixed: StationaryDistribution
    basis: BasisFamily
    integral_coeffs: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mom.M != self.basis.M:
            raise ValidationError(f"모멘트 차원 M={self.mom.M}이 기저 차원 M={self.basis.M}과 다릅니다")
        if self.pi_fixed.pi.shape != (self.Q_fixed.K,):
            raise ValidationError("정상분포 길이가 K와 다릅니다")
        object.__setattr__(self, 'weights', transition_weights(self.Q_fixed, self.pi_fixed))

    @property
    def K(self) -> int:
        return self.Q_fixed.K

    @property
    def M(self) -> int:
        return self.basis.M

    @classmethod
    def build(cls, mom: MomentSet, Q: TransitionMatrix, basis: BasisFamily) -> 'ContrastContext':
        Q = Q if isinstance(Q, TransitionMatrix) else TransitionMatrix(Q)
        return cls(mom, Q, stationary(Q, require_ergodic=False), basis, basis.integral_coeffs())


@dataclass(frozen=True, eq=False)
class FitResult:
    """γ_N 최소화 결과"""
    A_hat: np.ndarray
    gamma_value: float
    evals_used: int
    converged: bool
    stop_reason: str = ''
    seconds: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "A_hat": np.asarray(self.A_hat).tolist(),
            "gamma_value": float(self.gamma_value),
            "evals_used": int(self.evals_used),
            "converged": bool(self.converged),
            "stop_reason": self.stop_reason,
            "seconds": float(self.seconds),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'FitResult':
        return cls(np.asarray(data['A_hat'], dtype=float), float(data['gamma_value']), int(data['evals_used']),
                   bool(data['converged']), data.get('stop_reason', ''), float(data.get('seconds', 0.0)))


class Reparameterization(NamedTuple):
    """A(·,k) = a₀ + B z_k (a₀ = c/‖c‖², B: cᵀ 영공간의 정규직교 기저)"""
    a0: np.ndarray
    B: np.ndarray

    @property
    def free_dim(self) -> int:
        return self.B.shape[1]

    def to_params(self, A: np.ndarray) -> np.ndarray:
        return (self.B.T @ (A - self.a0[:, None])).T.ravel()

    def from_params(self, z: np.ndarray, K: int) -> np.ndarray:
        return self.a0[:, None] + self.B @ np.asarray(z, dtype=float).reshape(K, self.free_dim).T


def constrained_parameterization(c: np.ndarray) -> Reparameterization:
    c = np.asarray(c, dtype=float)
    return Reparameterization(c / (c @ c), scipy.linalg.null_space(c[None, :]))


def project_onto_constraint(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    """각 열을 초평면 cᵀa = 1에 직교 투영"""
    A = np.asarray(A, dtype=float)
    return A + np.outer(c, 1.0 - c @ A) / (c @ c)


def _check_coefficients(ctx: ContrastContext, A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (ctx.M, ctx.K):
        raise ValidationError(f"계수 행렬 크기 {A.shape}가 (M={ctx.M}, K={ctx.K})와 다릅니다")
    violation = float(np.max(np.abs(ctx.integral_coeffs @ A - 1.0)))
    if violation > CONSTRAINT_TOLERANCE:
        raise ConstraintViolation(f"방출 계수가 적분 제약 cᵀA=1을 만족하지 않습니다 (오차 {violation:.2e})")
    return A


def _gamma_value(ctx: ContrastContext, A: np.ndarray) -> float:
    G = A.T @ A
    norm_sq = np.einsum('abc,def,ad,be,cf->', ctx.weights, ctx.weights, G, G, G, optimize=True)
    # T̃(k₁,k₂,k₃) = Σ M̂(a,b,c)A(a,k₁)A(b,k₂)A(c,k₃), 모드별 축약
    contracted = np.tensordot(A, ctx.mom.Mtens, axes=([0], [0]))
    contracted = np.einsum('xbc,by->xyc', contracted, A)
    contracted = np.einsum('xyc,cz->xyz', contracted, A)
    return float(norm_sq - 2.0 * np.sum(ctx.weights * contracted))


def gamma(ctx: ContrastContext, A: np.ndarray) -> float:
    """γ_N(g^{Q̂,f}) = ‖g‖² − (2/N)Σ g(Z_s)"""
    return _gamma_value(ctx, _check_coefficients(ctx, A))


def gamma_direct(model: JointModel, samples: np.ndarray) -> float:
    """정의대로의 γ_N (점별 결합밀도 평가, 검증용)"""
    samples = np.asarray(samples, dtype=float)
    return joint_norm_sq(model) - 2.0 * float(np.mean(joint_density(model, samples)))


def minimize_gamma(ctx: ContrastContext, A_init: np.ndarray,
                   opt_cfg: Optional[OptimizerConfig] = None) -> FitResult:
    """스펙트럴 시작점에서 γ_N을 CMA-ES로 최소화 (Q̂는 고정)

    제약은 영공간 재매개화로 정확히 유지되므로 모든 후보가 cᵀA = 1을 만족한다.
    """
    started = time.perf_counter()
    A_start = project_onto_constraint(A_init, ctx.integral_coeffs)
    if A_start.shape != (ctx.M, ctx.K):
        raise ValidationError(f"시작 계수 크기 {A_start.shape}가 (M={ctx.M}, K={ctx.K})와 다릅니다")
    f_start = _gamma_value(ctx, A_start)

    param = constrained_parameterization(ctx.integral_coeffs)
    if param.free_dim == 0:
        # M = 1: 제약이 계수를 완전히 결정
        return FitResult(A_start, f_start, 1, True, StopReason.TOL_X, time.perf_counter() - started)

    K = ctx.K
    z0 = param.to_params(A_start)
    cfg = OptimizerConfig.for_start(z0) if opt_cfg is None else opt_cfg.adapted_to(z0)
    outcome = cmaes_minimize(lambda z: _gamma_value(ctx, param.from_params(z, K)), z0, cfg)

    improved = outcome.f_best < f_start
    A_hat = param.from_params(outcome.x_best, K) if improved else A_start
    gamma_value = outcome.f_best if improved else f_start
    converged = improved or outcome.stop_reason != StopReason.BUDGET
    elapsed = time.perf_counter() - started
    if not converged:
        logger.warning(f"γ_N 최소화가 예산 안에서 개선되지 않았습니다: M={ctx.M}, 평가 {outcome.evals}회")
    logger.debug(f"γ_N 최소화: M={ctx.M}, γ {f_start:.6g} → {gamma_value:.6g}, 평가 {outcome.evals}회")
    return FitResult(A_hat, gamma_value, outcome.evals, converged, outcome.stop_reason, elapsed)
