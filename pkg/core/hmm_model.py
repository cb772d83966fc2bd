# core/hmm_model.py
"""
HMM 모수 타입, 정상분포, 체인 표본 추출, 결합밀도 g^{Q,f}
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.io_utils import RngStream, make_rng
from .basis import BasisFamily, DensityFn, project
from .errors import NotErgodicError, ValidationError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12
STATIONARY_TOLERANCE = 1e-10
CONSTRAINT_TOLERANCE = 1e-8


class Scenario(str, Enum):
    """A: 독립 삼중 관측, B: 한 체인의 겹치는 삼중 관측"""
    A = 'A'
    B = 'B'


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


def _boolean_power_positive(support: np.ndarray, exponent: int) -> bool:
    """support 패턴의 exponent 거듭제곱이 모든 항에서 양수인지 (불리언 반복 제곱)"""
    result = np.eye(support.shape[0], dtype=np.int64)
    base = support.astype(np.int64)
    while exponent:
        if exponent & 1:
            result = np.minimum(result @ base, 1)
        base = np.minimum(base @ base, 1)
        exponent >>= 1
    return bool(np.all(result > 0))


def is_ergodic(Q) -> bool:
    """기약(irreducible)이면서 비주기(aperiodic)인지 확인

    (Q+I)^(K−1) > 0 이면 기약, 여기에 Wielandt 지수 Q^((K−1)²+1) > 0 이면 원시(primitive).
    확률 곱의 언더플로를 피하려고 지지(support) 패턴만 거듭제곱한다.
    """
    Q = np.asarray(Q, dtype=float)
    K = Q.shape[0]
    support = Q > 0
    if not _boolean_power_positive(support | np.eye(K, dtype=bool), max(K - 1, 1)):
        return False
    return _boolean_power_positive(support, (K - 1) ** 2 + 1)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """K×K 행-확률 전이행렬"""
    Q: np.ndarray
    ergodic_checked: bool = False

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
            raise ValidationError(f"전이행렬은 정사각 행렬이어야 합니다: shape={Q.shape}")
        if np.any(Q < 0) or np.any(Q > 1):
            raise ValidationError("전이행렬의 모든 항은 [0,1]에 있어야 합니다")
        row_error = np.max(np.abs(Q.sum(axis=1) - 1.0))
        if row_error > ROW_SUM_TOLERANCE:
            raise ValidationError(f"전이행렬의 행 합이 1이 아닙니다 (최대 오차 {row_error:.2e})")
        if self.ergodic_checked and not is_ergodic(Q):
            raise NotErgodicError("전이행렬이 기약·비주기가 아닙니다")
        object.__setattr__(self, 'Q', _frozen(Q))

    @classmethod
    def checked(cls, Q) -> 'TransitionMatrix':
        return cls(Q, ergodic_checked=True)

    @property
    def K(self) -> int:
        return self.Q.shape[0]

    def __eq__(self, other):
        return isinstance(other, TransitionMatrix) and np.array_equal(self.Q, other.Q)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if pi.ndim != 1 or np.any(pi < 0) or abs(pi.sum() - 1.0) > ROW_SUM_TOLERANCE:
            raise ValidationError(f"정상분포는 합이 1인 비음수 벡터여야 합니다: {pi}")
        object.__setattr__(self, 'pi', _frozen(pi))


def _as_matrix(Q: Union[TransitionMatrix, np.ndarray]) -> np.ndarray:
    return Q.Q if isinstance(Q, TransitionMatrix) else np.asarray(Q, dtype=float)


def stationary(Q: Union[TransitionMatrix, np.ndarray], require_ergodic: bool = True) -> StationaryDistribution:
    """πQ = π, Σπ = 1 의 해 ((Qᵀ−I)π = 0 에 합 제약을 붙인 선형계)

    require_ergodic=False는 추정된 Q̂처럼 0 항이 생길 수 있는 행렬에 쓰며,
    해가 유일하지 않으면 NotErgodicError를 낸다.
    """
    Q = _as_matrix(Q)
    K = Q.shape[0]
    if require_ergodic and not is_ergodic(Q):
        raise NotErgodicError("전이행렬이 기약·비주기가 아니어서 정상분포가 유일하지 않습니다")

    system = np.vstack([Q.T - np.eye(K), np.ones((1, K))])
    rhs = np.zeros(K + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < K:
        raise NotErgodicError(f"정상분포가 유일하지 않습니다 (계수 {rank} < K={K})")

    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = np.max(np.abs(pi @ Q - pi))
    if residual > STATIONARY_TOLERANCE:
        logger.warning(f"정상분포 고정점 잔차가 큽니다: {residual:.2e}")
    return StationaryDistribution(pi)


def transition_weights(Q, pi) -> np.ndarray:
    """w(k₁,k₂,k₃) = π(k₁)Q(k₁,k₂)Q(k₂,k₃)"""
    Q = _as_matrix(Q)
    pi = pi.pi if isinstance(pi, StationaryDistribution) else np.asarray(pi, dtype=float)
    return np.einsum('a,ab,bc->abc', pi, Q, Q)


@dataclass(frozen=True)
class HMMSpec:
    """참 모수 (Q, 방출 밀도 K개)"""
    Q: TransitionMatrix
    emissions: Tuple[DensityFn, ...]

    def __post_init__(self):
        object.__setattr__(self, 'emissions', tuple(self.emissions))
        if len(self.emissions) != self.Q.K:
            raise ValidationError(f"방출 밀도 수({len(self.emissions)})가 상태 수 K={self.Q.K}와 다릅니다")

    @property
    def K(self) -> int:
        return self.Q.K

    def to_dict(self) -> Dict:
        return {"Q": self.Q.Q.tolist(), "emissions": [f.to_dict() for f in self.emissions]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'HMMSpec':
        if 'Q' not in data or 'emissions' not in data:
            raise ValidationError("모델 설정에는 'Q'와 'emissions' 필드가 필요합니다")
        return cls(TransitionMatrix.checked(data['Q']), [DensityFn.from_dict(e) for e in data['emissions']])


@dataclass(frozen=True, eq=False)
class JointModel:
    """g^{Q,f}를 나타내는 (Q, π, A, 기저)"""
    Q: TransitionMatrix
    pi: StationaryDistribution
    A: np.ndarray
    basis: BasisFamily
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.shape != (self.basis.M, self.Q.K):
            raise ValidationError(f"계수 행렬 크기 {A.shape}가 (M={self.basis.M}, K={self.Q.K})와 다릅니다")
        if self.pi.pi.shape != (self.Q.K,):
            raise ValidationError("정상분포 길이가 K와 다릅니다")
        object.__setattr__(self, 'A', _frozen(A))
        object.__setattr__(self, 'weights', transition_weights(self.Q, self.pi))

    @property
    def K(self) -> int:
        return self.Q.K

    @classmethod
    def build(cls, Q, A, basis: BasisFamily, check_constraint: bool = True) -> 'JointModel':
        """정상분포를 계산하고 적분 제약을 확인해 모델 생성"""
        Q = Q if isinstance(Q, TransitionMatrix) else TransitionMatrix(Q)
        model = cls(Q, stationary(Q, require_ergodic=False), A, basis)
        if check_constraint:
            violation = constraint_violation(model.A, basis)
            if violation > CONSTRAINT_TOLERANCE:
                raise ValidationError(f"방출 계수가 적분 제약을 만족하지 않습니다 (오차 {violation:.2e})")
        return model

    @classmethod
    def from_spec(cls, spec: HMMSpec, basis: BasisFamily) -> 'JointModel':
        """참 밀도를 기저에 투영한 모델 g^{Q*, f*_M}"""
        A = np.column_stack([project(f, basis) for f in spec.emissions])
        return cls.build(spec.Q, A, basis, check_constraint=False)


def constraint_violation(A: np.ndarray, basis: BasisFamily) -> float:
    """max_k |cᵀA(·,k) − 1|"""
    return float(np.max(np.abs(basis.integral_coeffs() @ np.asarray(A, dtype=float) - 1.0)))


def permute_states(model: JointModel, tau: Sequence[int]) -> JointModel:
    """새 상태 k가 기존 상태 tau[k]가 되도록 라벨 재배치"""
    tau = np.asarray(tau, dtype=int)
    if sorted(tau.tolist()) != list(range(model.K)):
        raise ValidationError(f"유효한 순열이 아닙니다: {tau.tolist()}")
    Q = TransitionMatrix(model.Q.Q[np.ix_(tau, tau)])
    return JointModel(Q, StationaryDistribution(model.pi.pi[tau]), model.A[:, tau], model.basis)


def joint_density(model: JointModel, y) -> Union[float, np.ndarray]:
    """g^{Q,f}(y₁,y₂,y₃), y는 삼중 관측 하나 또는 (n,3) 배열"""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    points = np.atleast_2d(y)
    if points.shape[1] != 3:
        raise ValidationError(f"관측은 삼중(y₁,y₂,y₃)이어야 합니다: shape={y.shape}")
    if np.any(points < 0) or np.any(points > 1):
        raise ValidationError("관측값은 [0,1]³ 안에 있어야 합니다")
    f1, f2, f3 = (model.basis.design_matrix(points[:, i]) @ model.A for i in range(3))
    values = np.einsum('abc,na,nb,nc->n', model.weights, f1, f2, f3)
    return float(values[0]) if single else values


def joint_inner_product(first: JointModel, second: JointModel) -> float:
    """⟨g₁, g₂⟩ = Σ w₁(k)w₂(k') G(k₁,k'₁)G(k₂,k'₂)G(k₃,k'₃), G = A₁ᵀA₂"""
    if first.basis != second.basis:
        raise ValidationError("두 모델의 기저가 다릅니다")
    G = first.A.T @ second.A
    return float(np.einsum('abc,def,ad,be,cf->', first.weights, second.weights, G, G, G, optimize=True))


def joint_norm_sq(model: JointModel) -> float:
    """‖g^{Q,f}‖₂² (닫힌 형태)"""
    return joint_inner_product(model, model)


def _draw_states(cum_rows: np.ndarray, current: np.ndarray, u: np.ndarray) -> np.ndarray:
    """각 현재 상태의 누적 전이확률 행에서 다음 상태 추출"""
    nxt = (u[:, None] > cum_rows[current]).sum(axis=1)
    return np.minimum(nxt, cum_rows.shape[1] - 1)


def sample_chain(spec: HMMSpec, N: int, scenario: Union[Scenario, str], seed: int,
                 stream: int = 0, return_states: bool = False):
    """N개의 삼중 관측 (N,3) 배열 생성

    return_states=True는 검증용 디버그 모드로, 숨은 상태 경로도 함께 돌려준다
    (시나리오 A: (N,3), 시나리오 B: 길이 N+2).
    """
    scenario = Scenario(scenario)
    if N < 1:
        raise ValidationError(f"표본 수 N은 1 이상이어야 합니다: {N}")
    rng = make_rng(seed, stream, RngStream.SAMPLES)
    Q = spec.Q.Q
    pi = stationary(spec.Q).pi
    cum_rows = np.cumsum(Q, axis=1)
    cum_pi = np.cumsum(pi)

    if scenario is Scenario.A:
        states = np.empty((N, 3), dtype=np.int64)
        states[:, 0] = np.minimum(np.searchsorted(cum_pi, rng.random(N), side='right'), spec.K - 1)
        for i in (1, 2):
            states[:, i] = _draw_states(cum_rows, states[:, i - 1], rng.random(N))
    else:
        length = N + 2
        u = rng.random(length)
        states = np.empty(length, dtype=np.int64)
        states[0] = min(int(np.searchsorted(cum_pi, u[0], side='right')), spec.K - 1)
        for s in range(1, length):
            states[s] = min(int(np.searchsorted(cum_rows[states[s - 1]], u[s], side='right')), spec.K - 1)

    flat_states = states.ravel()
    observations = np.empty(flat_states.size)
    for k, density in enumerate(spec.emissions):
        mask = flat_states == k
        count = int(mask.sum())
        if count:
            observations[mask] = density.sample(rng, count)
    observations = observations.reshape(states.shape)

    if scenario is Scenario.A:
        samples = observations
    else:
        samples = np.column_stack([observations[:-2], observations[1:-1], observations[2:]])

    logger.debug(f"표본 추출 완료: N={N}, 시나리오={scenario.value}, K={spec.K}")
    if return_states:
        return samples, states
    return samples


def random_transition_matrix(rng: np.random.Generator, K: int, floor: float = 0.05) -> TransitionMatrix:
    """모든 항이 floor 이상인 임의의 에르고딕 전이행렬 (검사·실험용)"""
    raw = rng.dirichlet(np.ones(K), size=K)
    Q = floor + (1.0 - K * floor) * raw
    Q = Q / Q.sum(axis=1, keepdims=True)
    return TransitionMatrix.checked(Q)
