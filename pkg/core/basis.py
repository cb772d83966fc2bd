# core/basis.py
"""
[0,1] 위의 정규직교 기저(히스토그램, 삼각함수), 밀도 투영, η₃ 계산
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import QuadratureError, ValidationError

logger = logging.getLogger(__name__)

QUAD_NODES = 64
QUAD_PANELS = 256
QUAD_TOLERANCE = 1e-6
ETA3_GRID = 64


class BasisKind(str, Enum):
    """기저 종류 (JSON 값과 동일)"""
    HISTOGRAM = 'histogram'
    TRIG = 'trig'


@dataclass(frozen=True)
class BasisFamily:
    """차원 M의 정규직교 기저 Φ_M"""
    kind: BasisKind
    M: int

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', BasisKind(self.kind))
        except ValueError:
            raise ValidationError(f"알 수 없는 기저 종류: {self.kind}")
        if int(self.M) != self.M or self.M < 1:
            raise ValidationError(f"기저 차원 M은 양의 정수여야 합니다: {self.M}")
        object.__setattr__(self, 'M', int(self.M))
        if self.kind is BasisKind.TRIG and self.M % 2 == 0:
            raise ValidationError(f"삼각함수 기저의 M은 홀수(2r+1)여야 합니다: {self.M}")

    @property
    def r(self) -> int:
        """삼각함수 기저의 최고 주파수"""
        return (self.M - 1) // 2

    def design_matrix(self, y) -> np.ndarray:
        """관측점 y (길이 n)에서 φ_1..φ_M 값을 담은 (n, M) 행렬"""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.ndim != 1:
            raise ValidationError(f"y는 1차원 배열이어야 합니다: shape={y.shape}")
        if self.kind is BasisKind.HISTOGRAM:
            design = np.zeros((y.size, self.M))
            design[np.arange(y.size), self.bin_index(y)] = math.sqrt(self.M)
            return design

        design = np.empty((y.size, self.M))
        design[:, 0] = 1.0
        if self.r:
            angles = 2.0 * np.pi * np.outer(y, np.arange(1, self.r + 1))
            design[:, 1::2] = math.sqrt(2.0) * np.cos(angles)
            design[:, 2::2] = math.sqrt(2.0) * np.sin(angles)
        return design

    def bin_index(self, y) -> np.ndarray:
        """히스토그램 구간 번호 (0부터, y=1은 마지막 구간)"""
        y = np.asarray(y, dtype=float)
        return np.clip(np.floor(y * self.M).astype(np.int64), 0, self.M - 1)

    def integral_coeffs(self) -> np.ndarray:
        """c_m = ∫φ_m"""
        if self.kind is BasisKind.HISTOGRAM:
            return np.full(self.M, 1.0 / math.sqrt(self.M))
        c = np.zeros(self.M)
        c[0] = 1.0
        return c

    def breakpoints(self) -> np.ndarray:
        """기저 함수가 불연속인 점들 (구적 패널 경계에 포함)"""
        if self.kind is BasisKind.HISTOGRAM:
            return np.linspace(0.0, 1.0, self.M + 1)
        return np.array([0.0, 1.0])

    def sup_norm(self) -> float:
        """max_m sup|φ_m|"""
        if self.kind is BasisKind.HISTOGRAM:
            return math.sqrt(self.M)
        return math.sqrt(2.0) if self.M > 1 else 1.0

    def to_dict(self) -> Dict:
        return {"basis": self.kind.value, "M": self.M}

    @classmethod
    def from_dict(cls, data: Dict) -> 'BasisFamily':
        if 'basis' not in data or 'M' not in data:
            raise ValidationError("기저 설정에는 'basis'와 'M' 필드가 필요합니다")
        return cls(data['basis'], data['M'])


def evaluate_basis(b: BasisFamily, m: int, y: float) -> float:
    """φ_m(y) (m은 1부터)"""
    if not 1 <= m <= b.M:
        raise ValidationError(f"기저 인덱스가 범위를 벗어났습니다: m={m}, M={b.M}")
    if not 0.0 <= y <= 1.0:
        raise ValidationError(f"y는 [0,1] 안에 있어야 합니다: {y}")
    return float(b.design_matrix([y])[0, m - 1])


def valid_dimensions(kind: BasisKind, K: int, M_max: int) -> List[int]:
    """스캔 가능한 모델 차원 (M ≥ K, 삼각함수는 홀수)"""
    kind = BasisKind(kind)
    dims = range(max(K, 1), M_max + 1)
    if kind is BasisKind.TRIG:
        return [M for M in dims if M % 2 == 1]
    return list(dims)


# --- 구적법 ---

@lru_cache(maxsize=8)
def _legendre_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quadrature_grid(breakpoints: Optional[Sequence[float]] = None,
                    nodes: int = QUAD_NODES,
                    panels: int = QUAD_PANELS) -> Tuple[np.ndarray, np.ndarray]:
    """복합 Gauss–Legendre 노드와 가중치

    균등 패널 경계에 breakpoints를 합쳐서, 불연속점이 패널 내부에 오지 않게 한다.
    """
    edges = np.linspace(0.0, 1.0, panels + 1)
    if breakpoints is not None:
        extra = np.asarray(breakpoints, dtype=float)
        edges = np.union1d(edges, extra[(extra >= 0.0) & (extra <= 1.0)])
    # 부동소수점 오차로 생긴 극소 패널 제거
    keep = np.concatenate([[True], np.diff(edges) > 1e-14])
    edges = edges[keep]
    edges[-1] = 1.0

    x_ref, w_ref = _legendre_rule(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = (lo + half * (x_ref[None, :] + 1.0)).ravel()
    w = (half * w_ref[None, :]).ravel()
    return x, w


def integrate(integrand: Callable[[np.ndarray], np.ndarray],
              breakpoints: Optional[Sequence[float]] = None,
              tolerance: float = QUAD_TOLERANCE) -> np.ndarray:
    """∫₀¹ integrand(y) dy (값이 (n,) 또는 (n, ...) 배열인 벡터 적분)

    64점 결과와 32점 결과의 차이를 오차 추정치로 사용한다.
    """
    fine_x, fine_w = quadrature_grid(breakpoints, nodes=QUAD_NODES)
    coarse_x, coarse_w = quadrature_grid(breakpoints, nodes=QUAD_NODES // 2)
    fine = np.tensordot(fine_w, np.asarray(integrand(fine_x), dtype=float), axes=(0, 0))
    coarse = np.tensordot(coarse_w, np.asarray(integrand(coarse_x), dtype=float), axes=(0, 0))
    error = float(np.max(np.abs(fine - coarse))) if np.size(fine) else 0.0
    if not np.all(np.isfinite(fine)) or error > tolerance:
        raise QuadratureError("구적법이 허용 오차 안에서 수렴하지 않았습니다", error, stage='quadrature')
    return fine


# --- 밀도 ---

class DensityKind(str, Enum):
    BETA = 'beta'
    EXPANSION = 'expansion'
    CUSTOM = 'custom'


@dataclass(frozen=True)
class DensityFn:
    """[0,1] 위의 밀도 함수와 그 서술자"""
    kind: DensityKind
    evaluator: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    params: Tuple = ()
    basis: Optional[BasisFamily] = None
    name: str = ''

    @classmethod
    def beta(cls, alpha: float, beta: float) -> 'DensityFn':
        if alpha <= 0 or beta <= 0:
            raise ValidationError(f"Beta 모수는 양수여야 합니다: ({alpha}, {beta})")
        law = stats.beta(alpha, beta)
        return cls(DensityKind.BETA, law.pdf, (float(alpha), float(beta)), name=f"Beta({alpha:g},{beta:g})")

    @classmethod
    def uniform(cls) -> 'DensityFn':
        return cls.beta(1.0, 1.0)

    @classmethod
    def from_coefficients(cls, b: BasisFamily, coeffs: Sequence[float]) -> 'DensityFn':
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (b.M,):
            raise ValidationError(f"계수 길이({coeffs.size})가 기저 차원 M={b.M}과 다릅니다")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        return cls(DensityKind.EXPANSION, lambda y: b.design_matrix(y) @ coeffs, tuple(coeffs), b,
                   name=f"{b.kind.value}[M={b.M}]")

    @classmethod
    def custom(cls, fn: Callable[[np.ndarray], np.ndarray], name: str = 'custom') -> 'DensityFn':
        return cls(DensityKind.CUSTOM, fn, name=name)

    def __call__(self, y) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(y, dtype=float)), dtype=float)

    @property
    def coefficients(self) -> np.ndarray:
        if self.kind is not DensityKind.EXPANSION:
            raise ValidationError(f"계수 전개 밀도가 아닙니다: {self.name}")
        return np.asarray(self.params, dtype=float)

    def breakpoints(self) -> Optional[np.ndarray]:
        return self.basis.breakpoints() if self.basis is not None else None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """밀도에서 size개 추출"""
        if self.kind is DensityKind.BETA:
            # 감마 비율: G₁/(G₁+G₂) ~ Beta(α,β)
            alpha, beta = self.params
            g1 = rng.standard_gamma(alpha, size)
            g2 = rng.standard_gamma(beta, size)
            return g1 / (g1 + g2)
        # 그 외 밀도는 구적 격자 위 누적분포의 역함수로 추출
        x, w = quadrature_grid(self.breakpoints())
        mass = np.clip(self(x), 0.0, None) * w
        cdf = np.concatenate([[0.0], np.cumsum(mass)])
        if cdf[-1] <= 0:
            raise ValidationError(f"양의 질량이 없는 밀도에서는 추출할 수 없습니다: {self.name}")
        grid = np.concatenate([[0.0], x])
        return np.interp(rng.random(size) * cdf[-1], cdf, grid)

    def to_dict(self) -> Dict:
        if self.kind is DensityKind.BETA:
            return {"beta": list(self.params)}
        if self.kind is DensityKind.EXPANSION:
            return {"coefficients": list(self.params), **self.basis.to_dict()}
        raise ValidationError(f"사용자 정의 밀도는 직렬화할 수 없습니다: {self.name}")

    @classmethod
    def from_dict(cls, data: Dict) -> 'DensityFn':
        if 'beta' in data:
            alpha, beta = data['beta']
            return cls.beta(alpha, beta)
        if data.get('uniform'):
            return cls.uniform()
        if 'coefficients' in data:
            return cls.from_coefficients(BasisFamily.from_dict(data), data['coefficients'])
        raise ValidationError(f"알 수 없는 밀도 서술자: {data}")


def _merged_breakpoints(*parts: Optional[np.ndarray]) -> Optional[np.ndarray]:
    present = [p for p in parts if p is not None]
    return np.unique(np.concatenate(present)) if present else None


def project(f: DensityFn, b: BasisFamily, tolerance: float = QUAD_TOLERANCE) -> np.ndarray:
    """(⟨f, φ_m⟩)_{m=1..M}"""
    points = _merged_breakpoints(b.breakpoints(), f.breakpoints())
    return integrate(lambda y: f(y)[:, None] * b.design_matrix(y), points, tolerance)


def inner_product(a1, a2) -> float:
    """정규직교성에 의해 Σ a1_m a2_m"""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.shape != a2.shape:
        raise ValidationError(f"계수 벡터 길이가 다릅니다: {a1.shape} vs {a2.shape}")
    return float(a1 @ a2)


def density_from_coefficients(b: BasisFamily, coeffs) -> DensityFn:
    return DensityFn.from_coefficients(b, coeffs)


def l2_norm_sq(f: DensityFn, tolerance: float = QUAD_TOLERANCE) -> float:
    """‖f‖² (구적법)"""
    return float(integrate(lambda y: f(y) ** 2, f.breakpoints(), tolerance))


def bias_sq(f: DensityFn, b: BasisFamily, tolerance: float = QUAD_TOLERANCE) -> float:
    """‖f − f_M‖² (f_M: f의 Φ_M 위 투영)"""
    coeffs = project(f, b, tolerance)
    points = _merged_breakpoints(b.breakpoints(), f.breakpoints())
    return float(integrate(lambda y: (f(y) - b.design_matrix(y) @ coeffs) ** 2, points, tolerance))


def eta3(b: BasisFamily, grid_size: int = ETA3_GRID) -> float:
    """η₃(Φ_M)

    Σ_{a,b,c}(φ_aφ_bφ_c(y) − φ_aφ_bφ_c(y'))² = ∏S(y_i) + ∏S(y'_i) − 2∏K(y_i, y'_i),
    S(y) = Σφ_a(y)², K(y,y') = Σφ_a(y)φ_a(y'). 두 기저 모두 S ≡ M이므로
    η₃² = 2M³ − 2·min ∏K 이고, min K < 0이면 최솟값은 M²·min K이다.
    """
    M = b.M
    if b.kind is BasisKind.HISTOGRAM:
        # K ∈ {0, M}: 서로 다른 구간이면 곱이 0
        return math.sqrt(2.0) * M ** 1.5 if M > 1 else 0.0

    # 삼각함수: K(y,y') = 1 + 2Σ_j cos(2πj(y−y')) (디리클레 핵)
    deltas = np.arange(grid_size) / grid_size
    kernel = 1.0 + 2.0 * np.cos(2.0 * np.pi * np.outer(deltas, np.arange(1, b.r + 1))).sum(axis=1)
    k_min = float(kernel.min())
    min_product = k_min * M ** 2 if k_min < 0 else k_min ** 3
    eta_sq = 2.0 * M ** 3 - 2.0 * min_product
    return math.sqrt(max(eta_sq, 0.0))
