# core/hd_assumption.py
"""
행렬식 판별 가정 수치 검증: 이차형식 𝒟, 행렬식 분자 H, K=2 명시식, P₅ 다항식 체인
"""

import re
import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Tuple

import numpy as np

from .basis import integrate
from .errors import ChainDomainError, ValidationError
from .hmm_model import TransitionMatrix, stationary, transition_weights

logger = logging.getLogger(__name__)

P5_PATH = Path(__file__).parent / 'data' / 'p5_polynomial.txt'
P5_VARIABLES = ('x', 'y', 'z', 't')
SYMMETRY_TOLERANCE = 1e-10

_TERM_PATTERN = re.compile(r'([+-]?\d+)((?:[txyz]\^\d+)*)')
_FACTOR_PATTERN = re.compile(r'([txyz])\^(\d+)')


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """G(i,j) = ⟨f_i, f_j⟩ (대칭, 양의 준정부호)"""
    G: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValidationError(f"그람 행렬은 정사각 행렬이어야 합니다: shape={G.shape}")
        scale = max(float(np.max(np.abs(G))), 1.0)
        if np.max(np.abs(G - G.T)) > SYMMETRY_TOLERANCE * scale:
            raise ValidationError("그람 행렬이 대칭이 아닙니다")
        G.setflags(write=False)
        object.__setattr__(self, 'G', G)

    @property
    def K(self) -> int:
        return self.G.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.G)[0])


@dataclass(frozen=True, eq=False)
class ZeroRowSumMatrix:
    """U·1_K = 0 인 K×K 행렬"""
    U: np.ndarray

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValidationError(f"U는 정사각 행렬이어야 합니다: shape={U.shape}")
        scale = max(float(np.max(np.abs(U))), 1.0)
        if np.max(np.abs(U.sum(axis=1))) > 1e-12 * scale:
            raise ValidationError("U의 각 행의 합은 0이어야 합니다")
        U.setflags(write=False)
        object.__setattr__(self, 'U', U)

    @classmethod
    def from_free(cls, free: np.ndarray) -> 'ZeroRowSumMatrix':
        """K×(K−1) 자유 계수에서 마지막 열을 채워 생성"""
        free = np.asarray(free, dtype=float)
        return cls(np.column_stack([free, -free.sum(axis=1)]))


def _matrix(value, attr: str) -> np.ndarray:
    return getattr(value, attr) if hasattr(value, attr) else np.asarray(value, dtype=float)


def gram_matrix(A: np.ndarray) -> GramMatrix:
    """계수 행렬 A (M×K)의 그람 행렬 AᵀA"""
    A = np.asarray(A, dtype=float)
    return GramMatrix(A.T @ A)


def density_gram(emissions) -> GramMatrix:
    """방출 밀도들의 그람 행렬 (구적법, 구간 경계 병합)"""
    emissions = list(emissions)
    parts = [f.breakpoints() for f in emissions if f.breakpoints() is not None]
    points = np.unique(np.concatenate(parts)) if parts else None

    def products(y):
        F = np.column_stack([f(y) for f in emissions])
        return F[:, :, None] * F[:, None, :]

    values = integrate(products, points)
    return GramMatrix(0.5 * (values + values.T))


def quadratic_form_D(Q, G, U) -> float:
    """이차형식 𝒟(Q, G, U) (A_Q = Diag(π))"""
    Q = _matrix(Q, 'Q')
    G = _matrix(G, 'G')
    U = _matrix(U, 'U')
    AQ = np.diag(stationary(Q).pi)
    QtA = Q.T @ AQ
    AQ_Q = AQ @ Q

    UG = U @ G
    UGUt = UG @ U.T
    QGQt = Q @ G @ Q.T
    outer_G = QtA @ G @ AQ_Q
    outer_UG = QtA @ UG @ AQ_Q
    inner_UG = Q @ UG @ Q.T

    squares = (QtA @ UGUt @ AQ_Q) * G * QGQt \
        + outer_G * UGUt * QGQt \
        + outer_G * G * (Q @ UGUt @ Q.T)
    cross = outer_UG * UG.T * QGQt \
        + outer_UG * inner_UG.T * G \
        + UG * inner_UG.T * outer_G
    return float(squares.sum() + 2.0 * cross.sum())


def _free_basis(K: int) -> List[np.ndarray]:
    """자유 계수 기저 E_ij − E_iK (i = 1..K, j < K)"""
    basis = []
    for i in range(K):
        for j in range(K - 1):
            U = np.zeros((K, K))
            U[i, j] = 1.0
            U[i, K - 1] = -1.0
            basis.append(U)
    return basis


def hd_form_matrix(Q, G) -> np.ndarray:
    """𝒟의 K(K−1)×K(K−1) 대칭 행렬 (분극 항등식)"""
    basis = _free_basis(_matrix(Q, 'Q').shape[0])
    n = len(basis)
    form = np.empty((n, n))
    for p in range(n):
        form[p, p] = quadratic_form_D(Q, G, basis[p])
        for q in range(p + 1, n):
            value = 0.25 * (quadratic_form_D(Q, G, basis[p] + basis[q]) - quadratic_form_D(Q, G, basis[p] - basis[q]))
            form[p, q] = form[q, p] = value
    return form


def raw_determinant(Q, G) -> float:
    """𝒟 행렬의 행렬식 (유리식 값 그대로)"""
    return float(np.linalg.det(hd_form_matrix(Q, G)))


def stationary_denominator(Q) -> float:
    """π의 공통 분모 s = Σ_i det((I−Q)에서 i행·i열 제거) (K=2이면 p+q)"""
    Q = _matrix(Q, 'Q')
    K = Q.shape[0]
    laplacian = np.eye(K) - Q
    total = 0.0
    for i in range(K):
        keep = [j for j in range(K) if j != i]
        total += np.linalg.det(laplacian[np.ix_(keep, keep)]) if keep else 1.0
    return float(total)


def determinant_H(Q, G) -> float:
    """H(Q, G): 분모 s^{2K(K−1)}를 곱해 정리한 행렬식 분자 (부호는 행렬식과 같음)"""
    K = _matrix(Q, 'Q').shape[0]
    return raw_determinant(Q, G) * stationary_denominator(Q) ** (2 * K * (K - 1))


def second_order_term(Q, A: np.ndarray, B: np.ndarray) -> float:
    """‖g^{Q,f+h} − g^{Q,f}‖²의 2차 부분 (계수 텐서로 직접 계산)

    A, B는 f, h의 계수 행렬 (M×K). B = A·Uᵀ이면 quadratic_form_D(Q, AᵀA, U)와 같다.
    """
    Q = _matrix(Q, 'Q')
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    w = transition_weights(Q, stationary(Q).pi)
    first_order = (np.einsum('xyz,ax,by,cz->abc', w, B, A, A, optimize=True)
                   + np.einsum('xyz,ax,by,cz->abc', w, A, B, A, optimize=True)
                   + np.einsum('xyz,ax,by,cz->abc', w, A, A, B, optimize=True))
    return float(np.sum(first_order ** 2))


# --- K = 2 명시식 ---

class K2Coefficients(NamedTuple):
    D11: float
    D22: float
    D12: float


def explicit_K2_coefficients(p: float, q: float, G) -> K2Coefficients:
    """Q = [[1−p, p], [q, 1−q]]에서 𝒟 = D₁₁α² + 2D₁₂αβ + D₂₂β² 의 계수

    r₁ = (1−p)f₁ + pf₂, r₂ = qf₁ + (1−q)f₂, δ = f₁ − f₂ 의 내적으로 전개한 식.
    D₁₂의 ⟨r₁,δ⟩⟨f₁,δ⟩‖r₁‖² 항 계수는 2q이다.
    """
    if not (0 < p < 1 and 0 < q < 1):
        raise ValidationError(f"p, q는 (0,1) 안에 있어야 합니다: p={p}, q={q}")
    G = _matrix(G, 'G')
    if G.shape != (2, 2):
        raise ValidationError(f"K=2 그람 행렬이 필요합니다: shape={G.shape}")
    N1, N2, g = G[0, 0], G[1, 1], G[0, 1]

    dd = N1 + N2 - 2 * g
    r1 = (1 - p) ** 2 * N1 + p ** 2 * N2 + 2 * p * (1 - p) * g
    r2 = q ** 2 * N1 + (1 - q) ** 2 * N2 + 2 * q * (1 - q) * g
    r12 = (1 - p) * q * N1 + p * (1 - q) * N2 + ((1 - p) * (1 - q) + p * q) * g
    r1d = (1 - p) * N1 - p * N2 + (2 * p - 1) * g
    r2d = q * N1 - (1 - q) * N2 + (1 - 2 * q) * g
    f1d = N1 - g
    f2d = g - N2

    a11 = (2 * (1 - p) ** 2 * dd * N1 * r1 + r1 ** 2 * dd + 4 * p * (1 - p) * r12 * g * dd
           + 2 * p ** 2 * dd * N2 * r2 + 2 * (1 - p) ** 2 * r1d ** 2 * N1 + 2 * p ** 2 * r2d ** 2 * N2
           + 4 * p * (1 - p) * r2d * r1d * g + 4 * (1 - p) * r1d * f1d * r1 + 4 * p * r1d * f2d * r12)
    a22 = (2 * q ** 2 * dd * N1 * r1 + r2 ** 2 * dd + 4 * (1 - q) * q * r12 * g * dd
           + 2 * (1 - q) ** 2 * dd * N2 * r2 + 2 * q ** 2 * r1d ** 2 * N1 + 2 * (1 - q) ** 2 * r2d ** 2 * N2
           + 4 * q * (1 - q) * r2d * r1d * g + 4 * q * r2d * f1d * r12 + 4 * (1 - q) * r2d * f2d * r2)
    a12 = (2 * (1 - p) * q * dd * N1 * r1 + 2 * (p * q + (1 - p) * (1 - q)) * r12 * g * dd + r12 ** 2 * dd
           + 2 * p * (1 - q) * dd * N2 * r2 + 2 * q * (1 - p) * r1d ** 2 * N1 + 2 * p * (1 - q) * r2d ** 2 * N2
           + 2 * p * q * r2d * r1d * g + 2 * (1 - p) * (1 - q) * r2d * r1d * g + 2 * q * r1d * f1d * r1
           + 2 * (1 - p) * r2d * f1d * r12 + 2 * (1 - q) * r1d * f2d * r12 + 2 * p * r2d * f2d * r2)

    s2 = (p + q) ** 2
    return K2Coefficients(a11 * q ** 2 / s2, a22 * p ** 2 / s2, a12 * p * q / s2)


def explicit_K2_D(p: float, q: float, G, alpha: float, beta: float) -> float:
    """U = [[α, −α], [β, −β]]에서의 𝒟"""
    D11, D22, D12 = explicit_K2_coefficients(p, q, G)
    return D11 * alpha ** 2 + 2 * D12 * alpha * beta + D22 * beta ** 2


def k2_transition(p: float, q: float) -> TransitionMatrix:
    return TransitionMatrix.checked([[1 - p, p], [q, 1 - q]])


def k2_gram(n1: float, n2: float, a: float) -> GramMatrix:
    """‖f₁‖ = n1, ‖f₂‖ = n2, ⟨f₁,f₂⟩ = a·n1·n2"""
    cross = a * n1 * n2
    return GramMatrix([[n1 ** 2, cross], [cross, n2 ** 2]])


# --- P₅ ---

class P5Table(NamedTuple):
    coefficients: np.ndarray  # 정수 계수
    exponents: np.ndarray     # (항 수, 4), 열 순서 (x, y, z, t)


@lru_cache(maxsize=1)
def load_P5() -> P5Table:
    """P₅ 계수표 (단항식 지수 → 정수 계수)"""
    compact = re.sub(r'\s+', '', P5_PATH.read_text(encoding='utf-8'))
    coefficients, exponents = [], []
    position = 0
    for match in _TERM_PATTERN.finditer(compact):
        if match.start() != position:
            raise ValidationError(f"P₅ 데이터 파싱 실패 (위치 {position})")
        position = match.end()
        powers = dict.fromkeys(P5_VARIABLES, 0)
        for name, power in _FACTOR_PATTERN.findall(match.group(2)):
            powers[name] += int(power)
        coefficients.append(int(match.group(1)))
        exponents.append([powers[v] for v in P5_VARIABLES])
    if position != len(compact):
        raise ValidationError("P₅ 데이터 끝부분을 파싱하지 못했습니다")
    table = P5Table(np.array(coefficients, dtype=np.int64), np.array(exponents, dtype=np.int64))
    table.coefficients.setflags(write=False)
    table.exponents.setflags(write=False)
    return table


def p5_checksum() -> Tuple[int, int]:
    """(항 수, 계수 합 = P₅(1,1,1,1))"""
    table = load_P5()
    return int(table.coefficients.size), int(table.coefficients.sum())


def evaluate_P5(x, y, z, t, block: int = 4096):
    """P₅(x, y, z, t) (스칼라 또는 같은 모양의 배열)"""
    table = load_P5()
    values = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z, t)))
    shape = values[0].shape
    flat = np.stack([v.ravel() for v in values], axis=1)
    coefficients = table.coefficients.astype(float)
    degrees = np.arange(int(table.exponents.max()) + 1)
    result = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], block):
        chunk = flat[start:start + block]
        monomials = np.ones((chunk.shape[0], coefficients.size))
        for v in range(len(P5_VARIABLES)):
            powers = chunk[:, v, None] ** degrees[None, :]
            monomials *= powers[:, table.exponents[:, v]]
        result[start:start + block] = monomials @ coefficients
    result = result.reshape(shape)
    return float(result) if result.ndim == 0 else result


class SOSIdentity(NamedTuple):
    """x, t의 단항식 항등식 (좌변 = 제곱합 형태의 우변)"""
    label: str
    lhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]


def sos_identities() -> List[SOSIdentity]:
    """P₅의 음수 계수 세 항을 흡수하는 제곱합 재배열"""
    return [
        SOSIdentity(
            '-18x^12t^2',
            lambda x, t: -18 * x ** 12 * t ** 2 + 27 * x ** 12 + 1979 * x ** 12 * t ** 4,
            lambda x, t: 18 * x ** 12 + 9 * (x ** 6 - x ** 6 * t ** 2) ** 2 + 1970 * x ** 12 * t ** 4,
        ),
        SOSIdentity(
            '-108x^10t^2',
            lambda x, t: -108 * x ** 10 * t ** 2 + 1970 * x ** 12 * t ** 4 + 495 * x ** 8,
            lambda x, t: 439 * x ** 8 + 56 * (x ** 4 - x ** 6 * t ** 2) ** 2 + 1914 * x ** 12 * t ** 4
            + 4 * t ** 2 * x ** 10,
        ),
        SOSIdentity(
            '-114x^8t^2',
            lambda x, t: -114 * x ** 8 * t ** 2 + 972 * x ** 4 + 1914 * x ** 12 * t ** 4,
            lambda x, t: 915 * x ** 4 + 57 * (x ** 2 - x ** 6 * t ** 2) ** 2 + 1857 * x ** 12 * t ** 4,
        ),
    ]


# --- 체인 검사 ---

class ChainResult(NamedTuple):
    lhs: float
    rhs: float

    @property
    def relative_mismatch(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.lhs) if self.lhs else abs(self.rhs)


def _check_chain_domain(n1: float, n2: float, a: float, p: float, d: float) -> None:
    if n1 < 1:
        raise ChainDomainError(f"n1은 1 이상이어야 합니다: {n1}")
    if not 0 < n2 <= n1:
        raise ChainDomainError(f"b = n2/n1은 (0,1]에 있어야 합니다: n1={n1}, n2={n2}")
    if not 0 <= a < 1:
        raise ChainDomainError(f"a는 [0,1)에 있어야 합니다: {a}")
    if not 0 < p < 1:
        raise ChainDomainError(f"p는 (0,1)에 있어야 합니다: {p}")
    if not (p - 1 < d < 0 or 0 < d < p):
        raise ChainDomainError(f"d는 (p−1,0)∪(0,p)에 있어야 합니다: p={p}, d={d}")


def chain_check_K2(n1: float, n2: float, a: float, p: float, d: float) -> ChainResult:
    """𝒟 행렬식(좌변)과 P₅ 치환식(우변) 비교

    q = 1 − p + d, b = n2/n1 이고 x² = 1/b − 1, y² = a/(1−a), z² = p/(1−p),
    t² = (1 + d(1+z²))/(z² − d(1+z²)) 로 치환한다.
    """
    _check_chain_domain(n1, n2, a, p, d)
    q = 1 - p + d
    x2 = n1 / n2 - 1
    y2 = a / (1 - a)
    z2 = p / (1 - p)
    t2 = (1 + d * (1 + z2)) / (z2 - d * (1 + z2))
    if not t2 > 0:
        raise ChainDomainError(f"t² = {t2}가 양수가 아닙니다")

    lhs = raw_determinant(k2_transition(p, q), k2_gram(n1, n2, a))
    factor = p ** 2 * (1 - a ** 2) * d ** 2 * n1 ** 2 * n2 ** 2 * (1 + d - p) ** 2 / (1 + d) ** 4
    p5 = evaluate_P5(math.sqrt(x2), math.sqrt(y2), math.sqrt(z2), math.sqrt(t2))
    rhs = factor * n1 ** 8 * p5 / ((1 + t2) ** 4 * (1 + y2) ** 4 * (1 + z2) ** 4 * (1 + x2) ** 8)
    return ChainResult(lhs, rhs)


def random_chain_point(rng: np.random.Generator) -> Tuple[float, float, float, float, float]:
    """체인 검사 정의역의 임의 점 (n1, n2, a, p, d)"""
    n1 = rng.uniform(1.0, 3.0)
    n2 = n1 * rng.uniform(0.05, 1.0)
    a = rng.uniform(0.0, 0.95)
    p = rng.uniform(0.05, 0.95)
    while True:
        d = rng.uniform(p - 1, p)
        if abs(d) > 1e-3 and p - 1 < d < p and 1 - p + d < 0.999:
            return n1, n2, a, p, d


def chain_consistency(points) -> Dict:
    """여러 점에서 체인 검사: 최대 상대 불일치와 lhs/rhs 비율의 분산

    남은 상수배가 있더라도 첫 점의 비율로 보정한 뒤 점마다 일정해야 한다.
    """
    results = [chain_check_K2(*point) for point in points]
    ratios = np.array([r.lhs / r.rhs for r in results])
    reference = ratios[0]
    mismatches = np.array([r.relative_mismatch for r in results])
    return {
        "points": len(results),
        "max_relative_mismatch": float(mismatches.max()),
        "reference_ratio": float(reference),
        "ratio_variance": float(np.var(ratios / reference)),
    }


# --- 무작위 인스턴스 ---

def random_histogram_coefficients(rng: np.random.Generator, M: int, K: int) -> np.ndarray:
    """무작위 히스토그램 밀도 K개의 계수 (M×K, 각 열 ∫f = 1)"""
    masses = rng.dirichlet(np.ones(M), size=K).T
    return math.sqrt(M) * masses


def hd_report(Q, G) -> Dict:
    """H와 관련 진단 (K > 2에서는 보고만 한다)"""
    Q = _matrix(Q, 'Q')
    G = G if isinstance(G, GramMatrix) else GramMatrix(G)
    form = hd_form_matrix(Q, G)
    eigenvalues = np.linalg.eigvalsh(0.5 * (form + form.T))
    K = Q.shape[0]
    s = stationary_denominator(Q)
    return {
        "K": K,
        "H": float(np.linalg.det(form)) * s ** (2 * K * (K - 1)),
        "raw_determinant": float(np.linalg.det(form)),
        "scale": float(np.prod(np.abs(np.diag(form)))) * s ** (2 * K * (K - 1)),
        "form_min_eigenvalue": float(eigenvalues[0]) if eigenvalues.size else float('nan'),
        "gram_min_eigenvalue": G.min_eigenvalue(),
    }
