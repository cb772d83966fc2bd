# core/spectral.py
"""
스펙트럴 모멘트 추정 (백색화, 동시 대각화, 전이행렬 복원)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from utils.io_utils import RngStream, make_rng
from .errors import KTooLarge, NonRealDiagonalization, NotErgodicError, SingularWhitening, ValidationError
from .hmm_model import StationaryDistribution, TransitionMatrix, stationary
from .moments import MomentSet

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
RANK_TOLERANCE = 1e-12
IMAG_TOLERANCE = 1e-8
MAX_THETA_DRAWS = 10
LAMBDA_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    """스펙트럴 추정 결과 (Ô, π̃, Q̂, π̂)와 진단 정보"""
    O_hat: np.ndarray
    pi_tilde: np.ndarray
    Q_hat: TransitionMatrix
    pi_hat: StationaryDistribution
    diagnostics: Dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.O_hat.shape[0]

    @property
    def K(self) -> int:
        return self.O_hat.shape[1]

    def to_dict(self) -> Dict:
        return {
            "O_hat": self.O_hat.tolist(),
            "pi_tilde": self.pi_tilde.tolist(),
            "Q_hat": self.Q_hat.Q.tolist(),
            "pi_hat": self.pi_hat.pi.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SpectralEstimate':
        try:
            return cls(np.asarray(data['O_hat'], dtype=float), np.asarray(data['pi_tilde'], dtype=float),
                       TransitionMatrix(data['Q_hat']), StationaryDistribution(data['pi_hat']),
                       dict(data.get('diagnostics', {})))
        except KeyError as e:
            raise ValidationError(f"스펙트럴 추정 JSON에 필드가 없습니다: {e}")


def haar_orthogonal(K: int, seed: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Haar 분포의 K×K 직교행렬 (가우스 행렬의 QR, R 대각 부호 보정)"""
    if K < 1:
        raise ValidationError(f"K는 1 이상이어야 합니다: {K}")
    if rng is None:
        rng = make_rng(0 if seed is None else seed, 0, RngStream.HAAR)
    Q, R = np.linalg.qr(rng.standard_normal((K, K)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs[None, :]


def project_simplex_rows(X) -> np.ndarray:
    """각 행을 확률 단체(simplex)에 유클리드 투영 (정렬 기반)"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValidationError(f"투영할 행렬은 2차원이어야 합니다: shape={X.shape}")
    K = X.shape[1]
    ordered = -np.sort(-X, axis=1)
    cumulative = np.cumsum(ordered, axis=1) - 1.0
    ranks = np.arange(1, K + 1)
    support = (ordered - cumulative / ranks) > 0
    count = support.sum(axis=1)
    theta = cumulative[np.arange(X.shape[0]), count - 1] / count
    projected = np.maximum(X - theta[:, None], 0.0)
    # 반올림 잔차 정리
    return projected / projected.sum(axis=1, keepdims=True)


def project_transition(X) -> TransitionMatrix:
    """Frobenius 최근접 전이행렬 (행별 단체 투영)"""
    return TransitionMatrix(project_simplex_rows(X))


def _condition(matrix: np.ndarray) -> float:
    singular = np.linalg.svd(matrix, compute_uv=False)
    return float(singular[0] / singular[-1]) if singular[-1] > 0 else float('inf')


def _solve(matrix: np.ndarray, rhs: np.ndarray, name: str, diagnostics: Dict) -> np.ndarray:
    """열 피벗 QR로 matrix⁻¹·rhs (명시적 역행렬 없음)"""
    cond = _condition(matrix)
    diagnostics.setdefault('condition_numbers', {})[name] = cond
    if cond > CONDITION_LIMIT:
        raise SingularWhitening(f"{name}의 조건수가 임계값을 넘었습니다: {cond:.3e}", stage='spectral')
    q, r, perm = scipy.linalg.qr(matrix, pivoting=True)
    z = scipy.linalg.solve_triangular(r, q.T @ rhs)
    solution = np.empty_like(z)
    solution[perm] = z
    return solution


def _solve_right(lhs: np.ndarray, matrix: np.ndarray, name: str, diagnostics: Dict) -> np.ndarray:
    """lhs·matrix⁻¹"""
    return _solve(matrix.T, lhs.T, name, diagnostics).T


def _real_eigendecomposition(C1: np.ndarray):
    eigvals, eigvecs = np.linalg.eig(C1)
    scale = np.maximum(np.abs(eigvals.real), np.finfo(float).tiny)
    if np.any(np.abs(eigvals.imag) > IMAG_TOLERANCE * scale):
        return None
    eigvals = eigvals.real
    eigvecs = eigvecs.real
    order = np.argsort(-eigvals, kind='stable')
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    eigvecs = eigvecs / np.linalg.norm(eigvecs, axis=0, keepdims=True)
    return eigvals, eigvecs


def spectral_estimate(mom: MomentSet, K: int, seed: int, stream: int = 0) -> SpectralEstimate:
    """모멘트에서 방출 계수 Ô, 전이행렬 Q̂, 정상분포 π̂ 추정"""
    M = mom.M
    if K < 1 or M < K:
        raise ValidationError(f"M ≥ K ≥ 1 이어야 합니다: M={M}, K={K}")
    diagnostics: Dict = {}

    # P̂의 상위 K개 오른쪽 특이벡터
    _, singular, vt = np.linalg.svd(mom.P)
    diagnostics['singular_values'] = singular.tolist()
    effective = int(np.sum(singular > RANK_TOLERANCE * singular[0])) if singular[0] > 0 else 0
    if effective < K:
        raise KTooLarge(f"P̂의 유효 특이값 수({effective})가 K={K}보다 작습니다", stage='spectral')
    U = vt[:K].T

    # B̂(b) = (ÛᵀP̂Û)⁻¹ Ûᵀ M̂(·,b,·) Û
    whitened = U.T @ mom.P @ U
    sliced = np.einsum('ak,abc,cl->bkl', U, mom.Mtens, U)
    B = np.stack([_solve(whitened, sliced[b], 'UtPU', diagnostics) for b in range(M)])

    # Θ 추출과 Ĉ(1) 대각화, 복소 고유값이면 재추출
    for attempt in range(MAX_THETA_DRAWS):
        theta = haar_orthogonal(K, rng=make_rng(seed, stream, RngStream.THETA + attempt))
        UTheta = U @ theta
        C = np.einsum('bk,bij->kij', UTheta, B)
        decomposition = _real_eigendecomposition(C[0])
        if decomposition is not None:
            break
        logger.warning(f"Ĉ(1)의 고유값이 실수가 아닙니다. Θ 재추출 ({attempt + 1}/{MAX_THETA_DRAWS})")
    else:
        raise NonRealDiagonalization(f"{MAX_THETA_DRAWS}번의 Θ 추출 안에서 실수 대각화에 실패했습니다",
                                     stage='spectral')
    diagnostics['theta_redraws'] = attempt
    eigvals, R = decomposition

    # Λ̂(k,k') = (R̂⁻¹Ĉ(k)R̂)(k',k'), Ô = ÛΘΛ̂
    Lam = np.empty((K, K))
    off_diagonal = 0.0
    for k in range(K):
        conjugated = _solve(R, C[k] @ R, 'R', diagnostics)
        Lam[k] = np.diag(conjugated)
        off = conjugated - np.diag(Lam[k])
        off_diagonal = max(off_diagonal, float(np.linalg.norm(off) / max(np.linalg.norm(conjugated), 1e-300)))
    diagnostics['offdiagonal_mass'] = off_diagonal
    mismatch = float(np.max(np.abs(Lam[0] - eigvals)) / max(np.max(np.abs(eigvals)), 1e-300))
    diagnostics['lambda_mismatch'] = mismatch
    if mismatch > LAMBDA_TOLERANCE:
        logger.warning(f"Λ̂(1,·)와 Ĉ(1) 고유값 불일치: {mismatch:.2e}")
    O_hat = UTheta @ Lam

    # π̃ = (ÛᵀÔ)⁻¹ÛᵀL̂
    UtO = U.T @ O_hat
    pi_tilde = _solve(UtO, U.T @ mom.L, 'UtO', diagnostics)

    # 전이행렬 집합으로 사영한 (ÛᵀÔ Diag(π̃))⁻¹ ÛᵀN̂Û (ÔᵀÛ)⁻¹
    left = _solve(UtO * pi_tilde[None, :], U.T @ mom.Nmat @ U, 'UtO_pi', diagnostics)
    raw_Q = _solve_right(left, UtO.T, 'OtU', diagnostics)
    Q_hat = project_transition(raw_Q)
    try:
        pi_hat = stationary(Q_hat, require_ergodic=False)
    except NotErgodicError as e:
        e.stage = 'spectral'
        raise

    logger.debug(f"스펙트럴 추정 완료: M={M}, K={K}, Θ 재추출 {attempt}회")
    return SpectralEstimate(O_hat, pi_tilde, Q_hat, pi_hat, diagnostics)
