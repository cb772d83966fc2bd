# core/moments.py
"""
경험적 모멘트 통계 (L̂, N̂, P̂, M̂)와 모집단 모멘트
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .basis import BasisFamily, BasisKind
from .errors import ValidationError
from .hmm_model import JointModel

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
MAGIC = b'NPHMM-M1'


@dataclass(frozen=True, eq=False)
class MomentSet:
    """관측 삼중쌍의 모멘트: L (M), Nmat (M×M), P (M×M), Mtens (M×M×M)"""
    M: int
    L: np.ndarray
    Nmat: np.ndarray
    P: np.ndarray
    Mtens: np.ndarray
    n_samples: int

    def __post_init__(self):
        M = self.M
        shapes = {'L': (M,), 'Nmat': (M, M), 'P': (M, M), 'Mtens': (M, M, M)}
        for name, shape in shapes.items():
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != shape:
                raise ValidationError(f"{name} 크기 {values.shape}가 {shape}와 다릅니다")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    def merge(self, other: 'MomentSet') -> 'MomentSet':
        """두 표본을 이어붙인 것과 같은 표본 수 가중 평균"""
        if other.M != self.M:
            raise ValidationError(f"M이 다른 모멘트는 합칠 수 없습니다: {self.M} vs {other.M}")
        total = self.n_samples + other.n_samples
        a, b = self.n_samples / total, other.n_samples / total
        return MomentSet(self.M, a * self.L + b * other.L, a * self.Nmat + b * other.Nmat,
                         a * self.P + b * other.P, a * self.Mtens + b * other.Mtens, total)

    def to_bytes(self) -> bytes:
        """매직 'NPHMM-M1', M, N 헤더 뒤에 리틀엔디안 float64 배열"""
        header = MAGIC + np.array([self.M, self.n_samples], dtype='<i8').tobytes()
        body = b''.join(np.ascontiguousarray(arr, dtype='<f8').tobytes()
                        for arr in (self.L, self.Nmat, self.P, self.Mtens))
        return header + body

    @classmethod
    def from_bytes(cls, payload: bytes) -> 'MomentSet':
        if payload[:len(MAGIC)] != MAGIC:
            raise ValidationError("모멘트 파일 형식이 아닙니다 (매직 불일치)")
        offset = len(MAGIC)
        M, n_samples = (int(v) for v in np.frombuffer(payload, dtype='<i8', count=2, offset=offset))
        offset += 16
        expected = offset + 8 * (M + 2 * M * M + M ** 3)
        if len(payload) != expected:
            raise ValidationError(f"모멘트 파일 길이가 맞지 않습니다: {len(payload)} != {expected}")

        arrays = []
        for shape in ((M,), (M, M), (M, M), (M, M, M)):
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(payload, dtype='<f8', count=count, offset=offset).reshape(shape))
            offset += 8 * count
        return cls(M, *arrays, n_samples)


def _chunk_sums(chunk: np.ndarray, b: BasisFamily, sparse: bool) -> Tuple[np.ndarray, ...]:
    """청크 하나의 합 (평균이 아님)"""
    M = b.M
    if sparse:
        i1, i2, i3 = (b.bin_index(chunk[:, j]) for j in range(3))
        scale = np.sqrt(M)
        L = np.bincount(i1, minlength=M) * scale
        Nmat = np.zeros((M, M))
        np.add.at(Nmat, (i1, i2), M)
        P = np.zeros((M, M))
        np.add.at(P, (i1, i3), M)
        Mtens = np.zeros((M, M, M))
        np.add.at(Mtens, (i1, i2, i3), M * scale)
        return L, Nmat, P, Mtens

    phi1, phi2, phi3 = (b.design_matrix(chunk[:, j]) for j in range(3))
    n = chunk.shape[0]
    pair = (phi1[:, :, None] * phi2[:, None, :]).reshape(n, M * M)
    Mtens = (pair.T @ phi3).reshape(M, M, M)
    return phi1.sum(axis=0), phi1.T @ phi2, phi1.T @ phi3, Mtens


def _tree_reduce(parts: List[Tuple[np.ndarray, ...]]) -> Tuple[np.ndarray, ...]:
    """고정된 짝짓기 순서의 pairwise 합 (스레드 수와 무관하게 같은 비트)"""
    while len(parts) > 1:
        merged = [tuple(x + y for x, y in zip(parts[i], parts[i + 1])) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def empirical_moments(samples, b: BasisFamily, n_jobs: int = 1, sparse: Optional[bool] = None,
                      chunk_size: int = CHUNK_SIZE) -> MomentSet:
    """경험적 모멘트

    히스토그램 기저는 좌표마다 기저 함수 하나만 0이 아니므로 기본적으로
    희소 누적(O(N + M³))을 사용한다.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValidationError(f"표본 배열은 (N,3) 형태여야 합니다: {samples.shape}")
    if samples.shape[0] == 0:
        raise ValidationError("표본이 비어 있습니다")
    if np.any(samples < 0) or np.any(samples > 1):
        raise ValidationError("관측값은 [0,1] 안에 있어야 합니다")
    if sparse is None:
        sparse = b.kind is BasisKind.HISTOGRAM
    elif sparse and b.kind is not BasisKind.HISTOGRAM:
        raise ValidationError("희소 누적은 히스토그램 기저에서만 가능합니다")

    N = samples.shape[0]
    chunks = [samples[i:i + chunk_size] for i in range(0, N, chunk_size)]
    if n_jobs == 1 or len(chunks) == 1:
        parts = [_chunk_sums(chunk, b, sparse) for chunk in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs, prefer='threads')(delayed(_chunk_sums)(chunk, b, sparse) for chunk in chunks)

    L, Nmat, P, Mtens = (total / N for total in _tree_reduce(parts))
    logger.debug(f"경험적 모멘트 계산 완료: N={N}, M={b.M}, 청크 {len(chunks)}개")
    return MomentSet(b.M, L, Nmat, P, Mtens, N)


def population_moments(model: JointModel) -> MomentSet:
    """모델 g^{Q,f}의 정확한 모멘트 (잡음 없는 검증용)"""
    A = model.A
    Q = model.Q.Q
    pi = model.pi.pi
    L = A @ pi
    Nmat = A @ (pi[:, None] * Q) @ A.T
    P = A @ (pi[:, None] * (Q @ Q)) @ A.T
    Mtens = np.einsum('xyz,ax,by,cz->abc', model.weights, A, A, A, optimize=True)
    return MomentSet(model.basis.M, L, Nmat, P, Mtens, 0)


def frobenius_distance(first: MomentSet, second: MomentSet) -> float:
    """‖M̂ − M‖_F"""
    return float(np.linalg.norm((first.Mtens - second.Mtens).ravel()))
