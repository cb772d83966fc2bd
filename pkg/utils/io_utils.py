# utils/io_utils.py
"""
파일 입출력 및 난수 스트림 유틸리티 함수들
"""

import os
import json
import hashlib
import logging
import tempfile
from enum import IntEnum
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ['s', 'y1', 'y2', 'y3']

PathLike = Union[str, Path]


class RngStream(IntEnum):
    """복제 안에서 용도별 substream 번호"""
    SAMPLES = 0
    OPTIMIZER = 1
    HAAR = 2
    HD_CHECK = 3  # hd-check 무작위 인스턴스, stream은 추출 번호
    HD_CHAIN = 4
    THETA = 16  # Θ 재추출 시도마다 THETA + attempt


def make_rng(seed: int, stream: int = 0, substream: int = 0) -> np.random.Generator:
    """(seed, stream, substream)에서 독립적인 Philox 스트림 생성

    같은 인자는 항상 같은 비트열을 만든다. 복제(replicate)마다 stream을,
    같은 복제 안의 용도(표본, Θ, CMA-ES)마다 substream을 다르게 준다.
    """
    if seed < 0:
        raise ValueError(f"seed는 음수가 될 수 없습니다: {seed}")
    seed_seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(substream)))
    return np.random.Generator(np.random.Philox(seed_seq))


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """임시 파일에 쓴 뒤 rename으로 교체 (부분 파일 방지)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except Exception:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    """UTF-8, 유닉스 개행으로 텍스트 원자적 저장"""
    return atomic_write_bytes(path, text.replace('\r\n', '\n').encode('utf-8'))


def atomic_write_json(path: PathLike, data: Dict) -> Path:
    """JSON 원자적 저장 (키 정렬로 같은 입력이면 같은 바이트)"""
    return atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + '\n')


def frame_to_csv_text(frame: pd.DataFrame) -> str:
    """CSV 규약('.' 소수점, ',' 구분자, 유닉스 개행) 문자열 생성"""
    return frame.to_csv(index=False, sep=',', decimal='.', lineterminator='\n', float_format='%.17g')


def atomic_write_csv(path: PathLike, frame: pd.DataFrame) -> Path:
    """DataFrame을 CSV로 원자적 저장"""
    return atomic_write_text(path, frame_to_csv_text(frame))


def samples_to_frame(samples: np.ndarray) -> pd.DataFrame:
    """(N,3) 삼중 관측 배열을 s,y1,y2,y3 열의 DataFrame으로 변환"""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"표본 배열은 (N,3) 형태여야 합니다: {samples.shape}")
    frame = pd.DataFrame(samples, columns=SAMPLE_COLUMNS[1:])
    frame.insert(0, 's', np.arange(1, len(samples) + 1))
    return frame


def write_samples_csv(path: PathLike, samples: np.ndarray) -> Path:
    """samples.csv 저장"""
    return atomic_write_csv(path, samples_to_frame(samples))


def read_samples_csv(path: PathLike) -> np.ndarray:
    """samples.csv를 읽어 (N,3) 배열로 반환"""
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [col for col in SAMPLE_COLUMNS[1:] if col not in frame.columns]
    if missing:
        raise ValueError(f"표본 CSV에 필수 열이 없습니다: {', '.join(missing)}")
    return frame[SAMPLE_COLUMNS[1:]].to_numpy(dtype=float)


def hash_array(values: np.ndarray) -> str:
    """배열 내용(리틀엔디안 float64)의 SHA-256 앞 16자리"""
    data = np.ascontiguousarray(np.asarray(values, dtype='<f8'))
    digest = hashlib.sha256()
    digest.update(str(data.shape).encode('ascii'))
    digest.update(data.tobytes())
    return digest.hexdigest()[:16]


def read_json(path: PathLike) -> Dict:
    """JSON 파일 읽기"""
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def resolve_path(path: Optional[PathLike], base_dir: Optional[PathLike] = None) -> Optional[Path]:
    """설정 파일 기준 상대 경로 해석"""
    if path is None:
        return None
    path = Path(path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path
