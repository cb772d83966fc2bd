# artifact_store.py
"""
실행 산출물 저장소 (보고서 JSON, 곡선·표본 CSV, 적합 기록, 모멘트 캐시)
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from core.basis import BasisFamily
from core.contrast import FitResult
from core.moments import MomentSet, empirical_moments
from utils.data_utils import safe_json_serialize
from utils.io_utils import atomic_write_bytes, atomic_write_csv, atomic_write_json, hash_array

logger = logging.getLogger(__name__)

FIT_TRACE_COLUMNS = ['M', 'gamma', 'evals', 'seconds']
FIT_TRACE_NAME = 'fit_trace.csv'


class ArtifactStore:
    """출력 디렉터리 관리자 (모든 쓰기는 임시 파일 + rename)"""

    def __init__(self, output_dir: Union[str, Path], cache_dir: Optional[Union[str, Path]] = None,
                 n_jobs: int = 1):
        self.output_dir = Path(output_dir)
        self.cache_dir = Path(cache_dir) if cache_dir is not None else self.output_dir / 'cache'
        self.n_jobs = n_jobs
        self._fit_rows = []
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"산출물 디렉터리: {self.output_dir}, 캐시: {self.cache_dir}")

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_json(self, name: str, data: Dict) -> Path:
        """JSON 보고서 저장"""
        path = atomic_write_json(self.path(name), safe_json_serialize(data))
        logger.info(f"보고서 저장: {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = atomic_write_csv(self.path(name), frame)
        logger.info(f"CSV 저장: {path} ({len(frame)}행)")
        return path

    def append_fit_trace(self, M: int, fit: FitResult) -> Path:
        """M별 적합 기록을 fit_trace.csv에 누적 (매번 전체를 다시 씀)"""
        self._fit_rows.append({"M": int(M), "gamma": fit.gamma_value, "evals": fit.evals_used,
                               "seconds": fit.seconds})
        return atomic_write_csv(self.path(FIT_TRACE_NAME), pd.DataFrame(self._fit_rows, columns=FIT_TRACE_COLUMNS))

    def moment_cache_path(self, samples: np.ndarray, basis: BasisFamily) -> Path:
        """(데이터 해시, 기저, M)으로 정한 캐시 파일 경로"""
        return self.cache_dir / f"{hash_array(samples)}-{basis.kind.value}-{basis.M}.mom"

    def cached_moments(self, samples: np.ndarray, basis: BasisFamily) -> MomentSet:
        """캐시가 있으면 읽고, 없거나 손상되었으면 계산 후 저장"""
        path = self.moment_cache_path(samples, basis)
        if path.exists():
            try:
                mom = MomentSet.from_bytes(path.read_bytes())
                if mom.M == basis.M and mom.n_samples == len(samples):
                    logger.debug(f"모멘트 캐시 사용: {path.name}")
                    return mom
                logger.warning(f"모멘트 캐시가 요청과 맞지 않아 다시 계산합니다: {path.name}")
            except ValueError as e:
                logger.warning(f"모멘트 캐시 읽기 실패, 다시 계산합니다: {path.name} ({e})")
        mom = empirical_moments(samples, basis, n_jobs=self.n_jobs)
        atomic_write_bytes(path, mom.to_bytes())
        return mom
