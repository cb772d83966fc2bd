# utils/data_utils.py
"""
리포트 직렬화 및 복제 실험 요약 유틸리티 함수들
"""

import math
import logging
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def safe_json_serialize(obj):
    """numpy 값과 중첩 구조를 JSON 직렬화 가능한 형태로 변환"""
    try:
        if isinstance(obj, dict):
            return {str(k): safe_json_serialize(v) for k, v in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [safe_json_serialize(item) for item in obj]
        elif isinstance(obj, np.ndarray):
            return safe_json_serialize(obj.tolist())
        elif isinstance(obj, Enum):
            return obj.value
        elif isinstance(obj, (bool, np.bool_)):
            return bool(obj)
        elif isinstance(obj, (np.integer, int)):
            return int(obj)
        elif isinstance(obj, (np.floating, float)):
            value = float(obj)
            # JSON에는 NaN/inf가 없으므로 문자열로 남긴다
            return value if math.isfinite(value) else str(value)
        elif isinstance(obj, datetime):
            return obj.isoformat()
        elif isinstance(obj, Path):
            return str(obj)
        elif isinstance(obj, str) or obj is None:
            return obj
        elif hasattr(obj, 'to_dict'):
            return safe_json_serialize(obj.to_dict())
        else:
            return str(obj)
    except Exception as e:
        logger.warning(f"JSON 직렬화 오류: {e}")
        return str(obj)


def summarize_frame(frame: pd.DataFrame, by: List[str], columns: List[str]) -> pd.DataFrame:
    """그룹별 중앙값/사분위수 표 (열 이름: <col>_median, <col>_q1, <col>_q3)"""
    if frame.empty:
        return pd.DataFrame(columns=by)
    grouped = frame.groupby(by, sort=True)
    parts = []
    for col in columns:
        stats = grouped[col].quantile([0.25, 0.5, 0.75]).unstack()
        stats.columns = [f"{col}_q1", f"{col}_median", f"{col}_q3"]
        parts.append(stats)
    summary = pd.concat(parts, axis=1).reset_index()
    summary.insert(len(by), 'replicates', grouped.size().to_numpy())
    return summary
