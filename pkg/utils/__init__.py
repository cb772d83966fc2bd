# utils/__init__.py
"""
통합 유틸리티 패키지 초기화
"""

from .data_utils import (
    safe_json_serialize,
    summarize_frame,
)

from .io_utils import (
    SAMPLE_COLUMNS,
    RngStream,
    make_rng,
    atomic_write_json,
    atomic_write_csv,
    write_samples_csv,
    read_samples_csv,
    hash_array,
)

__all__ = [
    # Data utilities
    'safe_json_serialize',
    'summarize_frame',

    # I/O utilities
    'SAMPLE_COLUMNS',
    'RngStream',
    'make_rng',
    'atomic_write_json',
    'atomic_write_csv',
    'write_samples_csv',
    'read_samples_csv',
    'hash_array',
]
