# config/__init__.py
"""
설정 패키지 초기화
"""

from .settings import (
    Settings,
    load_settings,
)

from .run_config import (
    RunConfig,
    DEFAULT_BUDGET,
)

__all__ = [
    # Environment settings
    'Settings',
    'load_settings',

    # Run configuration
    'RunConfig',
    'DEFAULT_BUDGET',
]
