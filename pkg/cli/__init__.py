# cli/__init__.py
"""
명령 그룹 모듈 초기화
"""

from .common import (
    EXIT_OK,
    EXIT_VIOLATION,
    EXIT_USAGE,
    EXIT_NUMERICAL,
    run_command,
)
from .data_commands import register_data_commands, cmd_simulate, cmd_moments
from .estimation_commands import register_estimation_commands, cmd_spectral, cmd_fit, cmd_select
from .hd_commands import register_hd_commands, cmd_hd_check
from .bench_commands import register_bench_commands, cmd_bench

# (그룹 이름, 등록 함수) - app.py가 순서대로 등록
COMMAND_GROUPS = [
    ('data', register_data_commands),
    ('estimation', register_estimation_commands),
    ('hd', register_hd_commands),
    ('bench', register_bench_commands),
]

__all__ = [
    'EXIT_OK',
    'EXIT_VIOLATION',
    'EXIT_USAGE',
    'EXIT_NUMERICAL',
    'run_command',
    'COMMAND_GROUPS',
    'cmd_simulate',
    'cmd_moments',
    'cmd_spectral',
    'cmd_fit',
    'cmd_select',
    'cmd_hd_check',
    'cmd_bench',
]
