# config/settings.py
"""
환경 변수 기반 기본 설정
"""

import os
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from dotenv import load_dotenv

from core.errors import ValidationError

# .env.local 파일에서 환경변수 로드
load_dotenv('.env.local')

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = 'runs'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    log_level: str = 'INFO'
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    cache_dir: Optional[Path] = None

    @property
    def resolved_cache_dir(self) -> Path:
        return self.cache_dir_for(self.output_dir)

    def cache_dir_for(self, output_dir: Path) -> Path:
        """NPHMM_CACHE_DIR가 없으면 출력 디렉터리 아래 cache"""
        return self.cache_dir if self.cache_dir is not None else Path(output_dir) / 'cache'


def _parse_threads(raw: Optional[str]) -> int:
    if raw is None or raw.strip() == '':
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ValidationError(f"NPHMM_THREADS는 정수여야 합니다: {raw!r}")
    if threads < 1:
        raise ValidationError(f"NPHMM_THREADS는 1 이상이어야 합니다: {threads}")
    return threads


def load_settings(environ: Optional[Mapping[str, str]] = None) -> Settings:
    """NPHMM_* 환경 변수에서 설정 읽기"""
    env = os.environ if environ is None else environ
    level = env.get('NPHMM_LOG_LEVEL', 'INFO').upper()
    if level not in LOG_LEVELS:
        logger.warning(f"알 수 없는 로그 레벨 {level!r}, INFO를 사용합니다")
        level = 'INFO'
    cache_dir = env.get('NPHMM_CACHE_DIR')
    return Settings(
        threads=_parse_threads(env.get('NPHMM_THREADS')),
        log_level=level,
        output_dir=Path(env.get('NPHMM_OUTPUT_DIR') or DEFAULT_OUTPUT_DIR),
        cache_dir=Path(cache_dir) if cache_dir else None,
    )
