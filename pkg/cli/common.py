# cli/common.py
"""
CLI 공통: 설정 해석, 공용 플래그, 예외 → 종료 코드 변환
"""

import sys
import logging
import argparse
from pathlib import Path
from typing import Callable, Optional

from artifact_store import ArtifactStore
from config import RunConfig, Settings, load_settings
from core.errors import NPHMMError, StageError, ValidationError
from core.optimizer import DEFAULT_TOL_FUN, OptimizerConfig
from core.selection import default_M_max

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """모든 하위 명령이 공유하는 플래그"""
    parser.add_argument('--config', type=str, help='JSON 설정 파일')
    parser.add_argument('--seed', type=int, help='난수 시드')
    parser.add_argument('--out', type=str, dest='output_dir', help='출력 디렉터리 (기본: NPHMM_OUTPUT_DIR 또는 runs)')
    parser.add_argument('--threads', type=int, help='병렬 작업 수 (기본: NPHMM_THREADS)')
    parser.add_argument('--verbose', action='store_true', help='DEBUG 로그 출력')


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--model', type=str, help='HMMSpec JSON 파일 (설정의 model 덮어쓰기)')
    parser.add_argument('--N', type=int, help='표본 수')
    parser.add_argument('--scenario', choices=['A', 'B'], help='표본 시나리오')


def add_basis_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--basis', choices=['histogram', 'trig'], help='기저 종류')


def load_run_config(args: argparse.Namespace, *required: str) -> RunConfig:
    """설정 파일 → 플래그 덮어쓰기 → 검증 → 필수 필드 확인"""
    cfg = RunConfig.from_file(args.config) if getattr(args, 'config', None) else RunConfig()
    overrides = {name: getattr(args, name, None) for name in RunConfig.field_names() if name != 'model'}
    model = getattr(args, 'model', None)
    if model is not None:
        overrides['model'] = str(Path(model).resolve())
    if getattr(args, 'clip_display', False):
        overrides['clip_display'] = True
    cfg = cfg.with_overrides(**overrides).validate()
    return cfg.require(*required)


def resolve_threads(cfg: RunConfig, settings: Settings) -> int:
    return cfg.threads if cfg.threads is not None else settings.threads


def resolve_M_max(cfg: RunConfig) -> int:
    return cfg.M_max if cfg.M_max is not None else default_M_max(cfg.N)


def optimizer_template(cfg: RunConfig) -> OptimizerConfig:
    """예산·시드·허용오차만 정한 CMA-ES 설정 (차원은 시작점에 맞춰진다)"""
    return OptimizerConfig(dim=1, max_evals=cfg.budget, seed=cfg.seed,
                           tol_fun=cfg.tolerances.get('tol_fun', DEFAULT_TOL_FUN))


def open_store(cfg: RunConfig, settings: Settings, threads: int = 1) -> ArtifactStore:
    output_dir = Path(cfg.output_dir) if cfg.output_dir is not None else settings.output_dir
    return ArtifactStore(output_dir, settings.cache_dir_for(output_dir), n_jobs=threads)


def report_error(stage: Optional[str], message: str) -> None:
    """사용자에게 보이는 오류 메시지 (표준 오류)"""
    prefix = f"[{stage}] " if stage else ''
    print(f"오류: {prefix}{message}", file=sys.stderr)


def run_command(handler: Callable[[argparse.Namespace, Settings], int], args: argparse.Namespace,
                settings: Optional[Settings] = None) -> int:
    """명령 실행 후 예외를 종료 코드로 변환"""
    try:
        settings = settings or load_settings()
        return handler(args, settings)
    except StageError as e:
        logger.error(f"{e.stage} 단계 실패: {e.cause}")
        report_error(e.stage, str(e.cause))
        return EXIT_USAGE if isinstance(e.cause, ValidationError) else EXIT_NUMERICAL
    except ValidationError as e:
        report_error(e.stage, str(e))
        return EXIT_USAGE
    except NPHMMError as e:
        logger.error(f"수치 오류: {e}")
        report_error(e.stage, str(e))
        return EXIT_NUMERICAL
    except (OSError, ValueError) as e:
        report_error(None, str(e))
        return EXIT_USAGE
