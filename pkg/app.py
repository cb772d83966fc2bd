"""
비모수 HMM 추정 도구 - 메인 진입점 (명령 그룹 등록)
"""

import sys
import logging
import argparse
from typing import List, Optional

from config import load_settings
from cli import COMMAND_GROUPS, EXIT_USAGE, run_command

# --- 설정 및 로깅 ---

settings = load_settings()

logging.basicConfig(
    level=getattr(logging, settings.log_level),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


# --- 명령 그룹 안전 등록 ---

def safe_register_commands(subparsers, register, name) -> bool:
    """명령 그룹을 안전하게 등록"""
    try:
        register(subparsers)
        logger.debug(f"✅ {name} 명령 그룹 등록 완료")
        return True
    except Exception as e:
        logger.error(f"❌ {name} 명령 그룹 등록 실패: {e}")
        return False


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='nphmm',
        description='비모수 은닉 마르코프 모형: 스펙트럴 추정, 최소제곱 대비 최소화, 차원 선택',
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    registered = [name for name, register in COMMAND_GROUPS
                  if safe_register_commands(subparsers, register, name)]
    logger.debug(f"등록된 명령 그룹: {', '.join(registered)}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, 'handler', None) is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    return run_command(args.handler, args, settings)


if __name__ == '__main__':
    sys.exit(main())
