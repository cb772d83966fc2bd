# cli/bench_commands.py
"""
bench 명령: 복제 실험 (분산 비교, 스펙트럴 수렴률, 위험 감소)
"""

import logging
import argparse

from config import Settings
from core.basis import valid_dimensions
from core.errors import ValidationError
from core.evaluation import BenchCheck, acceptance_check, run_replicates, summarize_replicates
from .common import (
    EXIT_OK, EXIT_VIOLATION, add_basis_arguments, add_common_arguments, add_model_arguments,
    load_run_config, open_store, optimizer_template, resolve_threads,
)

logger = logging.getLogger(__name__)

RAW_NAME = 'bench_raw.csv'
SUMMARY_NAME = 'bench_summary.csv'
CHECK_NAME = 'bench_check.json'


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    """N, M 격자 위 복제 실험. --check가 있으면 수용 판정 결과로 종료 코드 결정"""
    cfg = load_run_config(args, 'model')
    Ns = args.Ns if args.Ns else ([cfg.N] if cfg.N is not None else None)
    if not Ns:
        raise ValidationError("표본 수가 필요합니다: --Ns 또는 설정의 N")
    spec = cfg.load_model()
    Ms = args.Ms
    invalid = [M for M in Ms if M not in valid_dimensions(cfg.basis, spec.K, M)]
    if invalid:
        raise ValidationError(f"기저 {cfg.basis}, K={spec.K}에서 쓸 수 없는 M: {invalid}")

    threads = resolve_threads(cfg, settings)
    raw = run_replicates(spec, Ns, cfg.scenario, cfg.basis, Ms, cfg.replicates, cfg.seed,
                         optimizer=optimizer_template(cfg), n_jobs=threads)
    summary = summarize_replicates(raw)
    store = open_store(cfg, settings)
    store.write_csv(RAW_NAME, raw)
    store.write_csv(SUMMARY_NAME, summary)
    print(summary.to_string(index=False))

    if args.check is None:
        return EXIT_OK
    verdict = acceptance_check(summary, args.check)
    store.write_json(CHECK_NAME, {**verdict, "resolved_config": cfg.to_dict()})
    print(f"{verdict['check']} 판정: {'통과' if verdict['passed'] else '실패'}")
    return EXIT_OK if verdict['passed'] else EXIT_VIOLATION


def register_bench_commands(subparsers) -> None:
    bench = subparsers.add_parser('bench', help='복제 실험과 수용 판정')
    add_common_arguments(bench)
    add_model_arguments(bench)
    add_basis_arguments(bench)
    bench.add_argument('--Ns', type=int, nargs='+', help='표본 수 목록 (기본: 설정의 N)')
    bench.add_argument('--Ms', type=int, nargs='+', required=True, help='고정 차원 목록')
    bench.add_argument('--replicates', type=int, help='N마다 복제 수 (시드 seed+i)')
    bench.add_argument('--budget', type=int, help='M마다 CMA-ES 평가 예산')
    bench.add_argument('--check', choices=[c.value for c in BenchCheck], help='수용 판정 종류')
    bench.set_defaults(handler=cmd_bench)
