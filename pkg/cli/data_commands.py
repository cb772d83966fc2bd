# cli/data_commands.py
"""
데이터 명령: simulate (표본 생성), moments (경험적 모멘트)
"""

import logging
import argparse

import numpy as np

from config import Settings
from core.basis import BasisFamily
from core.hmm_model import sample_chain
from utils.io_utils import read_samples_csv, write_samples_csv
from .common import (
    EXIT_OK, add_basis_arguments, add_common_arguments, add_model_arguments,
    load_run_config, open_store, resolve_threads,
)

logger = logging.getLogger(__name__)

SAMPLES_NAME = 'samples.csv'


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """HMMSpec에서 N개의 삼중 관측을 생성해 samples.csv로 저장"""
    cfg = load_run_config(args, 'model', 'N')
    spec = cfg.load_model()
    samples = sample_chain(spec, cfg.N, cfg.scenario, cfg.seed)
    store = open_store(cfg, settings)
    path = write_samples_csv(store.path(SAMPLES_NAME), samples)
    logger.info(f"표본 {cfg.N}개 생성 (K={spec.K}, 시나리오 {cfg.scenario}, 시드 {cfg.seed})")
    print(path)
    return EXIT_OK


def load_samples(args: argparse.Namespace, cfg, settings: Settings) -> np.ndarray:
    """--samples 파일을 읽거나, 없으면 설정의 모델에서 생성"""
    if getattr(args, 'samples', None):
        return read_samples_csv(args.samples)
    cfg.require('model', 'N')
    return sample_chain(cfg.load_model(), cfg.N, cfg.scenario, cfg.seed)


def cmd_moments(args: argparse.Namespace, settings: Settings) -> int:
    """경험적 모멘트를 계산해 캐시에 저장하고 요약 출력"""
    cfg = load_run_config(args)
    samples = load_samples(args, cfg, settings)
    threads = resolve_threads(cfg, settings)
    store = open_store(cfg, settings, threads)
    basis = BasisFamily(cfg.basis, args.M)
    mom = store.cached_moments(samples, basis)
    path = store.moment_cache_path(samples, basis)
    print(f"{path}")
    print(f"N={mom.n_samples} M={mom.M} ‖L‖={np.linalg.norm(mom.L):.6g} "
          f"‖M̂‖_F={np.linalg.norm(mom.Mtens.ravel()):.6g}")
    return EXIT_OK


def register_data_commands(subparsers) -> None:
    simulate = subparsers.add_parser('simulate', help='모델에서 표본 생성')
    add_common_arguments(simulate)
    add_model_arguments(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    moments = subparsers.add_parser('moments', help='경험적 모멘트 계산')
    add_common_arguments(moments)
    add_model_arguments(moments)
    add_basis_arguments(moments)
    moments.add_argument('--samples', type=str, help='samples.csv (없으면 모델에서 생성)')
    moments.add_argument('--M', type=int, required=True, help='기저 차원')
    moments.set_defaults(handler=cmd_moments)
