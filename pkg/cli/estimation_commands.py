# cli/estimation_commands.py
"""
추정 명령: spectral (한 차원의 스펙트럴 추정), fit (전체 파이프라인), select (기록에서 차원 선택)
"""

import logging
import argparse

import pandas as pd

from config import Settings
from core.basis import BasisFamily
from core.errors import ValidationError
from core.evaluation import align, run_pipeline, true_coefficients
from core.selection import (
    CalibrationMethod, CalibrationResult, SelectionTrace,
    adaptive_rho_grid, calibrate, select_M, select_path,
)
from core.spectral import spectral_estimate
from .common import (
    EXIT_OK, add_basis_arguments, add_common_arguments, add_model_arguments,
    load_run_config, open_store, optimizer_template, resolve_M_max, resolve_threads,
)
from .data_commands import load_samples

logger = logging.getLogger(__name__)

REPORT_NAME = 'report.json'
CURVES_NAME = 'curves.csv'
SELECTION_NAME = 'selection.json'


def _add_selection_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--calibration', choices=[m.value for m in CalibrationMethod], help='ρ 보정 방법')
    parser.add_argument('--rho', type=float, help='ρ 직접 지정 (보정 생략)')


def cmd_spectral(args: argparse.Namespace, settings: Settings) -> int:
    """한 M에서 스펙트럴 추정, 모델이 있으면 참값과 비교"""
    cfg = load_run_config(args)
    samples = load_samples(args, cfg, settings)
    spec = cfg.load_model() if cfg.model is not None else None
    K = args.K if args.K is not None else (spec.K if spec is not None else None)
    if K is None:
        raise ValidationError("상태 수가 필요합니다: --K 또는 model을 지정하세요")

    threads = resolve_threads(cfg, settings)
    store = open_store(cfg, settings, threads)
    basis = BasisFamily(cfg.basis, args.M)
    estimate = spectral_estimate(store.cached_moments(samples, basis), K, cfg.seed)
    result = {"estimate": estimate.to_dict(), "basis": basis.to_dict(), "seed": cfg.seed,
              "resolved_config": cfg.to_dict()}
    if spec is not None:
        if spec.K != K:
            raise ValidationError(f"--K={K}가 모델의 상태 수 {spec.K}와 다릅니다")
        comparison = align(estimate.O_hat, true_coefficients(spec.emissions, basis), estimate.Q_hat, spec.Q)
        result["comparison"] = comparison.to_dict()
        print(f"M={basis.M} 정렬 후 최대 제곱오차={comparison.max_sq:.4e}, Q 오차={comparison.Q_error:.4e}")
    store.write_json(f"spectral-{basis.kind.value}-M{basis.M}.json", result)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace, settings: Settings) -> int:
    """전체 파이프라인 실행: report.json, curves.csv, fit_trace.csv"""
    cfg = load_run_config(args, 'model')
    samples = load_samples(args, cfg, settings) if getattr(args, 'samples', None) else None
    if samples is None:
        cfg.require('N')
    else:
        cfg = cfg.with_overrides(N=len(samples))
    spec = cfg.load_model()
    threads = resolve_threads(cfg, settings)
    store = open_store(cfg, settings)

    report = run_pipeline(
        spec, cfg.N, cfg.scenario, cfg.basis, resolve_M_max(cfg), cfg.seed,
        calibration=cfg.calibration, rho=cfg.rho, optimizer=optimizer_template(cfg),
        n_jobs=threads, samples=samples, moment_provider=store.cached_moments,
        fit_recorder=store.append_fit_trace, clip_display=cfg.clip_display,
        resolved_config=cfg.to_dict(),
    )
    store.write_json(REPORT_NAME, report.to_dict())
    store.write_csv(CURVES_NAME, report.curves)
    print(f"M̂={report.M_hat} ρ̂={report.calibration.rho_hat:.6g} ({report.calibration.method.value})")
    return EXIT_OK


def cmd_select(args: argparse.Namespace, settings: Settings) -> int:
    """(M, γ) 기록 CSV에서 ρ 보정 후 M̂ 선택"""
    cfg = load_run_config(args, 'N')
    trace = SelectionTrace.from_frame(pd.read_csv(args.trace), cfg.N)
    if cfg.rho is not None:
        result = CalibrationResult(cfg.rho, select_M(trace, cfg.rho), CalibrationMethod(cfg.calibration),
                                   {"rho_override": cfg.rho})
    else:
        result = calibrate(trace, cfg.calibration)
    grid = adaptive_rho_grid(trace)
    output = {**result.to_dict(), "path": {"rho": grid.tolist(), "M_hat": select_path(trace, grid).tolist()}}
    store = open_store(cfg, settings)
    store.write_json(SELECTION_NAME, output)
    print(f"M̂={result.M_hat} ρ̂={result.rho_hat:.6g} ({result.method.value})")
    return EXIT_OK


def register_estimation_commands(subparsers) -> None:
    spectral = subparsers.add_parser('spectral', help='한 차원에서 스펙트럴 추정')
    add_common_arguments(spectral)
    add_model_arguments(spectral)
    add_basis_arguments(spectral)
    spectral.add_argument('--samples', type=str, help='samples.csv (없으면 모델에서 생성)')
    spectral.add_argument('--M', type=int, required=True, help='기저 차원')
    spectral.add_argument('--K', type=int, help='상태 수 (기본: 모델의 K)')
    spectral.set_defaults(handler=cmd_spectral)

    fit = subparsers.add_parser('fit', help='전체 추정 파이프라인')
    add_common_arguments(fit)
    add_model_arguments(fit)
    add_basis_arguments(fit)
    _add_selection_arguments(fit)
    fit.add_argument('--samples', type=str, help='samples.csv (없으면 모델에서 생성)')
    fit.add_argument('--M-max', type=int, dest='M_max', help='최대 차원 (기본: min(50, √(N/log N)))')
    fit.add_argument('--budget', type=int, help='M마다 CMA-ES 평가 예산')
    fit.add_argument('--clip-display', action='store_true', help='보고 밀도 곡선을 양수로 자르고 재정규화')
    fit.set_defaults(handler=cmd_fit)

    select = subparsers.add_parser('select', help='γ 기록에서 차원 선택')
    add_common_arguments(select)
    _add_selection_arguments(select)
    select.add_argument('--trace', type=str, required=True, help='M,gamma 열이 있는 CSV (curves.csv 포함)')
    select.add_argument('--N', type=int, help='표본 수')
    select.set_defaults(handler=cmd_select)
