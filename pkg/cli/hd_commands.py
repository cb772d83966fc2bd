# cli/hd_commands.py
"""
hd-check 명령: 행렬식 판별 가정 수치 검사 (모델, 무작위 인스턴스, K=2 다항식 체인)
"""

import logging
import argparse
from typing import Dict, List

import numpy as np

from config import Settings
from core.errors import ValidationError
from core.hd_assumption import (
    chain_consistency, density_gram, determinant_H, evaluate_P5, gram_matrix, hd_report,
    p5_checksum, random_chain_point, random_histogram_coefficients, sos_identities,
)
from core.hmm_model import random_transition_matrix
from utils.io_utils import RngStream, make_rng
from .common import EXIT_OK, EXIT_VIOLATION, add_common_arguments, load_run_config, open_store

logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-10
CHAIN_TOLERANCE = 1e-6
SOS_TOLERANCE = 1e-9
RANDOM_HISTOGRAM_M = 8
HD_REPORT_NAME = 'hd_check.json'


def _degenerate(report: Dict, gram_trace: float) -> bool:
    """|H| ≤ 1e-10·scale 또는 그람 행렬이 수치적으로 특이 (방출 밀도 일치)"""
    if report["gram_min_eigenvalue"] <= DEGENERACY_TOLERANCE * gram_trace:
        return True
    return abs(report["H"]) <= DEGENERACY_TOLERANCE * report["scale"]


def check_model(spec) -> Dict:
    """모델의 참 방출 밀도 그람 행렬로 H 계산"""
    G = density_gram(spec.emissions)
    report = hd_report(spec.Q, G)
    report["degenerate"] = _degenerate(report, float(np.trace(G.G)))
    report["violation"] = report["degenerate"] or (spec.K == 2 and report["H"] <= 0)
    return report


def check_random(K: int, draws: int, seed: int) -> Dict:
    """무작위 (Q, 히스토그램 방출) 인스턴스에서 H 분포"""
    if K < 2 or draws < 1:
        raise ValidationError(f"--random에는 K ≥ 2, 추출 수 ≥ 1이 필요합니다: K={K}, draws={draws}")
    values: List[float] = []
    for draw in range(draws):
        rng = make_rng(seed, draw, RngStream.HD_CHECK)
        Q = random_transition_matrix(rng, K)
        A = random_histogram_coefficients(rng, RANDOM_HISTOGRAM_M, K)
        values.append(determinant_H(Q, gram_matrix(A)))
    values = np.asarray(values)
    nonpositive = int(np.sum(values <= 0))
    return {
        "K": K,
        "draws": draws,
        "H_min": float(values.min()),
        "H_median": float(np.median(values)),
        "nonpositive": nonpositive,
        "violation": K == 2 and nonpositive > 0,
    }


def check_chain(points: int, seed: int) -> Dict:
    """K=2 다항식 체인, P₅ 체크섬, SOS 항등식"""
    if points < 1:
        raise ValidationError(f"--chain-check 점 수는 1 이상이어야 합니다: {points}")
    rng = make_rng(seed, 0, RngStream.HD_CHAIN)
    summary = chain_consistency([random_chain_point(rng) for _ in range(points)])
    terms, coefficient_sum = p5_checksum()
    x, t = rng.uniform(-1.5, 1.5, size=(2, 64))
    sos = []
    for identity in sos_identities():
        lhs = identity.lhs(x, t)
        residual = np.max(np.abs(lhs - identity.rhs(x, t)) / np.maximum(1.0, np.abs(lhs)))
        sos.append({"label": identity.label, "residual": float(residual)})
    summary.update({
        "P5_terms": terms,
        "P5_coefficient_sum": coefficient_sum,
        "P5_at_origin": float(evaluate_P5(0.0, 0.0, 0.0, 0.0)),
        "sos": sos,
    })
    summary["violation"] = (summary["max_relative_mismatch"] > CHAIN_TOLERANCE
                            or any(abs(item["residual"]) > SOS_TOLERANCE for item in sos))
    return summary


def cmd_hd_check(args: argparse.Namespace, settings: Settings) -> int:
    cfg = load_run_config(args)
    result: Dict = {"seed": cfg.seed}
    if args.random is not None:
        result["random"] = check_random(args.random[0], args.random[1], cfg.seed)
        r = result["random"]
        print(f"K={r['K']} 추출 {r['draws']}회: min H={r['H_min']:.6e}, H ≤ 0 인 경우 {r['nonpositive']}회")
    if args.chain_check is not None:
        result["chain"] = check_chain(args.chain_check, cfg.seed)
        c = result["chain"]
        print(f"체인 검사 {c['points']}점: 최대 상대 불일치={c['max_relative_mismatch']:.3e}, "
              f"P5(0)={c['P5_at_origin']:.0f}")
    if cfg.model is not None:
        result["model"] = check_model(cfg.load_model())
        m = result["model"]
        flag = " (퇴화)" if m["degenerate"] else ""
        print(f"모델 H={m['H']:.6e}{flag}, 그람 최소 고유값={m['gram_min_eigenvalue']:.3e}")
    if len(result) == 1:
        raise ValidationError("검사 대상이 없습니다: 모델, --random K N, --chain-check N 중 하나가 필요합니다")

    open_store(cfg, settings).write_json(HD_REPORT_NAME, result)
    violated = [name for name, item in result.items() if isinstance(item, dict) and item.get("violation")]
    if violated:
        logger.warning(f"판별 가정 검사 위반: {', '.join(violated)}")
        return EXIT_VIOLATION
    return EXIT_OK


def register_hd_commands(subparsers) -> None:
    hd = subparsers.add_parser('hd-check', help='행렬식 판별 가정 수치 검사')
    add_common_arguments(hd)
    hd.add_argument('model', nargs='?', help='HMMSpec JSON 파일')
    hd.add_argument('--random', nargs=2, type=int, metavar=('K', 'N'), help='무작위 인스턴스 N개')
    hd.add_argument('--chain-check', type=int, metavar='N', help='K=2 체인 검사 점 수')
    hd.set_defaults(handler=cmd_hd_check)
