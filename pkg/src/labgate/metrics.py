"""Run-level evaluation metrics.

Text metrics (semantic keyword coverage, LCS-based F1) and code metrics
(per-op physical compliance, sequence and parameter accuracy against
ground truth) plus the retry-loop detector. All pure functions; the LCS
inner loops run on the compiled kernels when available.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

from ._kernels import lcs_length, lcs_pairs
from .grounding import WorkingMemory
from .registry import HardwareRegistry
from .simulator import LabWorld
from .verify import ProtocolCode, contains_phrase, tokenize, verify_physical

REL_TOL = 1e-6


@dataclass(frozen=True)
class MetricsReport:
    s_sem: float
    rouge_l: float
    c_s: float
    c_p: float
    s_code: float
    acc_seq: float
    acc_param: float
    success: bool
    loop_rate_flag: bool
    tokens_in: int
    tokens_out: int
    wall_time_s: float  # simulated lab clock, keeping reports reproducible

    def __post_init__(self) -> None:
        for name in ("s_sem", "rouge_l", "c_s", "c_p", "s_code", "acc_seq", "acc_param"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name}={value} outside [0, 1]")

    def to_json(self) -> dict[str, Any]:
        return {
            "s_sem": self.s_sem,
            "rouge_l": self.rouge_l,
            "c_s": self.c_s,
            "c_p": self.c_p,
            "s_code": self.s_code,
            "acc_seq": self.acc_seq,
            "acc_param": self.acc_param,
            "success": self.success,
            "loop_rate_flag": self.loop_rate_flag,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "wall_time_s": self.wall_time_s,
        }


def _intern(*sequences: Sequence[Hashable]) -> list[list[int]]:
    ids: dict[Hashable, int] = {}
    out = []
    for seq in sequences:
        row = []
        for item in seq:
            if item not in ids:
                ids[item] = len(ids)
            row.append(ids[item])
        out.append(row)
    return out


def score_semantic(draft_text: str, keyword_groups: Sequence[Sequence[str]]) -> float:
    """Fraction of keyword groups with at least one member in the text."""
    if not keyword_groups:
        return 1.0
    tokens = tokenize(draft_text)
    covered = sum(
        1 for group in keyword_groups if any(contains_phrase(tokens, member) for member in group)
    )
    return covered / len(keyword_groups)


def score_rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 (beta = 1) over normalized token sequences."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    cand_ids, ref_ids = _intern(cand, ref)
    lcs = lcs_length(cand_ids, ref_ids)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _values_match(pred: tuple[Any, str], gt: tuple[Any, str]) -> bool:
    pred_value, pred_unit = pred
    gt_value, gt_unit = gt
    if pred_unit != gt_unit:
        return False
    pred_is_num = isinstance(pred_value, (int, float)) and not isinstance(pred_value, bool)
    gt_is_num = isinstance(gt_value, (int, float)) and not isinstance(gt_value, bool)
    if gt_is_num:
        return pred_is_num and math.isclose(float(pred_value), float(gt_value), rel_tol=REL_TOL)
    return pred_value == gt_value


@dataclass(frozen=True)
class CodeScores:
    c_p: float
    acc_seq: float
    acc_param: float
    s_code: float


def score_code(
    pred: ProtocolCode | None,
    gt: ProtocolCode,
    registry: HardwareRegistry,
    memory: WorkingMemory,
    world: LabWorld | None = None,
) -> CodeScores:
    """Code-generation scores; a parse failure (pred=None) zeroes everything.

    c_p checks each predicted op individually against the registry;
    acc_seq is normalized LCS over (device, op) name pairs; acc_param
    compares params over the LCS-aligned op pairs against all ground-truth
    params (numeric within 1e-6 relative tolerance and exact unit).
    """
    if pred is None or not pred.ops:
        return CodeScores(0.0, 0.0, 0.0, 0.0)

    passing = 0
    for op in pred.ops:
        single = ProtocolCode(ops=(op,), schema_version=pred.schema_version)
        report = verify_physical(single, registry, memory, world=world)
        if report.passed:
            passing += 1
    c_p = passing / len(pred.ops)

    pred_pairs = [(op.device_id, op.op_name) for op in pred.ops]
    gt_pairs = [(op.device_id, op.op_name) for op in gt.ops]
    pred_ids, gt_ids = _intern(pred_pairs, gt_pairs)
    acc_seq = lcs_length(pred_ids, gt_ids) / len(gt.ops) if gt.ops else 1.0

    total_gt_params = sum(len(op.params) for op in gt.ops)
    if total_gt_params == 0:
        acc_param = 1.0
    else:
        matched = 0
        for pred_idx, gt_idx in lcs_pairs(pred_ids, gt_ids):
            pred_op = pred.ops[pred_idx]
            gt_op = gt.ops[gt_idx]
            for name, gt_pair in gt_op.params.items():
                if name in pred_op.params and _values_match(pred_op.params[name], gt_pair):
                    matched += 1
        acc_param = matched / total_gt_params

    s_code = (c_p + acc_seq + acc_param) / 3
    return CodeScores(c_p=c_p, acc_seq=acc_seq, acc_param=acc_param, s_code=s_code)


def _action_signature(event: dict[str, Any]) -> tuple[str, str]:
    return (
        str(event.get("state", "")),
        json.dumps(event.get("action"), sort_keys=True, separators=(",", ":")),
    )


def detect_loop(trace: Sequence[dict[str, Any]], threshold: int = 3) -> bool:
    """Retry-loop detector over a run's trace.

    Flags when the same (state, action-signature) pair repeats at least
    `threshold` times consecutively among action-carrying events, or the
    run timed out with its final `threshold` action events identical.
    """
    if threshold < 2:
        raise ValueError("loop threshold must be >= 2")
    action_events = [e for e in trace if e.get("action") is not None]
    signatures = [_action_signature(e) for e in action_events]

    run = 1
    for prev, cur in zip(signatures, signatures[1:]):
        run = run + 1 if cur == prev else 1
        if run >= threshold:
            return True

    timed_out = any(e.get("note") == "halt_timeout" for e in trace)
    if timed_out and len(signatures) >= threshold:
        tail = signatures[-threshold:]
        if all(sig == tail[0] for sig in tail):
            return True
    return False
