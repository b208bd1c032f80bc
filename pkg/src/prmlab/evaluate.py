"""First-error detection metrics, threshold sweeping, and best-of-N picking.

A trajectory is scored by its per-step right probabilities. The first
step whose right score drops below a threshold is the predicted first
error. Detection quality is summarized as the harmonic mean of accuracy
on erroneous trajectories (exact index match) and accuracy on clean
ones (no step flagged).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import StepProbabilities, Trajectory

DEFAULT_THRESHOLD = 0.9
DEFAULT_SWEEP_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass(frozen=True)
class EvalReport:
    """Detection metrics at one threshold.

    An accuracy is None when its trajectory class is absent from the
    dataset; f1 is 0 in that case.
    """

    error_accuracy: Optional[float]
    correct_accuracy: Optional[float]
    f1: float
    threshold: float
    n_error: int
    n_correct: int


def harmonic_f1(a: float, b: float) -> float:
    """2ab / (a + b), or 0 when the denominator vanishes."""
    if a + b <= 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


def _right_scores(probs: Sequence) -> list[float]:
    return [
        p.p_right if isinstance(p, StepProbabilities) else float(p) for p in probs
    ]


def predict_first_error(probs: Sequence, threshold: float) -> Optional[int]:
    """1-based index of the first step with right score < threshold.

    Accepts StepProbabilities or bare right scores. Returns None when
    every step clears the threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    for i, score in enumerate(_right_scores(probs)):
        if score < threshold:
            return i + 1
    return None


def prediction_log(
    traces: Sequence[Trajectory],
    scores: Sequence[Sequence[float]],
    threshold: float,
) -> list[dict]:
    """Raw per-trajectory records the report can be recomputed from."""
    if len(traces) != len(scores):
        raise ValueError(f"length mismatch: {len(traces)} traces, {len(scores)} score rows")
    records = []
    for t, s in zip(traces, scores):
        if len(s) != t.num_steps:
            raise ValueError(f"{t.id!r}: {len(s)} scores for {t.num_steps} steps")
        records.append(
            {
                "id": t.id,
                "predicted": predict_first_error(s, threshold),
                "gold": t.gold_first_error,
                "last_step_right_score": float(s[-1]),
            }
        )
    return records


def report_from_log(records: Sequence[dict], threshold: float) -> EvalReport:
    """Rebuild the EvalReport from prediction-log records alone."""
    n_error = n_correct = hit_error = hit_correct = 0
    for rec in records:
        if rec["gold"] is not None:
            n_error += 1
            hit_error += int(rec["predicted"] == rec["gold"])
        else:
            n_correct += 1
            hit_correct += int(rec["predicted"] is None)
    a = hit_error / n_error if n_error else None
    b = hit_correct / n_correct if n_correct else None
    f1 = harmonic_f1(a, b) if (a is not None and b is not None) else 0.0
    return EvalReport(
        error_accuracy=a,
        correct_accuracy=b,
        f1=f1,
        threshold=threshold,
        n_error=n_error,
        n_correct=n_correct,
    )


def processbench_f1(
    traces: Sequence[Trajectory],
    scores: Sequence[Sequence[float]],
    threshold: float,
) -> EvalReport:
    """Exact-index first-error detection report.

    An erroneous trajectory (gold index present) counts iff the predicted
    index equals the gold index; a clean one counts iff nothing is
    flagged.
    """
    return report_from_log(prediction_log(traces, scores, threshold), threshold)


def sweep_threshold(
    traces: Sequence[Trajectory],
    scores: Sequence[Sequence[float]],
    thresholds: Sequence[float] = DEFAULT_SWEEP_GRID,
) -> tuple[list[EvalReport], float]:
    """One report per threshold plus the best threshold by f1.

    Ties break toward the smaller threshold.
    """
    if len(thresholds) == 0:
        raise ValueError("thresholds must be non-empty")
    rows = [processbench_f1(traces, scores, th) for th in thresholds]
    best = min(rows, key=lambda r: (-r.f1, r.threshold))
    return rows, best.threshold


@dataclass(frozen=True)
class BonCandidate:
    right_scores: tuple[float, ...]
    is_correct: bool


@dataclass(frozen=True)
class BonProblem:
    problem_id: str
    candidates: tuple[BonCandidate, ...]


def bon_select(candidates: Sequence[Sequence[float]]) -> int:
    """1-based index of the candidate with the highest final right score.

    Ties break toward the lowest index.
    """
    if len(candidates) == 0:
        raise ValueError("candidates must be non-empty")
    finals = []
    for i, c in enumerate(candidates):
        if len(c) == 0:
            raise ValueError(f"candidate {i + 1} has no steps")
        finals.append(_right_scores(c)[-1])
    return int(np.argmax(finals)) + 1


def bon_accuracy(
    problems: Sequence[BonProblem], n_values: Sequence[int]
) -> dict[int, float]:
    """Fraction of problems whose pick among the first n candidates is correct."""
    if len(problems) == 0:
        raise ValueError("problems must be non-empty")
    result = {}
    for n in n_values:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        hits = 0
        for p in problems:
            if len(p.candidates) < n:
                raise ValueError(
                    f"problem {p.problem_id!r} has {len(p.candidates)} candidates, need {n}"
                )
            pick = bon_select([c.right_scores for c in p.candidates[:n]])
            hits += int(p.candidates[pick - 1].is_correct)
        result[n] = hits / len(problems)
    return result
