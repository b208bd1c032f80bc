"""Shared domain types and numerically stable simplex construction.

Everything downstream consumes these value objects: trajectories of
reasoning steps with a binary outcome label, and per-step probability
triples (right, wrong, buffer) living on the 3-simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Floor applied to each probability before any logarithm or division.
EPS_PROB = 1e-12


@dataclass(frozen=True)
class StepContent:
    """One reasoning step: an opaque token list plus its 1-based position."""

    tokens: tuple[str, ...]
    position: int
    is_last: bool


@dataclass(frozen=True)
class Trajectory:
    """An ordered sequence of steps with a binary outcome label.

    ``gold_first_error`` is the hidden 1-based index of the earliest bad
    step. It exists only in synthetic/eval data and is never consumed by
    the training path, which sees steps and outcome alone.
    """

    id: str
    steps: tuple[StepContent, ...]
    outcome: int
    gold_first_error: Optional[int] = None

    @property
    def num_steps(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class StepProbabilities:
    """A (right, wrong, buffer) point on the probability simplex."""

    p_right: float
    p_wrong: float
    p_buffer: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_right, self.p_wrong, self.p_buffer])


def make_trajectory(
    traj_id: str,
    step_tokens: Sequence[Sequence[str]],
    outcome: int,
    gold_first_error: Optional[int] = None,
) -> Trajectory:
    """Build a Trajectory from raw token lists, filling in step positions."""
    n = len(step_tokens)
    steps = tuple(
        StepContent(tokens=tuple(toks), position=i + 1, is_last=(i + 1 == n))
        for i, toks in enumerate(step_tokens)
    )
    return validate_trajectory(
        Trajectory(id=traj_id, steps=steps, outcome=outcome, gold_first_error=gold_first_error)
    )


def validate_trajectory(t: Trajectory) -> Trajectory:
    """Enforce trajectory invariants; returns the input unchanged on success."""
    if len(t.steps) == 0:
        raise ValueError(f"empty trajectory: {t.id!r}")
    if t.outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {t.outcome!r} in {t.id!r}")
    if t.gold_first_error is not None:
        if not 1 <= t.gold_first_error <= len(t.steps):
            raise ValueError(
                f"first-error index out of range: {t.gold_first_error} not in "
                f"[1, {len(t.steps)}] in {t.id!r}"
            )
    for i, s in enumerate(t.steps):
        if s.position != i + 1:
            raise ValueError(f"step position {s.position} inconsistent with order in {t.id!r}")
        if s.is_last != (i + 1 == len(t.steps)):
            raise ValueError(f"is_last flag inconsistent at step {i + 1} in {t.id!r}")
    return t


def simplex_from_logits(logits: Sequence[float], eps: float = EPS_PROB) -> StepProbabilities:
    """Normalized exponentials of three logits, clamped away from zero.

    Max-subtraction keeps the exponentials finite; each component is then
    floored at ``eps`` and the triple renormalized so logarithms taken
    downstream never see an exact zero.
    """
    if len(logits) != 3:
        raise ValueError(f"expected 3 logits, got {len(logits)}")
    z = [float(v) for v in logits]
    if not all(math.isfinite(v) for v in z):
        raise ValueError(f"non-finite logit: {logits!r}")
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = e[0] + e[1] + e[2]
    p = [max(v / s, eps) for v in e]
    s2 = p[0] + p[1] + p[2]
    return StepProbabilities(p[0] / s2, p[1] / s2, p[2] / s2)
