"""Pseudo step labels derived from the outcome label alone.

Every step inherits the trajectory's binary outcome: all steps are
treated as correct when the final answer is correct, and as incorrect
otherwise. The labels are recomputed on the fly and never persisted.
"""

from __future__ import annotations

import numpy as np

from .core import Trajectory


def assign_pseudo_labels(t: Trajectory) -> np.ndarray:
    """Length-T constant label vector equal to the trajectory outcome."""
    return np.full(t.num_steps, t.outcome, dtype=np.int8)
