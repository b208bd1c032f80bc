"""The buffered step loss, its expected closed form, and all gradients.

Per step the scorer emits (p_right, p_wrong, p_buffer). The training
target for a pseudo label y is p_target + beta * p_buffer -> 1, where
p_target is p_right for y = 1 and p_wrong for y = 0, and beta is a
Bernoulli(p_buffer) gate that stochastically lends the buffer mass to
the target. Averaging over beta gives a closed-form expected loss whose
partial derivatives are implemented here verbatim, alongside the plain
cross-entropy baseline they are compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EPS_PROB, StepProbabilities

# Weight of every non-final step; only the final-step weight is configurable.
NORMAL_STEP_WEIGHT = 1.0

MODES = ("stochastic", "expected")


@dataclass(frozen=True)
class LossConfig:
    """Objective hyperparameters.

    last_step_weight amplifies the final step, where the outcome label is
    most informative; the buffer gate is removed there entirely. In
    "stochastic" mode the realized Bernoulli gates enter the loss; in
    "expected" mode the closed-form average over the gate is used.
    """

    last_step_weight: float = 3.0
    buffer_enabled: bool = True
    mode: str = "stochastic"
    eps_prob: float = EPS_PROB
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.last_step_weight < 1.0:
            raise ValueError(f"last_step_weight must be >= 1, got {self.last_step_weight}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.eps_prob < 1e-3:
            raise ValueError(f"eps_prob out of range: {self.eps_prob}")


def sample_buffer_factors(
    probs: Sequence[StepProbabilities],
    config: LossConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw the binary buffer gate beta_t ~ Bernoulli(p_buffer_t) per step.

    The gate for the final step is forced to 0 (no buffer on the last
    step), and the whole vector is 0 when the buffer is disabled. One
    uniform is consumed per step in order, so draws are a deterministic
    function of the seed and the step index.
    """
    if len(probs) == 0:
        raise ValueError("probs must be non-empty")
    n = len(probs)
    if not config.buffer_enabled:
        return np.zeros(n, dtype=np.int8)
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    u = rng.random(n)
    beta = (u < np.array([p.p_buffer for p in probs])).astype(np.int8)
    beta[n - 1] = 0
    return beta


def step_loss_realized(
    p: StepProbabilities, label: int, beta: int, alpha: float, eps: float = EPS_PROB
) -> float:
    """-alpha * log(p_target + beta * p_buffer), log argument floored at eps."""
    target = p.p_right if label == 1 else p.p_wrong
    g = target + beta * p.p_buffer
    return -alpha * math.log(max(g, eps))


def trajectory_loss(
    probs: Sequence[StepProbabilities],
    labels: Sequence[int],
    betas: Sequence[int],
    config: LossConfig,
) -> float:
    """Mean over steps of the weighted realized loss.

    The final step carries config.last_step_weight; all others weight 1.
    """
    n = len(probs)
    if not (len(labels) == n and len(betas) == n):
        raise ValueError(
            f"length mismatch: probs={n} labels={len(labels)} betas={len(betas)}"
        )
    total = 0.0
    for t in range(n):
        alpha = config.last_step_weight if t == n - 1 else NORMAL_STEP_WEIGHT
        total += step_loss_realized(probs[t], labels[t], betas[t], alpha, config.eps_prob)
    return total / n


def expected_step_loss(p: StepProbabilities, label: int, eps: float = EPS_PROB) -> float:
    """Closed-form average of the realized loss over the Bernoulli gate.

    E = -(p_buffer * log(p_target + p_buffer) + (1 - p_buffer) * log(p_target)).
    """
    target = p.p_right if label == 1 else p.p_wrong
    pb = p.p_buffer
    return -(
        pb * math.log(max(target + pb, eps)) + (1.0 - pb) * math.log(max(target, eps))
    )


def expected_grad(
    p: StepProbabilities, label: int, eps: float = EPS_PROB
) -> tuple[float, float]:
    """Partials of the expected loss w.r.t. the target and buffer masses.

    d/dp_target = -(p_b / (p_t + p_b) + (1 - p_b) / p_t)
    d/dp_buffer = -(log((p_t + p_b) / p_t) + p_b / (p_t + p_b))

    Both hold the other coordinate fixed, with p_wrong (resp. p_right for
    label 0) absorbing the probability mass.
    """
    target = max(p.p_right if label == 1 else p.p_wrong, eps)
    pb = p.p_buffer
    gsum = max(target + pb, eps)
    d_target = -(pb / gsum + (1.0 - pb) / target)
    d_buffer = -(math.log(gsum / target) + pb / gsum)
    return d_target, d_buffer


def ce_step_loss(p: StepProbabilities, label: int, eps: float = EPS_PROB) -> float:
    """Binary cross-entropy baseline on the right-probability alone."""
    if label == 1:
        return -math.log(max(p.p_right, eps))
    return -math.log(max(1.0 - p.p_right, eps))


def ce_grad(p: StepProbabilities, label: int, eps: float = EPS_PROB) -> float:
    """d/dp_right of the cross-entropy baseline: -1/p_r, or 1/(1-p_r) for label 0."""
    if label == 1:
        return -1.0 / max(p.p_right, eps)
    return 1.0 / max(1.0 - p.p_right, eps)


def grad_gap(p: StepProbabilities, eps: float = EPS_PROB) -> float:
    """|ce_grad| - |expected d/dp_target|, in closed form.

    Equals p_buffer^2 / (p_right * (p_right + p_buffer)), which is bounded
    below by p_buffer^2 on the simplex interior: the buffer damps the
    gradient quadratically in its own mass.
    """
    pr = max(p.p_right, eps)
    return p.p_buffer**2 / (pr * max(pr + p.p_buffer, eps))
