"""Numerical verification of the loss-surface guarantees and the backward pass.

Four independent checks:

  verify_gradient_damping      the buffered loss pulls on the target mass
                               strictly more gently than plain cross
                               entropy, with the gap equal to a closed
                               form bounded below by p_buffer squared
  verify_collapse_instability  at the near-all-buffer corner the buffer
                               gradient is large and positive pressure
                               away from collapse (diverges like log(1/eps))
  verify_mc_consistency        sampled realized losses average to the
                               closed-form expected loss
  gradcheck_model              analytic parameter gradients match central
                               finite differences on tiny random models

plus a finite-difference check of the expected-loss partials themselves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import StepContent, StepProbabilities
from .features import FeaturizerConfig, featurize_step
from .model import backward_step, forward, init_params
from .objective import (
    ce_grad,
    expected_grad,
    expected_step_loss,
    grad_gap,
    step_loss_realized,
)

DEFAULT_EPSILONS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)

# Relative-error floor shared by all finite-difference comparisons.
REL_ERR_FLOOR = 1e-8

FD_STEP = 1e-6


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_ERR_FLOOR)


@dataclass(frozen=True)
class GradientDampingReport:
    grid_resolution: int
    points_checked: int
    max_identity_error: float
    violations: int
    passed: bool


def verify_gradient_damping(
    grid_resolution: int = 100, margin: float = 1e-3, tol: float = 1e-9
) -> GradientDampingReport:
    """Check |ce_grad| - |d/dp_target| == grad_gap >= p_buffer^2 on a grid.

    The grid covers interior (p_right, p_buffer) pairs with every simplex
    coordinate at least `margin`.
    """
    if grid_resolution < 10:
        raise ValueError(f"grid_resolution must be >= 10, got {grid_resolution}")
    axis = [float(v) for v in np.linspace(margin, 1.0 - margin, grid_resolution)]
    max_err = 0.0
    violations = 0
    checked = 0
    for pr in axis:
        for pb in axis:
            if pr + pb > 1.0 - margin:
                continue
            checked += 1
            p = StepProbabilities(pr, 1.0 - pr - pb, pb)
            gap = grad_gap(p)
            d_target, _ = expected_grad(p, label=1)
            identity_err = abs((abs(ce_grad(p, label=1)) - abs(d_target)) - gap)
            max_err = max(max_err, identity_err)
            if identity_err > tol or gap < pb * pb:
                violations += 1
    return GradientDampingReport(
        grid_resolution=grid_resolution,
        points_checked=checked,
        max_identity_error=max_err,
        violations=violations,
        passed=violations == 0,
    )


@dataclass(frozen=True)
class CollapseRow:
    epsilon: float
    gradient: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class CollapseInstabilityReport:
    rows: tuple[CollapseRow, ...]
    monotone: bool
    passed: bool


def verify_collapse_instability(
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
) -> CollapseInstabilityReport:
    """Evaluate the buffer partial at p_right = eps, p_buffer = 1 - eps.

    There the pre-clamp gradient is -(log(1/eps) + (1 - eps)), which must
    sit at or below the -log(1/eps) bound and diverge monotonically as
    eps shrinks: the near-all-buffer configuration is never a rest point.
    """
    eps_desc = sorted(epsilons, reverse=True)
    if eps_desc != list(epsilons):
        raise ValueError("epsilons must be listed in decreasing order")
    rows = []
    for e in epsilons:
        if not 0.0 < e < 0.5:
            raise ValueError(f"epsilon must be in (0, 0.5), got {e}")
        p = StepProbabilities(e, 0.0, 1.0 - e)
        _, d_buffer = expected_grad(p, label=1)
        bound = float(-np.log(1.0 / e))
        rows.append(
            CollapseRow(epsilon=float(e), gradient=d_buffer, bound=bound, passed=bool(d_buffer <= bound))
        )
    grads = [r.gradient for r in rows]
    monotone = all(grads[i + 1] < grads[i] for i in range(len(grads) - 1))
    return CollapseInstabilityReport(
        rows=tuple(rows), monotone=monotone, passed=monotone and all(r.passed for r in rows)
    )


def _interior_point(rng: np.random.Generator, margin: float = 0.01) -> StepProbabilities:
    p = margin + (1.0 - 3.0 * margin) * rng.dirichlet((1.0, 1.0, 1.0))
    return StepProbabilities(float(p[0]), float(p[1]), float(p[2]))


@dataclass(frozen=True)
class McConsistencyReport:
    points: int
    samples: int
    max_normalized_deviation: float
    band_violations: int
    passed: bool


def verify_mc_consistency(
    points: int = 200, samples: int = 100_000, seed: int = 0, max_violations: int = 2
) -> McConsistencyReport:
    """Sampled realized losses vs the closed-form expectation.

    At each random interior point and both labels, draws `samples`
    realized losses with fresh Bernoulli gates and requires the sample
    mean to land within 4 standard errors of expected_step_loss. A
    handful of band misses is statistically expected; the default allows
    two.
    """
    if samples < 10_000:
        raise ValueError(f"samples must be >= 10000, got {samples}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3C0]))
    max_dev = 0.0
    violations = 0
    for _ in range(points):
        p = _interior_point(rng)
        for label in (0, 1):
            target = p.p_right if label == 1 else p.p_wrong
            beta = rng.random(samples) < p.p_buffer
            draws = -np.log(target + beta * p.p_buffer)
            mean = float(draws.mean())
            stderr = float(draws.std(ddof=1)) / float(np.sqrt(samples))
            gap = abs(mean - expected_step_loss(p, label))
            dev = 0.0 if gap == 0.0 else (float("inf") if stderr == 0.0 else gap / stderr)
            max_dev = max(max_dev, dev)
            if dev > 4.0:
                violations += 1
    return McConsistencyReport(
        points=points,
        samples=samples,
        max_normalized_deviation=max_dev,
        band_violations=violations,
        passed=violations <= max_violations,
    )


def fd_expected_grad(
    p: StepProbabilities, label: int, h: float = FD_STEP
) -> tuple[float, float]:
    """Central finite differences of expected_step_loss.

    The target partial moves mass between the target and the remaining
    non-buffer coordinate; the buffer partial moves mass between the
    buffer and that coordinate, matching the directions the analytic
    partials hold fixed.
    """

    def shift(dt: float, db: float) -> StepProbabilities:
        pr, pw, pb = p.p_right, p.p_wrong, p.p_buffer
        if label == 1:
            return StepProbabilities(pr + dt, pw - dt - db, pb + db)
        return StepProbabilities(pr - dt - db, pw + dt, pb + db)

    d_target = (expected_step_loss(shift(h, 0.0), label) - expected_step_loss(shift(-h, 0.0), label)) / (2 * h)
    d_buffer = (expected_step_loss(shift(0.0, h), label) - expected_step_loss(shift(0.0, -h), label)) / (2 * h)
    return d_target, d_buffer


@dataclass(frozen=True)
class FdGradReport:
    points: int
    max_relative_error: float
    passed: bool


def verify_expected_grad_fd(
    points: int = 1000, seed: int = 0, tol: float = 1e-5
) -> FdGradReport:
    """expected_grad vs finite differences at random interior points."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFD]))
    max_err = 0.0
    for _ in range(points):
        p = _interior_point(rng)
        for label in (0, 1):
            at, ab = expected_grad(p, label)
            nt, nb = fd_expected_grad(p, label)
            max_err = max(max_err, _rel_err(at, nt), _rel_err(ab, nb))
    return FdGradReport(points=points, max_relative_error=max_err, passed=max_err <= tol)


@dataclass(frozen=True)
class GradcheckReport:
    trials: int
    max_relative_error: float
    worst_trial: int
    worst_parameter: str
    passed: bool


def gradcheck_model(trials: int = 50, seed: int = 0, tol: float = 1e-4) -> GradcheckReport:
    """Analytic backward_step vs central differences on tiny random models.

    Every scalar parameter of random linear and one-hidden-layer models
    is perturbed by +-h around a random step with random label, gate, and
    step weight.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    max_err = 0.0
    worst = (0, "")
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6C, trial]))
        feat = FeaturizerConfig(dim=8, hash_seed=int(rng.integers(0, 1000)), use_position=bool(rng.integers(0, 2)))
        hidden = int(rng.choice([0, 4]))
        params = init_params(feat, hidden_dim=hidden, seed=int(rng.integers(0, 10_000)))
        # Overwrite the seeded init with a wider spread so relu kinks and
        # unequal logits are well exercised.
        for arr in params.named_parameters().values():
            arr[...] = rng.normal(0.0, 1.0, size=arr.shape)
        total = int(rng.integers(1, 6))
        pos = int(rng.integers(1, total + 1))
        step = StepContent(
            tokens=tuple(f"t{int(v)}" for v in rng.integers(0, 30, size=6)),
            position=pos,
            is_last=pos == total,
        )
        sv = featurize_step(step, total, feat)
        label = int(rng.integers(0, 2))
        beta = int(rng.integers(0, 2))
        alpha = float(rng.choice([1.0, 3.0]))

        _, probs, cache = forward(sv, params)
        grads = backward_step(cache, probs, label, beta, alpha, params).named()

        def loss_now() -> float:
            _, p, _ = forward(sv, params)
            return step_loss_realized(p, label, beta, alpha)

        for name, arr in params.named_parameters().items():
            flat = arr.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + FD_STEP
                up = loss_now()
                flat[j] = orig - FD_STEP
                down = loss_now()
                flat[j] = orig
                numeric = (up - down) / (2 * FD_STEP)
                err = _rel_err(float(grads[name].reshape(-1)[j]), numeric)
                if err > max_err:
                    max_err = err
                    worst = (trial, name)
    return GradcheckReport(
        trials=trials,
        max_relative_error=max_err,
        worst_trial=worst[0],
        worst_parameter=worst[1],
        passed=max_err <= tol,
    )
