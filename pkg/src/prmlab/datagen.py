"""Synthetic reasoning traces with planted first errors and label noise.

Two disjoint vocabularies stand in for correct and faulty reasoning.
A trace optionally gets a planted first-error index; steps from there on
mix in error-vocabulary tokens. The emitted outcome label can contradict
the planted truth with a configurable flip rate, so the two noise
channels of weak supervision (wrong pseudo labels inside failed traces,
and outright outcome noise) are independently controllable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trajectory, make_trajectory

VOCAB_SIZE = 200

CORRECT_VOCAB = tuple(f"c{i:03d}" for i in range(VOCAB_SIZE))
ERROR_VOCAB = tuple(f"x{i:03d}" for i in range(VOCAB_SIZE))


@dataclass(frozen=True)
class GenConfig:
    num_traces: int
    steps_min: int = 3
    steps_max: int = 10
    error_rate: float = 0.5
    outcome_flip_rate: float = 0.1
    vocab_overlap: float = 0.3
    tokens_per_step: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_traces < 1:
            raise ValueError(f"num_traces must be >= 1, got {self.num_traces}")
        if not 1 <= self.steps_min <= self.steps_max:
            raise ValueError(f"need 1 <= steps_min <= steps_max, got {self.steps_min}/{self.steps_max}")
        for name in ("error_rate", "outcome_flip_rate", "vocab_overlap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.tokens_per_step < 1:
            raise ValueError(f"tokens_per_step must be >= 1, got {self.tokens_per_step}")


def _correct_step(rng: np.random.Generator, k: int) -> list[str]:
    return [CORRECT_VOCAB[i] for i in rng.integers(0, VOCAB_SIZE, size=k)]


def _error_step(rng: np.random.Generator, k: int, overlap: float) -> list[str]:
    # A fixed (1 - overlap) fraction of tokens comes from the error
    # vocabulary; positions are shuffled so order carries no signal.
    n_err = int(round((1.0 - overlap) * k))
    toks = [ERROR_VOCAB[i] for i in rng.integers(0, VOCAB_SIZE, size=n_err)]
    toks += [CORRECT_VOCAB[i] for i in rng.integers(0, VOCAB_SIZE, size=k - n_err)]
    perm = rng.permutation(len(toks))
    return [toks[i] for i in perm]


def generate_trace(config: GenConfig, index: int) -> Trajectory:
    """One trace, deterministic in (config.seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    n_steps = int(rng.integers(config.steps_min, config.steps_max + 1))
    plant_error = rng.random() < config.error_rate
    first_error = int(rng.integers(1, n_steps + 1)) if plant_error else None
    steps = []
    for pos in range(1, n_steps + 1):
        if first_error is not None and pos >= first_error:
            steps.append(_error_step(rng, config.tokens_per_step, config.vocab_overlap))
        else:
            steps.append(_correct_step(rng, config.tokens_per_step))
    true_outcome = 0 if plant_error else 1
    outcome = true_outcome
    if rng.random() < config.outcome_flip_rate:
        outcome = 1 - outcome
    return make_trajectory(
        f"trace-{index:05d}", steps, outcome=outcome, gold_first_error=first_error
    )


def generate(config: GenConfig, workers: int = 1) -> list[Trajectory]:
    """All traces in index order; worker count never changes the output."""
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: generate_trace(config, i), range(config.num_traces)))
    return [generate_trace(config, i) for i in range(config.num_traces)]
