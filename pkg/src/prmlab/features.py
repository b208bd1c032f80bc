"""Hashing-trick featurizer for individual reasoning steps.

Tokens are hashed into a fixed number of buckets and counted; the count
vector is L2-normalized. When position features are enabled the last two
indices of the feature space are reserved (excluded from the hashing
range) for position/T and an is-last indicator, written after the token
part is normalized so repeating a token list leaves the vector direction
unchanged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .core import StepContent, Trajectory


@dataclass(frozen=True)
class FeaturizerConfig:
    dim: int = 1024
    hash_seed: int = 0
    use_position: bool = True

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")

    @property
    def hash_range(self) -> int:
        return self.dim - 2 if self.use_position else self.dim


def token_bucket(token: str, seed: int, hash_range: int) -> int:
    """Stable bucket of a token, independent of the process hash seed."""
    h = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=True)
    )
    return int.from_bytes(h.digest(), "little") % hash_range


@dataclass(frozen=True)
class SparseVector:
    """Sorted-index sparse view of one step's feature vector."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


def featurize_step(step: StepContent, total_steps: int, config: FeaturizerConfig) -> SparseVector:
    """Sparse feature vector for one step."""
    counts: dict[int, float] = {}
    for tok in step.tokens:
        b = token_bucket(tok, config.hash_seed, config.hash_range)
        counts[b] = counts.get(b, 0.0) + 1.0
    idx = np.array(sorted(counts), dtype=np.int64)
    val = np.array([counts[i] for i in idx], dtype=np.float64)
    norm = np.sqrt((val * val).sum())
    if norm > 0.0:
        val /= norm
    if config.use_position:
        pos_idx = [config.dim - 2]
        pos_val = [step.position / total_steps]
        if step.is_last:
            pos_idx.append(config.dim - 1)
            pos_val.append(1.0)
        idx = np.concatenate([idx, np.array(pos_idx, dtype=np.int64)])
        val = np.concatenate([val, np.array(pos_val, dtype=np.float64)])
    return SparseVector(dim=config.dim, indices=idx, values=val)


@dataclass(frozen=True)
class StepMatrix:
    """CSR feature rows for every step of a trajectory batch.

    ``step_indptr`` delimits the nonzeros of each step row;
    ``traj_indptr`` delimits the step rows of each trajectory.
    """

    dim: int
    idx: np.ndarray
    val: np.ndarray
    step_indptr: np.ndarray
    traj_indptr: np.ndarray


def featurize_dataset(traces: list[Trajectory], config: FeaturizerConfig) -> StepMatrix:
    """Featurize every step of every trajectory into one CSR block."""
    idx_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    step_counts: list[int] = []
    traj_steps: list[int] = []
    for traj in traces:
        n = traj.num_steps
        traj_steps.append(n)
        for step in traj.steps:
            sv = featurize_step(step, n, config)
            idx_parts.append(sv.indices)
            val_parts.append(sv.values)
            step_counts.append(sv.indices.size)
    step_indptr = np.zeros(len(step_counts) + 1, dtype=np.int64)
    np.cumsum(step_counts, out=step_indptr[1:])
    traj_indptr = np.zeros(len(traj_steps) + 1, dtype=np.int64)
    np.cumsum(traj_steps, out=traj_indptr[1:])
    idx = np.concatenate(idx_parts) if idx_parts else np.zeros(0, dtype=np.int64)
    val = np.concatenate(val_parts) if val_parts else np.zeros(0, dtype=np.float64)
    return StepMatrix(
        dim=config.dim, idx=idx, val=val, step_indptr=step_indptr, traj_indptr=traj_indptr
    )
