"""Step scorer: a shallow network over hashed step features, trained by
manual backpropagation under the buffered objective.

The scorer is either linear (hidden_dim = 0) or a one-hidden-layer relu
network, with three output logits mapped onto the (right, wrong, buffer)
simplex. Training batches whole trajectories: each trajectory averages
its own per-step losses, the batch averages over trajectories, and the
parameters move by an adaptive-moment update after each batch.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import EPS_PROB, StepProbabilities, Trajectory, make_trajectory
from .features import FeaturizerConfig, SparseVector, StepMatrix, featurize_dataset
from .objective import NORMAL_STEP_WEIGHT, LossConfig

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


@dataclass
class ScorerParameters:
    """Model weights plus attached optimizer state.

    weights_in/bias_in are absent (zero-size) for the linear model; the
    moment accumulators mirror the parameter shapes exactly.
    """

    featurizer: FeaturizerConfig
    hidden_dim: int
    weights_in: np.ndarray
    bias_in: np.ndarray
    weights_out: np.ndarray
    bias_out: np.ndarray
    opt_m: Optional[dict[str, np.ndarray]] = None
    opt_v: Optional[dict[str, np.ndarray]] = None
    step_count: int = 0

    def named_parameters(self) -> dict[str, np.ndarray]:
        return {
            "weights_in": self.weights_in,
            "bias_in": self.bias_in,
            "weights_out": self.weights_out,
            "bias_out": self.bias_out,
        }

    def validate(self) -> "ScorerParameters":
        h, d = self.hidden_dim, self.featurizer.dim
        out_cols = h if h > 0 else d
        expect = {
            "weights_in": (h, d) if h > 0 else (0, d),
            "bias_in": (h,),
            "weights_out": (3, out_cols),
            "bias_out": (3,),
        }
        for name, arr in self.named_parameters().items():
            if arr.shape != expect[name]:
                raise ValueError(f"dimension mismatch: {name} has shape {arr.shape}, expected {expect[name]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
        for state in (self.opt_m, self.opt_v):
            if state is not None:
                for name, arr in self.named_parameters().items():
                    if state[name].shape != arr.shape:
                        raise ValueError(f"optimizer state shape mismatch for {name}")
        return self


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 16
    epochs: int = 5
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


def init_params(
    featurizer: FeaturizerConfig, hidden_dim: int = 64, seed: int = 0
) -> ScorerParameters:
    """Seeded scaled-normal initialization; biases start at zero."""
    if hidden_dim < 0:
        raise ValueError(f"hidden_dim must be >= 0, got {hidden_dim}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5C08E]))
    d = featurizer.dim
    if hidden_dim > 0:
        weights_in = rng.normal(0.0, np.sqrt(2.0 / d), size=(hidden_dim, d))
        weights_out = rng.normal(0.0, np.sqrt(1.0 / hidden_dim), size=(3, hidden_dim))
    else:
        weights_in = np.zeros((0, d))
        weights_out = rng.normal(0.0, np.sqrt(1.0 / d), size=(3, d))
    return ScorerParameters(
        featurizer=featurizer,
        hidden_dim=hidden_dim,
        weights_in=np.ascontiguousarray(weights_in),
        bias_in=np.zeros(hidden_dim),
        weights_out=np.ascontiguousarray(weights_out),
        bias_out=np.zeros(3),
    ).validate()


def _forward_csr(params: ScorerParameters, idx, val, indptr):
    """Forward a CSR block of step rows; returns (hpre or None, logits, probs)."""
    if params.hidden_dim > 0:
        hpre, logits = kernels.forward_mlp(
            params.weights_in, params.bias_in, params.weights_out, params.bias_out,
            idx, val, indptr,
        )
    else:
        hpre = None
        logits = kernels.forward_linear(params.weights_out, params.bias_out, idx, val, indptr)
    probs = kernels.softmax3(logits, EPS_PROB)
    return hpre, logits, probs


def forward(features: SparseVector, params: ScorerParameters):
    """Score one step; returns (logits, StepProbabilities, cache for backward)."""
    if features.dim != params.featurizer.dim:
        raise ValueError(
            f"dimension mismatch: features dim {features.dim} vs model dim {params.featurizer.dim}"
        )
    indptr = np.array([0, features.indices.size], dtype=np.int64)
    hpre, logits, probs = _forward_csr(params, features.indices, features.values, indptr)
    cache = {"features": features, "hpre": hpre, "indptr": indptr}
    p = StepProbabilities(probs[0, 0], probs[0, 1], probs[0, 2])
    return logits[0], p, cache


@dataclass
class ParamGrads:
    weights_in: np.ndarray
    bias_in: np.ndarray
    weights_out: np.ndarray
    bias_out: np.ndarray

    def named(self) -> dict[str, np.ndarray]:
        return {
            "weights_in": self.weights_in,
            "bias_in": self.bias_in,
            "weights_out": self.weights_out,
            "bias_out": self.bias_out,
        }


def backward_step(
    cache, probs: StepProbabilities, label: int, beta: int, alpha: float,
    params: ScorerParameters,
) -> ParamGrads:
    """Gradients of the realized step loss for one step, gate held constant."""
    parr = np.array([[probs.p_right, probs.p_wrong, probs.p_buffer]])
    _, dz = kernels.realized_loss_dz(
        parr,
        np.array([label], dtype=np.int8),
        np.array([beta], dtype=np.int8),
        np.array([float(alpha)]),
        EPS_PROB,
    )
    sv: SparseVector = cache["features"]
    indptr = cache["indptr"]
    if params.hidden_dim > 0:
        gw_in, gb_in, gw_out, gb_out = kernels.backward_mlp(
            dz, cache["hpre"], params.weights_out, sv.indices, sv.values, indptr, sv.dim
        )
    else:
        gw_out, gb_out = kernels.backward_linear(dz, sv.indices, sv.values, indptr, sv.dim)
        gw_in = np.zeros((0, sv.dim))
        gb_in = np.zeros(0)
    return ParamGrads(gw_in, gb_in, gw_out, gb_out)


def _step_weights(traj_lens: np.ndarray, last_step_weight: float) -> np.ndarray:
    """Per-step alpha vector for a batch: last step of each trajectory amplified."""
    alphas = np.full(int(traj_lens.sum()), NORMAL_STEP_WEIGHT)
    last_positions = np.cumsum(traj_lens) - 1
    alphas[last_positions] = last_step_weight
    return alphas


def _ensure_opt_state(params: ScorerParameters) -> None:
    if params.opt_m is None:
        params.opt_m = {k: np.zeros_like(v) for k, v in params.named_parameters().items()}
    if params.opt_v is None:
        params.opt_v = {k: np.zeros_like(v) for k, v in params.named_parameters().items()}


def train(
    dataset: Sequence[Trajectory],
    params: ScorerParameters,
    config: TrainConfig,
    features: Optional[StepMatrix] = None,
) -> tuple[ScorerParameters, list[float]]:
    """Train in place over seeded-shuffle epochs; returns (params, per-epoch mean loss).

    Pseudo labels are recomputed from the outcome each time a trajectory is
    visited; the gold first-error index is never read. Fully deterministic
    given (seed, config, dataset).
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    params.validate()
    if features is None:
        features = featurize_dataset(list(dataset), params.featurizer)
    if features.dim != params.featurizer.dim:
        raise ValueError(f"dimension mismatch: features dim {features.dim} vs model dim {params.featurizer.dim}")
    loss_cfg = config.loss
    outcomes = np.array([t.outcome for t in dataset], dtype=np.int8)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7A417]))
    _ensure_opt_state(params)
    named = params.named_parameters()
    trace: list[float] = []
    n = len(dataset)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            traj_losses = _train_batch(params, features, outcomes, batch, loss_cfg, config, rng, named)
            bad = np.flatnonzero(~np.isfinite(traj_losses))
            if bad.size:
                raise FloatingPointError(
                    f"non-finite loss for trajectory {dataset[int(batch[bad[0]])].id!r}"
                )
            epoch_loss += float(traj_losses.sum())
        trace.append(epoch_loss / n)
    return params, trace


def _gather_batch(features: StepMatrix, batch: np.ndarray):
    """Slice the CSR rows of the selected trajectories into one dense batch block."""
    nnz_parts = []
    idx_parts = []
    val_parts = []
    step_counts = []
    for ti in batch:
        s0, s1 = features.traj_indptr[ti], features.traj_indptr[ti + 1]
        k0, k1 = features.step_indptr[s0], features.step_indptr[s1]
        idx_parts.append(features.idx[k0:k1])
        val_parts.append(features.val[k0:k1])
        nnz_parts.append(np.diff(features.step_indptr[s0 : s1 + 1]))
        step_counts.append(int(s1 - s0))
    idx = np.concatenate(idx_parts)
    val = np.concatenate(val_parts)
    nnz = np.concatenate(nnz_parts)
    indptr = np.zeros(nnz.size + 1, dtype=np.int64)
    np.cumsum(nnz, out=indptr[1:])
    return idx, val, indptr, np.array(step_counts, dtype=np.int64)


def _train_batch(params, features, outcomes, batch, loss_cfg, config, rng, named):
    idx, val, indptr, lens = _gather_batch(features, batch)
    labels = np.repeat(outcomes[batch], lens)
    alphas = _step_weights(lens, loss_cfg.last_step_weight)
    hpre, _logits, probs = _forward_csr(params, idx, val, indptr)

    if loss_cfg.mode == "expected":
        losses, dz = kernels.expected_loss_dz(probs, labels, alphas, loss_cfg.eps_prob)
    else:
        if loss_cfg.buffer_enabled:
            betas = (rng.random(labels.size) < probs[:, 2]).astype(np.int8)
            last_positions = np.cumsum(lens) - 1
            betas[last_positions] = 0
        else:
            betas = np.zeros(labels.size, dtype=np.int8)
        losses, dz = kernels.realized_loss_dz(probs, labels, betas, alphas, loss_cfg.eps_prob)

    # Per-step scale folds the 1/T trajectory mean and the 1/B batch mean.
    b = batch.size
    step_scale = np.repeat(1.0 / (lens * b), lens)
    traj_bounds = np.zeros(b + 1, dtype=np.int64)
    np.cumsum(lens, out=traj_bounds[1:])
    traj_losses = np.add.reduceat(losses, traj_bounds[:-1]) / lens

    dzs = dz * step_scale[:, None]
    if params.hidden_dim > 0:
        gw_in, gb_in, gw_out, gb_out = kernels.backward_mlp(
            dzs, hpre, params.weights_out, idx, val, indptr, features.dim
        )
        grads = {"weights_in": gw_in, "bias_in": gb_in, "weights_out": gw_out, "bias_out": gb_out}
    else:
        gw_out, gb_out = kernels.backward_linear(dzs, idx, val, indptr, features.dim)
        grads = {
            "weights_in": np.zeros((0, features.dim)),
            "bias_in": np.zeros(0),
            "weights_out": gw_out,
            "bias_out": gb_out,
        }
    params.step_count += 1
    for name, p in named.items():
        if p.size == 0:
            continue
        kernels.adam_update(
            p, grads[name], params.opt_m[name], params.opt_v[name],
            params.step_count, config.learning_rate, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
        )
    return traj_losses


def score_dataset(
    traces: Sequence[Trajectory],
    params: ScorerParameters,
    features: Optional[StepMatrix] = None,
) -> list[np.ndarray]:
    """Right-probability per step for every trajectory."""
    if features is None:
        features = featurize_dataset(list(traces), params.featurizer)
    all_idx = features.idx
    all_val = features.val
    _, _, probs = _forward_csr(params, all_idx, all_val, features.step_indptr)
    right = probs[:, 0]
    return [
        right[features.traj_indptr[i] : features.traj_indptr[i + 1]].copy()
        for i in range(len(traces))
    ]


def score_steps(step_token_lists: Sequence[Sequence[str]], params: ScorerParameters) -> np.ndarray:
    """Right scores for one bare step sequence (used for reranking candidates)."""
    traj = make_trajectory("candidate", step_token_lists, outcome=1)
    return score_dataset([traj], params)[0]


def save_checkpoint(params: ScorerParameters, path: str) -> None:
    """Write a self-describing checkpoint atomically (temp file + rename)."""
    params.validate()
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "featurizer": {
            "dim": params.featurizer.dim,
            "hash_seed": params.featurizer.hash_seed,
            "use_position": params.featurizer.use_position,
        },
        "hidden_dim": params.hidden_dim,
        "parameters": {
            "weights_in": params.weights_in.ravel().tolist(),
            "bias_in": params.bias_in.tolist(),
            "weights_out": params.weights_out.ravel().tolist(),
            "bias_out": params.bias_out.tolist(),
        },
        "step_count": params.step_count,
    }
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(doc, f)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str, expect_featurizer: Optional[FeaturizerConfig] = None) -> ScorerParameters:
    """Read a checkpoint; optionally cross-check the featurizer header."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"malformed checkpoint {path!r}: {exc}") from exc
    try:
        if doc["format_version"] != CHECKPOINT_VERSION:
            raise ValueError("unsupported format_version")
        feat = FeaturizerConfig(
            dim=int(doc["featurizer"]["dim"]),
            hash_seed=int(doc["featurizer"]["hash_seed"]),
            use_position=bool(doc["featurizer"]["use_position"]),
        )
        h = int(doc["hidden_dim"])
        d = feat.dim
        raw = doc["parameters"]
        out_cols = h if h > 0 else d
        weights_in = np.array(raw["weights_in"], dtype=np.float64).reshape(h, d)
        bias_in = np.array(raw["bias_in"], dtype=np.float64).reshape(h)
        weights_out = np.array(raw["weights_out"], dtype=np.float64).reshape(3, out_cols)
        bias_out = np.array(raw["bias_out"], dtype=np.float64).reshape(3)
        step_count = int(doc["step_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed checkpoint {path!r}: {exc}") from exc
    if expect_featurizer is not None and feat != expect_featurizer:
        raise ValueError(
            f"dimension mismatch: checkpoint featurizer {feat} does not match expected {expect_featurizer}"
        )
    return ScorerParameters(
        featurizer=feat,
        hidden_dim=h,
        weights_in=np.ascontiguousarray(weights_in),
        bias_in=bias_in,
        weights_out=np.ascontiguousarray(weights_out),
        bias_out=bias_out,
        step_count=step_count,
    ).validate()
