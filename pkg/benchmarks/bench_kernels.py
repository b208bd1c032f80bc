"""Timing comparison of the compiled kernels against the pure-numpy fallback.

Runs every hot kernel on a batch shaped like real training traffic
(dozens of steps, a handful of nonzero features each) and reports the
per-call time of both implementations. The compiled path is warmed up
first so JIT compilation is not measured.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--dim D] [--hidden H]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from prmlab.kernels import accel, reference


def build_batch(steps: int, dim: int, nnz_per_step: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    idx = np.concatenate(
        [np.sort(rng.choice(dim, size=nnz_per_step, replace=False)) for _ in range(steps)]
    ).astype(np.int64)
    val = rng.random(steps * nnz_per_step)
    indptr = np.arange(steps + 1, dtype=np.int64) * nnz_per_step
    labels = rng.integers(0, 2, size=steps).astype(np.int8)
    betas = rng.integers(0, 2, size=steps).astype(np.int8)
    alphas = np.where(rng.random(steps) < 0.15, 3.0, 1.0)
    return idx, val, indptr, labels, betas, alphas


def bench(fn, args, repeats: int = 200) -> float:
    fn(*args)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=104)
    ap.add_argument("--dim", type=int, default=1024)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--nnz", type=int, default=13)
    args = ap.parse_args()

    steps, dim, hidden = args.steps, args.dim, args.hidden
    idx, val, indptr, labels, betas, alphas = build_batch(steps, dim, args.nnz)
    rng = np.random.default_rng(1)
    w_in = np.ascontiguousarray(rng.normal(0, 0.1, (hidden, dim)))
    b_in = np.zeros(hidden)
    w_out_h = np.ascontiguousarray(rng.normal(0, 0.1, (3, hidden)))
    w_out_d = np.ascontiguousarray(rng.normal(0, 0.1, (3, dim)))
    b_out = np.zeros(3)
    eps = 1e-12

    hpre, logits = reference.forward_mlp(w_in, b_in, w_out_h, b_out, idx, val, indptr)
    probs = reference.softmax3(logits, eps)
    _, dz = reference.realized_loss_dz(probs, labels, betas, alphas, eps)
    grad = rng.normal(0, 0.01, w_in.shape)
    m = np.zeros_like(w_in)
    v = np.zeros_like(w_in)

    cases = [
        ("forward_linear", "forward_linear", (w_out_d, b_out, idx, val, indptr)),
        ("forward_mlp", "forward_mlp", (w_in, b_in, w_out_h, b_out, idx, val, indptr)),
        ("softmax3", "softmax3", (logits, eps)),
        ("realized_loss_dz", "realized_loss_dz", (probs, labels, betas, alphas, eps)),
        ("expected_loss_dz", "expected_loss_dz", (probs, labels, alphas, eps)),
        ("backward_linear", "backward_linear", (dz, idx, val, indptr, dim)),
        ("backward_mlp", "backward_mlp", (dz, hpre, w_out_h, idx, val, indptr, dim)),
        ("adam_update", "adam_update", (w_in.copy(), grad, m, v, 1, 1e-3, 0.9, 0.999, 1e-8)),
    ]

    print(f"batch: {steps} steps, dim {dim}, hidden {hidden}, {args.nnz} nnz/step")
    print(f"{'kernel':<18} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for name, attr, case_args in cases:
        t_ref = bench(getattr(reference, attr), case_args)
        t_acc = bench(getattr(accel, attr), case_args)
        print(f"{name:<18} {t_ref * 1e6:>10.1f}us {t_acc * 1e6:>10.1f}us {t_ref / t_acc:>7.1f}x")


if __name__ == "__main__":
    main()
