"""Pure-numpy implementations of the training hot loops.

Feature rows arrive in CSR form: ``idx``/``val`` hold the nonzero column
indices and values of every step in a batch, ``indptr`` the row offsets
(one row per step). All functions are allocation-light and loop-free so
they stay usable as a fallback when the jit backend is unavailable.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _row_ids(indptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(indptr.size - 1), np.diff(indptr))


def forward_linear(w_out, b_out, idx, val, indptr):
    """Affine map of sparse rows straight to the three output logits."""
    n = indptr.size - 1
    logits = np.zeros((n, 3))
    if idx.size:
        contrib = w_out[:, idx] * val  # (3, nnz)
        np.add.at(logits, _row_ids(indptr), contrib.T)
    logits += b_out
    return logits


def forward_mlp(w_in, b_in, w_out, b_out, idx, val, indptr):
    """Sparse affine -> relu -> affine; returns pre-activations and logits."""
    n = indptr.size - 1
    hpre = np.zeros((n, b_in.size))
    if idx.size:
        contrib = (w_in[:, idx] * val).T  # (nnz, H)
        np.add.at(hpre, _row_ids(indptr), contrib)
    hpre += b_in
    hidden = np.maximum(hpre, 0.0)
    logits = hidden @ w_out.T + b_out
    return hpre, logits


def softmax3(logits, eps):
    """Row-wise softmax over three logits, floored at eps and renormalized."""
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    np.maximum(p, eps, out=p)
    p /= p.sum(axis=1, keepdims=True)
    return p


def _target_cols(labels):
    # column 0 = right, 1 = wrong, 2 = buffer
    return np.where(labels == 1, 0, 1)


def realized_loss_dz(probs, labels, betas, alphas, eps):
    """Per-step realized loss and its gradient w.r.t. the logits.

    With g = p_target + beta * p_buffer the logit gradient is
    alpha * (p_k - s_k / g), s_k the summand of g at component k; the
    gate is treated as a constant of the backward pass.
    """
    n = probs.shape[0]
    rows = np.arange(n)
    cols = _target_cols(labels)
    target = probs[rows, cols]
    gate = betas * probs[:, 2]
    g = np.maximum(target + gate, eps)
    losses = -alphas * np.log(g)
    s = np.zeros((n, 3))
    s[rows, cols] = target
    s[:, 2] += gate
    dz = alphas[:, None] * (probs - s / g[:, None])
    return losses, dz


def expected_loss_dz(probs, labels, alphas, eps):
    """Per-step expected loss and its exact logit gradient.

    The upstream gradient on (p_target, p_buffer) comes from the closed
    forms of the gate-averaged loss and is chained through the softmax
    Jacobian (dz_k = p_k * (u_k - sum_j u_j p_j)).
    """
    n = probs.shape[0]
    rows = np.arange(n)
    cols = _target_cols(labels)
    target = np.maximum(probs[rows, cols], eps)
    pb = probs[:, 2]
    gsum = np.maximum(target + pb, eps)
    losses = -alphas * (pb * np.log(gsum) + (1.0 - pb) * np.log(target))
    u = np.zeros((n, 3))
    u[rows, cols] = -(pb / gsum + (1.0 - pb) / target)
    u[:, 2] = -(np.log(gsum / target) + pb / gsum)
    inner = (u * probs).sum(axis=1, keepdims=True)
    dz = alphas[:, None] * probs * (u - inner)
    return losses, dz


def backward_linear(dzs, idx, val, indptr, dim):
    """Accumulate logit gradients into the linear layer parameters."""
    gb_out = dzs.sum(axis=0)
    gw_out_t = np.zeros((dim, 3))
    if idx.size:
        np.add.at(gw_out_t, idx, val[:, None] * dzs[_row_ids(indptr)])
    return gw_out_t.T.copy(), gb_out


def backward_mlp(dzs, hpre, w_out, idx, val, indptr, dim):
    """Backprop logit gradients through relu and both affine layers."""
    hidden = np.maximum(hpre, 0.0)
    gb_out = dzs.sum(axis=0)
    gw_out = dzs.T @ hidden
    dh = (dzs @ w_out) * (hpre > 0.0)
    gb_in = dh.sum(axis=0)
    gw_in_t = np.zeros((dim, w_out.shape[1]))
    if idx.size:
        np.add.at(gw_in_t, idx, val[:, None] * dh[_row_ids(indptr)])
    return gw_in_t.T.copy(), gb_in, gw_out, gb_out


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One in-place adaptive-moment step; t is the 1-based update count."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
