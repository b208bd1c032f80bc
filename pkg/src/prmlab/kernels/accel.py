"""Numba-jitted implementations of the training hot loops.

Same contracts as kernels.reference; explicit loops instead of fancy
indexing, which is where the jit wins (many small steps per batch make
per-call numpy overhead the bottleneck). Kernels are cached to disk so
compilation cost is paid once per environment.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def forward_linear(w_out, b_out, idx, val, indptr):
    n = indptr.size - 1
    logits = np.empty((n, 3))
    for s in range(n):
        for k in range(3):
            acc = b_out[k]
            for j in range(indptr[s], indptr[s + 1]):
                acc += w_out[k, idx[j]] * val[j]
            logits[s, k] = acc
    return logits


@njit(cache=True)
def forward_mlp(w_in, b_in, w_out, b_out, idx, val, indptr):
    n = indptr.size - 1
    h = b_in.size
    hpre = np.empty((n, h))
    logits = np.empty((n, 3))
    for s in range(n):
        for j in range(h):
            hpre[s, j] = b_in[j]
        for j in range(indptr[s], indptr[s + 1]):
            c = idx[j]
            x = val[j]
            for q in range(h):
                hpre[s, q] += w_in[q, c] * x
        for k in range(3):
            acc = b_out[k]
            for q in range(h):
                a = hpre[s, q]
                if a > 0.0:
                    acc += w_out[k, q] * a
            logits[s, k] = acc
    return hpre, logits


@njit(cache=True)
def softmax3(logits, eps):
    n = logits.shape[0]
    probs = np.empty((n, 3))
    for s in range(n):
        m = logits[s, 0]
        if logits[s, 1] > m:
            m = logits[s, 1]
        if logits[s, 2] > m:
            m = logits[s, 2]
        e0 = np.exp(logits[s, 0] - m)
        e1 = np.exp(logits[s, 1] - m)
        e2 = np.exp(logits[s, 2] - m)
        tot = e0 + e1 + e2
        p0 = max(e0 / tot, eps)
        p1 = max(e1 / tot, eps)
        p2 = max(e2 / tot, eps)
        tot2 = p0 + p1 + p2
        probs[s, 0] = p0 / tot2
        probs[s, 1] = p1 / tot2
        probs[s, 2] = p2 / tot2
    return probs


@njit(cache=True)
def realized_loss_dz(probs, labels, betas, alphas, eps):
    n = probs.shape[0]
    losses = np.empty(n)
    dz = np.empty((n, 3))
    for s in range(n):
        col = 0 if labels[s] == 1 else 1
        target = probs[s, col]
        gate = betas[s] * probs[s, 2]
        g = target + gate
        if g < eps:
            g = eps
        losses[s] = -alphas[s] * np.log(g)
        for k in range(3):
            sk = 0.0
            if k == col:
                sk = target
            if k == 2:
                sk += gate
            dz[s, k] = alphas[s] * (probs[s, k] - sk / g)
    return losses, dz


@njit(cache=True)
def expected_loss_dz(probs, labels, alphas, eps):
    n = probs.shape[0]
    losses = np.empty(n)
    dz = np.empty((n, 3))
    for s in range(n):
        col = 0 if labels[s] == 1 else 1
        target = probs[s, col]
        if target < eps:
            target = eps
        pb = probs[s, 2]
        gsum = target + pb
        if gsum < eps:
            gsum = eps
        losses[s] = -alphas[s] * (pb * np.log(gsum) + (1.0 - pb) * np.log(target))
        u0 = 0.0
        u1 = 0.0
        ut = -(pb / gsum + (1.0 - pb) / target)
        if col == 0:
            u0 = ut
        else:
            u1 = ut
        u2 = -(np.log(gsum / target) + pb / gsum)
        inner = u0 * probs[s, 0] + u1 * probs[s, 1] + u2 * probs[s, 2]
        dz[s, 0] = alphas[s] * probs[s, 0] * (u0 - inner)
        dz[s, 1] = alphas[s] * probs[s, 1] * (u1 - inner)
        dz[s, 2] = alphas[s] * probs[s, 2] * (u2 - inner)
    return losses, dz


@njit(cache=True)
def backward_linear(dzs, idx, val, indptr, dim):
    n = indptr.size - 1
    gw_out = np.zeros((3, dim))
    gb_out = np.zeros(3)
    for s in range(n):
        for k in range(3):
            gb_out[k] += dzs[s, k]
        for j in range(indptr[s], indptr[s + 1]):
            c = idx[j]
            x = val[j]
            for k in range(3):
                gw_out[k, c] += x * dzs[s, k]
    return gw_out, gb_out


@njit(cache=True)
def backward_mlp(dzs, hpre, w_out, idx, val, indptr, dim):
    n = indptr.size - 1
    h = w_out.shape[1]
    gw_in = np.zeros((h, dim))
    gb_in = np.zeros(h)
    gw_out = np.zeros((3, h))
    gb_out = np.zeros(3)
    dh = np.empty(h)
    for s in range(n):
        for k in range(3):
            gb_out[k] += dzs[s, k]
        for q in range(h):
            a = hpre[s, q]
            if a > 0.0:
                for k in range(3):
                    gw_out[k, q] += dzs[s, k] * a
                acc = 0.0
                for k in range(3):
                    acc += dzs[s, k] * w_out[k, q]
                dh[q] = acc
            else:
                dh[q] = 0.0
        for q in range(h):
            if dh[q] != 0.0:
                gb_in[q] += dh[q]
        for j in range(indptr[s], indptr[s + 1]):
            c = idx[j]
            x = val[j]
            for q in range(h):
                if dh[q] != 0.0:
                    gw_in[q, c] += x * dh[q]
    return gw_in, gb_in, gw_out, gb_out


@njit(cache=True)
def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    flat_p = param.ravel()
    flat_g = grad.ravel()
    flat_m = m.ravel()
    flat_v = v.ravel()
    for i in range(flat_p.size):
        g = flat_g[i]
        flat_m[i] = beta1 * flat_m[i] + (1.0 - beta1) * g
        flat_v[i] = beta2 * flat_v[i] + (1.0 - beta2) * g * g
        mhat = flat_m[i] / bc1
        vhat = flat_v[i] / bc2
        flat_p[i] -= lr * mhat / (np.sqrt(vhat) + eps)
