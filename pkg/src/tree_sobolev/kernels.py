"""Kernels of the edge-level operator and their depth reductions.

``K(x, y)`` is the matrix of ``T`` on edge fields.  It splits into the
non-ancestral part ``K0`` (x, y incomparable, entries <= 0) and the
ancestral part ``K1`` (one descends from the other, entries >= 0).  Summing
a row over all ``y`` of a fixed depth ``t`` gives the N x N kernels ``L0``
and ``L1`` acting on depth-invariant fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree_core import (KERNEL_N_MAX, TreeWeights, VertexRef, dlca, dlca_many,
                        edge_depths, edge_indices, n_leaves)
from .walk import WalkProfile, check_exponent


def _check_edge(v: VertexRef, N: int) -> VertexRef:
    v = VertexRef(*v)
    if v.depth < 1 or not v.is_valid(N):
        raise ValueError(f"{v} is not an edge of the tree of height {N}")
    return v


def _closed_form_tables(profile: WalkProfile) -> tuple[np.ndarray, np.ndarray]:
    """Depth-class coefficients so that ``K = 2**-t * table[s, r]``.

    ``neg[s, r] = -q_s sum_{k<=r} 2^k p_{s-1,k}`` for incomparable pairs and
    ``pos[s, r] = q_s sum_{k<r} (2^r - 2^k) p_{s-1,k}`` for comparable ones.
    """
    N = profile.N
    q, P = profile.q, profile.P
    pow2 = np.ldexp(1.0, np.arange(N + 1))
    neg = np.zeros((N + 1, N + 1))
    pos = np.zeros((N + 1, N + 1))
    for s in range(1, N + 1):
        row = P[s - 1]
        for r in range(N + 1):
            neg[s, r] = -q[s] * np.sum(pow2[:r + 1] * row[:r + 1])
            pos[s, r] = q[s] * np.sum((pow2[r] - pow2[:r]) * row[:r])
    return neg, pos


def kernel_closed_form(profile: WalkProfile, x: VertexRef, y: VertexRef) -> float:
    N = profile.N
    x, y = _check_edge(x, N), _check_edge(y, N)
    s, t = x.depth, y.depth
    r = dlca(x, y)
    q, P = profile.q, profile.P
    k = np.arange(r + 1)
    if r == min(s, t):
        return float(q[s] * 2.0 ** -t * np.sum((2.0 ** r - 2.0 ** k[:-1]) * P[s - 1, :r]))
    return float(-q[s] * 2.0 ** -t * np.sum(2.0 ** k * P[s - 1, :r + 1]))


def kernel_bruteforce(profile: WalkProfile, x: VertexRef, y: VertexRef) -> float:
    """Sum of ``a_{d(x), dlca(x, w)}`` over the leaves ``w`` below ``y``."""
    N = profile.N
    x, y = _check_edge(x, N), _check_edge(y, N)
    A = profile.A
    width = N - y.depth
    total = 0.0
    for w in range(y.index << width, (y.index + 1) << width):
        total += A[x.depth, dlca(x, (N, w))]
    return float(total)


def _guard(N: int) -> None:
    if N > KERNEL_N_MAX:
        raise ValueError(f"dense edge kernels are limited to N <= {KERNEL_N_MAX}, got {N}")


def _pair_arrays(N: int):
    d = edge_depths(N)
    j = edge_indices(N)
    s, t = d[:, None], d[None, :]
    r = dlca_many(s, j[:, None], t, j[None, :])
    return s, t, r


def kernel_matrix(profile: WalkProfile) -> np.ndarray:
    """Dense closed-form kernel over all edge pairs (N <= 10)."""
    N = profile.N
    _guard(N)
    neg, pos = _closed_form_tables(profile)
    s, t, r = _pair_arrays(N)
    comparable = r == np.minimum(s, t)
    return np.ldexp(np.where(comparable, pos[s, r], neg[s, r]), -t)


def kernel_parts(profile: WalkProfile) -> tuple[np.ndarray, np.ndarray]:
    """``(K0, K1)``: non-ancestral and ancestral parts with disjoint supports."""
    K = kernel_matrix(profile)
    s, t, r = _pair_arrays(profile.N)
    comparable = r == np.minimum(s, t)
    return np.where(comparable, 0.0, K), np.where(comparable, K, 0.0)


def kernel_matrix_bruteforce(profile: WalkProfile) -> np.ndarray:
    """Kernel from the leaf sum, vectorized as (edges x leaves) @ (leaves x edges)."""
    N = profile.N
    _guard(N)
    d = edge_depths(N)
    j = edge_indices(N)
    leaves = np.arange(n_leaves(N))
    per_leaf = profile.A[d[:, None], dlca_many(d[:, None], j[:, None], N, leaves[None, :])]
    below = (leaves[:, None] >> (N - d[None, :])) == j[None, :]
    return per_leaf @ below.astype(float)


def depth_row_sums(K: np.ndarray, N: int) -> np.ndarray:
    """Reduce an edge kernel to N x N by summing rows over each target depth.

    Uses the first edge of each source depth; equivariance makes the
    choice immaterial.
    """
    d = edge_depths(N)
    out = np.zeros((N, N))
    for s in range(1, N + 1):
        row = K[(1 << s) - 2]
        out[s - 1] = np.bincount(d - 1, weights=row, minlength=N)
    return out


def _reduced_core(profile: WalkProfile) -> np.ndarray:
    """``q_s sum_{k<m} (1 - 2^{k-m}) p_{s-1,k}`` with m = min(s, t)."""
    N = profile.N
    q, P = profile.q, profile.P
    out = np.zeros((N, N))
    for s in range(1, N + 1):
        for t in range(1, N + 1):
            m = min(s, t)
            k = np.arange(m)
            out[s - 1, t - 1] = q[s] * np.sum((1.0 - np.ldexp(1.0, k - m)) * P[s - 1, :m])
    return out


def reduced_L0(profile: WalkProfile) -> np.ndarray:
    return -_reduced_core(profile)


def reduced_L1(profile: WalkProfile) -> np.ndarray:
    return _reduced_core(profile)


def reduced_L(profile: WalkProfile) -> np.ndarray:
    """Non-negative kernel ``L = L1 = -L0`` on depth-indexed functions."""
    return _reduced_core(profile)


def reduced_L_bound(profile: WalkProfile) -> np.ndarray:
    """Entrywise upper bound ``q_s prod_{k=m}^{s-1} (1 - q_k)``."""
    N = profile.N
    q = profile.q
    out = np.zeros((N, N))
    for s in range(1, N + 1):
        for t in range(1, N + 1):
            m = min(s, t)
            out[s - 1, t - 1] = q[s] * np.prod(1.0 - q[m:s])
    return out


@dataclass(frozen=True)
class ReversedKernel:
    """Depth-reversed picture: index s stands for tree depth N + 1 - s."""

    Q: np.ndarray
    kernel: np.ndarray
    bound: np.ndarray
    w: np.ndarray
    alpha: np.ndarray


def reversed_weights(weights: TreeWeights) -> np.ndarray:
    """``w_s = 2**(N+1-s) W_{N+1-s}``."""
    return weights.depth_weights()[::-1].copy()


def reversed_q(weights: TreeWeights, p: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Q, alpha)`` with ``alpha_k = w_k**(-1/(p-1))`` and ``Q_s = alpha_s / sum_{k<=s} alpha_k``."""
    p = check_exponent(p)
    w = reversed_weights(weights)
    log_alpha = -np.log(w) / (p - 1.0)
    # alpha is only used in ratios; shift by the max to stay in range
    alpha = np.exp(log_alpha - log_alpha.max())
    Q = alpha / np.cumsum(alpha)
    return Q, alpha


def reversed_bound_matrix(Q: np.ndarray) -> np.ndarray:
    """Upper bound kernel: ``Q_s`` for t <= s, ``Q_s prod_{k=s+1}^t (1 - Q_k)`` beyond."""
    N = Q.size
    out = np.zeros((N, N))
    for s in range(N):
        out[s, :s + 1] = Q[s]
        for t in range(s + 1, N):
            out[s, t] = Q[s] * np.prod(1.0 - Q[s + 1:t + 1])
    return out


def reversed_kernel(weights: TreeWeights, p: float) -> ReversedKernel:
    Q, alpha = reversed_q(weights, p)
    L = reduced_L(WalkProfile.from_weights(weights, p))
    return ReversedKernel(
        Q=Q,
        kernel=L[::-1, ::-1].copy(),
        bound=reversed_bound_matrix(Q),
        w=reversed_weights(weights),
        alpha=alpha,
    )
