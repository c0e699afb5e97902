"""Harmonic extension of leaf data with respect to an invariant walk."""

from __future__ import annotations

import numpy as np

from .tree_core import (check_leaf_field, edge_level, gradient, height_of, integrate,
                        leaves_of, level, n_leaves, n_vertices, vertex_depths,
                        vertex_indices, dlca_many)
from .walk import WalkProfile


def subtree_sums(f: np.ndarray, N: int) -> list[np.ndarray]:
    """``S[k][..., j]``: sum of ``f`` over the leaves below vertex (k, j)."""
    sums = [None] * (N + 1)
    sums[N] = f
    for k in range(N - 1, -1, -1):
        below = sums[k + 1]
        sums[k] = below[..., 0::2] + below[..., 1::2]
    return sums


def harmonic_extend(profile: WalkProfile, f: np.ndarray) -> np.ndarray:
    """Expected leaf value at absorption, for walks started at every vertex.

    Leaves in the same dlca class with ``x`` carry equal weight, so along the
    root-to-x path the value is ``B[s,s] S(x) + sum_r B[s,r] (S(pi_r x) -
    S(pi_{r+1} x))`` with ``S`` the subtree sums.  Cost is O(N 2**N).  Leaf
    values are copied from ``f`` rather than recomputed.  Leading batch axes
    are allowed.
    """
    N = profile.N
    f = check_leaf_field(f, N)
    B = profile.B
    S = subtree_sums(f, N)
    F = np.empty(f.shape[:-1] + (n_vertices(N),))
    for s in range(N):
        j = np.arange(1 << s)
        value = B[s, s] * S[s]
        for r in range(s):
            ancestor = S[r][..., j >> (s - r)]
            next_ancestor = S[r + 1][..., j >> (s - r - 1)]
            value = value + B[s, r] * (ancestor - next_ancestor)
        F[..., level(s)] = value
    F[..., level(N)] = f
    return F


def extension_matrix(profile: WalkProfile) -> np.ndarray:
    """Dense ``b_{d(x), dlca(x, w)}`` matrix, vertices by leaves.

    Direct evaluation of the double sum; meant for small trees only.
    """
    N = profile.N
    d = vertex_depths(N)[:, None]
    j = vertex_indices(N)[:, None]
    leaves = np.arange(n_leaves(N))[None, :]
    r = dlca_many(d, j, N, leaves)
    return profile.B[d, r]


def harmonic_extend_naive(profile: WalkProfile, f: np.ndarray) -> np.ndarray:
    f = check_leaf_field(f, profile.N)
    return f @ extension_matrix(profile).T


def induced_T(profile: WalkProfile, g: np.ndarray) -> np.ndarray:
    """Edge-level operator: gradient of the extension of integrated ``g``."""
    N = profile.N
    F = integrate(g, N)
    return gradient(harmonic_extend(profile, leaves_of(F, N)), N)


def harmonicity_residual(profile: WalkProfile, F: np.ndarray) -> float:
    """Largest violation of the one-step mean-value property at internal vertices."""
    N = profile.N
    F = np.asarray(F, dtype=float)
    if height_of(F, "vertices") != N:
        raise ValueError("vertex field does not match the profile height")
    x = profile.x
    worst = 0.0
    for s in range(N):
        here = F[..., level(s)]
        below = F[..., level(s + 1)]
        mean = 0.5 * x[s] * (below[..., 0::2] + below[..., 1::2])
        if s > 0:
            mean = mean + (1.0 - x[s]) * np.repeat(F[..., level(s - 1)], 2, axis=-1)
        worst = max(worst, float(np.max(np.abs(here - mean))))
    return worst


def averaging_extend(f: np.ndarray) -> np.ndarray:
    """Each vertex receives the mean of ``f`` over its leaf descendants."""
    N = height_of(f, "leaves")
    f = check_leaf_field(f, N)
    S = subtree_sums(f, N)
    F = np.empty(f.shape[:-1] + (n_vertices(N),))
    for k in range(N):
        F[..., level(k)] = np.ldexp(S[k], k - N)
    F[..., level(N)] = f
    return F


def depth_profile_field(G: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Edge field ``G(d(y)) * signs[y]``: invariant modulus, arbitrary sign."""
    G = np.asarray(G, dtype=float)
    N = G.shape[-1]
    g = np.empty(signs.shape)
    for k in range(1, N + 1):
        g[..., edge_level(k)] = G[..., k - 1, None] * signs[..., edge_level(k)]
    return g
