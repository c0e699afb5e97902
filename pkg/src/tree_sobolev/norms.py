"""Seminorms on the tree and p-operator norm estimates for small matrices."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .tree_core import TreeWeights, check_edge_field, check_vertex_field, edge_depths, gradient
from .walk import check_exponent

logger = logging.getLogger(__name__)


def lp_edge_norm(weights: TreeWeights, g: np.ndarray, p: float) -> np.ndarray:
    """``(sum_x W_{d(x)} |g(x)|**p)**(1/p)`` over edges; batch axes allowed."""
    p = check_exponent(p)
    g = check_edge_field(g, weights.N)
    return np.sum(weights.edge_weights() * np.abs(g) ** p, axis=-1) ** (1.0 / p)


def sobolev_seminorm(weights: TreeWeights, F: np.ndarray, p: float) -> np.ndarray:
    """Weighted p-norm of the discrete gradient of a vertex field."""
    F = check_vertex_field(F, weights.N)
    return lp_edge_norm(weights, gradient(F, weights.N), p)


def weighted_lp(F: np.ndarray, weight: np.ndarray, p: float) -> np.ndarray:
    """``(sum_k weight_k |F(k)|**p)**(1/p)`` for a depth-indexed vector.

    Pass ``TreeWeights.depth_weights()`` for the tree-depth norm or the
    reversed weights ``w`` for the flipped picture.
    """
    p = check_exponent(p)
    F = np.asarray(F, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if F.shape[-1] != weight.size:
        raise ValueError(f"length mismatch: {F.shape[-1]} values, {weight.size} weights")
    return np.sum(weight * np.abs(F) ** p, axis=-1) ** (1.0 / p)


def invariant_field(F: np.ndarray, N: int) -> np.ndarray:
    """Edge field ``F(d(x))`` from a depth-indexed vector ``F[0..N-1]``."""
    return np.asarray(F, dtype=float)[..., edge_depths(N) - 1]


class OpNormEstimate(NamedTuple):
    norm: float
    certificate: float
    iterations: int
    vector: np.ndarray
    converged: bool


def _signed_power(v: np.ndarray, e: float) -> np.ndarray:
    return np.sign(v) * np.abs(v) ** e


def opnorm_power_iteration(M: np.ndarray, p: float, weight: np.ndarray,
                           tol: float = 1e-12, max_iter: int = 200_000,
                           eta: float = 1e-14) -> OpNormEstimate:
    """Norm of a non-negative matrix on ``l^p`` with the given diagonal weights.

    Fixed-point iteration for ``M*(M F)**(p-1) = lambda F**(p-1)`` with the
    adjoint taken in ``<F, G> = sum_k weight_k F_k G_k``, started from the
    all-ones vector.  ``eta`` (relative to the largest entry) is added to
    every entry to make the kernel strictly positive; the returned
    ``certificate`` is the exact ratio ``||M F|| / ||F||`` of the unperturbed
    matrix at the last iterate, hence a lower bound for the true norm.
    """
    p = check_exponent(p)
    M = np.asarray(M, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if np.any(M < 0):
        raise ValueError("power iteration requires a non-negative kernel")
    n = M.shape[1]
    if not np.any(M):
        return OpNormEstimate(0.0, 0.0, 0, np.ones(n), True)
    Mp = M + eta * M.max()
    adjoint = (Mp * weight[:, None]).T / weight[:, None]

    def ratio(A, F):
        return float(weighted_lp(A @ F, weight, p) / weighted_lp(F, weight, p))

    F = np.ones(n)
    estimate = ratio(Mp, F)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        G = (adjoint @ (Mp @ F) ** (p - 1.0)) ** (1.0 / (p - 1.0))
        F = G / weighted_lp(G, weight, p)
        new = ratio(Mp, F)
        if abs(new - estimate) <= tol * new:
            estimate = new
            converged = True
            break
        estimate = new
    if not converged:
        raise RuntimeError(f"power iteration did not converge in {max_iter} steps "
                           f"(last estimate {estimate})")
    return OpNormEstimate(estimate, ratio(M, F), it, F, converged)


def opnorm_lower_bound(M: np.ndarray, p: float, weight: np.ndarray, starts: int = 8,
                       seed=0, max_iter: int = 500, tol: float = 1e-10) -> float:
    """Certified lower bound for the p-norm of an arbitrary real matrix.

    Runs the dual-map fixed point ``F <- psi_q(M* psi_p(M F))`` from several
    random starts and the all-ones vector; each ratio it produces is attained,
    so the maximum is a valid lower bound.
    """
    p = check_exponent(p)
    q = p / (p - 1.0)
    M = np.asarray(M, dtype=float)
    weight = np.asarray(weight, dtype=float)
    adjoint = (M * weight[:, None]).T / weight[:, None]
    rng = np.random.default_rng(seed)
    n = M.shape[1]
    best = 0.0
    inits = [np.ones(n)] + [rng.standard_normal(n) for _ in range(starts)]
    for F in inits:
        F = F / weighted_lp(F, weight, p)
        prev = 0.0
        for _ in range(max_iter):
            value = float(weighted_lp(M @ F, weight, p))
            best = max(best, value)
            if value - prev <= tol * max(value, 1e-300):
                break
            prev = value
            G = _signed_power(adjoint @ _signed_power(M @ F, p - 1.0), q - 1.0)
            size = weighted_lp(G, weight, p)
            if size == 0:
                break
            F = G / size
    return best
