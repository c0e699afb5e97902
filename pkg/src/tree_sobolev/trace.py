"""Trace seminorm: the cheapest extension of leaf data in the Sobolev seminorm.

The objective ``J(F) = sum_e W_e |dF_e|**p`` is convex in the internal
vertex values, separable over edges, and its Hessian is a weighted graph
Laplacian on the tree.  Every linear solve is therefore a tree
elimination: bottom-up each internal value becomes affine in its parent's,
then a top-down pass fills in the values.

For ``p == 2`` one solve is exact.  For ``p > 2`` the iteration reweights
each edge by ``W_e |dF_e|**(p-2)`` (floored) and takes the resulting
least-squares step with a backtracking line search on ``J``.  For ``p < 2``
those weights blow up on nearly flat edges, so the same reweighted step is
taken on the dual problem over conservative edge fluxes, whose exponent
``q = p/(p-1)`` exceeds 2; the potential of each dual step is a primal
extension.  Convergence is certified by the primal KKT residual for
``p > 2`` (with a red-black coordinate descent as fallback when the line
search stalls) and by the relative duality gap for ``p < 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .tree_core import (TreeWeights, check_leaf_field, edge_level, level,
                        n_leaves, n_vertices, parents)
from .walk import check_exponent

logger = logging.getLogger(__name__)

KKT_TOL = 1e-8
GAP_TOL = 1e-10
DECREASE_TOL = 1e-12
EPS_REG = 1e-12
# the dual floor only shapes the Newton metric; the duality gap certifies
DUAL_EPS_REG = 1e-8
MAX_ITER = 200


class ConvergenceError(RuntimeError):
    """Raised when the trace solver fails to certify an optimum."""

    def __init__(self, message: str, result: "TraceResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass
class TraceResult:
    value: float
    extension: np.ndarray
    iterations: int
    converged: bool
    kkt_residual: float  # duality gap when p < 2


def tree_solve(conductance: np.ndarray, leaf_values: np.ndarray,
               rhs: np.ndarray | None = None) -> np.ndarray:
    """Solve the weighted Laplace system on the tree with clamped leaves.

    Finds the vertex field ``F`` equal to ``leaf_values`` on the leaves with
    ``sum_{e at v} c_e (F(v) - F(neighbour)) = rhs[v]`` at every internal
    vertex ``v``.  ``conductance`` is an edge field of positive values.
    Batch axes in front are allowed.
    """
    c = np.asarray(conductance, dtype=float)
    f = np.asarray(leaf_values, dtype=float)
    N = f.shape[-1].bit_length() - 1
    batch = np.broadcast_shapes(c.shape[:-1], f.shape[:-1])
    alphas = [None] * (N + 1)
    betas = [None] * (N + 1)
    # slack = 1 - beta, carried separately to avoid cancellation when beta ~ 1
    slack = [None] * (N + 1)
    alphas[N] = np.broadcast_to(f, batch + f.shape[-1:])
    betas[N] = np.zeros(f.shape[-1])
    slack[N] = np.ones(f.shape[-1])
    for k in range(N - 1, -1, -1):
        c_down = c[..., edge_level(k + 1)]
        pull = c_down * alphas[k + 1]
        pull = pull[..., 0::2] + pull[..., 1::2]
        stiff = c_down * slack[k + 1]
        stiff = stiff[..., 0::2] + stiff[..., 1::2]
        if rhs is not None:
            pull = pull + rhs[..., level(k)]
        if k > 0:
            c_up = c[..., edge_level(k)]
            denom = c_up + stiff
            betas[k] = c_up / denom
            slack[k] = stiff / denom
        else:
            denom = stiff
            betas[k] = np.zeros(denom.shape)
            slack[k] = np.ones(denom.shape)
        alphas[k] = pull / denom
    F = np.empty(batch + (n_vertices(N),))
    F[..., level(0)] = alphas[0]
    for k in range(1, N + 1):
        above = np.repeat(F[..., level(k - 1)], 2, axis=-1)
        F[..., level(k)] = alphas[k] + betas[k] * above
    return F


def harmonic_p2(weights: TreeWeights, f: np.ndarray) -> np.ndarray:
    """Exact minimizer for p = 2: the weighted-graph harmonic extension."""
    return tree_solve(weights.edge_weights(), f)


class _Objective:
    """Energy, gradient and Hessian weights for ``sum_e W_e |dF_e|**p``."""

    def __init__(self, weights: TreeWeights, p: float):
        self.N = weights.N
        self.p = p
        self.W = weights.edge_weights()
        self.parents = parents(self.N)
        self.n_internal = n_leaves(self.N) - 1

    def diff(self, F):
        return F[..., 1:] - F[..., self.parents]

    def energy(self, F):
        return np.sum(self.W * np.abs(self.diff(F)) ** self.p, axis=-1)

    def gradient(self, F):
        """Gradient w.r.t. internal values and its no-cancellation magnitude."""
        d = self.diff(F)
        mag = self.W * np.abs(d) ** (self.p - 1.0)
        flux = np.sign(d) * mag
        m = self.n_internal
        g = np.zeros(F.shape[:-1] + (m,))
        scale = np.zeros_like(g)
        g[..., 1:] += flux[..., :m - 1]
        scale[..., 1:] += mag[..., :m - 1]
        g -= flux[..., 0::2] + flux[..., 1::2]
        scale += mag[..., 0::2] + mag[..., 1::2]
        return self.p * g, self.p * scale

    def kkt(self, F):
        g, scale = self.gradient(F)
        top = np.max(scale, axis=-1)
        res = np.max(np.abs(g), axis=-1)
        return np.where(top > 0, res / np.where(top > 0, top, 1.0), 0.0), g

    def hessian_weights(self, F, floor):
        d = np.abs(self.diff(F))
        d = np.maximum(d, floor[..., None])
        return self.p * (self.p - 1.0) * self.W * d ** (self.p - 2.0)


def _coordinate_descent(obj: _Objective, F: np.ndarray, sweeps: int) -> np.ndarray:
    """Exact 1-D minimization per vertex, depth parity classes in turn."""
    N, p = obj.N, obj.p
    Wd = obj.W
    F = F.copy()
    for _ in range(sweeps):
        for parity in (0, 1):
            for k in range(parity, N, 2):
                lv = level(k)
                below = F[..., level(k + 1)]
                nbrs = [below[..., 0::2], below[..., 1::2]]
                wts = [Wd[edge_level(k + 1)][0::2], Wd[edge_level(k + 1)][1::2]]
                if k > 0:
                    nbrs.append(np.repeat(F[..., level(k - 1)], 2, axis=-1))
                    wts.append(Wd[edge_level(k)])
                lo = np.minimum.reduce(nbrs)
                hi = np.maximum.reduce(nbrs)
                for _ in range(100):
                    mid = 0.5 * (lo + hi)
                    slope = sum(w * np.sign(mid - n) * np.abs(mid - n) ** (p - 1.0)
                                for w, n in zip(wts, nbrs))
                    lo = np.where(slope < 0, mid, lo)
                    hi = np.where(slope < 0, hi, mid)
                F[..., lv] = 0.5 * (lo + hi)
    return F


def _line_search(value, x, step, base, slope, sign):
    """Backtracking Armijo search, vectorized over rows.

    ``sign`` is +1 when minimizing ``value`` and -1 when maximizing it.
    """
    t = np.ones(x.shape[0])
    accepted = np.zeros(x.shape[0], dtype=bool)
    best_x = x.copy()
    best_v = base.copy()
    for _ in range(60):
        pending = np.flatnonzero(~accepted)
        if pending.size == 0:
            break
        trial = x[pending] + t[pending, None] * step[pending]
        v = value(trial, pending)
        ok = sign * v <= sign * base[pending] - 1e-4 * t[pending] * np.abs(slope[pending])
        idx = pending[ok]
        best_x[idx] = trial[ok]
        best_v[idx] = v[ok]
        accepted[idx] = True
        t[pending[~ok]] *= 0.5
    return best_x, best_v, accepted


def _primal_newton(obj: _Objective, F, spread, kkt_tol, max_iter):
    rows = F.shape[0]
    floor = EPS_REG * np.where(spread > 0, spread, 1.0)
    J = obj.energy(F)
    kkt, g = obj.kkt(F)
    iterations = np.zeros(rows, dtype=int)
    done = (kkt < kkt_tol * 1e-2) | (spread == 0)
    for _ in range(max_iter):
        todo = np.flatnonzero(~done)
        if todo.size == 0:
            break
        Fa = F[todo]
        c = obj.hessian_weights(Fa, floor[todo])
        rhs = np.zeros(Fa.shape)
        rhs[..., :obj.n_internal] = -g[todo]
        step = tree_solve(c, np.zeros(Fa.shape[-1] - obj.n_internal), rhs)
        slope = np.sum(g[todo] * step[..., :obj.n_internal], axis=-1)
        Fnew, Jnew, accepted = _line_search(lambda x, _: obj.energy(x), Fa, step,
                                            J[todo], slope, +1)
        iterations[todo] += 1
        drop = (J[todo] - Jnew) / np.where(J[todo] > 0, J[todo], 1.0)
        kkt_new, g_new = obj.kkt(Fnew)
        # J is flat to rounding near the optimum; there a full step that
        # shrinks the residual is taken even without a measurable decrease
        stalled = ~accepted | (drop <= 0)
        if stalled.any():
            full = Fa[stalled] + step[stalled]
            kkt_full, g_full = obj.kkt(full)
            gain = kkt_full < kkt[todo][stalled]
            sel = np.flatnonzero(stalled)[gain]
            Fnew[sel], Jnew[sel] = full[gain], obj.energy(full[gain])
            kkt_new[sel], g_new[sel] = kkt_full[gain], g_full[gain]
            stalled[sel] = False
        F[todo], J[todo] = Fnew, Jnew
        kkt[todo], g[todo] = kkt_new, g_new
        small = (kkt[todo] < kkt_tol) & (drop < DECREASE_TOL)
        done[todo] = small | stalled | (kkt[todo] < kkt_tol * 1e-2)
    return F, iterations


def _leaf_flux_to_edges(psi: np.ndarray, N: int) -> np.ndarray:
    """Conservative edge flux from leaf-edge fluxes (recentred to sum zero)."""
    psi = psi - np.mean(psi, axis=-1, keepdims=True)
    parts = [psi]
    for _ in range(N - 1):
        parts.append(parts[-1][..., 0::2] + parts[-1][..., 1::2])
    return np.concatenate(parts[::-1], axis=-1)


def _dual_newton(obj: _Objective, F, f, gap_tol, max_iter, eps_reg=DUAL_EPS_REG):
    """Newton ascent on ``sum_leaves f phi - sum_e W_e^(1-q) |phi_e|^q / q``.

    ``phi`` ranges over conservative edge fluxes (inflow equals outflow at
    every internal vertex).  Each step solves a Laplace system with
    conductances ``1/h_e`` (``h`` the dual curvature); its potential
    ``Lam`` equals ``f`` on the leaves and converges to the primal optimum.
    Returns the potential and the relative duality gap ``(J(Lam)/p - D)/(J/p)``,
    which is non-negative and bounds the relative error of ``J(Lam)``.
    """
    p = obj.p
    q = p / (p - 1.0)
    W = obj.W
    m = obj.n_internal
    rows = F.shape[0]
    N = obj.N
    phi = _leaf_flux_to_edges((W * obj.diff(F))[..., m - 1:], N)
    leaf_edges = slice(m - 1, None)
    # |phi|/W = |dF|**(p-1) at the optimum, so flooring |dF| at EPS_REG times
    # the data spread bounds every conductance by W (EPS_REG spread)**(p-2)
    spread = np.ptp(f, axis=-1)
    ratio_floor = (eps_reg * np.where(spread > 0, spread, 1.0)) ** (p - 1.0)

    def dual_value(ph, idx):
        return (np.sum(f[idx] * ph[..., leaf_edges], axis=-1)
                - np.sum(W ** (1 - q) * np.abs(ph) ** q, axis=-1) / q)

    def gap(L, Dv):
        primal = obj.energy(L) / p
        return (primal - Dv) / np.where(primal > 0, primal, 1.0)

    # best multiple of the starting flux: max_s (s a - s^q b / q)
    a = np.sum(f * phi[..., leaf_edges], axis=-1)
    b = np.sum(W ** (1 - q) * np.abs(phi) ** q, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where((a > 0) & (b > 0), (a / b) ** (1.0 / (q - 1.0)), 1.0)
    phi *= scale[:, None]
    D = dual_value(phi, np.arange(rows))
    iterations = np.zeros(rows, dtype=int)
    Lam = F.copy()
    rel_gap = gap(Lam, D)
    done = (rel_gap < gap_tol * 1e-2) | (spread == 0)
    for _ in range(max_iter):
        todo = np.flatnonzero(~done)
        if todo.size == 0:
            break
        ph = phi[todo]
        size = np.abs(ph)
        ratio = np.maximum(size / W, ratio_floor[todo, None])
        u = np.sign(ph) * (size / W) ** (q - 1.0)
        cond = W / ((q - 1.0) * ratio ** (q - 2.0))
        flow = cond * u
        rhs = np.zeros(ph.shape[:-1] + (ph.shape[-1] + 1,))
        rhs[..., 1:m] += flow[..., :m - 1]
        rhs[..., :m] -= flow[..., 0::2] + flow[..., 1::2]
        L = tree_solve(cond, f[todo], rhs)
        # rebuild the step from its leaf part so it stays exactly conservative
        step = _leaf_flux_to_edges(cond[..., leaf_edges]
                                   * (obj.diff(L)[..., leaf_edges] - u[..., leaf_edges]), N)
        slope = (np.sum(f[todo] * step[..., leaf_edges], axis=-1)
                 - np.sum(u * step, axis=-1))
        with np.errstate(over="ignore", invalid="ignore"):
            phnew, Dnew, accepted = _line_search(lambda x, idx: dual_value(x, todo[idx]),
                                                 ph, step, D[todo], slope, -1)
        iterations[todo] += 1
        rise = (Dnew - D[todo]) / np.maximum(np.abs(D[todo]), 1e-300)
        phi[todo], D[todo] = phnew, Dnew
        # keep the potential with the smaller gap; the latest one can be worse
        new_gap = gap(L, D[todo])
        better = new_gap < gap(Lam[todo], D[todo])
        Lam[todo[better]] = L[better]
        rel_gap[todo] = gap(Lam[todo], D[todo])
        small = (rel_gap[todo] < gap_tol) & (rise < DECREASE_TOL)
        done[todo] = small | ~accepted | (rise <= 0) | (rel_gap[todo] < gap_tol * 1e-2)
    return Lam, iterations, rel_gap


def trace_extensions(weights: TreeWeights, f: np.ndarray, p: float,
                     kkt_tol: float = KKT_TOL, max_iter: int = MAX_ITER,
                     gap_tol: float = GAP_TOL):
    """Batched solver; returns ``(values, extensions, iterations, converged, residual)``.

    ``residual`` is the relative KKT residual for ``p >= 2`` and the relative
    duality gap for ``p < 2``.
    """
    p = check_exponent(p)
    N = weights.N
    f = check_leaf_field(f, N)
    single = f.ndim == 1
    f2 = np.atleast_2d(f)
    F = harmonic_p2(weights, f2)
    obj = _Objective(weights, p)
    spread = np.ptp(f2, axis=-1)
    # constant data: the constant extension is exact
    flat = spread == 0
    F[flat] = f2[flat, :1]
    if p < 2.0:
        F, iterations, residual = _dual_newton(obj, F, f2, gap_tol, max_iter)
        F[..., level(N)] = f2
        converged = residual < gap_tol
    else:
        if p > 2.0:
            F, iterations = _primal_newton(obj, F, spread, kkt_tol, max_iter)
        else:
            iterations = np.ones(f2.shape[0], dtype=int)
        F[..., level(N)] = f2
        residual, _ = obj.kkt(F)
        failing = np.flatnonzero(residual >= kkt_tol)
        if failing.size and p != 2.0:
            logger.info("trace solver: coordinate-descent fallback for %d rows", failing.size)
            F[failing] = _coordinate_descent(obj, F[failing], sweeps=200)
            residual[failing], _ = obj.kkt(F[failing])
        converged = residual < kkt_tol
    residual[flat] = 0.0
    converged = converged | flat
    values = obj.energy(F) ** (1.0 / p)
    if single:
        return values[0], F[0], iterations[0], converged[0], residual[0]
    return values, F, iterations, converged, residual


def trace_seminorm(weights: TreeWeights, f: np.ndarray, p: float,
                   kkt_tol: float = KKT_TOL, max_iter: int = MAX_ITER,
                   strict: bool = True) -> TraceResult:
    """Infimum of the Sobolev seminorm over extensions of the leaf data ``f``."""
    value, F, its, ok, res = trace_extensions(weights, f, p, kkt_tol, max_iter)
    result = TraceResult(float(value), F, int(its), bool(ok), float(res))
    if strict and not ok:
        raise ConvergenceError(f"trace solver stopped with optimality residual {res:.3e}", result)
    return result
