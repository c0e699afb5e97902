"""Invariant suite for one (weights, p) configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .extension import harmonic_extend, harmonicity_residual, induced_T
from .hardy import (hardy_constant, hardy_sides, muckenhoupt_best_A, script_T0_apply,
                    script_T0_matrix, script_T1_apply, script_T1_matrix,
                    theoretical_constants)
from .kernels import (depth_row_sums, kernel_matrix, kernel_matrix_bruteforce, kernel_parts,
                      reduced_L0, reduced_L1, reduced_L_bound, reversed_kernel)
from .norms import opnorm_power_iteration
from .report import extension_ratios, sample_leaf_functions
from .trace import ConvergenceError
from .tree_core import (TreeWeights, gradient, integrate, leaf_permutation, leaves_of,
                        n_edges, n_leaves, random_symmetry)
from .walk import WalkProfile

BRUTE_N_MAX = 8


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name: str, value: float, tol: float) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(value <= tol))


def _telescoping_gap(Q: np.ndarray, alpha: np.ndarray) -> float:
    head = np.cumsum(alpha)
    worst = 0.0
    for s in range(Q.size):
        for t in range(s + 1, Q.size):
            lhs = Q[s] * np.prod(1.0 - Q[s + 1:t + 1])
            worst = max(worst, abs(lhs - alpha[s] / head[t]))
    return worst


def run_checks(weights: TreeWeights, p: float, seed: int = 0, samples: int = 20) -> list[Check]:
    """Evaluate every structural identity and bound; returns one Check each.

    ``value`` is the measured defect (or, for bounds, the excess over the
    bound, so that ``value <= tolerance`` means pass).
    """
    N = weights.N
    rng = np.random.default_rng(seed)
    profile = WalkProfile.from_weights(weights, p)
    q, P = profile.q, profile.P
    out = []

    # kernels
    if N <= BRUTE_N_MAX:
        K = kernel_matrix(profile)
        out.append(_check("kernel_closed_form_vs_bruteforce",
                          np.max(np.abs(K - kernel_matrix_bruteforce(profile))), 1e-12))
        g = rng.standard_normal((4, n_edges(N)))
        out.append(_check("induced_T_vs_kernel",
                          np.max(np.abs(induced_T(profile, g) - g @ K.T)), 1e-12))
        K0, K1 = kernel_parts(profile)
        out.append(_check("kernel_sign_pattern",
                          max(np.max(K0, initial=0.0), np.max(-K1, initial=0.0)), 0.0))
        out.append(_check("reduced_L0_from_kernel",
                          np.max(np.abs(depth_row_sums(K0, N) - reduced_L0(profile))), 1e-12))
        out.append(_check("reduced_L1_from_kernel",
                          np.max(np.abs(depth_row_sums(K1, N) - reduced_L1(profile))), 1e-12))
    L0, L1 = reduced_L0(profile), reduced_L1(profile)
    out.append(_check("L0_plus_L1_zero", np.max(np.abs(L0 + L1)), 1e-14))
    gap = 0.0
    for s in range(1, N + 1):
        for m in range(1, s + 1):
            gap = max(gap, abs(np.sum(P[s - 1, :m]) - np.prod(1.0 - q[m:s])))
    out.append(_check("partial_sum_identity", gap, 1e-12))
    bound = reduced_L_bound(profile)
    out.append(_check("L_within_bound", max(np.max(L1 - bound), np.max(-L1)), 1e-14))
    rev = reversed_kernel(weights, p)
    out.append(_check("reversed_Q_equals_q", np.max(np.abs(rev.Q - q[1:][::-1])), 1e-14))
    out.append(_check("telescoping_identity", _telescoping_gap(rev.Q, rev.alpha), 1e-14))
    out.append(_check("reversed_kernel_within_bound",
                      max(np.max(rev.kernel - rev.bound), np.max(-rev.kernel)), 1e-14))

    # structure of the extension
    f = rng.standard_normal((4, n_leaves(N)))
    F = harmonic_extend(profile, f)
    out.append(_check("extension_property", np.max(np.abs(leaves_of(F, N) - f)), 0.0))
    const = harmonic_extend(profile, np.full(n_leaves(N), 1.7))
    out.append(_check("constants_to_constants", np.max(np.abs(const - 1.7)), 1e-14))
    scale = max(1.0, float(np.max(np.abs(f))))
    out.append(_check("harmonicity_residual", harmonicity_residual(profile, F) / scale, 1e-11))
    g = rng.standard_normal((4, n_edges(N)))
    Tg = induced_T(profile, g)
    out.append(_check("projection_T_T_equals_T",
                      np.max(np.abs(induced_T(profile, Tg) - Tg)), 1e-12))
    worst = 0.0
    for i in range(10):
        perm = random_symmetry(N, rng.integers(2**32))
        lp = leaf_permutation(perm, N)
        moved = np.empty_like(f)
        moved[:, lp] = f
        G = harmonic_extend(profile, moved)
        worst = max(worst, float(np.max(np.abs(G[:, perm] - F))))
    out.append(_check("equivariance", worst, 1e-12))
    field = rng.standard_normal((4, n_edges(N)))
    out.append(_check("gradient_integrate_roundtrip",
                      np.max(np.abs(gradient(integrate(field, N), N) - field)), 1e-13))

    # norms and constants
    consts = theoretical_constants(p)
    try:
        ratios = extension_ratios(weights, p, sample_leaf_functions(N, samples, seed), profile)
    except ConvergenceError:
        out.append(Check("trace_solver_converged", float("inf"), 0.0, False))
    else:
        out.append(_check("extension_ratio_at_least_one", np.max(1.0 - ratios), 1e-6))
        out.append(_check("extension_ratio_within_C_bar", np.max(ratios) - consts.C_bar, 0.0))
        if p == 2.0:
            out.append(_check("p2_ratio_is_one", np.max(np.abs(ratios - 1.0)), 1e-6))
    S = opnorm_power_iteration(L1, p, weights.depth_weights())
    out.append(_check("reduced_opnorm_within_C_hat", S.norm - consts.C_hat, 0.0))
    w = rev.w
    T0 = opnorm_power_iteration(script_T0_matrix(rev.Q), p, w).norm
    T1 = opnorm_power_iteration(script_T1_matrix(rev.alpha), p, w).norm
    out.append(_check("script_T0_within_bound", T0 - consts.C_tilde, 0.0))
    out.append(_check("script_T1_within_bound", T1 - consts.T1_bound, 0.0))
    F = rng.standard_normal((4, N))
    out.append(_check("script_T0_apply_vs_matrix",
                      np.max(np.abs(script_T0_apply(rev.Q, F) - F @ script_T0_matrix(rev.Q).T)),
                      1e-12))
    out.append(_check("script_T1_apply_vs_matrix",
                      np.max(np.abs(script_T1_apply(rev.alpha, F)
                                    - F @ script_T1_matrix(rev.alpha).T)), 1e-12))
    excess = -np.inf
    Cp = hardy_constant(p)
    for direction in ("forward", "reversed"):
        for _ in range(20):
            U, V = np.exp(rng.standard_normal((2, N)))
            A = muckenhoupt_best_A(U, V, p, direction)
            lhs, rhs = hardy_sides(U, V, rng.standard_normal(N), p, direction)
            excess = max(excess, (lhs - Cp * A * rhs) / max(lhs, 1e-300))
    out.append(_check("muckenhoupt_hardy_inequality", excess, 1e-12))
    return out

