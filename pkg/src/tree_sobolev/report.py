"""Extension ratios and per-configuration norm reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .extension import depth_profile_field, harmonic_extend, induced_T
from .hardy import muckenhoupt_best_A, theoretical_constants
from .kernels import kernel_matrix, reduced_L, reversed_q
from .norms import lp_edge_norm, opnorm_lower_bound, opnorm_power_iteration, sobolev_seminorm
from .trace import ConvergenceError, trace_extensions
from .tree_core import KERNEL_N_MAX, TreeWeights, integrate, leaves_of, n_leaves
from .walk import WalkProfile

RATIO_FLOOR = 1e-12


def weights_digest(weights: TreeWeights) -> str:
    payload = json.dumps(weights.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def extension_ratios(weights: TreeWeights, p: float, f: np.ndarray,
                     profile: WalkProfile | None = None) -> np.ndarray:
    """``||H f|| / trace(f)`` for a batch of leaf functions (rows of ``f``).

    Rows whose trace seminorm vanishes (constant data) get ratio 1.
    """
    if profile is None:
        profile = WalkProfile.from_weights(weights, p)
    f2 = np.atleast_2d(np.asarray(f, dtype=float))
    ext = sobolev_seminorm(weights, harmonic_extend(profile, f2), p)
    values, _, _, ok, kkt = trace_extensions(weights, f2, p)
    if not np.all(ok):
        raise ConvergenceError(f"trace solver failed on {np.sum(~ok)} of {ok.size} inputs "
                               f"(worst optimality residual {np.max(kkt):.3e})")
    scale = np.maximum(np.max(np.abs(f2), axis=-1), 1.0)
    flat = values <= RATIO_FLOOR * scale
    return np.where(flat, 1.0, ext / np.where(flat, 1.0, values))


def extension_ratio(weights: TreeWeights, p: float, f: np.ndarray,
                    profile: WalkProfile | None = None) -> float:
    return float(extension_ratios(weights, p, f, profile)[0])


def sample_leaf_functions(N: int, samples: int, seed) -> np.ndarray:
    """Mixture of test inputs: Gaussian, Rademacher, single-leaf spikes and
    depth-profile fields (random positive modulus per depth, random signs)."""
    rng = np.random.default_rng(seed)
    L = n_leaves(N)
    out = np.empty((samples, L))
    for i in range(samples):
        kind = i % 4
        if kind == 0:
            out[i] = rng.standard_normal(L)
        elif kind == 1:
            out[i] = rng.choice([-1.0, 1.0], size=L)
        elif kind == 2:
            out[i] = 0.0
            out[i, rng.integers(L)] = 1.0
        else:
            G = rng.exponential(size=N) * rng.choice([0.0, 1.0], size=N, p=[0.3, 0.7])
            G[rng.integers(N)] = 1.0
            signs = rng.choice([-1.0, 1.0], size=(1 << (N + 1)) - 2)
            out[i] = leaves_of(integrate(depth_profile_field(G, signs), N), N)
    return out


@dataclass
class NormReport:
    N: int
    p: float
    weights_digest: str
    ratio_samples: list = field(repr=False)
    max_ratio: float
    opnorm_reduced: float
    bound_2S0: float
    opnorm_T_lower: float | None
    muckenhoupt_A: float
    constants: dict

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def within_theorem(self) -> bool:
        return self.max_ratio <= self.constants["C_bar"]


def norm_report(weights: TreeWeights, p: float, samples: int = 200, seed: int = 0,
                t_lower: bool | None = None) -> NormReport:
    """Sample extension ratios and estimate the reduced operator norm."""
    N = weights.N
    profile = WalkProfile.from_weights(weights, p)
    f = sample_leaf_functions(N, samples, seed)
    ratios = extension_ratios(weights, p, f, profile)
    depth_w = weights.depth_weights()
    S = opnorm_power_iteration(reduced_L(profile), p, depth_w)
    if t_lower is None:
        t_lower = N <= 6
    T_lower = None
    if t_lower and N <= KERNEL_N_MAX:
        K = kernel_matrix(profile)
        T_lower = opnorm_lower_bound(K, p, weights.edge_weights(), seed=seed)
    Q, alpha = reversed_q(weights, p)
    w = weights.depth_weights()[::-1]
    A = muckenhoupt_best_A(w ** (1 / p) * Q, w ** (1 / p), p)
    return NormReport(
        N=N,
        p=float(p),
        weights_digest=weights_digest(weights),
        ratio_samples=[float(r) for r in ratios],
        max_ratio=float(np.max(ratios)),
        opnorm_reduced=S.norm,
        bound_2S0=2 * S.norm,
        opnorm_T_lower=T_lower,
        muckenhoupt_A=A,
        constants=theoretical_constants(p).to_dict(),
    )


def edge_ratio(weights: TreeWeights, profile: WalkProfile, g: np.ndarray, p: float) -> np.ndarray:
    """``||T g|| / ||g||`` on edge fields, used for direct operator probes."""
    return lp_edge_norm(weights, induced_T(profile, g), p) / lp_edge_norm(weights, g, p)
