"""Depth-invariant random walk on the tree and its hitting statistics.

The walk is parameterized by escape probabilities ``q[s]``: started at a
vertex of depth ``s``, the chance of reaching a leaf without ever visiting
depth ``s - 1``.  Everything else (step probabilities, the law of the minimum
depth visited, leaf-hitting probabilities) follows from ``q``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .tree_core import TreeWeights, VertexRef, check_height, dlca_many

MAX_STEPS = 10_000_000


def check_exponent(p: float) -> float:
    p = float(p)
    if not (1.0 < p < np.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    return p


def q_from_weights(weights: TreeWeights, p: float) -> np.ndarray:
    """Escape probabilities adapted to the exponent ``p`` and the weights.

    ``q[s]`` is the share of ``(2**s W_s)**(-1/(p-1))`` in the tail sum over
    depths ``s..N``.  Evaluated in log space: the exponent ``-1/(p-1)``
    overflows quickly as ``p -> 1``.
    """
    p = check_exponent(p)
    if not isinstance(weights, TreeWeights):
        weights = TreeWeights(tuple(weights))
    N = weights.N
    k = np.arange(1, N + 1)
    log_terms = -(k * np.log(2.0) + np.log(weights.array())) / (p - 1.0)
    log_tails = np.array([logsumexp(log_terms[s:]) for s in range(N)])
    q = np.ones(N + 1)
    q[1:] = np.exp(log_terms - log_tails)
    q[N] = 1.0
    return q


def check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 2:
        raise ValueError("q must be a vector q[0..N] with N >= 1")
    check_height(q.size - 1)
    if q[0] != 1.0 or q[-1] != 1.0:
        raise ValueError("q[0] and q[N] must both equal 1")
    if np.any(~np.isfinite(q)) or np.any(q <= 0) or np.any(q > 1):
        raise ValueError("escape probabilities must lie in (0, 1]")
    return q


def transitions_from_q(q) -> np.ndarray:
    """Probability ``x[s]`` of stepping from depth ``s`` to ``s + 1``.

    Solves ``q_s = x_s (q_{s+1} + (1 - q_{s+1}) q_s)`` for each s < N.
    """
    q = check_q(q)
    denom = q[1:] + (1.0 - q[1:]) * q[:-1]
    if np.any(denom <= 0):
        raise ValueError("non-positive denominator; q vector is corrupted")
    x = q[:-1] / denom
    x[0] = 1.0
    return x


def q_from_transitions(x) -> np.ndarray:
    """Inverse of :func:`transitions_from_q`, solved from the leaves upward."""
    x = np.asarray(x, dtype=float)
    N = x.size
    q = np.ones(N + 1)
    for s in range(N - 1, 0, -1):
        # q_s (1 - x_s (1 - q_{s+1})) = x_s q_{s+1}
        q[s] = x[s] * q[s + 1] / (1.0 - x[s] * (1.0 - q[s + 1]))
    return q


def hitting_minimum(q) -> np.ndarray:
    """Matrix ``P[s, r]``: probability that depth ``r`` is the minimum visited.

    Product form ``q_r * prod_{k=r+1}^{s} (1 - q_k)`` for rows s < N; the
    walk started at a leaf stops at once, so row N is the unit vector.
    """
    q = check_q(q)
    N = q.size - 1
    P = np.zeros((N + 1, N + 1))
    for s in range(N):
        for r in range(s + 1):
            P[s, r] = q[r] * np.prod(1.0 - q[r + 1:s + 1])
    P[N, N] = 1.0
    return P


def hitting_minimum_recurrence(q) -> np.ndarray:
    """Same matrix from ``p_{s,r} = q_s delta_{sr} + (1 - q_s) p_{s-1,r}``."""
    q = check_q(q)
    N = q.size - 1
    P = np.zeros((N + 1, N + 1))
    P[0, 0] = 1.0
    for s in range(1, N + 1):
        P[s, :s] = (1.0 - q[s]) * P[s - 1, :s]
        P[s, s] = q[s]
    return P


def leaf_hit_coeffs(P) -> np.ndarray:
    """``B[s, r]``: chance to end at one fixed leaf whose dlca with the start is r.

    Entries with ``r > s`` are left at zero.
    """
    P = np.asarray(P, dtype=float)
    N = P.shape[0] - 1
    scaled = P * np.ldexp(1.0, np.arange(N + 1) - N)[None, :]
    return np.tril(np.cumsum(scaled, axis=1))


def increment_coeffs(B) -> np.ndarray:
    """``A[s, r] = B[s, r] - B[s-1, min(s-1, r)]`` for s >= 1, r <= s."""
    B = np.asarray(B, dtype=float)
    N = B.shape[0] - 1
    A = np.zeros_like(B)
    for s in range(1, N + 1):
        r = np.arange(s + 1)
        A[s, :s + 1] = B[s, r] - B[s - 1, np.minimum(s - 1, r)]
    return A


@dataclass(frozen=True)
class WalkProfile:
    """All derived quantities of one invariant walk on a tree of height N."""

    q: np.ndarray
    p: float | None = None
    x: np.ndarray = field(init=False, repr=False)
    P: np.ndarray = field(init=False, repr=False)
    B: np.ndarray = field(init=False, repr=False)
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = check_q(self.q).copy()
        q.flags.writeable = False
        object.__setattr__(self, "q", q)
        derived = {}
        derived["x"] = transitions_from_q(q)
        derived["P"] = hitting_minimum(q)
        derived["B"] = leaf_hit_coeffs(derived["P"])
        derived["A"] = increment_coeffs(derived["B"])
        for name, arr in derived.items():
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.q.size - 1

    @classmethod
    def from_weights(cls, weights: TreeWeights, p: float) -> "WalkProfile":
        return cls(q_from_weights(weights, p), p=float(p))

    @classmethod
    def from_transitions(cls, x, p: float | None = None) -> "WalkProfile":
        return cls(q_from_transitions(x), p=p)


def averaging_profile(N: int) -> WalkProfile:
    """q == 1: each vertex gets the mean of its leaf descendants."""
    return WalkProfile(np.ones(check_height(N) + 1))


def symmetric_profile(N: int) -> WalkProfile:
    """Depth performs a symmetric walk: ``q_s = 1 / (N - s + 1)``."""
    N = check_height(N)
    q = np.ones(N + 1)
    s = np.arange(1, N + 1)
    q[1:] = 1.0 / (N - s + 1)
    return WalkProfile(q)


def delta_profile(N: int, delta: float) -> WalkProfile:
    """Symmetric depth walk except the last step down has probability delta."""
    N = check_height(N)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    q = np.ones(N + 1)
    s = np.arange(1, N)
    q[1:N] = 1.0 / (N - s + 1.0 / delta - 1.0)
    return WalkProfile(q)


def simulate_walk(profile: WalkProfile, start: VertexRef, seed) -> tuple[int, int]:
    """Run one walk until it is absorbed at a leaf.

    Returns ``(leaf index, minimum depth visited)``.  A walk started at a
    leaf is absorbed immediately.
    """
    rng = np.random.default_rng(seed)
    depth, index = VertexRef(*start)
    N = profile.N
    if not VertexRef(depth, index).is_valid(N):
        raise ValueError(f"start vertex {start} not in tree of height {N}")
    x = profile.x
    low = depth
    steps = 0
    while depth < N:
        u = rng.random()
        if u < x[depth]:
            index = 2 * index + (u >= 0.5 * x[depth])
            depth += 1
        else:
            index >>= 1
            depth -= 1
            low = min(low, depth)
        steps += 1
        if steps > MAX_STEPS:
            raise RuntimeError(f"walk exceeded {MAX_STEPS} steps")
    return int(index), int(low)


def simulate_walks(profile: WalkProfile, start: VertexRef, trials: int, seed,
                   max_steps: int = MAX_STEPS) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of independent walks from the same start vertex.

    Returns arrays of terminal leaf indices and minimum depths.  Finished
    walks are dropped from the active set after every step.
    """
    rng = np.random.default_rng(seed)
    N = profile.N
    start = VertexRef(*start)
    if not start.is_valid(N):
        raise ValueError(f"start vertex {start} not in tree of height {N}")
    x = np.asarray(profile.x)
    depth = np.full(trials, start.depth, dtype=np.int64)
    index = np.full(trials, start.index, dtype=np.int64)
    low = depth.copy()
    active = np.flatnonzero(depth < N)
    steps = 0
    while active.size:
        d = depth[active]
        xd = x[d]
        u = rng.random(active.size)
        down = u < xd
        new_d = np.where(down, d + 1, d - 1)
        i = index[active]
        index[active] = np.where(down, 2 * i + (u >= 0.5 * xd), i >> 1)
        depth[active] = new_d
        low[active] = np.minimum(low[active], new_d)
        active = active[new_d < N]
        steps += 1
        if steps > max_steps:
            raise RuntimeError(f"walks exceeded {max_steps} steps")
    return index, low


@dataclass
class WalkStats:
    """Empirical hitting statistics for walks started at one vertex."""

    N: int
    p: float | None
    start: tuple[int, int]
    trials: int
    seed: int
    min_depth_counts: np.ndarray
    leaf_counts: np.ndarray

    @property
    def p_hat(self) -> np.ndarray:
        return self.min_depth_counts / self.trials

    @property
    def p_hat_se(self) -> np.ndarray:
        ph = self.p_hat
        return np.sqrt(ph * (1 - ph) / self.trials)

    @property
    def q_hat(self) -> float:
        """Escape frequency: walks whose minimum depth is the start depth."""
        return float(self.p_hat[self.start[0]])

    def leaf_dlca(self) -> np.ndarray:
        leaves = np.arange(1 << self.N)
        return dlca_many(self.start[0], self.start[1], self.N, leaves)

    def b_hat(self) -> np.ndarray:
        """Per-leaf hit frequency averaged over each dlca class (r = 0..s)."""
        s = self.start[0]
        r = self.leaf_dlca()
        class_hits = np.bincount(r, weights=self.leaf_counts, minlength=s + 1)
        class_size = np.bincount(r, minlength=s + 1)
        return class_hits / (class_size * self.trials)

    def merge(self, other: "WalkStats") -> "WalkStats":
        if (self.N, self.start) != (other.N, other.start):
            raise ValueError("can only merge statistics of the same experiment")
        return WalkStats(self.N, self.p, self.start, self.trials + other.trials,
                         min(self.seed, other.seed),
                         self.min_depth_counts + other.min_depth_counts,
                         self.leaf_counts + other.leaf_counts)

    def to_dict(self) -> dict:
        ph = self.p_hat
        return {
            "N": self.N,
            "p": self.p,
            "start": list(self.start),
            "trials": self.trials,
            "seed": self.seed,
            "q_hat": self.q_hat,
            "q_hat_se": float(np.sqrt(self.q_hat * (1 - self.q_hat) / self.trials)),
            "p_hat": ph.tolist(),
            "p_hat_se": self.p_hat_se.tolist(),
            "b_hat": self.b_hat().tolist(),
            "leaf_counts": self.leaf_counts.astype(int).tolist(),
        }


def walk_stats(profile: WalkProfile, start: VertexRef, trials: int, seed: int) -> WalkStats:
    leaf, low = simulate_walks(profile, start, trials, seed)
    N = profile.N
    return WalkStats(
        N=N,
        p=profile.p,
        start=tuple(VertexRef(*start)),
        trials=int(trials),
        seed=int(seed),
        min_depth_counts=np.bincount(low, minlength=N + 1).astype(float),
        leaf_counts=np.bincount(leaf, minlength=1 << N).astype(float),
    )


def wilson_interval(hits, trials, z: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Wilson score interval for a binomial proportion."""
    hits = np.asarray(hits, dtype=float)
    phat = hits / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return centre - half, centre + half


def within_band(expected, hits, trials, z: float = 3.0) -> np.ndarray:
    """True where ``expected`` lies in the z-Wilson interval of ``hits/trials``.

    Degenerate probabilities (0 or 1) must be matched exactly.
    """
    expected = np.asarray(expected, dtype=float)
    lo, hi = wilson_interval(hits, trials, z)
    phat = np.asarray(hits, dtype=float) / trials
    exact = (expected <= 0) | (expected >= 1)
    return np.where(exact, np.isclose(phat, expected, rtol=0, atol=1e-15),
                    (lo <= expected) & (expected <= hi))


def profile_digest(profile: WalkProfile) -> str:
    payload = json.dumps({"q": profile.q.tolist(), "p": profile.p}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
