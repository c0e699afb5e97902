"""Complete binary tree of height N with depth-dependent edge weights.

Vertices are stored in heap (level) order: the vertex at depth ``k`` whose
binary string is the integer ``j`` lives at flat index ``2**k - 1 + j``.  The
edge ending at a non-root vertex shares that vertex's index shifted down by
one, so edge fields have length ``2**(N+1) - 2`` and leaf fields ``2**N``.
Parent/child lookups are shifts: parent of ``v`` is ``(v - 1) // 2`` and its
children are ``2v + 1`` and ``2v + 2``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_N_MAX = 20
KERNEL_N_MAX = 10


def n_max() -> int:
    """Hard cap on the tree height, overridable by ``TREE_SOBOLEV_NMAX``."""
    value = os.environ.get("TREE_SOBOLEV_NMAX")
    if value is None:
        return DEFAULT_N_MAX
    return int(value)


def check_height(N: int) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"tree height must be a positive integer, got {N!r}")
    cap = n_max()
    if N > cap:
        raise ValueError(f"tree height {N} exceeds the cap N_max={cap}")
    return int(N)


class VertexRef(NamedTuple):
    """A vertex given by its depth and the integer value of its bit string."""

    depth: int
    index: int

    def parent(self) -> "VertexRef":
        if self.depth == 0:
            raise ValueError("the root has no parent")
        return VertexRef(self.depth - 1, self.index >> 1)

    def children(self) -> tuple["VertexRef", "VertexRef"]:
        return (VertexRef(self.depth + 1, 2 * self.index),
                VertexRef(self.depth + 1, 2 * self.index + 1))

    def flat(self) -> int:
        return (1 << self.depth) - 1 + self.index

    @classmethod
    def from_flat(cls, v: int) -> "VertexRef":
        depth = (int(v) + 1).bit_length() - 1
        return cls(depth, int(v) + 1 - (1 << depth))

    def is_valid(self, N: int) -> bool:
        return 0 <= self.depth <= N and 0 <= self.index < (1 << self.depth)


@dataclass(frozen=True)
class TreeWeights:
    """Edge weights ``W[k-1]`` shared by every edge at depth ``k``."""

    W: tuple[float, ...]

    def __post_init__(self):
        W = tuple(float(w) for w in np.atleast_1d(np.asarray(self.W, dtype=float)))
        if len(W) == 0:
            raise ValueError("at least one weight is required")
        check_height(len(W))
        arr = np.asarray(W)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("edge weights must be strictly positive and finite")
        object.__setattr__(self, "W", W)

    @property
    def N(self) -> int:
        return len(self.W)

    def array(self) -> np.ndarray:
        return np.asarray(self.W, dtype=float)

    def depth_weights(self) -> np.ndarray:
        """``2**k * W_k`` for k = 1..N: the mass of one depth class of edges."""
        k = np.arange(1, self.N + 1)
        return np.ldexp(self.array(), k)

    def edge_weights(self) -> np.ndarray:
        """Per-edge weight vector in canonical edge order."""
        return self.array()[edge_depths(self.N) - 1]

    def to_dict(self) -> dict:
        return {"N": self.N, "W": list(self.W)}

    @classmethod
    def from_dict(cls, data: dict) -> "TreeWeights":
        weights = cls(tuple(data["W"]))
        if "N" in data and int(data["N"]) != weights.N:
            raise ValueError(f"N={data['N']} does not match {weights.N} weights")
        return weights

    @classmethod
    def unit(cls, N: int) -> "TreeWeights":
        return cls((1.0,) * check_height(N))

    @classmethod
    def dyadic(cls, N: int, c: float = 1.0) -> "TreeWeights":
        k = np.arange(1, check_height(N) + 1)
        return cls(tuple(c * np.ldexp(1.0, -k)))

    @classmethod
    def geometric(cls, N: int, beta: float, c: float = 1.0) -> "TreeWeights":
        k = np.arange(1, check_height(N) + 1)
        return cls(tuple(c * float(beta) ** k))


def n_vertices(N: int) -> int:
    return (1 << (N + 1)) - 1


def n_edges(N: int) -> int:
    return (1 << (N + 1)) - 2


def n_leaves(N: int) -> int:
    return 1 << N


def level(k: int) -> slice:
    """Slice of depth-``k`` vertices inside a vertex field."""
    return slice((1 << k) - 1, (1 << (k + 1)) - 1)


def edge_level(k: int) -> slice:
    """Slice of depth-``k`` edges (k >= 1) inside an edge field."""
    return slice((1 << k) - 2, (1 << (k + 1)) - 2)


def vertex_depths(N: int) -> np.ndarray:
    return np.repeat(np.arange(N + 1), 1 << np.arange(N + 1))


def vertex_indices(N: int) -> np.ndarray:
    """Bit-string value of each vertex in canonical order."""
    return np.concatenate([np.arange(1 << k) for k in range(N + 1)])


def edge_depths(N: int) -> np.ndarray:
    return vertex_depths(N)[1:]


def edge_indices(N: int) -> np.ndarray:
    return vertex_indices(N)[1:]


def parents(N: int) -> np.ndarray:
    """Flat parent index of every non-root vertex (aligned with edges)."""
    return (np.arange(1, n_vertices(N)) - 1) // 2


def _check_length(values: np.ndarray, expected: int, role: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != expected:
        raise ValueError(f"{role} field must have length {expected}, got {values.shape[-1]}")
    return values


def check_vertex_field(F, N: int) -> np.ndarray:
    return _check_length(F, n_vertices(N), "vertex")


def check_edge_field(g, N: int) -> np.ndarray:
    return _check_length(g, n_edges(N), "edge")


def check_leaf_field(f, N: int) -> np.ndarray:
    return _check_length(f, n_leaves(N), "leaf")


def height_of(values, role: str) -> int:
    """Recover N from the length of a field in the given role."""
    n = np.asarray(values).shape[-1]
    if role == "vertices":
        N = (n + 1).bit_length() - 2
        ok = n == n_vertices(N)
    elif role == "edges":
        N = (n + 2).bit_length() - 2
        ok = n == n_edges(N)
    elif role == "leaves":
        N = n.bit_length() - 1
        ok = n == n_leaves(N)
    else:
        raise ValueError(f"unknown field role {role!r}")
    if not ok or N < 1:
        raise ValueError(f"length {n} is not a valid {role} field length")
    return N


def leaves_of(F: np.ndarray, N: int) -> np.ndarray:
    return np.asarray(F)[..., level(N)]


def bit_length(z) -> np.ndarray:
    """Vectorized ``int.bit_length`` for non-negative integers below 2**52."""
    z = np.asarray(z)
    _, exponent = np.frexp(z.astype(float))
    return np.where(z > 0, exponent, 0)


def dlca_many(depth_a, index_a, depth_b, index_b) -> np.ndarray:
    """Vectorized dlca over broadcastable arrays of (depth, index) pairs."""
    depth_a, index_a = np.asarray(depth_a), np.asarray(index_a)
    depth_b, index_b = np.asarray(depth_b), np.asarray(index_b)
    m = np.minimum(depth_a, depth_b)
    a = index_a >> (depth_a - m)
    b = index_b >> (depth_b - m)
    return m - bit_length(a ^ b)


def dlca(x: VertexRef, y: VertexRef, N: int | None = None) -> int:
    """Depth of the least common ancestor of two vertices.

    Both strings are truncated to the shorter length; the shared prefix is
    then whatever survives above the highest differing bit.
    """
    x, y = VertexRef(*x), VertexRef(*y)
    if N is not None and not (x.is_valid(N) and y.is_valid(N)):
        raise ValueError(f"vertices {x} and {y} are not both in the tree of height {N}")
    m = min(x.depth, y.depth)
    a = x.index >> (x.depth - m)
    b = y.index >> (y.depth - m)
    return m - (a ^ b).bit_length()


def is_descendant(y: VertexRef, x: VertexRef) -> bool:
    """True if ``y`` lies in the subtree rooted at ``x`` (``x`` included)."""
    return y.depth >= x.depth and dlca(x, y) == x.depth


def gradient(F: np.ndarray, N: int | None = None) -> np.ndarray:
    """Edge field ``F(x) - F(parent(x))``; accepts leading batch axes."""
    F = np.asarray(F, dtype=float)
    if N is None:
        N = height_of(F, "vertices")
    F = check_vertex_field(F, N)
    return F[..., 1:] - F[..., parents(N)]


def integrate(g: np.ndarray, N: int | None = None) -> np.ndarray:
    """Vertex field vanishing at the root whose gradient is ``g``.

    Sums are accumulated root-to-leaf one level at a time, so the value at
    ``x`` is ``((g(pi_1 x) + g(pi_2 x)) + ...) + g(x)``.
    """
    g = np.asarray(g, dtype=float)
    if N is None:
        N = height_of(g, "edges")
    g = check_edge_field(g, N)
    F = np.zeros(g.shape[:-1] + (n_vertices(N),))
    for k in range(1, N + 1):
        parent_values = np.repeat(F[..., level(k - 1)], 2, axis=-1)
        F[..., level(k)] = parent_values + g[..., edge_level(k)]
    return F


def symmetry_from_swaps(N: int, swaps) -> np.ndarray:
    """Vertex permutation of the automorphism given by per-vertex swap flags.

    ``swaps`` holds one flag for each internal vertex in canonical order;
    a set flag exchanges the two child subtrees of that vertex.  The result
    ``perm`` maps flat vertex ``v`` to ``perm[v]``.
    """
    N = check_height(N)
    swaps = np.asarray(swaps, dtype=bool)
    if swaps.shape != ((1 << N) - 1,):
        raise ValueError(f"expected {(1 << N) - 1} swap flags, got shape {swaps.shape}")
    perm = np.zeros(n_vertices(N), dtype=np.int64)
    for k in range(1, N + 1):
        v = np.arange((1 << k) - 1, (1 << (k + 1)) - 1)
        par = (v - 1) // 2
        bit = (v - 1) % 2
        perm[v] = 2 * perm[par] + 1 + (bit ^ swaps[par])
    return perm


def random_symmetry(N: int, seed) -> np.ndarray:
    """A uniformly random tree automorphism, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    return symmetry_from_swaps(N, rng.integers(0, 2, size=(1 << N) - 1).astype(bool))


def leaf_permutation(perm: np.ndarray, N: int) -> np.ndarray:
    """Restriction of a vertex permutation to leaves, as leaf indices."""
    offset = (1 << N) - 1
    return perm[offset:] - offset
