"""Kernels of the edge operator and their depth-reduced form.

Run with ``python3 demos/02_kernels_and_reduction.py``.
"""

import numpy as np

from tree_sobolev.kernels import (kernel_matrix, kernel_matrix_bruteforce, kernel_parts,
                                  reduced_L0, reduced_L1, reduced_L_bound, reversed_kernel)
from tree_sobolev.tree_core import TreeWeights
from tree_sobolev.walk import WalkProfile

np.set_printoptions(precision=4, suppress=True, linewidth=120)

N, p = 4, 1.5
weights = TreeWeights((1.0, 0.5, 4.0, 2.0))
profile = WalkProfile.from_weights(weights, p)

# The closed form of the edge kernel matches the definition through
# gradient, extension and integration.
K = kernel_matrix(profile)
print("edge kernel", K.shape, "closed form vs definition:",
      np.max(np.abs(K - kernel_matrix_bruteforce(profile))))

# Pairs where one edge lies below the other carry non-negative entries;
# all other pairs are non-positive.
K0, K1 = kernel_parts(profile)
print("non-ancestral part max:", K0.max(), " ancestral part min:", K1.min())

# Acting on fields that depend only on depth, both parts reduce to N x N
# matrices, and they cancel exactly.
L0, L1 = reduced_L0(profile), reduced_L1(profile)
print("\nreduced ancestral kernel L1:\n", L1)
print("|L0 + L1| max:", np.max(np.abs(L0 + L1)))
print("entrywise bound holds:", bool(np.all(L1 <= reduced_L_bound(profile) + 1e-15)))

# Reading depths from the leaves up turns the bound into a Hardy-type pair.
rev = reversed_kernel(weights, p)
print("\nreversed escape probabilities Q:", rev.Q)
print("reversed depth weights w:", rev.w)
