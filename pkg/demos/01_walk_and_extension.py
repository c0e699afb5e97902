"""The p-adapted random walk and the extension it defines.

Run with ``python3 demos/01_walk_and_extension.py``.
"""

import numpy as np

from tree_sobolev.extension import averaging_extend, harmonic_extend, harmonicity_residual
from tree_sobolev.norms import sobolev_seminorm
from tree_sobolev.trace import trace_seminorm
from tree_sobolev.tree_core import TreeWeights, VertexRef, n_leaves
from tree_sobolev.walk import WalkProfile, walk_stats

np.set_printoptions(precision=4, suppress=True)

# Edge weights grow by a factor 3 per depth, so deep edges are expensive.
N, p = 5, 3.0
weights = TreeWeights.geometric(N, 3.0)
profile = WalkProfile.from_weights(weights, p)

# q[s] is the chance that a walk started at depth s reaches the leaves before
# stepping above depth s; x[s] is the chance of stepping down from depth s.
print("q:", profile.q)
print("x:", profile.x)

# The Monte-Carlo simulator reproduces the distribution of the shallowest
# depth visited, p_{s,r}, for walks started at depth 3.
stats = walk_stats(profile, VertexRef(3, 0), trials=100_000, seed=1)
print("\nminimum depth from depth 3")
print("  exact    :", profile.P[3, :4])
print("  simulated:", stats.p_hat[:4])
print("  3 SE     :", 3 * stats.p_hat_se[:4])

# Extending a single-leaf spike: the walk extension spreads mass upward
# differently from plain subtree averaging.
f = np.zeros(n_leaves(N))
f[0] = 1.0
F = harmonic_extend(profile, f)
A = averaging_extend(f)
print("\nvalues on the path from the root to leaf 0")
path = [(1 << k) - 1 for k in range(N + 1)]
print("  walk extension:", F[path])
print("  averaging     :", A[path])
print("  mean-value residual of the walk extension:", harmonicity_residual(profile, F))

# Both extensions agree on the leaves; their energies differ.  The trace
# seminorm is the smallest energy any extension can reach.
best = trace_seminorm(weights, f, p).value
for name, G in (("walk", F), ("averaging", A)):
    print(f"  {name:9s} energy / optimum = {sobolev_seminorm(weights, G, p) / best:.4f}")
