"""Using the walk built for one exponent to extend data measured in another.

The walk depends on p unless the weights are proportional to 2^-k.  This
probe builds the walk for p0 and measures its extension ratio in a
different exponent p as the tree grows.  It only reports the numbers; no
claim about divergence is made.

Run with ``python3 demos/04_mismatched_exponent.py`` (a few seconds).
"""

import numpy as np

from tree_sobolev.extension import harmonic_extend
from tree_sobolev.norms import sobolev_seminorm
from tree_sobolev.report import sample_leaf_functions
from tree_sobolev.trace import trace_extensions
from tree_sobolev.tree_core import TreeWeights
from tree_sobolev.walk import WalkProfile


def worst_ratio(weights, p_walk, p_norm, samples=60, seed=0):
    f = sample_leaf_functions(weights.N, samples, seed)
    H = harmonic_extend(WalkProfile.from_weights(weights, p_walk), f)
    best = trace_extensions(weights, f, p_norm)[0]
    keep = best > 1e-12
    return float(np.max(sobolev_seminorm(weights, H, p_norm)[keep] / best[keep]))


p0 = 2.0
print(f"walk built for p0 = {p0}, unit weights")
print(f"{'N':>3} " + " ".join(f"p={p:<6}" for p in (1.5, 2.0, 3.0)))
for N in range(2, 11, 2):
    w = TreeWeights.unit(N)
    row = [worst_ratio(w, p0, p) for p in (1.5, 2.0, 3.0)]
    print(f"{N:3d} " + " ".join(f"{r:8.4f}" for r in row))

# The p = p0 column stays at one.  The other columns show how the mismatch
# behaves at these heights.
