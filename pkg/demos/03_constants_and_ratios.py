"""How far the walk extension is from optimal, against the explicit constants.

Run with ``python3 demos/03_constants_and_ratios.py`` (a few seconds).
"""

from tree_sobolev.hardy import theoretical_constants
from tree_sobolev.report import norm_report
from tree_sobolev.tree_core import TreeWeights

families = {
    "dyadic": TreeWeights.dyadic,
    "unit": TreeWeights.unit,
    "geometric 1/3": lambda N: TreeWeights.geometric(N, 1 / 3),
    "geometric 3": lambda N: TreeWeights.geometric(N, 3.0),
}

print(f"{'p':>5} {'C_bar':>8} {'C_hat':>8}")
for p in (1.25, 1.5, 2.0, 3.0, 4.0):
    c = theoretical_constants(p)
    print(f"{p:5.2f} {c.C_bar:8.3f} {c.C_hat:8.3f}")

# For each configuration: the worst sampled ratio ||Hf|| / trace(f), the
# power-iteration norm of the reduced operator, and a lower bound for the
# full edge operator at small N.
print(f"\n{'family':>14} {'N':>2} {'p':>5} {'max ratio':>10} {'2|S0|':>8} {'|T| >=':>8} {'C_bar':>8}")
for name, make in families.items():
    for N in (4, 8):
        for p in (1.5, 3.0):
            rep = norm_report(make(N), p, samples=100, seed=0)
            lower = "" if rep.opnorm_T_lower is None else f"{rep.opnorm_T_lower:8.3f}"
            print(f"{name:>14} {N:2d} {p:5.2f} {rep.max_ratio:10.4f} {rep.bound_2S0:8.3f} "
                  f"{lower:>8} {rep.constants['C_bar']:8.3f}")

# The sampled ratios sit far below C_bar: the constants are uniform in N
# and in the weights, and make no attempt to be sharp.
