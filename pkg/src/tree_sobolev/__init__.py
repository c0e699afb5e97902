"""Linear Sobolev extension on radially symmetric weighted binary trees."""

from .extension import averaging_extend, harmonic_extend, harmonicity_residual, induced_T
from .hardy import muckenhoupt_best_A, theoretical_constants
from .kernels import (kernel_bruteforce, kernel_closed_form, kernel_matrix, kernel_parts,
                      reduced_L, reduced_L0, reduced_L1, reduced_L_bound, reversed_kernel)
from .norms import lp_edge_norm, opnorm_power_iteration, sobolev_seminorm, weighted_lp
from .report import NormReport, extension_ratio, extension_ratios, norm_report
from .trace import ConvergenceError, TraceResult, trace_seminorm
from .tree_core import TreeWeights, VertexRef, dlca, gradient, integrate, random_symmetry
from .walk import (WalkProfile, hitting_minimum, increment_coeffs, leaf_hit_coeffs,
                   q_from_weights, simulate_walk, simulate_walks, transitions_from_q)

__version__ = "0.1.0"
