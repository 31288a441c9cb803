"""Pattern occurrences as general subtrees of conditioned Galton-Watson trees."""

from .degeneracy import (DegeneracyCertificate, LinearDecomposition, count_fringe_occurrences,
                         find_certificate, fit_linear_decomposition, fit_on_trees, variance_lower_bound,
                         verify_certificate)
from .errors import (DegenerateSampleError, GWSubtreeError, IncompleteTableError, InfeasibleSizeError,
                     InvalidDistributionError, OracleTooLargeError, PrecisionError, TreeParseError)
from .harness import (MomentReport, NormalityReport, heavy_tail_experiment, mc_moments, mu_n_convergence,
                      normality_of_sample, normality_test, truncation_decay, variance_scan)
from .offspring import (OffspringDistribution, geometric_half, heavy_tail, parse_distribution,
                        poisson_unit, size_biased, size_probability, table, validate)
from .oracle import (ExactLaw, enumerate_trees, exact_conditioned_law, exact_moments, mu_k_table,
                     mu_unconditioned, theta_exact, theta_kesten)
from .patterns import (Pattern, TruncationWindow, brute_force_count, subtree_count, toll_count,
                       truncated_additive, truncated_toll)
from .rng import SeededRng
from .sampler import sample_conditioned, sample_gw, sample_kesten
from .trees import OrderedTree, cut_at_depth, fringe_at, level_width, parse_tree, serialize_tree

__version__ = "0.1.0"
