"""Principal Dirichlet eigenvalue of the discrete p-Laplacian on finite weighted rooted trees."""

from .dirichlet import (apply_omega_p, dirichlet_energy, lp_mass, pairing, rayleigh_quotient,
                        signed_power)
from .estimates import (BasicEstimate, basic_bounds, compute_C, compute_sigma, homogeneous_Bp_printed,
                        homogeneous_sigma, step_test_function)
from .operators import (BoundInterval, Domain, DomainError, DomainTag, bounds_from_test_function,
                        ii_iteration, op_I, op_II, op_R, op_R_tilde, validate_domain)
from .oracle import (ConvergenceError, EigenPair, approximation_sequence, dense_p2_solve,
                     monotonicity_check, solve_principal)
from .tree import (PExponent, TreeError, WeightedTree, build_tree, derive_weights,
                   generate_homogeneous, random_tree, truncate)

__version__ = "0.1.0"
