"""Random walks on finite trees and isotropic jump processes on their leaves.

The main entry points:

* :mod:`ultraduality.tree`: trees, ultrametric elements, balls, ball trees
* :mod:`ultraduality.walk`: hitting probabilities, Green kernel, harmonic measure
* :mod:`ultraduality.boundary`: averaging operators, semigroup, jump kernel
* :mod:`ultraduality.duality`: walk <-> (phi, mu) and the exact checks
* :mod:`ultraduality.simulate`: seeded Monte Carlo
"""

from .boundary import (BoundaryOperator, JumpProcessSpec, SigmaMeasure, averaging_operator,
                       boundary_dirichlet_form, generator_matrix, j_kernel, j_matrix,
                       semigroup_operator, sigma_for_phi, standardize)
from .duality import (check_base_point_invariance, check_doob_naim, check_j_equals_theta, hd_form,
                      naim_kernel, process_to_walk, roundtrip, walk_to_process)
from .tree import (Tree, UltrametricElement, UltrametricSpace, ball, boundary_distance,
                   build_tree, confluent, generate_regular_tree, tree_from_ultrametric)
from .walk import (Walk, WalkKernels, check_kernel_identities, compute_F, compute_kernels,
                   compute_UG, dirichlet_form_tree, poisson_transform, reversible_measure,
                   validate_walk)

__version__ = "0.1.0"
