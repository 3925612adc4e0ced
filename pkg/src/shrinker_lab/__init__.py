"""Numerical laboratory for self-shrinkers of mean curvature flow.

Sampled base shrinkers, the Gaussian-weighted Jacobi operator, the rescaled
flow of graphs, the geometric scales of nearby hypersurfaces and both sides
of the Łojasiewicz–Simon inequalities, with a reproducible experiment CLI.
"""

__version__ = "0.1.0"

from .errors import (AmbiguousKernelError, FilteringFailureError, GraphOutOfReachError,  # noqa: E402
                     HypothesisViolationError, InsufficientDomainError, InsufficientSignalError,
                     IntegrationFailureError, InvalidArgumentError, InvalidGridError, NoRootError,
                     NotConicalError, OrderUnavailableError, SchemaError, ShrinkerLabError,
                     SolvabilityError, UsageError)
from .fields import ScalarField  # noqa: E402
from .geometry import (Hypersurface, dissipation, entropy, gaussian_area, geometry_bundle,  # noqa: E402
                       normal_graph_geometry, phi_residual)
from .shrinkers import Shrinker, canonical_shrinker, solve_profile_shrinker  # noqa: E402
from .weighted_spaces import (ConeDecomposition, cone_decompose, holder_norm,  # noqa: E402
                              verify_ecker_sobolev, verify_interpolation)
from .operators import (assemble_L, euler_lagrange_M, fredholm_solve, kernel_basis,  # noqa: E402
                        linearization_check, projection_Pi, spectrum)
from .flow import (FlowTrace, dissipation_check, measure_decay_rate, run_flow,  # noqa: E402
                   step_rescaled_flow)
from .extension import extend_to_cone, rough_approx_check, solve_model_problem  # noqa: E402
from .scales import (conical_scale, core_graphical_check, rough_conical_scale,  # noqa: E402
                     scale_report, shrinker_scale)
from .loja import evaluate_loj, final_loj_check, fit_theta, theta_constant  # noqa: E402

__all__ = ["__version__",
           "AmbiguousKernelError",
           "FilteringFailureError",
           "GraphOutOfReachError",
           "HypothesisViolationError",
           "InsufficientDomainError",
           "InsufficientSignalError",
           "IntegrationFailureError",
           "InvalidArgumentError",
           "InvalidGridError",
           "NoRootError",
           "NotConicalError",
           "OrderUnavailableError",
           "SchemaError",
           "ShrinkerLabError",
           "SolvabilityError",
           "UsageError",
           "ScalarField",
           "Hypersurface",
           "dissipation",
           "entropy",
           "gaussian_area",
           "geometry_bundle",
           "normal_graph_geometry",
           "phi_residual",
           "Shrinker",
           "canonical_shrinker",
           "solve_profile_shrinker",
           "ConeDecomposition",
           "cone_decompose",
           "holder_norm",
           "verify_ecker_sobolev",
           "verify_interpolation",
           "assemble_L",
           "euler_lagrange_M",
           "fredholm_solve",
           "kernel_basis",
           "linearization_check",
           "projection_Pi",
           "spectrum",
           "FlowTrace",
           "dissipation_check",
           "measure_decay_rate",
           "run_flow",
           "step_rescaled_flow",
           "extend_to_cone",
           "rough_approx_check",
           "solve_model_problem",
           "conical_scale",
           "core_graphical_check",
           "rough_conical_scale",
           "scale_report",
           "shrinker_scale",
           "evaluate_loj",
           "final_loj_check",
           "fit_theta",
           "theta_constant",
           ]
