"""Smooth approximation of Lipschitz functions on model Riemannian
manifolds, with quantitative error and Lipschitz-budget verification.

The package builds, for a Lipschitz function f on an analytic model
manifold, a smooth glued approximation g with |f - g| <= eps pointwise
and Lip(g) <= Lip(f) + r, and measures both claims on samples. The
construction: exponential-chart covers, McShane extension, quadratic
inf/sup envelopes, mollification, and a telescoped partition of unity
with tracked Lipschitz budgets. Corollaries ship too: uniform bumps
with gradient bound R/delta, and smooth perturbations producing strong
minima of lower semicontinuous functions.
"""

from .config import DEFAULTS
from .envelope import (EnvelopeParams, inf_conv_bruteforce, inf_conv_quadratic,
                       lasry_lions, pick_lambda_mu, sup_conv_quadratic)
from .errors import (BumpabilityError, ConfigError, CoverFailureError,
                     DomainError, EstimationError, ExtensionError, MarginError,
                     OutOfChartError, OutOfDomainError, ParameterError,
                     PartitionCoverageError, PipelineError, SearchError,
                     SmoothLipError)
from .extend import mcshane_extend, truncate
from .field import (FunctionOracle, GridField, TangentGrid, discrete_gradient,
                    discrete_lipschitz, discrete_lipschitz_manifold,
                    discrete_second_difference, interpolate, sample_to_grid,
                    write_field_csv)
from .glue import (ApproxRequest, DgzResult, GluedFunction, LipschitzReport,
                   dgz_perturb, make_verification_sample, pick_eps_prime,
                   smooth_lipschitz_approx, verify_approx)
from .manifold import (Chart, CoverAtlas, Euclidean, FlatTorus, ManifoldModel,
                       Point, PoincareDisk, Sphere, build_cover, chart_radius,
                       exp_map, geodesic_distance, log_map)
from .smooth import Mollifier, choose_radius, mollify
from .unity import (ChartBump, Cutoff, Partition, PartitionBudget, UniformBump,
                    chart_bump, make_corollary_cutoff, make_cutoff, partition,
                    profile_constant, uniform_bump)

__version__ = "0.1.0"
