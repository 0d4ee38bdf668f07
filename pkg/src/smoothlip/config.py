"""Desk-scale defaults used across modules.

Every constant here is a convention, not a theorem: callers may override
any of them per run. The values are chosen so that the standard test
scenarios (2-sphere, unit boxes, flat tori, hyperbolic disk patches) run
in seconds to minutes on one workstation.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Defaults:
    # Chart radius cap when the injectivity radius is infinite.
    chart_cap_flat: float = 1.0
    # delta below this during oscillation shrinking is a cover failure.
    delta_floor: float = 1e-6
    # Nodes per axis: 2**k + 1 with k = 8 in 1-D/2-D, k = 6 in 3-D.
    resolution_low_dim: int = 257
    resolution_3d: int = 65
    # Hard cap on grid sizes (node count), guards accidental huge allocs.
    max_grid_nodes: int = 1 << 22
    # Lipschitz floor kappa for envelope parameter selection with K ~ 0.
    kappa_floor: float = 1e-6
    # Cap on the inf-convolution scale lambda (relevant only for K ~ 0).
    lambda_cap: float = 1e6
    # Cap on the mollifier radius.
    mollifier_cap: float = 1.0
    # Plateau widening factor for pipeline partitions: the bump is 1 on
    # the (factor * delta)-ball so fresh verification points slightly off
    # the cover sample still land on a plateau.
    plateau_scale: float = 1.2
    # Pair-separation floor for Lipschitz estimation, as a fraction of
    # the smallest chart radius; ratios over shorter pairs amplify
    # discretization error without informing about Lip(g).
    pair_floor_scale: float = 0.5
    # Strong-minimum margin threshold for the perturbation search.
    strong_min_eta: float = 1e-9


DEFAULTS = Defaults()
