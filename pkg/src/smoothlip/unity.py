"""Smooth cutoffs, chart bumps, telescoped partitions of unity, and the
uniform bump construction.

The project-wide transition profile is the classical exp(-1/t) gluing
S(u) = s(u)/(s(u)+s(1-u)); its slope constant c0 = max|S'| (= 2 for
this profile) is measured once on a dense grid and recorded, so every
cutoff carries an honest Lipschitz bound c0/(b-a). Chart bumps are
evaluated through the geodesic distance to the chart center, which
equals the tangent norm of the log map on radial rays for every model
here, so plateau and support statements are exact in geodesic terms.

Partition functions are closed-form compositions evaluated on demand;
nothing is grid-sampled, so the normalization identity holds to
round-off wherever the plateaus cover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import DEFAULTS
from .errors import ParameterError, PartitionCoverageError, BumpabilityError
from .manifold import Chart, CoverAtlas, ManifoldModel, Point, _as_batch

__all__ = [
    "Cutoff",
    "make_cutoff",
    "make_corollary_cutoff",
    "profile_constant",
    "ChartBump",
    "chart_bump",
    "PartitionBudget",
    "Partition",
    "partition",
    "UniformBump",
    "uniform_bump",
]


def _s(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity monotone 0 -> 1 on [0, 1], exactly flat outside."""
    u = np.asarray(u, dtype=float)
    a = _s(u)
    b = _s(1.0 - u)
    return a / (a + b)


def _smoothstep_derivative(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = (u > 0) & (u < 1)
    um = u[m]
    a = np.exp(-1.0 / um)
    b = np.exp(-1.0 / (1.0 - um))
    da = a / um ** 2
    db = b / (1.0 - um) ** 2
    out[m] = (da * b + a * db) / (a + b) ** 2
    return out


@lru_cache(maxsize=1)
def profile_constant() -> float:
    """Slope constant c0 = max |S'| of the standard profile, measured once."""
    u = np.linspace(0.0, 1.0, 200_001)
    return float(np.max(_smoothstep_derivative(u)))


@dataclass(frozen=True)
class Cutoff:
    """Monotone C-smooth transition with exact plateaus.

    Decreasing cutoffs map (-inf, a] -> 1 and [b, +inf) -> 0 (the chart
    bump profile); increasing ones swap the plateaus (the uniform-bump
    profile). `lip` is the recorded Lipschitz bound; sampled two-point
    estimates never exceed it.
    """

    a: float
    b: float
    lip: float
    increasing: bool = False
    kind: str = "smoothstep"
    shoulder: float = 0.0  # normalized shoulder width of the blended profile

    def __call__(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        u = (np.atleast_1d(t) - self.a) / (self.b - self.a)
        if self.kind == "smoothstep":
            rising = _smoothstep(u)
        else:
            rising = _linear_core_profile(u, self.shoulder)
        out = rising if self.increasing else 1.0 - rising
        return float(out[0]) if scalar else out


def _linear_core_profile(u: np.ndarray, c: float) -> np.ndarray:
    """C^2 monotone 0 -> 1: sin^2 shoulders of width c around a linear core.

    Max slope 1/(1-c) in normalized units; exact plateaus outside [0,1].
    """
    m = 1.0 / (1.0 - c)
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    lo = u <= 0.0
    hi = u >= 1.0
    out[lo] = 0.0
    out[hi] = 1.0
    mid = ~(lo | hi)
    um = u[mid]
    res = np.empty_like(um)
    sh = um < c
    ce = (um >= c) & (um <= 1.0 - c)
    top = um > 1.0 - c
    res[sh] = m * (um[sh] / 2.0 - (c / (2.0 * math.pi)) * np.sin(math.pi * um[sh] / c))
    res[ce] = m * c / 2.0 + m * (um[ce] - c)
    ut = 1.0 - um[top]
    res[top] = 1.0 - m * (ut / 2.0 - (c / (2.0 * math.pi)) * np.sin(math.pi * ut / c))
    out[mid] = res
    return out


def make_cutoff(a: float, b: float) -> Cutoff:
    """Decreasing smooth cutoff: 1 on (-inf, a], 0 on [b, +inf)."""
    if not a < b:
        raise ParameterError(f"need a < b, got a={a}, b={b}")
    return Cutoff(a=float(a), b=float(b), lip=profile_constant() / (b - a))


def make_corollary_cutoff(eps: float) -> Cutoff:
    """Increasing cutoff for the uniform-bump composition.

    Contracts: 0 for t <= eps, 1 for t >= 1 - eps, and Lipschitz
    constant at most (1+eps)/(1-2eps). The pure smoothstep profile has
    slope constant ~2 and cannot meet the third contract, so the
    transition is re-scaled: a linear core with smooth shoulders, the
    shoulder width chosen so the measured slope fits under the bound.
    """
    if not 0.0 < eps < 0.5:
        raise ParameterError(f"need 0 < eps < 1/2, got {eps}")
    width = 1.0 - 2.0 * eps
    shoulder = 0.5 * eps / (1.0 + eps)     # keeps 1/(1-c) <= 1 + eps
    lip = 1.0 / ((1.0 - shoulder) * width)
    bound = (1.0 + eps) / (1.0 - 2.0 * eps)
    if lip > bound:
        raise ParameterError("internal: rescaled profile misses the slope bound")
    return Cutoff(a=eps, b=1.0 - eps, lip=lip, increasing=True,
                  kind="linear_core", shoulder=shoulder)


# ---------------------------------------------------------------------------
# Chart bumps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartBump:
    """phi_n: p -> theta_n(||log_{p_n}(p)||), evaluable on the whole model.

    The tangent norm of the log map equals the geodesic distance to the
    center on radial rays (Gauss lemma), so evaluation reduces to the
    model's closed-form distance; outside the support ball the value is
    exactly zero, which also realizes the zero-convention outside the
    3-delta chart ball. `lip_bound` records Lip(theta) * (1 + eps'),
    the budget-safe analytic bound.
    """

    chart: Chart
    cutoff: Cutoff
    lip_bound: float

    def __call__(self, points) -> np.ndarray | float:
        pts, scalar = _as_batch(points)
        d = self.chart.model.distance(self.chart.center_array, pts)
        vals = self.cutoff(d)
        return float(vals[0]) if scalar else vals

    @property
    def plateau_radius(self) -> float:
        return self.cutoff.a

    @property
    def support_radius(self) -> float:
        return self.cutoff.b


def chart_bump(chart: Chart, plateau_scale: float = 1.0) -> ChartBump:
    """Bump for one chart: 1 on B(p_n, plateau_scale * delta), 0 outside
    B(p_n, 2 delta).

    The support edge additionally stays inside the inscribed cube of
    the 3-delta ball (binding only in 3-D) so that glued interpolation
    never queries past sampled data. Requires plateau_scale * delta to
    leave room below the support edge.
    """
    delta = chart.radius
    dim = chart.model.dim
    b_edge = min(2.0 * delta, 0.95 * (3.0 * delta / math.sqrt(dim)))
    a_edge = min(plateau_scale * delta, 0.8 * b_edge)
    if a_edge < delta:
        raise ParameterError("plateau must contain the coverage delta-ball")
    cutoff = make_cutoff(a_edge, b_edge)
    return ChartBump(chart=chart, cutoff=cutoff,
                     lip_bound=cutoff.lip * chart.distortion)


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionBudget:
    """Recorded Lip(phi_j) and their running sums C_k."""

    lip_phi: tuple[float, ...]
    cumulative: tuple[float, ...]

    @classmethod
    def from_lipschitz(cls, lip_phi) -> "PartitionBudget":
        running, total = [], 0.0
        for L in lip_phi:
            total += L
            running.append(total)
        return cls(lip_phi=tuple(lip_phi), cumulative=tuple(running))


@dataclass(frozen=True)
class Partition:
    """Telescoped partition psi_k = phi_k * prod_{j<k} (1 - phi_j)."""

    atlas: CoverAtlas
    bumps: tuple[ChartBump, ...]
    budget: PartitionBudget

    def phi_matrix(self, points) -> np.ndarray:
        pts, _ = _as_batch(points)
        return np.stack([bump(pts) for bump in self.bumps])

    def psi_matrix(self, points) -> np.ndarray:
        """(n_charts, n_points) array of psi_k values."""
        phi = self.phi_matrix(points)
        shifted = np.vstack([np.ones((1, phi.shape[1])), (1.0 - phi)[:-1]])
        return phi * np.cumprod(shifted, axis=0)

    def psi(self, k: int, points) -> np.ndarray:
        return self.psi_matrix(points)[k]

    def coverage_defect(self, points) -> np.ndarray:
        """1 - sum_k psi_k = prod_k (1 - phi_k); zero exactly on plateaus."""
        phi = self.phi_matrix(points)
        return np.prod(1.0 - phi, axis=0)


def partition(atlas: CoverAtlas, region=None,
              plateau_scale: float = 1.0) -> tuple[Partition, CoverAtlas]:
    """Build the partition subordinated to {B(p_n, 2 delta_n)}.

    When a region sample is supplied, every sample point must sit on at
    least one plateau (that is what makes the telescoping sum equal 1);
    a gap raises PartitionCoverageError naming the point. Returns the
    partition and the atlas annotated with the budget sums C_n.
    """
    bumps = tuple(chart_bump(c, plateau_scale=plateau_scale) for c in atlas.charts)
    budget = PartitionBudget.from_lipschitz([b.lip_bound for b in bumps])
    annotated = CoverAtlas(charts=atlas.charts, eps_values=atlas.eps_values,
                           eps_prime=atlas.eps_prime,
                           lip_budgets=budget.cumulative)
    part = Partition(atlas=annotated, bumps=bumps, budget=budget)
    if region is not None and len(atlas.charts):
        pts = np.atleast_2d(np.asarray(region, dtype=float))
        defect = part.coverage_defect(pts)
        bad = np.nonzero(defect > 0.0)[0]
        if len(bad):
            worst = pts[bad[0]]
            raise PartitionCoverageError(
                f"region point {tuple(worst)} lies on no plateau "
                f"(defect {defect[bad[0]]:.3g}); enlarge the cover or plateaus")
    return part, annotated


# ---------------------------------------------------------------------------
# Uniform bump (Corollary 2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformBump:
    """b = theta(g): 1 at the center, 0 outside the delta-ball, with the
    sampled gradient estimate bounded by R/delta."""

    model: ManifoldModel
    center: Point
    delta: float
    R: float
    eps: float
    theta: Cutoff
    glued: object          # glue.GluedFunction
    report: object         # glue.LipschitzReport

    def __call__(self, points) -> np.ndarray | float:
        pts, scalar = _as_batch(points)
        g = self.glued.evaluate(pts, allow_uncovered=True)
        vals = self.theta(g)
        return float(vals[0]) if scalar else vals

    def sample_lipschitz(self, n_pairs: int = 2000,
                         rng: np.random.Generator | None = None,
                         floor: float | None = None) -> float:
        """Two-point gradient estimate over pairs near the support ball."""
        from .field import discrete_lipschitz_manifold
        from .manifold import sample_pairs_near
        rng = rng or np.random.default_rng(0)
        if floor is None:
            floor = 0.05 * self.delta
        anchors = self.model.ball_sample(self.center.array,
                                         1.1 * self.delta, 256, rng)
        P, Q, d = sample_pairs_near(self.model, anchors, 0.5 * self.delta,
                                    n_pairs, rng, floor=floor)
        return discrete_lipschitz_manifold(self(P), self(Q), d)


def _pick_bump_eps(delta: float, R: float) -> float:
    for m in range(2, 60):
        e = 2.0 ** (-m)
        if (1.0 + e) / (1.0 - 2.0 * e) * (1.0 / delta + e) <= R / delta:
            return e
    raise BumpabilityError(
        f"no cutoff parameter reaches gradient bound R/delta = {R / delta:.6g}")


def uniform_bump(model: ManifoldModel, p, delta: float, R: float,
                 eps: float | None = None, *,
                 resolution: int = 65,
                 region_scale: float = 1.3,
                 seed: int = 0,
                 verify_points: int = 2000) -> UniformBump:
    """Smooth bump with plateau value 1 at p, support in B(p, delta), and
    gradient bound R/delta.

    Seeds the main approximation pipeline with the tent function
    1 - d(q, p)/delta clamped to [0, 1] (Lipschitz constant 1/delta),
    then composes with the rescaled increasing cutoff. The cutoff's
    plateaus make both boundary conditions exact: anywhere the glued
    approximation is within eps of the tent, theta crushes the farfield
    to 0 and the peak to 1.
    """
    from .field import FunctionOracle
    from .glue import ApproxRequest, smooth_lipschitz_approx

    if R <= 1.0:
        raise ParameterError("the gradient bound needs R > 1")
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if eps is None:
        eps = _pick_bump_eps(delta, R)
    else:
        if not 0.0 < eps < 0.5 or \
                (1.0 + eps) / (1.0 - 2.0 * eps) * (1.0 / delta + eps) > R / delta:
            raise BumpabilityError(
                f"eps={eps} violates the bumpability inequality for R={R}, delta={delta}")

    center, _ = _as_batch(p)
    center = center[0]
    K = 1.0 / delta
    tent = FunctionOracle.ramp(model, center, slope=-K, offset=1.0, lo=0.0, hi=1.0)
    theta = make_corollary_cutoff(eps)

    # The pipeline tolerance stays safely inside the cutoff plateaus:
    # |g - tent| <= eps/2 plus discretization never crosses the eps line.
    from .glue import pick_eps_prime
    from .manifold import chart_radius, quasi_ball_sample
    eps_prime = pick_eps_prime(K, eps)
    delta_chart = chart_radius(model, center, eps_prime)
    region_radius = min(region_scale * delta,
                        0.999 * model.injectivity_radius())
    region = quasi_ball_sample(model, center, region_radius,
                               target_fill=0.15 * delta_chart)
    region = np.vstack([center[None, :], region])

    rng = np.random.default_rng(seed)
    req = ApproxRequest(
        model=model,
        oracle=tent,
        eps_fn=eps,
        r=eps,
        region=region,
        fresh_sampler=lambda n, g: model.ball_sample(center, region_radius, n, g),
        resolution=resolution,
        verify_points=verify_points,
        seed=seed,
    )
    glued, report = smooth_lipschitz_approx(req)
    return UniformBump(model=model, center=Point(tuple(center)), delta=float(delta),
                       R=float(R), eps=float(eps), theta=theta,
                       glued=glued, report=report)
