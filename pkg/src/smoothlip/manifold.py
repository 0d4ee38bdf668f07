"""Analytic model manifolds with exact geodesic machinery.

Four closed-form models are supported: Euclidean boxes, round spheres,
flat tori and the Poincare disk. Each provides geodesic distance,
exponential/logarithm maps, and an exact bi-Lipschitz distortion profile
for the exponential map on tangent balls. All distances and tangent
norms agree on radial rays (Gauss lemma), which the partition and
gluing modules rely on.

Coordinates are intrinsic: box coordinates for Euclidean models, wrapped
box coordinates for tori, (colatitude, azimuth) for the sphere, and disk
coordinates ``|x| < 1`` for the Poincare model. Batch operations take
``(n, dim)`` arrays; the `Point` wrapper is for the scalar API.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULTS
from .errors import CoverFailureError, DomainError, OutOfChartError

__all__ = [
    "ManifoldModel",
    "Euclidean",
    "Sphere",
    "FlatTorus",
    "PoincareDisk",
    "Point",
    "Chart",
    "CoverAtlas",
    "geodesic_distance",
    "exp_map",
    "log_map",
    "chart_radius",
    "build_cover",
]

_GOLDEN = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class Point:
    """A manifold point, held as an intrinsic coordinate tuple."""

    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def _as_batch(p) -> tuple[np.ndarray, bool]:
    """Coerce a Point / coord sequence / (n, dim) array to a batch."""
    if isinstance(p, Point):
        return p.array[None, :], True
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


class ManifoldModel(ABC):
    """Common interface of the analytic models.

    Batch methods (`distance`, `exp`, `log`) operate on coordinate
    arrays and are the performance path; everything is pure and safe
    for concurrent reads.
    """

    dim: int

    @abstractmethod
    def validate(self, points: np.ndarray) -> None:
        """Raise DomainError when coordinates are invalid."""

    @abstractmethod
    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Geodesic distance, broadcasting over rows."""

    @abstractmethod
    def exp(self, center: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Exponential map at `center` applied to rows of tangent vectors."""

    @abstractmethod
    def log(self, center: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Inverse of `exp`; rows of `q` must be within injectivity radius."""

    @abstractmethod
    def distortion(self, rho: float) -> float:
        """Exact bi-Lipschitz constant of exp on the tangent ball of radius rho."""

    @abstractmethod
    def injectivity_radius(self) -> float:
        ...

    @abstractmethod
    def sample_region(self, n: int, rng: np.random.Generator | None = None,
                      quasi: bool = True) -> np.ndarray:
        """Sample of the model's standard compact region (see subclasses)."""

    def ball_sample(self, center: np.ndarray, radius: float, n: int,
                    rng: np.random.Generator) -> np.ndarray:
        """Area-uniform sample of the geodesic ball B(center, radius)."""
        radius = float(radius)
        if radius >= self.injectivity_radius():
            raise DomainError("ball radius exceeds injectivity radius")
        u = rng.uniform(size=n)
        r = self._ball_radius_icdf(u, radius)
        if self.dim == 1:
            dirs = rng.choice([-1.0, 1.0], size=(n, 1))
        else:
            dirs = rng.normal(size=(n, self.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return self.exp(np.asarray(center, dtype=float), dirs * r[:, None])

    def _ball_radius_icdf(self, u: np.ndarray, radius: float) -> np.ndarray:
        # Flat-space default: density ~ r^(d-1).
        return radius * u ** (1.0 / self.dim)

    def ball_volume(self, radius: float) -> float:
        """Riemannian volume of a geodesic ball (flat default)."""
        r = float(radius)
        return {1: 2.0 * r, 2: math.pi * r * r, 3: 4.0 / 3.0 * math.pi * r ** 3}[self.dim]

    # -- helpers shared by subclasses -------------------------------------

    def _pairwise_to(self, center: np.ndarray, pts: np.ndarray) -> np.ndarray:
        return self.distance(np.broadcast_to(center, pts.shape), pts)


# ---------------------------------------------------------------------------
# Euclidean box
# ---------------------------------------------------------------------------

class Euclidean(ManifoldModel):
    """R^d with a bounding box used for region sampling.

    The box bounds the modeled compact region; exp/log remain valid on
    all of R^d, so tangent grids may spill past the box.
    """

    def __init__(self, dim: int, box: Sequence[tuple[float, float]] | None = None):
        if not 1 <= dim <= 3:
            raise DomainError(f"dimension {dim} outside desk scale 1..3")
        self.dim = dim
        if box is None:
            box = [(-1.0, 1.0)] * dim
        self.box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(self.box) != dim or any(hi <= lo for lo, hi in self.box):
            raise DomainError("bounding box must have dim nonempty intervals")

    def validate(self, points):
        pts = np.atleast_2d(points)
        if pts.shape[1] != self.dim or not np.all(np.isfinite(pts)):
            raise DomainError("non-finite or wrong-dimension coordinates")

    def distance(self, p, q):
        return np.linalg.norm(np.asarray(q, float) - np.asarray(p, float), axis=-1)

    def exp(self, center, v):
        return np.asarray(center, float) + np.asarray(v, float)

    def log(self, center, q):
        return np.asarray(q, float) - np.asarray(center, float)

    def distortion(self, rho):
        return 1.0

    def injectivity_radius(self):
        return math.inf

    def sample_region(self, n, rng=None, quasi=True):
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        if quasi:
            per_axis = max(2, int(round(n ** (1.0 / self.dim))))
            axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(self.dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=1)
        rng = rng or np.random.default_rng()
        return rng.uniform(lo, hi, size=(n, self.dim))


# ---------------------------------------------------------------------------
# Round sphere (2-sphere of radius R, coordinates (colatitude, azimuth))
# ---------------------------------------------------------------------------

class Sphere(ManifoldModel):
    """Round 2-sphere of radius R.

    Points are (theta, phi) with colatitude theta in [0, pi]. At the
    poles the azimuth is canonicalized to 0 so the tangent basis is
    deterministic. exp on the tangent ball of radius rho has
    bi-Lipschitz constant (rho/R)/sin(rho/R): exp itself is metrically
    1-Lipschitz, the inverse realizes the ratio tangentially at the
    outer radius.
    """

    dim = 2

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise DomainError("sphere radius must be positive")
        self.radius = float(radius)

    def validate(self, points):
        pts = np.atleast_2d(points)
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise DomainError("bad sphere coordinates")
        if np.any(pts[:, 0] < -1e-12) or np.any(pts[:, 0] > math.pi + 1e-12):
            raise DomainError("colatitude outside [0, pi]")

    def embed(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        th, ph = pts[:, 0], pts[:, 1]
        st = np.sin(th)
        return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=1)

    def unembed(self, xyz: np.ndarray) -> np.ndarray:
        th = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
        ph = np.arctan2(xyz[:, 1], xyz[:, 0])
        ph = np.where(ph < 0, ph + 2 * math.pi, ph)
        ph = np.where((th < 1e-14) | (th > math.pi - 1e-14), 0.0, ph)
        return np.stack([th, ph], axis=1)

    def _basis(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(pts, float))
        th, ph = pts[:, 0], pts[:, 1]
        e1 = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
        e2 = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
        return e1, e2

    def distance(self, p, q):
        xp = self.embed(np.atleast_2d(p))
        xq = self.embed(np.atleast_2d(q))
        xp, xq = np.broadcast_arrays(xp, xq)
        dot = np.clip(np.sum(xp * xq, axis=-1), -1.0, 1.0)
        return self.radius * np.arccos(dot)

    def exp(self, center, v):
        c = np.atleast_2d(np.asarray(center, float))
        v = np.atleast_2d(np.asarray(v, float))
        x = self.embed(c)
        e1, e2 = self._basis(c)
        vec = v[:, :1] * e1 + v[:, 1:] * e2
        norm = np.linalg.norm(v, axis=1)
        t = norm / self.radius
        unit = np.divide(vec, norm[:, None], out=np.zeros_like(vec), where=norm[:, None] > 0)
        y = np.cos(t)[:, None] * x + np.sin(t)[:, None] * unit
        return self.unembed(y)

    def log(self, center, q):
        c = np.atleast_2d(np.asarray(center, float))
        qq = np.atleast_2d(np.asarray(q, float))
        x = self.embed(c)
        y = self.embed(qq)
        x, y = np.broadcast_arrays(x, y)
        dot = np.clip(np.sum(x * y, axis=1), -1.0, 1.0)
        alpha = np.arccos(dot)
        tang = y - dot[:, None] * x
        tn = np.linalg.norm(tang, axis=1)
        unit = np.divide(tang, tn[:, None], out=np.zeros_like(tang), where=tn[:, None] > 1e-300)
        e1, e2 = self._basis(c)
        scale = self.radius * alpha
        return np.stack([scale * np.sum(unit * e1, axis=1),
                         scale * np.sum(unit * e2, axis=1)], axis=1)

    def distortion(self, rho):
        t = rho / self.radius
        if t <= 0:
            return 1.0
        if t >= math.pi:
            return math.inf
        return t / math.sin(t)

    def injectivity_radius(self):
        return math.pi * self.radius

    def sample_region(self, n, rng=None, quasi=True):
        """Whole sphere; quasi = Fibonacci lattice, else area-uniform."""
        if quasi:
            k = np.arange(n)
            z = 1.0 - 2.0 * (k + 0.5) / n
            th = np.arccos(z)
            ph = np.mod(k * _GOLDEN, 2 * math.pi)
            return np.stack([th, ph], axis=1)
        rng = rng or np.random.default_rng()
        z = rng.uniform(-1, 1, size=n)
        ph = rng.uniform(0, 2 * math.pi, size=n)
        return np.stack([np.arccos(z), ph], axis=1)

    def _ball_radius_icdf(self, u, radius):
        t = radius / self.radius
        return self.radius * np.arccos(1.0 - u * (1.0 - math.cos(t)))

    def ball_volume(self, radius):
        R = self.radius
        return 2.0 * math.pi * R * R * (1.0 - math.cos(radius / R))


# ---------------------------------------------------------------------------
# Flat torus
# ---------------------------------------------------------------------------

class FlatTorus(ManifoldModel):
    """Product of circles with the given periods; wrapped box coordinates."""

    def __init__(self, periods: Sequence[float]):
        periods = tuple(float(L) for L in periods)
        if not 1 <= len(periods) <= 3 or any(L <= 0 for L in periods):
            raise DomainError("need 1..3 positive periods")
        self.periods = periods
        self.dim = len(periods)
        self._L = np.asarray(periods, dtype=float)

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        return np.mod(np.asarray(pts, float), self._L)

    def validate(self, points):
        pts = np.atleast_2d(points)
        if pts.shape[1] != self.dim or not np.all(np.isfinite(pts)):
            raise DomainError("bad torus coordinates")

    def distance(self, p, q):
        d = np.mod(np.abs(np.asarray(q, float) - np.asarray(p, float)), self._L)
        d = np.minimum(d, self._L - d)
        return np.linalg.norm(d, axis=-1)

    def exp(self, center, v):
        return self.wrap(np.asarray(center, float) + np.asarray(v, float))

    def log(self, center, q):
        d = np.asarray(q, float) - np.asarray(center, float)
        return (d + self._L / 2) % self._L - self._L / 2

    def distortion(self, rho):
        return 1.0 if rho <= self.injectivity_radius() else math.inf

    def injectivity_radius(self):
        return float(min(self.periods)) / 2.0

    def sample_region(self, n, rng=None, quasi=True):
        if quasi:
            per_axis = max(2, int(round(n ** (1.0 / self.dim))))
            axes = [np.linspace(0, L, per_axis, endpoint=False) for L in self.periods]
            mesh = np.meshgrid(*axes, indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=1)
        rng = rng or np.random.default_rng()
        return rng.uniform(0, self._L, size=(n, self.dim))


# ---------------------------------------------------------------------------
# Poincare disk
# ---------------------------------------------------------------------------

def _mobius_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = np.sum(a * b, axis=-1, keepdims=True)
    na2 = np.sum(a * a, axis=-1, keepdims=True)
    nb2 = np.sum(b * b, axis=-1, keepdims=True)
    den = 1.0 + 2.0 * ab + na2 * nb2
    return ((1.0 + 2.0 * ab + nb2) * a + (1.0 - na2) * b) / den


class PoincareDisk(ManifoldModel):
    """Hyperbolic plane of curvature -1/scale^2 in the unit-disk model.

    Metric factor 2*scale/(1-|x|^2), so d(0, x) = 2*scale*artanh|x|.
    Geodesic operations go through Mobius translations, which move the
    base point to the origin where the formulas are radial.
    """

    dim = 2

    def __init__(self, scale: float = 1.0, region_radius: float = 2.0):
        if scale <= 0:
            raise DomainError("scale must be positive")
        self.scale = float(scale)
        # Hyperbolic radius of the standard compact region.
        self.region_radius = float(region_radius)

    def validate(self, points):
        pts = np.atleast_2d(points)
        if pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise DomainError("bad disk coordinates")
        if np.any(np.linalg.norm(pts, axis=1) >= 1.0):
            raise DomainError("coordinates must lie inside the unit disk")

    def distance(self, p, q):
        p = np.atleast_2d(np.asarray(p, float))
        q = np.atleast_2d(np.asarray(q, float))
        p, q = np.broadcast_arrays(p, q)
        m = _mobius_add(-p, q)
        nm = np.clip(np.linalg.norm(m, axis=-1), 0.0, 1.0 - 1e-16)
        return 2.0 * self.scale * np.arctanh(nm)

    def exp(self, center, v):
        c = np.atleast_2d(np.asarray(center, float))
        v = np.atleast_2d(np.asarray(v, float))
        t = np.linalg.norm(v, axis=1, keepdims=True)
        unit = np.divide(v, t, out=np.zeros_like(v), where=t > 0)
        return _mobius_add(c, np.tanh(t / (2.0 * self.scale)) * unit)

    def log(self, center, q):
        c = np.atleast_2d(np.asarray(center, float))
        qq = np.atleast_2d(np.asarray(q, float))
        c, qq = np.broadcast_arrays(c, qq)
        b = _mobius_add(-c, qq)
        nb = np.clip(np.linalg.norm(b, axis=1, keepdims=True), 0.0, 1.0 - 1e-16)
        unit = np.divide(b, nb, out=np.zeros_like(b), where=nb > 0)
        return 2.0 * self.scale * np.arctanh(nb) * unit

    def distortion(self, rho):
        t = rho / self.scale
        return math.sinh(t) / t if t > 0 else 1.0

    def injectivity_radius(self):
        return math.inf

    def sample_region(self, n, rng=None, quasi=True):
        """Hyperbolic ball of radius `region_radius` about the origin."""
        s, R = self.scale, self.region_radius
        if quasi:
            k = np.arange(n) + 0.5
            u = k / n
            ang = np.mod(np.arange(n) * _GOLDEN, 2 * math.pi)
        else:
            rng = rng or np.random.default_rng()
            u = rng.uniform(size=n)
            ang = rng.uniform(0, 2 * math.pi, size=n)
        # area(rho) ~ cosh(rho/s) - 1: invert for area-uniform radii
        rho = s * np.arccosh(1.0 + u * (math.cosh(R / s) - 1.0))
        rc = np.tanh(rho / (2 * s))
        return np.stack([rc * np.cos(ang), rc * np.sin(ang)], axis=1)

    def _ball_radius_icdf(self, u, radius):
        t = radius / self.scale
        return self.scale * np.arccosh(1.0 + u * (math.cosh(t) - 1.0))

    def ball_volume(self, radius):
        s = self.scale
        return 2.0 * math.pi * s * s * (math.cosh(radius / s) - 1.0)

    def ball_sample(self, center, radius, n, rng):
        u = rng.uniform(size=n)
        r = self._ball_radius_icdf(u, float(radius))
        dirs = rng.normal(size=(n, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return self.exp(np.asarray(center, float), dirs * r[:, None])


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Exponential chart: exp is (1+eps')-bi-Lipschitz on the 3*radius ball."""

    model: ManifoldModel
    center: Point
    radius: float            # delta; the chart covers the 3*delta ball
    distortion: float        # 1 + eps'

    def __post_init__(self):
        if self.radius <= 0 or self.distortion < 1.0:
            raise DomainError("chart needs radius > 0 and distortion >= 1")

    @property
    def center_array(self) -> np.ndarray:
        return self.center.array


def geodesic_distance(model: ManifoldModel, p, q) -> float | np.ndarray:
    """Closed-form geodesic distance; scalar in, scalar out."""
    pa, p_scalar = _as_batch(p)
    qa, q_scalar = _as_batch(q)
    model.validate(pa)
    model.validate(qa)
    d = model.distance(pa, qa)
    return float(d[0]) if (p_scalar and q_scalar) else d


def exp_map(chart: Chart, v) -> Point | np.ndarray:
    """exp at the chart center; tangent norms must stay within the 3-delta ball."""
    va, scalar = _as_batch(v)
    lim = 3.0 * chart.radius * (1.0 + 1e-9)
    norms = np.linalg.norm(va, axis=1)
    if np.any(norms > lim):
        raise OutOfChartError(
            f"tangent norm {norms.max():.6g} exceeds chart ball 3*delta = {3 * chart.radius:.6g}")
    out = chart.model.exp(chart.center_array, va)
    return Point(tuple(out[0])) if scalar else out


def log_map(chart: Chart, q) -> np.ndarray:
    """Inverse chart map; points must lie in the geodesic 3-delta ball."""
    qa, scalar = _as_batch(q)
    d = chart.model.distance(chart.center_array, qa)
    lim = 3.0 * chart.radius * (1.0 + 1e-9)
    if np.any(d > lim):
        raise OutOfChartError(
            f"point at distance {d.max():.6g} outside chart ball 3*delta = {3 * chart.radius:.6g}")
    out = chart.model.log(chart.center_array, qa)
    return out[0] if scalar else out


def chart_radius(model: ManifoldModel, p, eps_prime: float,
                 cap: float | None = None) -> float:
    """Largest delta with exp (1+eps')-bi-Lipschitz on the 3*delta ball.

    Inverts the model's closed-form distortion profile by bisection;
    Euclidean and flat-torus profiles are identically 1 below the wrap,
    so only the cap (default: injectivity radius / 3, or 1.0 when the
    injectivity radius is infinite) binds there.
    """
    if eps_prime <= 0:
        raise DomainError("eps_prime must be positive")
    pa, _ = _as_batch(p)
    model.validate(pa)
    inj = model.injectivity_radius()
    if cap is None:
        cap = inj / 3.0 if math.isfinite(inj) else DEFAULTS.chart_cap_flat
    hi = 3.0 * cap
    if math.isfinite(inj):
        hi = min(hi, inj * (1.0 - 1e-12))
    if model.distortion(hi) <= 1.0 + eps_prime:
        return hi / 3.0
    root = brentq(lambda t: model.distortion(t) - (1.0 + eps_prime), 1e-12, hi,
                  xtol=1e-14, rtol=1e-14)
    return float(root) / 3.0


# ---------------------------------------------------------------------------
# Greedy covers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverAtlas:
    """Ordered chart list with per-chart tolerance values.

    The partition module attaches the Lipschitz budgets C_n once the
    bump profiles (and hence Lip(phi_n)) are fixed; `lip_budgets` stays
    None until then.
    """

    charts: tuple[Chart, ...]
    eps_values: tuple[float, ...]
    eps_prime: float
    lip_budgets: tuple[float, ...] | None = None

    def __len__(self) -> int:
        return len(self.charts)

    @property
    def radii(self) -> np.ndarray:
        return np.array([c.radius for c in self.charts])

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.center_array for c in self.charts])


def build_cover(model: ManifoldModel, region, eps_prime: float,
                f: "Callable[[np.ndarray], np.ndarray]",
                eps_fn: "Callable[[np.ndarray], np.ndarray]",
                *,
                cap: float | None = None,
                delta_floor: float = DEFAULTS.delta_floor,
                f_oscillation: bool = True,
                coverage_scale: float = 1.0) -> CoverAtlas:
    """Greedy farthest-point cover of a finite region sample.

    Chart centers are chosen deterministically: the first sample point
    seeds the cover, each further center is the uncovered sample point
    farthest from the chosen centers (ties broken by sample order).
    Each radius starts at `chart_radius` and is halved until the two
    oscillation conditions hold over the sampled 3*delta ball:
    eps(q) >= eps(p)/2, and when `f_oscillation` is set,
    |f(q) - f(p)| <= eps(p)/2. Halving below `delta_floor` raises
    CoverFailureError.

    `f` and `eps_fn` take (n, dim) coordinate arrays. A point counts as
    covered when within `coverage_scale * delta_n` of a center.
    """
    region = np.asarray(region, dtype=float)
    if region.size == 0:
        return CoverAtlas(charts=(), eps_values=(), eps_prime=eps_prime)
    model.validate(region)
    n = region.shape[0]
    f_vals = np.asarray(f(region), dtype=float)
    eps_vals = np.asarray(eps_fn(region), dtype=float)
    if np.any(eps_vals <= 0):
        raise DomainError("tolerance oracle must be positive on the region")

    covered = np.zeros(n, dtype=bool)
    mind = np.full(n, np.inf)
    charts: list[Chart] = []
    chart_eps: list[float] = []

    next_idx = 0
    while not covered.all():
        center = region[next_idx]
        eps_c = eps_vals[next_idx]
        f_c = f_vals[next_idx]
        delta = chart_radius(model, center, eps_prime, cap=cap)
        dists = model.distance(center[None, :], region)
        while True:
            in_ball = dists <= 3.0 * delta
            ok = np.all(eps_vals[in_ball] >= eps_c / 2.0)
            if ok and f_oscillation:
                ok = np.all(np.abs(f_vals[in_ball] - f_c) <= eps_c / 2.0)
            if ok:
                break
            delta /= 2.0
            if delta < delta_floor:
                raise CoverFailureError(
                    f"oscillation conditions force delta below floor {delta_floor} "
                    f"at center index {next_idx}")
        charts.append(Chart(model=model, center=Point(tuple(center)),
                            radius=delta, distortion=1.0 + eps_prime))
        chart_eps.append(float(eps_c))
        covered |= dists <= coverage_scale * delta
        mind = np.minimum(mind, dists)
        if covered.all():
            break
        masked = np.where(covered, -np.inf, mind)
        next_idx = int(np.argmax(masked))

    return CoverAtlas(charts=tuple(charts), eps_values=tuple(chart_eps),
                      eps_prime=eps_prime)


def quasi_ball_sample(model: ManifoldModel, center, radius: float,
                      target_fill: float) -> np.ndarray:
    """Deterministic quasi-uniform sample of B(center, radius).

    `target_fill` is the largest distance any ball point should be from
    the sample; the construction oversamples so the realized fill radius
    stays below it. Used to seed covers whose plateaus must catch fresh
    verification points.
    """
    center = np.asarray(center, dtype=float)
    radius = float(radius)
    if model.dim == 1:
        count = max(3, int(math.ceil(radius / max(target_fill, 1e-12))) + 1)
        offs = np.linspace(-radius, radius, 2 * count + 1)[:, None]
        return model.exp(center, offs)
    area = model.ball_volume(radius)
    n = max(16, int(math.ceil(6.0 * area / (math.pi * target_fill ** 2))))
    if model.dim == 2:
        k = np.arange(n)
        u = (k + 0.5) / n
        r = model._ball_radius_icdf(u, radius)
        ang = np.mod(k * _GOLDEN, 2 * math.pi)
        v = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
        return model.exp(center, v)
    # 3-D: cubic lattice clipped to the ball
    per_axis = max(3, int(math.ceil(2 * radius / max(target_fill, 1e-12))))
    ax = np.linspace(-radius, radius, per_axis)
    mesh = np.meshgrid(ax, ax, ax, indexing="ij")
    v = np.stack([m.ravel() for m in mesh], axis=1)
    v = v[np.linalg.norm(v, axis=1) <= radius]
    return model.exp(center, v)


def sample_pairs_near(model: ManifoldModel, anchors: np.ndarray, radius: float,
                      n_pairs: int, rng: np.random.Generator,
                      floor: float = 0.0,
                      keep: "Callable[[np.ndarray], np.ndarray] | None" = None,
                      max_tries: int = 60) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random point pairs, each drawn inside one anchor's radius-ball.

    Pairs closer than `floor` are re-drawn: vanishing separations turn
    any discretization wiggle into an unbounded ratio and say nothing
    about the Lipschitz constant at the scale of interest. An optional
    `keep` predicate (boolean per point) rejects pairs leaving the
    domain of interest; unsatisfiable draws are dropped after
    `max_tries` rounds. Returns (P, Q, distances).
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    idx = rng.integers(0, len(anchors), size=n_pairs)
    base = anchors[idx]
    P = np.empty((n_pairs, anchors.shape[1]))
    Q = np.empty_like(P)
    d = np.zeros(n_pairs)
    todo = np.arange(n_pairs)
    for _ in range(max_tries):
        if len(todo) == 0:
            break
        m = len(todo)
        u1 = model._ball_radius_icdf(rng.uniform(size=m), radius)
        u2 = model._ball_radius_icdf(rng.uniform(size=m), radius)
        if model.dim == 1:
            d1 = rng.choice([-1.0, 1.0], size=(m, 1))
            d2 = rng.choice([-1.0, 1.0], size=(m, 1))
        else:
            d1 = rng.normal(size=(m, model.dim))
            d1 /= np.linalg.norm(d1, axis=1, keepdims=True)
            d2 = rng.normal(size=(m, model.dim))
            d2 /= np.linalg.norm(d2, axis=1, keepdims=True)
        p = model.exp(base[todo], d1 * u1[:, None])
        q = model.exp(base[todo], d2 * u2[:, None])
        dist = model.distance(p, q)
        P[todo], Q[todo], d[todo] = p, q, dist
        bad = dist < floor
        if keep is not None:
            bad |= ~(np.asarray(keep(p), bool) & np.asarray(keep(q), bool))
        todo = todo[bad]
    if len(todo):
        ok = np.setdiff1d(np.arange(n_pairs), todo)
        return P[ok], Q[ok], d[ok]
    return P, Q, d
