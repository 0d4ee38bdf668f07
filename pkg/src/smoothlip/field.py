"""Grid-sampled scalar fields on tangent balls and coordinate boxes.

A `TangentGrid` is a regular lattice (per-axis spacing, shape, origin);
a `GridField` pairs it with one value per node. Fields are immutable
after construction and safe to read concurrently. Interpolation is
multilinear, differentiation uses central stencils, and Lipschitz
constants are estimated from axis-adjacent node pairs (a lower bound of
the true constant, consistent as the spacing shrinks).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULTS
from .errors import (DomainError, EstimationError, OutOfChartError,
                     OutOfDomainError)
from .manifold import Chart, ManifoldModel, exp_map

__all__ = [
    "TangentGrid",
    "GridField",
    "FunctionOracle",
    "sample_to_grid",
    "interpolate",
    "discrete_lipschitz",
    "discrete_lipschitz_manifold",
    "discrete_gradient",
    "discrete_second_difference",
    "write_field_csv",
]


@dataclass(frozen=True)
class TangentGrid:
    """Regular lattice: node (i_0..i_{d-1}) sits at origin + i * spacing."""

    spacing: tuple[float, ...]
    shape: tuple[int, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.spacing) == len(self.shape) == len(self.origin)):
            raise DomainError("spacing/shape/origin length mismatch")
        if any(h <= 0 for h in self.spacing) or any(s < 1 for s in self.shape):
            raise DomainError("need positive spacing and nonempty extent")
        if self.node_count > DEFAULTS.max_grid_nodes:
            raise DomainError(
                f"grid of {self.node_count} nodes exceeds cap {DEFAULTS.max_grid_nodes}")

    @classmethod
    def cube(cls, half_width: float, nodes_per_axis: int, dim: int) -> "TangentGrid":
        """Symmetric cube [-half_width, half_width]^dim."""
        h = 2.0 * half_width / (nodes_per_axis - 1)
        return cls(spacing=(h,) * dim, shape=(nodes_per_axis,) * dim,
                   origin=(-half_width,) * dim)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    def nodes(self) -> np.ndarray:
        """All node coordinates, lexicographic in the index tuple, (N, dim)."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def max_node_norm(self) -> float:
        corners = itertools.product(*[(self.origin[k],
                                       self.origin[k] + self.spacing[k] * (self.shape[k] - 1))
                                      for k in range(self.dim)])
        return max(math.sqrt(sum(c * c for c in corner)) for corner in corners)

    def pad(self, steps: int) -> "TangentGrid":
        """Grow by whole steps per side; nodes remain aligned."""
        return TangentGrid(
            spacing=self.spacing,
            shape=tuple(s + 2 * steps for s in self.shape),
            origin=tuple(o - steps * h for o, h in zip(self.origin, self.spacing)))

    def shrink(self, steps: int) -> "TangentGrid":
        if any(s - 2 * steps < 1 for s in self.shape):
            raise DomainError("shrink would empty the grid")
        return TangentGrid(
            spacing=self.spacing,
            shape=tuple(s - 2 * steps for s in self.shape),
            origin=tuple(o + steps * h for o, h in zip(self.origin, self.spacing)))


@dataclass(frozen=True)
class GridField:
    """Scalar values on a TangentGrid, immutable after construction."""

    grid: TangentGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise DomainError(f"value shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def node_norms(self) -> np.ndarray:
        return np.linalg.norm(self.grid.nodes(), axis=1).reshape(self.grid.shape)


@dataclass(frozen=True)
class FunctionOracle:
    """Deterministic point evaluation rule with a declared Lipschitz bound.

    `fn` maps an (n, dim) coordinate array to (n,) values; the declared
    constant is an upper bound of the true one (verifiable by sampling,
    never replaced by a measured estimate in budget arithmetic).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: float
    name: str = "oracle"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(points, dtype=float))),
                          dtype=float)

    # -- stock oracles -----------------------------------------------------

    @staticmethod
    def constant(c: float, dim: int = 1) -> "FunctionOracle":
        return FunctionOracle(lambda pts: np.full(len(pts), float(c)),
                              lipschitz_bound=0.0, name=f"const({c})")

    @staticmethod
    def distance_to_point(model: ManifoldModel, q0) -> "FunctionOracle":
        q0 = np.asarray(q0, dtype=float)
        return FunctionOracle(lambda pts: model.distance(q0[None, :], pts),
                              lipschitz_bound=1.0, name="dist_to_point")

    @staticmethod
    def distance_to_set(model: ManifoldModel, anchors) -> "FunctionOracle":
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))

        def fn(pts):
            d = np.stack([model.distance(a[None, :], pts) for a in anchors])
            return d.min(axis=0)

        return FunctionOracle(fn, lipschitz_bound=1.0, name="dist_to_set")

    @staticmethod
    def ramp(model: ManifoldModel, q0, slope: float, offset: float = 0.0,
             lo: float = -np.inf, hi: float = np.inf) -> "FunctionOracle":
        """Clamped linear ramp in the distance to q0."""
        q0 = np.asarray(q0, dtype=float)

        def fn(pts):
            return np.clip(offset + slope * model.distance(q0[None, :], pts), lo, hi)

        return FunctionOracle(fn, lipschitz_bound=abs(float(slope)), name="ramp")

    @staticmethod
    def piecewise_linear(model: ManifoldModel, anchors, values,
                         lipschitz: float) -> "FunctionOracle":
        """McShane interpolant min_i (v_i + K d(p, a_i)) of anchor values."""
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        values = np.asarray(values, dtype=float)
        K = float(lipschitz)

        def fn(pts):
            d = np.stack([values[i] + K * model.distance(anchors[i][None, :], pts)
                          for i in range(len(anchors))])
            return d.min(axis=0)

        return FunctionOracle(fn, lipschitz_bound=K, name="piecewise_linear")


def sample_to_grid(oracle: FunctionOracle | Callable, chart: Chart,
                   grid: TangentGrid) -> GridField:
    """Pull the oracle back through the chart: values[i] = f(exp(node_i)).

    The grid must fit inside the chart's 3-delta ball, where the pulled
    back function inherits Lipschitz constant K * (1 + eps') in the
    tangent norm.
    """
    lim = 3.0 * chart.radius * (1.0 + 1e-9)
    if grid.max_node_norm() > lim:
        raise OutOfChartError(
            f"grid reaches norm {grid.max_node_norm():.6g} > 3*delta = "
            f"{3 * chart.radius:.6g}")
    pts = exp_map(chart, grid.nodes())
    vals = oracle(pts) if isinstance(oracle, FunctionOracle) else oracle(pts)
    return GridField(grid=grid, values=np.asarray(vals, float).reshape(grid.shape))


def interpolate(fld: GridField, x) -> float | np.ndarray:
    """Multilinear interpolation; exact at nodes, raises outside the hull."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    scalar = np.asarray(x).ndim == 1
    grid = fld.grid
    t = np.empty_like(X)
    for k in range(grid.dim):
        lo = grid.origin[k]
        hi = lo + grid.spacing[k] * (grid.shape[k] - 1)
        span = hi - lo if grid.shape[k] > 1 else grid.spacing[k]
        tol = 1e-9 * span
        if np.any(X[:, k] < lo - tol) or np.any(X[:, k] > hi + tol):
            raise OutOfDomainError(f"query outside grid hull on axis {k}")
        t[:, k] = np.clip((X[:, k] - lo) / grid.spacing[k], 0.0, grid.shape[k] - 1)
    idx = np.minimum(t.astype(np.int64), np.asarray(grid.shape) - 2)
    idx = np.maximum(idx, 0)
    frac = t - idx
    out = np.zeros(len(X))
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(len(X))
        ix = []
        for k, c in enumerate(corner):
            w *= frac[:, k] if c else (1.0 - frac[:, k])
            ix.append(idx[:, k] + c)
        out += w * fld.values[tuple(ix)]
    return float(out[0]) if scalar else out


def discrete_lipschitz(fld: GridField) -> float:
    """Max over axis-adjacent node pairs of |Delta value| / h."""
    if fld.grid.node_count < 2:
        raise EstimationError("need at least two nodes")
    best = 0.0
    for k in range(fld.grid.dim):
        if fld.grid.shape[k] < 2:
            continue
        d = np.abs(np.diff(fld.values, axis=k)) / fld.grid.spacing[k]
        best = max(best, float(d.max()))
    return best


def discrete_lipschitz_manifold(values_p, values_q, distances) -> float:
    """Max pairwise ratio |f(p)-f(q)| / d(p,q); zero-distance pairs skipped."""
    vp = np.asarray(values_p, dtype=float)
    vq = np.asarray(values_q, dtype=float)
    d = np.asarray(distances, dtype=float)
    ok = d > 0
    if not np.any(ok):
        raise EstimationError("all sampled pairs are degenerate")
    return float(np.max(np.abs(vp[ok] - vq[ok]) / d[ok]))


def discrete_gradient(fld: GridField, node: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient; one-sided at boundaries, flagged.

    Returns (gradient, one_sided) where one_sided[k] marks axes that
    fell back to a forward/backward stencil.
    """
    node = tuple(int(i) for i in node)
    grid, vals = fld.grid, fld.values
    grad = np.zeros(grid.dim)
    one_sided = np.zeros(grid.dim, dtype=bool)
    for k in range(grid.dim):
        h = grid.spacing[k]
        i = node[k]
        lo = list(node)
        hi = list(node)
        if 0 < i < grid.shape[k] - 1:
            lo[k], hi[k] = i - 1, i + 1
            grad[k] = (vals[tuple(hi)] - vals[tuple(lo)]) / (2 * h)
        elif grid.shape[k] == 1:
            grad[k] = 0.0
            one_sided[k] = True
        else:
            lo[k] = max(i - 1, 0)
            hi[k] = min(i + 1, grid.shape[k] - 1)
            grad[k] = (vals[tuple(hi)] - vals[tuple(lo)]) / (h * (hi[k] - lo[k]))
            one_sided[k] = True
    return grad, one_sided


def discrete_second_difference(fld: GridField, node: Sequence[int],
                               axis: int) -> tuple[float, bool]:
    """(v[i+1] - 2 v[i] + v[i-1]) / h^2; shifted inward at boundaries, flagged."""
    node = tuple(int(i) for i in node)
    grid, vals = fld.grid, fld.values
    if grid.shape[axis] < 3:
        raise EstimationError("axis too short for a second difference")
    h = grid.spacing[axis]
    i = np.clip(node[axis], 1, grid.shape[axis] - 2)
    flagged = i != node[axis]
    lo, mid, hi = list(node), list(node), list(node)
    lo[axis], mid[axis], hi[axis] = i - 1, i, i + 1
    val = (vals[tuple(hi)] - 2 * vals[tuple(mid)] + vals[tuple(lo)]) / (h * h)
    return float(val), bool(flagged)


def write_field_csv(fld: GridField, path) -> None:
    """Dump as `axis0,...,axis{d-1},value`, lexicographic node order."""
    nodes = fld.grid.nodes()
    vals = fld.values.ravel()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"axis{k}" for k in range(fld.grid.dim)] + ["value"])
        for row, v in zip(nodes, vals):
            writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])
