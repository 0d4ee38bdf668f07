"""Mollification by a normalized compactly supported bump kernel.

This is the finite-dimensional stand-in for the C^1-to-C^infinity
regularization step: discrete convolution with the standard radial bump
exp(-1/(1-t^2)), normalized on the grid so unit mass is exact. It never
increases the Lipschitz constant, reproduces constants and affine
fields exactly (symmetry kills the linear moment), and moves values by
at most K * radius on K-Lipschitz inputs. The output lives on the grid
shrunk by the kernel support so no out-of-grid data is ever invented.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .config import DEFAULTS
from .errors import MarginError, ParameterError
from .field import GridField, TangentGrid

__all__ = ["Mollifier", "mollify", "choose_radius"]


def _bump_profile(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


class Mollifier:
    """Discrete radial bump kernel of the given support radius.

    Weights are the radial profile sampled at node offsets and
    normalized to unit sum; radii below the grid spacing degenerate to
    the identity kernel (a single unit weight), which keeps every
    contract exact.
    """

    def __init__(self, radius: float, spacing: tuple[float, ...]):
        if radius < 0:
            raise ParameterError("mollifier radius must be nonnegative")
        self.radius = float(radius)
        self.spacing = tuple(float(h) for h in spacing)
        self.dim = len(self.spacing)
        reach = [max(0, math.ceil(radius / h) - 1) for h in self.spacing]
        # ceil(r/h) - 1 is the last node strictly inside the support
        shape = tuple(2 * r + 1 for r in reach)
        offsets = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
        dist = np.zeros(shape)
        for k in range(self.dim):
            dist += (offsets[k] * self.spacing[k]) ** 2
        dist = np.sqrt(dist)
        if radius > 0:
            w = _bump_profile(dist / radius)
        else:
            w = np.zeros(shape)
            w[tuple(r for r in reach)] = 1.0
        total = w.sum()
        if total <= 0:
            w = np.zeros(shape)
            w[tuple(r for r in reach)] = 1.0
            total = 1.0
        self.weights = w / total
        self.reach = tuple(reach)

    @property
    def support_steps(self) -> int:
        return max(self.reach) if self.reach else 0


def mollify(fld: GridField, m: Mollifier) -> GridField:
    """Convolve with the kernel; output on the interior the support allows.

    The input must extend at least the kernel support beyond the region
    the caller needs; the grid shrinks by `m.reach` nodes per side.
    """
    if m.dim != fld.grid.dim:
        raise ParameterError("kernel/field dimension mismatch")
    for k in range(fld.grid.dim):
        if fld.grid.shape[k] <= 2 * m.reach[k]:
            raise MarginError(
                f"axis {k}: field extent {fld.grid.shape[k]} nodes cannot absorb "
                f"kernel reach {m.reach[k]} per side")
    steps = max(m.reach) if m.reach else 0
    # uniform shrink keeps the grid cubic when the input is; per-axis
    # reach never exceeds `steps`
    out_grid = fld.grid.shrink(steps)
    out = np.zeros(out_grid.shape)
    vals = fld.values
    for offs in itertools.product(*[range(-r, r + 1) for r in m.reach]):
        w = m.weights[tuple(o + r for o, r in zip(offs, m.reach))]
        if w == 0.0:
            continue
        sl = tuple(slice(steps + o, steps + o + s)
                   for o, s in zip(offs, out_grid.shape))
        out += w * vals[sl]
    return GridField(grid=out_grid, values=out)


def choose_radius(eps: float, K: float, margin: float,
                  spacing: float,
                  cap: float = DEFAULTS.mollifier_cap,
                  kappa: float = DEFAULTS.kappa_floor) -> float:
    """Radius meeting |mollify(f) - f| <= K * rho <= eps within the padding.

    rho = min(eps / max(K, kappa), margin, cap). The margin is the
    distance from the needed output region to the grid edge; a margin
    below one grid spacing leaves no room for any kernel and raises.
    """
    if eps <= 0 or K < 0:
        raise ParameterError("need eps > 0 and K >= 0")
    if margin < spacing:
        raise MarginError(
            f"available margin {margin:.6g} below grid spacing {spacing:.6g}")
    return min(eps / max(K, kappa), margin, cap)
