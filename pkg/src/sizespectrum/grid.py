"""Uniform size grid, sampled distributions, interpolation and quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Equidistant nodes n*h, n = 0..N, spanning [0, W] with h = W/N."""

    upper_bound: float
    cell_count: int

    def __post_init__(self):
        if self.upper_bound <= 0.0:
            raise ValueError(f"upper bound must be > 0: {self.upper_bound}")
        if int(self.cell_count) != self.cell_count or self.cell_count < 2:
            raise ValueError(f"cell count must be an integer >= 2: {self.cell_count}")

    @property
    def spacing(self) -> float:
        return self.upper_bound / self.cell_count

    @cached_property
    def nodes(self) -> np.ndarray:
        w = np.linspace(0.0, self.upper_bound, self.cell_count + 1)
        w.flags.writeable = False
        return w

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        tw = np.full(self.cell_count + 1, self.spacing)
        tw[0] *= 0.5
        tw[-1] *= 0.5
        tw.flags.writeable = False
        return tw


def make_uniform_grid(W: float, N: int) -> Grid:
    return Grid(float(W), int(N))


@dataclass(frozen=True)
class Distribution:
    """Sampled abundance density f at the grid nodes at one instant.

    Values must be finite; transient negativity is legal (the integrator
    tracks or clips it) so no sign constraint is enforced here.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.cell_count + 1,):
            raise ValueError(
                f"expected {self.grid.cell_count + 1} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("distribution values must be finite")
        if self.time < 0.0:
            raise ValueError("time must be >= 0")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def interpolate(d: Distribution, w):
    """Piecewise-linear evaluation of f; exact at nodes, zero beyond W."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("mass must be >= 0")
    out = np.interp(w, d.grid.nodes, d.values, right=0.0)
    return out if out.ndim else float(out)


def trapezoid_moment(d: Distribution, m: float) -> float:
    """Trapezoid approximation of the m-th moment, integral of w^m f dw.

    The w = 0 node contributes only for m = 0 (0^0 is taken as 1, matching
    the count integral).
    """
    if m < 0.0:
        raise ValueError("moment exponent must be >= 0")
    w = d.grid.nodes
    return float(np.dot(d.grid.trapezoid_weights, w**m * d.values))


def linear_initial_condition(g: Grid, left_value: float, right_value: float) -> Distribution:
    """Straight-line profile from f(0) = left_value to f(W) = right_value."""
    if left_value < 0.0 or right_value < 0.0:
        raise ValueError("endpoint densities must be >= 0")
    frac = np.arange(g.cell_count + 1) / g.cell_count
    return Distribution(g, left_value + (right_value - left_value) * frac, 0.0)


def resample(d: Distribution, g: Grid) -> Distribution:
    """Linear-interpolation resampling of d onto another grid."""
    return Distribution(g, interpolate(d, np.minimum(g.nodes, d.grid.upper_bound)), d.time)


def write_snapshot_csv(d: Distribution, path) -> None:
    """Snapshot CSV: header ``w,f``, one row per node, 17 significant digits."""
    lines = ["w,f"]
    for w, f in zip(d.grid.nodes, d.values):
        lines.append(f"{w:.17g},{f:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot_csv(path):
    """Read a snapshot CSV back into (w, f) arrays."""
    raw = Path(path).read_text().strip().splitlines()
    if not raw or raw[0].strip() != "w,f":
        raise ValueError(f"{path}: expected header 'w,f'")
    w, f = [], []
    for line in raw[1:]:
        a, b = line.split(",")
        w.append(float(a))
        f.append(float(b))
    return np.asarray(w), np.asarray(f)


def distribution_from_csv(g: Grid, path) -> Distribution:
    """Load nodal values from a snapshot CSV; node positions must match g."""
    w, f = read_snapshot_csv(path)
    if w.shape != g.nodes.shape or not np.allclose(w, g.nodes, rtol=0.0, atol=1e-9 * g.upper_bound):
        raise ValueError(f"{path}: node positions do not match the configured grid")
    return Distribution(g, f, 0.0)
