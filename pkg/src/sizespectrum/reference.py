"""Independent oracles: narrow-preference limit ODE, ratio-coordinate moment
rates and refinement references.

Nothing here shares a discretization with :mod:`sizespectrum.operator`; these
routines exist to cross-check it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Distribution, Grid, interpolate, resample
from .kernel import (
    COMPACT,
    DIRAC,
    ModelParams,
    UnsupportedPreference,
    moment_bracket,
    preference_value,
)
from .operator import apply_Q


@dataclass(frozen=True)
class DiracModel:
    """Parameters of the single-ratio feeding limit (diet breadth -> 0)."""

    params: ModelParams

    def __post_init__(self):
        if self.params.preference != DIRAC:
            raise UnsupportedPreference("DiracModel needs preference='dirac'")


def dirac_rhs(model: DiracModel, d: Distribution, w):
    """Right-hand side of the limit ODE where predators feed at ratio B only.

    Off-grid factors are linearly interpolated and vanish beyond W, exactly
    like the discrete operator's convention.
    """
    p = model.params
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("mass must be > 0")
    B, K, Kp, a = p.preferred_ratio, p.assimilation, p.offspring_fraction, p.search_exponent

    def fhat(x):
        return interpolate(d, x)

    growth = (
        B**a * w ** (a + 1.0) / (K + B) ** (a + 2.0)
        * fhat(w / (B + K))
        * fhat(B * w / (B + K))
    )
    offspring = (
        B**a * (1.0 - K) * w ** (a + 1.0) / Kp ** (a + 3.0)
        * fhat(w / Kp)
        * fhat(B * w / Kp)
    )
    loss_pred = w ** (a + 1.0) / B**2 * fhat(w) * fhat(w / B)
    loss_prey = B**a * w ** (a + 1.0) * fhat(w) * fhat(B * w)
    out = growth + offspring - loss_pred - loss_prey
    return out if np.ndim(out) else float(out)


def moment_rate_ratio_form(p: ModelParams, d: Distribution, m: float,
                           r_points: int = 401) -> float:
    """Moment rate evaluated in ratio coordinates over the preference support.

    Independent discretization (an r-grid, not the operator's prey grid) of
    the same quantity as weak_form_rhs(phi = w^m): the bracket-weighted
    double integral of F(m, r) w^(alpha+m+1) r^(-m-2) s(r) f(w/r) f(w).
    """
    if p.preference != COMPACT:
        raise UnsupportedPreference("ratio-form rate needs a compactly supported preference")
    lo = p.preferred_ratio - p.diet_breadth
    hi = p.preferred_ratio + p.diet_breadth
    r = np.linspace(lo, hi, r_points)
    wr = np.full(r_points, (hi - lo) / (r_points - 1))
    wr[0] *= 0.5
    wr[-1] *= 0.5

    w = d.grid.nodes
    tw = d.grid.trapezoid_weights
    a = p.search_exponent
    bracket = moment_bracket(p, m, r)  # (r,)
    s = preference_value(p, r)
    fw = d.values  # (w,)
    prey = w[None, :] / r[:, None]
    fprey = np.interp(prey, w, fw, right=0.0)
    integrand = (
        (bracket * s * r ** (-m - 2.0))[:, None]
        * w[None, :] ** (a + m + 1.0)
        * fprey
        * fw[None, :]
    )
    return float(wr @ integrand @ tw)


def preference_mass(p: ModelParams, samples: int = 20_001) -> float:
    """Numerical integral of s(r) dr; the compact bump is not normalized."""
    if p.preference == COMPACT:
        lo = p.preferred_ratio - p.diet_breadth
        hi = p.preferred_ratio + p.diet_breadth
    else:
        lo = max(p.preferred_ratio - 8.0 * p.diet_breadth, 0.0)
        hi = p.preferred_ratio + 8.0 * p.diet_breadth
    r = np.linspace(lo, hi, samples)
    return float(np.trapezoid(preference_value(p, r), r))


def refined_reference(p: ModelParams, d: Distribution, refinement: int) -> np.ndarray:
    """Operator value recomputed on a refined grid, restricted to coarse nodes.

    The coarse state is resampled by linear interpolation, so the comparison
    isolates quadrature error rather than data error.
    """
    if refinement not in (2, 4):
        raise ValueError("refinement must be 2 or 4")
    fine = Grid(d.grid.upper_bound, d.grid.cell_count * refinement)
    q = apply_Q(p, resample(d, fine))
    return q.total[::refinement].copy()
