"""Closed-form model functions: feeding preferences, feeding kernel, moment
bracket, power-law residual and derived constants.

All operations here are pure functions of their arguments and cheap enough to
call inside quadrature loops; the discretized operator lives in
:mod:`sizespectrum.operator`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
COMPACT = "compact"
DIRAC = "dirac"

_PREFERENCE_KINDS = (GAUSSIAN, COMPACT, DIRAC)

# One-sided half-width, in units of sigma, beyond which the Gaussian preference
# is treated as zero inside discretized sums (tail mass < 2e-9). Closed-form
# evaluation through preference_value() is never truncated.
GAUSSIAN_CUTOFF_SIGMAS = 6.0


class UnsupportedPreference(ValueError):
    """Operation does not apply to this feeding-preference kind."""


class RegimeError(ValueError):
    """Parameters are outside the regime in which the quantity is defined."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar model constants.

    Parameters
    ----------
    assimilation : float
        Fraction K of the prey mass converted into predator growth, 0 < K < 1.
    offspring_fraction : float
        Fraction K' of the prey mass carried by each offspring individual,
        0 < K' < 1. Each predation event deposits (1-K)/K' offspring.
    search_exponent : float
        Allometric exponent alpha > 0 of the volume searched per unit time.
    preferred_ratio : float
        Preferred predator/prey mass ratio B > 0.
    diet_breadth : float
        Spread sigma > 0 of the feeding preference around B.
    preference : str
        One of "gaussian", "compact", "dirac".
    search_volume : float
        Prefactor A of the search rate; fixed to 1 unless overridden.
    """

    assimilation: float
    offspring_fraction: float
    search_exponent: float
    preferred_ratio: float
    diet_breadth: float
    preference: str = COMPACT
    search_volume: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.assimilation < 1.0:
            raise ValueError(f"assimilation K out of (0,1): {self.assimilation}")
        if not 0.0 < self.offspring_fraction < 1.0:
            raise ValueError(
                f"offspring fraction K' out of (0,1): {self.offspring_fraction}"
            )
        if self.search_exponent <= 0.0:
            raise ValueError(f"search exponent must be > 0: {self.search_exponent}")
        if self.preferred_ratio <= 0.0:
            raise ValueError(f"preferred ratio must be > 0: {self.preferred_ratio}")
        if self.diet_breadth <= 0.0:
            raise ValueError(f"diet breadth must be > 0: {self.diet_breadth}")
        if self.search_volume <= 0.0:
            raise ValueError(f"search volume must be > 0: {self.search_volume}")
        if self.preference not in _PREFERENCE_KINDS:
            raise ValueError(f"unknown preference kind: {self.preference!r}")
        if self.preference == COMPACT and self.preferred_ratio - self.diet_breadth <= 0.0:
            raise ValueError(
                "compact preference needs B - sigma > 0, got "
                f"B={self.preferred_ratio}, sigma={self.diet_breadth}"
            )


def preference_value(p: ModelParams, r):
    """Feeding-preference density s(r) at predator/prey ratio r >= 0.

    The compact bump is exactly zero outside the open interval
    (B - sigma, B + sigma), including at the endpoints where the interior
    formula would underflow through a division by zero.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("ratio must be >= 0")
    if p.preference == DIRAC:
        raise UnsupportedPreference(
            "dirac preference has no pointwise density; use the reference module"
        )
    B, sig = p.preferred_ratio, p.diet_breadth
    if p.preference == GAUSSIAN:
        out = np.exp(-((r - B) ** 2) / (2.0 * sig**2)) / (sig * math.sqrt(2.0 * math.pi))
    else:
        inside = np.abs(r - B) < sig
        dev2 = np.where(inside, (r - B) ** 2, 0.0)
        with np.errstate(divide="ignore"):
            out = np.where(
                inside, np.exp(-(sig**2) / (sig**2 - dev2)) / sig**2, 0.0
            )
    return out if out.ndim else float(out)


def preference_support(p: ModelParams):
    """Support of s as an interval (lo, hi); hi is inf for the Gaussian."""
    if p.preference == GAUSSIAN:
        return (0.0, math.inf)
    if p.preference == COMPACT:
        return (p.preferred_ratio - p.diet_breadth, p.preferred_ratio + p.diet_breadth)
    return (p.preferred_ratio, p.preferred_ratio)


def kernel_value(p: ModelParams, w_pred, w_prey):
    """Feeding kernel A * w_pred^alpha * s(w_pred / w_prey); both masses > 0."""
    w_pred = np.asarray(w_pred, dtype=float)
    w_prey = np.asarray(w_prey, dtype=float)
    if np.any(w_pred <= 0.0) or np.any(w_prey <= 0.0):
        raise ValueError("kernel arguments must be strictly positive masses")
    out = p.search_volume * w_pred**p.search_exponent * preference_value(p, w_pred / w_prey)
    return out if np.ndim(out) else float(out)


def moment_bracket(p: ModelParams, m, r):
    """Bracket F(m, r) governing growth/decay of the m-th moment.

    F(1, r) = 0 identically (biomass conservation); F(0, r) = (1-K-K')/K'.
    """
    m = np.asarray(m, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("ratio must be > 0")
    if np.any(m < 0.0):
        raise ValueError("moment exponent must be >= 0")
    K, Kp = p.assimilation, p.offspring_fraction
    out = (r + K) ** m + (1.0 - K) * Kp ** (m - 1.0) - r**m - 1.0
    return out if out.ndim else float(out)


def _support_samples(p: ModelParams, count: int) -> np.ndarray:
    lo, hi = preference_support(p)
    return np.linspace(lo, hi, count)


def _bisect(fun, lo, hi, tol, max_iter=200):
    flo = fun(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fun(mid)
        if abs(fmid) <= tol or (hi - lo) < 1e-15:
            return mid
        if (flo < 0.0) == (fmid < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_m_star(p: ModelParams, tol: float = 1e-10, m_max: float = 10.0,
                r_samples: int = 257):
    """Largest exponent threshold m_* > 1 below which every moment decays.

    Returns the first root above 1 of m -> max_r F(m, r) over the preference
    support (for m > 1, F is increasing in r, so the maximum sits at the
    upper support edge). Returns None if no sign change exists on
    (1, m_max]. Emits a RuntimeWarning if F fails to be <= tol on a sampled
    (m, r) grid just below the returned root.
    """
    if p.preference != COMPACT:
        raise UnsupportedPreference("moment thresholds need a compactly supported preference")
    rs = _support_samples(p, r_samples)

    def g(m):
        return float(np.max(moment_bracket(p, m, rs)))

    ms = np.linspace(1.0, m_max, 1024)[1:]
    vals = np.array([g(m) for m in ms])
    if vals[0] >= 0.0:
        return None  # no decaying interval opens up above m = 1
    crossings = np.nonzero((vals[:-1] < 0.0) & (vals[1:] >= 0.0))[0]
    if crossings.size == 0:
        return None
    i = crossings[0]
    m_star = _bisect(g, ms[i], ms[i + 1], tol)

    probe = np.linspace(1.0, m_star, 32)[1:-1]
    worst = max(g(m) for m in probe)
    if worst > tol:
        warnings.warn(
            f"F(m, r) reaches {worst:.3e} > tol below m_*={m_star:.6f}",
            RuntimeWarning,
        )
    return m_star


def find_m_tilde(p: ModelParams, tol: float = 1e-10, r_samples: int = 257):
    """Largest root of F(., r) below 1, maximized over the preference support.

    None when F keeps one sign throughout (0, 1) for every sampled r; with
    small K' the bracket is positive there and the threshold sits below 0.
    """
    if p.preference != COMPACT:
        raise UnsupportedPreference("moment thresholds need a compactly supported preference")
    rs = _support_samples(p, r_samples)
    ms = np.linspace(1e-6, 1.0 - 1e-6, 1001)
    best = None
    vals = moment_bracket(p, ms[:, None], rs[None, :])
    for j in range(rs.size):
        col = vals[:, j]
        sign_change = np.nonzero(col[:-1] * col[1:] <= 0.0)[0]
        if sign_change.size == 0:
            continue
        i = sign_change[-1]
        r = rs[j]
        root = _bisect(lambda m: moment_bracket(p, m, r), ms[i], ms[i + 1], tol)
        if best is None or root > best:
            best = root
    return best


def offspring_multiplicity(p: ModelParams):
    """Offspring count per predation event and the density amplitude P.

    Returns ((1-K)/K', (1-K)/K'^2); the first factor counts individuals of
    mass K' * prey, the second scales the offspring gain term.
    """
    K, Kp = p.assimilation, p.offspring_fraction
    return (1.0 - K) / Kp, (1.0 - K) / Kp**2


def power_law_exponent(alpha: float) -> float:
    """Exponent gamma = -(alpha + 3)/2 of the formal power-law steady state."""
    if alpha <= 0.0:
        raise ValueError("search exponent must be > 0")
    return -(alpha + 3.0) / 2.0


def powerlaw_residual(p: ModelParams, gamma, r):
    """Stationarity defect G(gamma, r) of the power-law ansatz w^gamma.

    Vanishes identically in r exactly when gamma = -(alpha + 3)/2, where the
    first two exponents collapse to 1 and 0.
    """
    gamma = np.asarray(gamma, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("ratio must be > 0")
    K, Kp, a = p.assimilation, p.offspring_fraction, p.search_exponent
    out = (
        (r + K) ** (-a - 2.0 - 2.0 * gamma)
        + (1.0 - K) * Kp ** (-3.0 - a - 2.0 * gamma)
        - r ** (-2.0 - 2.0 * gamma - a)
        - 1.0
    )
    return out if out.ndim else float(out)


def blowup_constant(p: ModelParams, samples: int = 10_000) -> float:
    """Growth constant C(B, sigma, K, K') bounding d/dt of the alpha-moment.

    Evaluated as (1/(e sigma^2)) * max_r F(alpha, r) over a dense sample of
    the compact support; the integrand is smooth, so 1e4 points give well
    over the accuracy any consumer here needs.
    """
    if p.preference != COMPACT:
        raise UnsupportedPreference("blow-up constant needs a compactly supported preference")
    rs = _support_samples(p, samples)
    peak = float(np.max(moment_bracket(p, p.search_exponent, rs)))
    return peak / (math.e * p.diet_breadth**2)


def preference_max(p: ModelParams) -> float:
    """Maximum of s, attained at r = B."""
    if p.preference == GAUSSIAN:
        return 1.0 / (p.diet_breadth * math.sqrt(2.0 * math.pi))
    if p.preference == COMPACT:
        return 1.0 / (math.e * p.diet_breadth**2)
    raise UnsupportedPreference("dirac preference is unbounded")
