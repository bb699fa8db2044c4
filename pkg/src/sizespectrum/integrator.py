"""Explicit embedded Runge-Kutta time stepping with error control.

Dormand-Prince 5(4) pair, seven stages with first-same-as-last reuse. The
propagated solution is the fifth-order one; the scaled max-norm of the
difference to the embedded fourth-order solution drives the accept/reject
loop. Snapshots are produced by truncating steps exactly onto the requested
times; there is no dense output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Distribution
from .kernel import ModelParams
from .operator import operator_for

TRACK_ONLY = "track-only"
CLIP = "clip"

# Dormand-Prince 5(4) tableau.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_ERR = _B5 - _B4


@dataclass(frozen=True)
class StepControl:
    """Error-control parameters of the adaptive loop."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    h_init: float = 1e-6
    h_min: float = 1e-14
    h_max: float = 1.0
    safety_factor: float = 0.9
    max_steps: int = 500_000

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be > 0")
        if not self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need h_min <= h_init <= h_max")
        if not 0.0 < self.safety_factor < 1.0:
            raise ValueError("safety factor must be in (0,1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class NegativityRecord:
    min_value: float
    clipped_biomass: float


@dataclass
class Trajectory:
    """Snapshots plus step and negativity bookkeeping of one integration."""

    snapshots: list
    step_times: np.ndarray
    step_sizes: np.ndarray
    step_errors: np.ndarray
    step_accepted: np.ndarray
    negativity_log: list
    clipped_biomass_total: float
    truncated: bool = False
    blowup: bool = False

    @property
    def times(self):
        return [t for t, _ in self.snapshots]

    @property
    def states(self):
        return [d for _, d in self.snapshots]


def _dp_step(rhs, y, h, k1):
    """One Dormand-Prince step; returns (y5, error vector, last stage).

    Overflow inside stages is tolerated silently here: the caller inspects
    finiteness and treats a non-finite result as a step failure.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        k = [k1]
        for row in _A[1:]:
            incr = sum(a * ki for a, ki in zip(row, k) if a != 0.0)
            k.append(rhs(y + h * incr))
        y5 = y + h * sum(b * ki for b, ki in zip(_B5, k) if b != 0.0)
        err = h * sum(e * ki for e, ki in zip(_ERR, k) if e != 0.0)
    return y5, err, k[-1]


def _error_norm(err, y_new, y_old, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y_new), np.abs(y_old))
    return float(np.max(np.abs(err) / scale))


def step_embedded(rhs, state, h, rel_tol: float = 1e-6, abs_tol: float = 1e-9):
    """Single embedded step from an ndarray state.

    Returns the fifth-order solution and the scaled error norm; a
    non-finite stage yields an infinite norm, signalling the caller to
    halve the step.
    """
    if h <= 0.0:
        raise ValueError("step size must be > 0")
    y = np.asarray(state, dtype=float)
    k1 = rhs(y)
    y5, err, _ = _dp_step(rhs, y, h, k1)
    if not (np.all(np.isfinite(y5)) and np.all(np.isfinite(err))):
        return y5, np.inf
    return y5, _error_norm(err, y5, y, rel_tol, abs_tol)


def negativity_policy(state: Distribution, mode: str = CLIP):
    """Apply the configured treatment of negative nodal values.

    track-only returns the state object unchanged; clip zeroes negative
    entries and reports the trapezoid-weighted biomass that was added.
    """
    values = state.values
    min_value = float(values.min())
    if mode == TRACK_ONLY or min_value >= 0.0:
        return state, NegativityRecord(min_value, 0.0)
    if mode != CLIP:
        raise ValueError(f"unknown negativity mode: {mode!r}")
    clipped = np.maximum(values, 0.0)
    weights = state.grid.trapezoid_weights * state.grid.nodes
    gained = float(weights @ (clipped - values))
    return Distribution(state.grid, clipped, state.time), NegativityRecord(min_value, gained)


def integrate_ode(rhs, y0, t_end, control: StepControl | None = None,
                  snapshot_times=(), negativity: str = TRACK_ONLY,
                  biomass_weights=None):
    """Adaptive integration of y' = rhs(y) from t = 0 with array state.

    Snapshot times are hit exactly by step truncation. Returns a Trajectory
    whose snapshot states are plain arrays; :func:`integrate` wraps them in
    Distributions for the PDE case.
    """
    control = control or StepControl()
    y = np.array(y0, dtype=float)
    if biomass_weights is None:
        biomass_weights = np.zeros_like(y)

    targets = sorted(set(float(t) for t in snapshot_times))
    if any(t < 0.0 or t > t_end for t in targets):
        raise ValueError("snapshot times must lie in [0, t_end]")
    if not targets or targets[0] != 0.0:
        targets.insert(0, 0.0)

    t = 0.0
    snapshots = [(0.0, y.copy())]
    next_i = 1
    log_t, log_h, log_err, log_acc = [], [], [], []
    neg_log = []
    clipped_total = 0.0
    min_since_snap = float(y.min())
    truncated = False
    blowup = False

    h = min(control.h_init, t_end - t) if t_end > t else control.h_init
    k1 = None
    steps = 0
    while t < t_end:
        if steps >= control.max_steps:
            truncated = True
            break
        steps += 1

        target = targets[next_i] if next_i < len(targets) else t_end
        limit = min(target, t_end)
        on_target = t + h >= limit
        h_try = limit - t if on_target else h

        if k1 is None:
            k1 = rhs(y)
        y5, err_vec, k_last = _dp_step(rhs, y, h_try, k1)
        finite = bool(np.all(np.isfinite(y5)) and np.all(np.isfinite(err_vec)))
        err = (
            _error_norm(err_vec, y5, y, control.rel_tol, control.abs_tol)
            if finite
            else np.inf
        )
        accepted = finite and err <= 1.0
        log_t.append(t)
        log_h.append(h_try)
        log_err.append(err)
        log_acc.append(accepted)

        if accepted:
            t = limit if on_target else t + h_try
            y = y5
            min_since_snap = min(min_since_snap, float(y.min()))
            if negativity == CLIP:
                neg = y < 0.0
                if neg.any():
                    clipped = np.where(neg, 0.0, y)
                    clipped_total += float(biomass_weights @ (clipped - y))
                    y = clipped
                    k_last = None  # state changed; first-same-as-last is stale
            k1 = k_last
            if next_i < len(targets) and t == targets[next_i]:
                snapshots.append((t, y.copy()))
                neg_log.append((t, min_since_snap, clipped_total))
                min_since_snap = float(y.min())
                next_i += 1
            # growth capped at 5x per step: uncapped (1/err)^(1/5) jumps on
            # oversolved steps trigger rejection cascades
            factor = 5.0 if err == 0.0 else min(
                5.0, control.safety_factor * err ** -0.2
            )
            h = min(max(h_try * factor, control.h_min), control.h_max)
        else:
            if h_try <= control.h_min:
                blowup = True
                break
            if finite:
                factor = max(0.1, control.safety_factor * err ** -0.2)
                h = max(h_try * factor, control.h_min)
            else:
                h = max(0.5 * h_try, control.h_min)
            # rejected: y, t, k1 all stay put

    return Trajectory(
        snapshots=snapshots,
        step_times=np.asarray(log_t),
        step_sizes=np.asarray(log_h),
        step_errors=np.asarray(log_err),
        step_accepted=np.asarray(log_acc, dtype=bool),
        negativity_log=neg_log,
        clipped_biomass_total=clipped_total,
        truncated=truncated,
        blowup=blowup,
    )


def integrate(p: ModelParams, d0: Distribution, t_end: float,
              control: StepControl | None = None, snapshot_times=(),
              negativity: str = CLIP) -> Trajectory:
    """Evolve a distribution under the collision operator up to t_end."""
    if t_end < 0.0:
        raise ValueError("t_end must be >= 0")
    op = operator_for(p, d0.grid)
    weights = d0.grid.trapezoid_weights * d0.grid.nodes
    traj = integrate_ode(
        op.rhs,
        d0.values,
        t_end,
        control=control,
        snapshot_times=snapshot_times,
        negativity=negativity,
        biomass_weights=weights,
    )
    traj.snapshots = [
        (t, Distribution(d0.grid, y, t)) for t, y in traj.snapshots
    ]
    return traj
