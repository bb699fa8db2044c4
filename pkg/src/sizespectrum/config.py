"""Run configuration: flat sectioned key = value documents and presets.

The format is deliberately strict: unknown sections or keys fail with the
offending name and line number instead of being absorbed as typos. A config
document fully determines a run, and serialize_config() round-trips through
parse_config() field for field.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .integrator import CLIP, TRACK_ONLY, StepControl
from .kernel import COMPACT, GAUSSIAN, ModelParams


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    W: float
    N: int
    t_end: float
    snapshot_times: tuple
    control: StepControl
    negativity: str
    initial: tuple          # ("linear", left, right) or ("csv", path)
    out_dir: str | None
    moment_exponents: tuple
    gap_rel_threshold: float
    scan_range: tuple

    def __post_init__(self):
        if self.W <= 0.0 or self.N < 2:
            raise ConfigError(f"grid needs W > 0 and N >= 2, got W={self.W}, N={self.N}")
        if self.t_end < 0.0:
            raise ConfigError(f"final time must be >= 0: {self.t_end}")
        if any(t < 0.0 or t > self.t_end for t in self.snapshot_times):
            raise ConfigError("snapshot times must lie in [0, T]")
        if self.negativity not in (CLIP, TRACK_ONLY):
            raise ConfigError(f"negativity must be clip or track-only: {self.negativity}")
        if self.initial[0] == "linear":
            _, left, right = self.initial
            if left < 0.0 or right < 0.0:
                raise ConfigError("linear initial endpoints must be >= 0")
        elif self.initial[0] != "csv":
            raise ConfigError(f"unknown initial kind: {self.initial[0]}")
        if not 0.0 < self.gap_rel_threshold < 1.0:
            raise ConfigError("gap threshold must be in (0,1)")
        lo, hi = self.scan_range
        if not 0.0 <= lo < hi <= self.W:
            raise ConfigError(f"scan range must satisfy 0 <= lo < hi <= W: ({lo}, {hi})")


_MODEL_KEYS = {"preference", "K", "K_prime", "alpha", "B", "sigma", "A"}
_GRID_KEYS = {"W", "N"}
_TIME_KEYS = {"T", "snapshots"}
_CONTROL_KEYS = {"rtol", "atol", "h_init", "h_min", "h_max", "safety",
                 "max_steps", "negativity"}
_INITIAL_KEYS = {"kind", "left", "right", "path"}
_DIAG_KEYS = {"moments", "gap_threshold", "scan_min", "scan_max"}
_OUTPUT_KEYS = {"dir"}
_SECTIONS = {
    "model": _MODEL_KEYS,
    "grid": _GRID_KEYS,
    "time": _TIME_KEYS,
    "control": _CONTROL_KEYS,
    "initial": _INITIAL_KEYS,
    "diagnostics": _DIAG_KEYS,
    "outputs": _OUTPUT_KEYS,
}
_MANDATORY = {
    "model": {"preference", "K", "K_prime", "alpha", "B", "sigma"},
    "grid": {"W", "N"},
    "time": {"T"},
}


def _tokenize(text: str):
    """Yield (section, key, value, line_number) entries from a document."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}] at line {lineno}")
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' at line {lineno}: {raw!r}")
        if section is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key '{key}' in [{section}] at line {lineno}")
        yield section, key, value, lineno


def _as_float(value, key, lineno):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key '{key}' at line {lineno}: not a number: {value!r}") from None


def _as_int(value, key, lineno):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key '{key}' at line {lineno}: not an integer: {value!r}") from None


def _as_float_list(value, key, lineno):
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"key '{key}' at line {lineno}: not a number list: {value!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a config document."""
    seen: dict = {}
    for section, key, value, lineno in _tokenize(text):
        if (section, key) in seen:
            raise ConfigError(f"duplicate key '{key}' in [{section}] at line {lineno}")
        seen[(section, key)] = (value, lineno)

    for section, keys in _MANDATORY.items():
        for key in keys:
            if (section, key) not in seen:
                raise ConfigError(f"missing mandatory key '{key}' in [{section}]")

    def fetch(section, key, conv, default=None):
        if (section, key) not in seen:
            return default
        value, lineno = seen[(section, key)]
        return conv(value, key, lineno)

    preference, pref_line = seen[("model", "preference")]
    if preference not in (COMPACT, GAUSSIAN):
        raise ConfigError(
            f"preference at line {pref_line} must be '{COMPACT}' or '{GAUSSIAN}': {preference!r}"
        )
    try:
        model = ModelParams(
            assimilation=fetch("model", "K", _as_float),
            offspring_fraction=fetch("model", "K_prime", _as_float),
            search_exponent=fetch("model", "alpha", _as_float),
            preferred_ratio=fetch("model", "B", _as_float),
            diet_breadth=fetch("model", "sigma", _as_float),
            preference=preference,
            search_volume=fetch("model", "A", _as_float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    W = fetch("grid", "W", _as_float)
    N = fetch("grid", "N", _as_int)
    T = fetch("time", "T", _as_float)
    snapshots = fetch("time", "snapshots", _as_float_list,
                      default_snapshot_times(T))

    try:
        control = StepControl(
            rel_tol=fetch("control", "rtol", _as_float, 1e-6),
            abs_tol=fetch("control", "atol", _as_float, 1e-9),
            h_init=fetch("control", "h_init", _as_float, 1e-6),
            h_min=fetch("control", "h_min", _as_float, 1e-14),
            h_max=fetch("control", "h_max", _as_float, 1.0),
            safety_factor=fetch("control", "safety", _as_float, 0.9),
            max_steps=fetch("control", "max_steps", _as_int, 500_000),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    negativity = fetch("control", "negativity", lambda v, k, l: v, CLIP)

    kind = fetch("initial", "kind", lambda v, k, l: v, "linear")
    if kind == "linear":
        initial = ("linear",
                   fetch("initial", "left", _as_float, 10.0),
                   fetch("initial", "right", _as_float, 0.1))
    elif kind == "csv":
        if ("initial", "path") not in seen:
            raise ConfigError("missing mandatory key 'path' in [initial] for kind = csv")
        initial = ("csv", seen[("initial", "path")][0])
    else:
        _, lineno = seen[("initial", "kind")]
        raise ConfigError(f"initial kind at line {lineno} must be linear or csv: {kind!r}")

    scan_lo = fetch("diagnostics", "scan_min", _as_float,
                    default_scan_floor(model.offspring_fraction, W))
    scan_hi = fetch("diagnostics", "scan_max", _as_float, W)

    return RunConfig(
        model=model,
        W=W,
        N=N,
        t_end=T,
        snapshot_times=tuple(snapshots),
        control=control,
        negativity=negativity,
        initial=initial,
        out_dir=fetch("outputs", "dir", lambda v, k, l: v, None),
        moment_exponents=fetch("diagnostics", "moments", _as_float_list, (0.5, 1.3)),
        gap_rel_threshold=fetch("diagnostics", "gap_threshold", _as_float, 0.01),
        scan_range=(scan_lo, scan_hi),
    )


def default_snapshot_times(T: float) -> tuple:
    """Four panels: start, early transient, midway, final."""
    return (0.0, T / 10.0, T / 2.0, T) if T > 0.0 else (0.0,)


def default_scan_floor(offspring_fraction: float, W: float) -> float:
    """Gap scans skip the offspring pile-up below 2 K' W by default."""
    return min(2.0 * offspring_fraction * W, 0.5 * W)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config() inverts it exactly."""
    m = cfg.model
    lines = [
        "[model]",
        f"preference = {m.preference}",
        f"K = {m.assimilation!r}",
        f"K_prime = {m.offspring_fraction!r}",
        f"alpha = {m.search_exponent!r}",
        f"B = {m.preferred_ratio!r}",
        f"sigma = {m.diet_breadth!r}",
        f"A = {m.search_volume!r}",
        "",
        "[grid]",
        f"W = {cfg.W!r}",
        f"N = {cfg.N}",
        "",
        "[time]",
        f"T = {cfg.t_end!r}",
        "snapshots = " + ", ".join(repr(t) for t in cfg.snapshot_times),
        "",
        "[control]",
        f"rtol = {cfg.control.rel_tol!r}",
        f"atol = {cfg.control.abs_tol!r}",
        f"h_init = {cfg.control.h_init!r}",
        f"h_min = {cfg.control.h_min!r}",
        f"h_max = {cfg.control.h_max!r}",
        f"safety = {cfg.control.safety_factor!r}",
        f"max_steps = {cfg.control.max_steps}",
        f"negativity = {cfg.negativity}",
        "",
        "[initial]",
        f"kind = {cfg.initial[0]}",
    ]
    if cfg.initial[0] == "linear":
        lines.append(f"left = {cfg.initial[1]!r}")
        lines.append(f"right = {cfg.initial[2]!r}")
    else:
        lines.append(f"path = {cfg.initial[1]}")
    lines += [
        "",
        "[diagnostics]",
        "moments = " + ", ".join(repr(m_) for m_ in cfg.moment_exponents),
        f"gap_threshold = {cfg.gap_rel_threshold!r}",
        f"scan_min = {cfg.scan_range[0]!r}",
        f"scan_max = {cfg.scan_range[1]!r}",
    ]
    if cfg.out_dir is not None:
        lines += ["", "[outputs]", f"dir = {cfg.out_dir}"]
    return "\n".join(lines) + "\n"


def config_as_dict(cfg: RunConfig) -> dict:
    """Nested plain-type view of a config, for meta.json."""
    m = cfg.model
    return {
        "model": {
            "preference": m.preference,
            "K": m.assimilation,
            "K_prime": m.offspring_fraction,
            "alpha": m.search_exponent,
            "B": m.preferred_ratio,
            "sigma": m.diet_breadth,
            "A": m.search_volume,
        },
        "grid": {"W": cfg.W, "N": cfg.N},
        "time": {"T": cfg.t_end, "snapshots": list(cfg.snapshot_times)},
        "control": {
            "rtol": cfg.control.rel_tol,
            "atol": cfg.control.abs_tol,
            "h_init": cfg.control.h_init,
            "h_min": cfg.control.h_min,
            "h_max": cfg.control.h_max,
            "safety": cfg.control.safety_factor,
            "max_steps": cfg.control.max_steps,
            "negativity": cfg.negativity,
        },
        "initial": (
            {"kind": "linear", "left": cfg.initial[1], "right": cfg.initial[2]}
            if cfg.initial[0] == "linear"
            else {"kind": "csv", "path": cfg.initial[1]}
        ),
        "diagnostics": {
            "moments": list(cfg.moment_exponents),
            "gap_threshold": cfg.gap_rel_threshold,
            "scan_min": cfg.scan_range[0],
            "scan_max": cfg.scan_range[1],
        },
        "outputs": {"dir": cfg.out_dir},
    }


def _preset(alpha, B, sigma, K, K_prime, preference) -> RunConfig:
    model = ModelParams(
        assimilation=K,
        offspring_fraction=K_prime,
        search_exponent=alpha,
        preferred_ratio=B,
        diet_breadth=sigma,
        preference=preference,
    )
    W, N, T = 10.0, 200, 5.0
    return RunConfig(
        model=model,
        W=W,
        N=N,
        t_end=T,
        snapshot_times=default_snapshot_times(T),
        control=StepControl(),
        negativity=CLIP,
        initial=("linear", 10.0, 0.1),
        out_dir=None,
        moment_exponents=(0.5, 1.3),
        gap_rel_threshold=0.01,
        scan_range=(default_scan_floor(K_prime, W), W),
    )


PRESETS = {
    "figure4": _preset(alpha=0.9, B=1.5, sigma=0.3, K=0.1, K_prime=0.01, preference=COMPACT),
    "figure5": _preset(alpha=1.1, B=1.5, sigma=0.3, K=0.1, K_prime=0.01, preference=COMPACT),
    "figure6": _preset(alpha=1.1, B=1.1, sigma=0.3, K=0.1, K_prime=0.01, preference=COMPACT),
    "figure7": _preset(alpha=0.9, B=1.5, sigma=0.3, K=0.4, K_prime=0.01, preference=COMPACT),
    "figure8": _preset(alpha=0.9, B=1.5, sigma=0.3, K=0.1, K_prime=0.01, preference=GAUSSIAN),
    "figure9": _preset(alpha=0.9, B=2.0, sigma=0.2, K=0.1, K_prime=0.01, preference=GAUSSIAN),
}


def preset_config(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}"
        ) from None
