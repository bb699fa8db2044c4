"""Batch front-end: execute configured runs and expose the analytic toolkit.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (blow-up or
step budget exhausted; partial outputs are kept with a truncated marker),
4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    PRESETS,
    RunConfig,
    config_as_dict,
    parse_config,
    preset_config,
    serialize_config,
)
from .diagnostics import build_run_report, predicted_support
from .grid import (
    Distribution,
    distribution_from_csv,
    linear_initial_condition,
    make_uniform_grid,
    write_snapshot_csv,
)
from .integrator import integrate
from .kernel import (
    COMPACT,
    ModelParams,
    blowup_constant,
    find_m_star,
    find_m_tilde,
    power_law_exponent,
    powerlaw_residual,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def initial_distribution(cfg: RunConfig) -> Distribution:
    g = make_uniform_grid(cfg.W, cfg.N)
    if cfg.initial[0] == "linear":
        return linear_initial_condition(g, cfg.initial[1], cfg.initial[2])
    return distribution_from_csv(g, cfg.initial[1])


def execute_run(cfg: RunConfig, out_dir: Path, render_plots: bool = True,
                preset_name: str | None = None) -> int:
    """Integrate, emit snapshot CSVs, report.json and meta.json."""
    d0 = initial_distribution(cfg)
    traj = integrate(
        cfg.model, d0, cfg.t_end,
        control=cfg.control,
        snapshot_times=cfg.snapshot_times,
        negativity=cfg.negativity,
    )
    report = build_run_report(
        traj, cfg.model,
        exponents=cfg.moment_exponents,
        gap_rel_threshold=cfg.gap_rel_threshold,
        scan_range=cfg.scan_range,
    )
    meta = {
        "version": __version__,
        "preset": preset_name,
        "config": config_as_dict(cfg),
    }

    out_dir.mkdir(parents=True, exist_ok=True)
    for t, d in traj.snapshots:
        write_snapshot_csv(d, out_dir / f"snapshot_t{t:g}.csv")
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    if render_plots:
        from . import plots

        plots.render_run(traj, report, cfg, out_dir)

    if traj.blowup or traj.truncated:
        reason = "blow-up/stiffness" if traj.blowup else "step budget exhausted"
        print(f"sim run: numerical failure: {reason}; partial outputs in {out_dir}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_run(args) -> int:
    if bool(args.config) == bool(args.preset):
        print("sim run: exactly one of --config or --preset is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config:
            cfg = parse_config(Path(args.config).read_text())
        else:
            cfg = preset_config(args.preset)
    except ConfigError as exc:
        print(f"sim run: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"sim run: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.grid_n is not None:
            cfg = replace(cfg, N=args.grid_n)
        if args.rtol is not None:
            cfg = replace(cfg, control=replace(cfg.control, rel_tol=args.rtol))
        if args.atol is not None:
            cfg = replace(cfg, control=replace(cfg.control, abs_tol=args.atol))
    except (ConfigError, ValueError) as exc:
        print(f"sim run: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(cfg.out_dir) if cfg.out_dir else Path(
        args.preset or "run_output"
    )
    try:
        return execute_run(cfg, out, render_plots=not args.no_plots,
                           preset_name=args.preset)
    except OSError as exc:
        print(f"sim run: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def _parse_kv(pairs, schema, command) -> dict:
    """Parse key=value arguments against {name: (converter, default)}."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"{command}: expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in schema:
            raise ConfigError(
                f"{command}: unknown key '{key}'; known: {', '.join(sorted(schema))}"
            )
        conv, _ = schema[key]
        try:
            out[key] = conv(value)
        except ValueError:
            raise ConfigError(f"{command}: bad value for '{key}': {value!r}") from None
    for key, (_, default) in schema.items():
        if key not in out:
            if default is None:
                raise ConfigError(f"{command}: missing required key '{key}'")
            out[key] = default
    return out


_MISSING = object()


def _cmd_analyze(args) -> int:
    try:
        if args.analysis == "mstar":
            kv = _parse_kv(args.params, {
                "K": (float, None),
                "K_prime": (float, None),
                "B": (float, None),
                "sigma": (float, None),
                "alpha": (float, _MISSING),
                "tol": (float, 1e-10),
            }, "mstar")
            p = ModelParams(
                assimilation=kv["K"], offspring_fraction=kv["K_prime"],
                search_exponent=kv["alpha"] if kv["alpha"] is not _MISSING else 1.0,
                preferred_ratio=kv["B"], diet_breadth=kv["sigma"],
                preference=COMPACT,
            )
            m_star = find_m_star(p, tol=kv["tol"])
            m_tilde = find_m_tilde(p, tol=kv["tol"])
            print(f"m_star  = {m_star:.6f}" if m_star is not None else "m_star  = none")
            print(f"m_tilde = {m_tilde:.6f}" if m_tilde is not None else "m_tilde = none")
            if kv["alpha"] is not _MISSING:
                print(f"C(B,sigma,K,K') at alpha={kv['alpha']:g} = {blowup_constant(p):.6f}")
            else:
                print("C(B,sigma,K,K') = provide alpha=... to evaluate")
        elif args.analysis == "powerlaw":
            kv = _parse_kv(args.params, {
                "alpha": (float, None),
                "K": (float, 0.1),
                "K_prime": (float, 0.01),
            }, "powerlaw")
            gamma = power_law_exponent(kv["alpha"])
            p = ModelParams(
                assimilation=kv["K"], offspring_fraction=kv["K_prime"],
                search_exponent=kv["alpha"], preferred_ratio=1.5,
                diet_breadth=0.3, preference=COMPACT,
            )
            rs = np.linspace(0.1, 10.0, 1001)
            residual = float(np.max(np.abs(powerlaw_residual(p, gamma, rs))))
            print(f"gamma = {gamma:.6f}")
            print(f"max |G(gamma, r)| over r in [0.1, 10] = {residual:.3e}")
        elif args.analysis == "gaps":
            kv = _parse_kv(args.params, {
                "w_ref": (float, None),
                "B": (float, None),
                "sigma": (float, None),
                "depth": (int, 5),
            }, "gaps")
            geo = predicted_support(kv["w_ref"], kv["B"], kv["sigma"], kv["depth"])
            print(f"{'i':>3} {'lower':>12} {'upper':>12} {'length':>12}")
            for i, (iv, li) in enumerate(zip(geo.intervals, geo.lengths)):
                print(f"{i:>3} {iv[0]:>12.6g} {iv[1]:>12.6g} {li:>12.6g}")
        else:
            raise ConfigError(f"unknown analysis {args.analysis!r}")
    except (ConfigError, ValueError) as exc:
        print(f"sim analyze: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Size-spectrum jump-growth simulator and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a configured run and write outputs")
    run.add_argument("--config", help="path to a sectioned key = value config file")
    run.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    run.add_argument("--out", help="output directory")
    run.add_argument("--grid-n", type=int, dest="grid_n", help="override grid cell count")
    run.add_argument("--rtol", type=float, help="override relative tolerance")
    run.add_argument("--atol", type=float, help="override absolute tolerance")
    run.add_argument("--no-plots", action="store_true",
                     help="skip rendering matplotlib figures next to the data files")
    run.set_defaults(func=_cmd_run)

    analyze = sub.add_parser("analyze", help="closed-form model analysis tables")
    analyze.add_argument("analysis", choices=["mstar", "powerlaw", "gaps"])
    analyze.add_argument("params", nargs="*", help="key=value arguments")
    analyze.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
