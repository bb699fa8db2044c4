"""Figure rendering for run outputs (PNG files next to the CSV/JSON data)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_run(traj, report, cfg, out_dir) -> list:
    """Write spectrum panels and diagnostic series; returns the file paths."""
    paths = []
    snapshots = traj.snapshots
    n = len(snapshots)
    cols = 2
    rows = max(1, (n + cols - 1) // cols)

    lo, hi = cfg.scan_range
    fig, axes = plt.subplots(rows, cols, figsize=(9, 3 * rows), squeeze=False)
    for ax, (t, d) in zip(axes.ravel(), snapshots):
        w = d.grid.nodes
        visible = (w >= lo) & (w <= hi)
        cap = float(d.values[visible].max()) if visible.any() else float(d.values.max())
        ax.plot(w, d.values, lw=1.0)
        ax.set_xlim(0.0, d.grid.upper_bound)
        ax.set_ylim(0.0, 1.1 * cap if cap > 0 else 1.0)
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel("body mass w")
        ax.set_ylabel("abundance f")
    for ax in axes.ravel()[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    spectrum = out_dir / "spectrum.png"
    fig.savefig(spectrum, dpi=120)
    plt.close(fig)
    paths.append(spectrum)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    times = report["times"]
    ax1.plot(times, report["biomass"], "o-", label="biomass")
    for m, series in sorted(report["moments"].items(), key=lambda kv: float(kv[0])):
        ax1.plot(times, series, "s--", label=f"moment m={m}")
    ax1.set_xlabel("time")
    ax1.set_yscale("log")
    ax1.legend(fontsize=8)
    ax1.set_title("moment series")
    residual = np.asarray(report["residual_series"])
    ax2.semilogy(times, np.maximum(residual, 1e-300), "o-")
    ax2.set_xlabel("time")
    ax2.set_title("stationarity residual")
    fig.tight_layout()
    series_path = out_dir / "diagnostics.png"
    fig.savefig(series_path, dpi=120)
    plt.close(fig)
    paths.append(series_path)
    return paths
