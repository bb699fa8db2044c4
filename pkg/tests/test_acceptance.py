"""Acceptance suite: one test per release criterion, each printing a PASS line.

Preset runs go through the CLI execution path and are shared across criteria
via module-scoped fixtures. Tolerances are fixed here, not tuned at runtime.
"""
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from sizespectrum.cli import execute_run, main
from sizespectrum.config import preset_config
from sizespectrum.grid import (
    Distribution,
    make_uniform_grid,
    read_snapshot_csv,
)
from sizespectrum.integrator import StepControl, integrate, integrate_ode
from sizespectrum.kernel import (
    ModelParams,
    find_m_star,
    moment_bracket,
    power_law_exponent,
    powerlaw_residual,
)
from sizespectrum.operator import boundary_biomass_flux, weak_form_rhs, weak_form_scale
from sizespectrum.reference import (
    DiracModel,
    dirac_rhs,
    moment_rate_ratio_form,
    preference_mass,
)

FIG4 = ModelParams(0.1, 0.01, 0.9, 1.5, 0.3)
EDGE_RATIO = 1.2 * 1.8            # successive dome-edge ratio for B=1.5, sigma=0.3
REFERENCE_EDGES = [17.0, 14.1667, 7.8704, 6.5586, 3.6437, 3.0364,
                   1.6869, 1.4056, 0.78096, 0.65080]


def ok(capsys, criterion, text):
    with capsys.disabled():
        print(f"ACCEPTANCE {criterion} PASS: {text}")


def run_preset(name, tmp_path_factory, **control_overrides):
    cfg = preset_config(name)
    if control_overrides:
        cfg = replace(cfg, control=replace(cfg.control, **control_overrides))
    out = tmp_path_factory.mktemp(f"accept_{name}")
    code = execute_run(cfg, out, render_plots=False, preset_name=name)
    report = json.loads((out / "report.json").read_text())
    return code, report, out


@pytest.fixture(scope="module")
def fig4(tmp_path_factory):
    return run_preset("figure4", tmp_path_factory)


@pytest.fixture(scope="module")
def fig5(tmp_path_factory):
    return run_preset("figure5", tmp_path_factory)


@pytest.fixture(scope="module")
def fig6(tmp_path_factory):
    return run_preset("figure6", tmp_path_factory)


@pytest.fixture(scope="module")
def fig8(tmp_path_factory):
    return run_preset("figure8", tmp_path_factory)


@pytest.fixture(scope="module")
def fig9(tmp_path_factory):
    return run_preset("figure9", tmp_path_factory)


def random_mixture(g, rng):
    w = g.nodes
    f = np.zeros_like(w)
    for _ in range(3):
        c = rng.uniform(1.5, 8.0)
        s = rng.uniform(0.3, 1.2)
        a = rng.uniform(0.5, 8.0)
        f += a * np.exp(-((w - c) ** 2) / (2.0 * s * s))
    return Distribution(g, f)


def test_acceptance_01_analytic_identities(capsys):
    rng = np.random.default_rng(101)
    for _ in range(100):
        K = rng.uniform(0.05, 0.9)
        Kp = rng.uniform(0.001, min(0.5, 0.99 - K))
        p = ModelParams(K, Kp, rng.uniform(0.5, 1.5), 1.5, 0.3)
        r = rng.uniform(0.01, 20.0)
        assert abs(moment_bracket(p, 1.0, r)) <= 1e-12
    for _ in range(100):
        alpha = rng.choice([0.5, 0.9, 1.0, 1.1, 1.5])
        K = rng.uniform(0.05, 0.9)
        Kp = rng.uniform(0.001, min(0.5, 0.99 - K))
        p = ModelParams(K, Kp, float(alpha), 1.5, 0.3)
        r = rng.uniform(0.01, 20.0)
        assert abs(powerlaw_residual(p, power_law_exponent(float(alpha)), r)) <= 1e-12
    g = make_uniform_grid(10.0, 60)
    for _ in range(20):
        d = random_mixture(g, rng)
        rhs = weak_form_rhs(FIG4, d, lambda w: w)
        scale = weak_form_scale(FIG4, d, lambda w: w)
        assert abs(rhs) <= 1e-12 * scale
    ok(capsys, "01", "bracket, power-law and biomass-bracket identities hold to 1e-12")


def test_acceptance_02_decay_threshold(capsys):
    p = ModelParams(0.3, 0.1, 0.9, 1.5, 0.3)
    m_star = find_m_star(p)
    assert m_star is not None
    assert abs(m_star - 1.75) <= 0.02
    ms = np.linspace(1.0, m_star, 102)[1:-1]
    rs = np.linspace(1.2, 1.8, 100)
    vals = moment_bracket(p, ms[:, None], rs[None, :])
    assert np.all(vals < 0.0)
    ok(capsys, "02", f"decay threshold m*={m_star:.4f} within 1.75+-0.02; "
                     "bracket negative on the 100x100 sample")


def test_acceptance_03_gap_geometry(capsys):
    assert main(["analyze", "gaps", "w_ref=17", "B=1.5", "sigma=0.3", "depth=5"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[1:]]
    edges = []
    for row in rows[:5]:
        lo, hi = float(row[1]), float(row[2])
        edges += [hi, lo]
    for got, want in zip(edges, REFERENCE_EDGES):
        assert abs(got - want) / want <= 5e-4, (got, want)
    ok(capsys, "03", "predicted support intervals match the reference edges "
                     "to 4 significant digits")


def smooth_conservation_state(g):
    w = g.nodes
    return Distribution(g, 0.25 * np.exp(-((w - 5.0) ** 2) / (2.0 * 0.8**2)))


def test_acceptance_04_conservation_convergence(capsys):
    p = ModelParams(0.1, 0.1, 0.9, 1.5, 0.3)  # offspring scale resolved
    drifts = {}
    for n in (400, 800):
        g = make_uniform_grid(10.0, n)
        traj = integrate(p, smooth_conservation_state(g), 0.5,
                         snapshot_times=[0.0, 0.25, 0.5])
        series = [float(g.trapezoid_weights @ (g.nodes * d.values))
                  for d in traj.states]
        drifts[n] = max(abs(m - series[0]) for m in series) / series[0]
    assert drifts[400] < 0.02, drifts
    assert drifts[400] / drifts[800] >= 1.5, drifts
    ok(capsys, "04a", f"biomass drift {drifts[400]:.2%} at N=400, "
                      f"improves {drifts[400]/drifts[800]:.1f}x at N=800")


def test_acceptance_04_boundary_flux_accounts_preset_drift(capsys):
    # flux integrated over a densely snapshotted run vs the cumulative drift
    dense = sorted(set(np.concatenate([
        np.linspace(0.0, 0.05, 26), np.linspace(0.05, 0.5, 46),
        np.linspace(0.5, 5.0, 91)]).tolist()))
    g = make_uniform_grid(10.0, 200)
    d0 = Distribution(g, np.linspace(10.0, 0.1, 201))
    failures = []
    for name in ("figure4", "figure5", "figure6", "figure8", "figure9"):
        p = preset_config(name).model
        traj = integrate(p, d0, 5.0, snapshot_times=dense)
        ts = np.array(traj.times)
        flux = np.array([boundary_biomass_flux(p, d) for d in traj.states])
        series = np.array([float(g.trapezoid_weights @ (g.nodes * d.values))
                           for d in traj.states])
        cum_flux = float(np.trapezoid(flux, ts))
        lost = float(series[0] - series[-1])
        rel = abs(cum_flux - lost) / abs(lost)
        if rel > 0.20:
            failures.append(f"{name}: integrated flux {cum_flux:.2f} vs biomass "
                            f"lost {lost:.2f} (mismatch {rel:.0%})")
    assert not failures, (
        "boundary flux does not account for the preset drift within 20%: "
        + "; ".join(failures)
        + ". The unexplained share is the offspring deposit landing between "
          "the few grid nodes below K'*W, a quadrature artifact of the "
          "prescribed scheme, not upper-boundary truncation."
    )
    ok(capsys, "04b", "boundary flux accounts for preset drift within 20%")


def moments_from(report, key):
    return report["moments"][key]


def test_acceptance_05_moment_monotonicity(fig4, capsys):
    code, report, _ = fig4
    assert code == 0
    m13 = moments_from(report, "1.3")
    m05 = moments_from(report, "0.5")
    assert len(m13) == 4
    for a, b in zip(m13, m13[1:]):
        assert b <= a * (1.0 + 1e-3), (a, b)
    for a, b in zip(m05, m05[1:]):
        assert b >= a * (1.0 - 1e-3), (a, b)
    # negativity clipping stays far below the stated biomass budget
    assert report["clipped_biomass_total"] <= 1e-6 * report["biomass"][0]
    ok(capsys, "05", "figure4 m=1.3 moment non-increasing and m=0.5 "
                     "non-decreasing across snapshots")


def test_acceptance_06_blowup_envelope(fig4, capsys):
    _, report, _ = fig4
    margins = report["blowup_margins"]
    live = [m for m in margins if m is not None]
    assert live, "envelope must be evaluated at least at t=0"
    assert all(m >= 0.0 for m in live)
    expired = sum(1 for m in margins if m is None)
    ok(capsys, "06", f"figure4 alpha-moment envelope holds at every snapshot "
                     f"({len(live)} checked, {expired} past the bound's validity)")


def dome_edge_ratios(report):
    his = sorted((d["hi"] for d in report["domes"]), reverse=True)
    return [a / b for a, b in zip(his, his[1:])]


def assert_cascade(report, name):
    assert len(report["gaps"]) >= 2, f"{name}: fewer than 2 gaps"
    assert report["residual_series"][-1] < 1e-4, (
        f"{name}: final residual {report['residual_series'][-1]:.3e}"
    )
    ratios = dome_edge_ratios(report)
    assert ratios, f"{name}: no successive domes"
    for r in ratios:
        assert abs(r - EDGE_RATIO) <= 0.15 * EDGE_RATIO, (name, r, ratios)


def test_acceptance_07_cascade_regime(fig4, fig5, capsys):
    for name, (code, report, _) in (("figure4", fig4), ("figure5", fig5)):
        assert code == 0, name
        assert_cascade(report, name)
    ok(capsys, "07ab", "figure4 and figure5 end with >=2 gaps, stationary "
                       "residual < 1e-4, dome-edge ratios within 15% of 2.16")


def test_acceptance_07_figure7_flat_domes(fig4, tmp_path_factory):
    # the step budget below bounds the runtime; with the preset's full budget
    # the run grinds at step sizes < 1e-8 near t ~ 0.023 and never passes it
    code, report, _ = run_preset("figure7", tmp_path_factory, max_steps=12_000)
    assert code == 0 and not report["truncated"] and not report["blowup"], (
        "figure7 (K=0.4) cannot reach T=5 with the prescribed N=200 scheme: "
        "offspring accumulating at the first interior node feed an interpolated "
        "predator ladder on even nodes that has no matching node-sampled prey "
        "loss, so the semi-discrete system blows up in finite time near "
        "t~0.023 (biomass grows 700-fold; step size collapses below 1e-8). "
        "The flat-dome comparison against figure4 is therefore unreachable."
    )
    _, fig4_report, _ = fig4
    peak7 = max(d["height"] for d in report["domes"])
    peak4 = max(d["height"] for d in fig4_report["domes"])
    assert peak7 < peak4


def biomass_fraction_below_from_csv(path, cut):
    w, f = read_snapshot_csv(path)
    h = w[1] - w[0]
    tw = np.full(w.size, h)
    tw[0] = tw[-1] = 0.5 * h
    total = float(tw @ (w * f))
    mask = w <= cut
    return float(tw[mask] @ (w[mask] * f[mask])) / total


def test_acceptance_08_extinction_regime(fig6, fig8, capsys):
    code6, rep6, out6 = fig6
    assert code6 == 0
    m13 = moments_from(rep6, "1.3")
    assert m13[-1] < 0.5 * m13[0]
    for a, b in zip(m13, m13[1:]):
        assert b < a
    fracs6 = [biomass_fraction_below_from_csv(out6 / f"snapshot_t{t:g}.csv", 0.5)
              for t in (0.0, 0.5, 2.5, 5.0)]
    for a, b in zip(fracs6, fracs6[1:]):
        assert b > a, fracs6

    code8, rep8, out8 = fig8
    assert code8 == 0
    m13_8 = moments_from(rep8, "1.3")
    for a, b in zip(m13_8, m13_8[1:]):
        assert b < a
    frac8_start = biomass_fraction_below_from_csv(out8 / "snapshot_t0.csv", 0.5)
    frac8_end = biomass_fraction_below_from_csv(out8 / "snapshot_t5.csv", 0.5)
    assert frac8_end > 10.0 * frac8_start
    ok(capsys, "08", f"figure6 concentrates mass toward zero "
                     f"(fraction below 0.5: {fracs6[0]:.3f} -> {fracs6[-1]:.3f}); "
                     f"figure8 shows the same trend")


def test_acceptance_09_gaussian_cascade(fig9, capsys):
    code, report, _ = fig9
    assert code == 0
    assert len(report["gaps"]) >= 2
    ok(capsys, "09", f"figure9 ends with {len(report['gaps'])} gaps")


def test_acceptance_10_oracle_equivalence(capsys):
    rng = np.random.default_rng(1010)
    for trial in range(10):
        centers = [(rng.uniform(2.0, 8.0), rng.uniform(0.4, 1.2), rng.uniform(1.0, 8.0))
                   for _ in range(3)]

        def profile(w):
            out = np.zeros_like(np.asarray(w, dtype=float))
            for c, s, a in centers:
                out = out + a * np.exp(-((w - c) ** 2) / (2.0 * s * s))
            return out

        for m in (0.0, 1.3):
            diffs = []
            for n in (100, 200):
                g = make_uniform_grid(10.0, n)
                d = Distribution(g, profile(g.nodes))
                a = weak_form_rhs(FIG4, d, lambda w, m=m: np.asarray(w, dtype=float) ** m)
                b = moment_rate_ratio_form(FIG4, d, m, r_points=801)
                assert np.sign(a) == np.sign(b), (trial, m, a, b)
                diffs.append(abs(a - b))
            assert diffs[0] / diffs[1] >= 2.0, (trial, m, diffs)

    g = make_uniform_grid(10.0, 400)
    w = g.nodes
    d = Distribution(g, 6.0 * np.exp(-((w - 5.0) ** 2) / (2.0 * 0.9**2)))
    dirac = DiracModel(ModelParams(0.1, 0.01, 0.9, 1.5, 0.3, preference="dirac"))
    nodes = [int(round(m / g.spacing)) for m in (3.0, 4.0, 5.0, 6.0, 7.0)]
    ref = np.array([dirac_rhs(dirac, d, w[n]) for n in nodes])
    prev = None
    for sigma in (0.3, 0.15, 0.075):
        p = ModelParams(0.1, 0.01, 0.9, 1.5, sigma)
        from sizespectrum.operator import apply_Q

        err = np.abs(apply_Q(p, d).total[nodes] / preference_mass(p) - ref)
        if prev is not None:
            assert np.all(err < prev), (sigma, err, prev)
        prev = err
    ok(capsys, "10", "ratio-form and weak-form rates agree and converge; "
                     "narrowing preference approaches the single-ratio limit "
                     "monotonically at 5 interior nodes")


def test_acceptance_11_integrator_suite(capsys):
    rel = 1e-8
    ctl = StepControl(rel_tol=rel, abs_tol=1e-12, h_init=1e-3, h_max=0.5)
    traj = integrate_ode(lambda y: -y, np.array([1.0]), 1.0, control=ctl,
                         snapshot_times=[1.0])
    assert abs(traj.snapshots[-1][1][0] - math.exp(-1.0)) <= 10.0 * rel

    blow_ctl = StepControl(rel_tol=1e-9, abs_tol=1e-12, h_init=1e-3,
                           h_min=1e-6, h_max=0.5, max_steps=50_000)
    blow = integrate_ode(lambda y: y**2, np.array([1.0]), 1.2, control=blow_ctl)
    assert blow.blowup and blow.step_times[-1] < 1.0

    g = make_uniform_grid(10.0, 80)
    d0 = Distribution(g, np.linspace(10.0, 0.1, 81))
    runs = [integrate(FIG4, d0, 0.05, snapshot_times=[0.0, 0.05]) for _ in range(2)]
    a = np.concatenate([d.values for _, d in runs[0].snapshots])
    b = np.concatenate([d.values for _, d in runs[1].snapshots])
    assert a.tobytes() == b.tobytes()
    ok(capsys, "11", "exponential surrogate within 10x tolerance, quadratic "
                     "blow-up flagged before t=1, repeated runs bit-identical")
