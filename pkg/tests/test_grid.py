import numpy as np
import pytest

from sizespectrum.grid import (
    Distribution,
    Grid,
    distribution_from_csv,
    interpolate,
    linear_initial_condition,
    make_uniform_grid,
    read_snapshot_csv,
    resample,
    trapezoid_moment,
    write_snapshot_csv,
)


class TestGrid:
    def test_standard_grid(self):
        g = make_uniform_grid(10.0, 200)
        assert g.spacing == pytest.approx(0.05, rel=1e-15)
        assert g.nodes[0] == 0.0
        assert g.nodes[-1] == 10.0
        assert g.nodes.size == 201
        assert np.all(np.diff(g.nodes) > 0)

    def test_smallest_grid(self):
        g = make_uniform_grid(1.0, 2)
        assert np.allclose(g.nodes, [0.0, 0.5, 1.0])

    def test_refined_spacing(self):
        assert make_uniform_grid(10.0, 400).spacing == pytest.approx(0.025)

    def test_invalid(self):
        with pytest.raises(ValueError):
            make_uniform_grid(0.0, 10)
        with pytest.raises(ValueError):
            make_uniform_grid(1.0, 1)


class TestDistribution:
    def test_rejects_nan_and_shape(self):
        g = make_uniform_grid(1.0, 4)
        with pytest.raises(ValueError):
            Distribution(g, np.array([0.0, 1.0, np.nan, 0.0, 0.0]))
        with pytest.raises(ValueError):
            Distribution(g, np.zeros(4))

    def test_negative_values_allowed(self):
        g = make_uniform_grid(1.0, 4)
        d = Distribution(g, np.array([0.0, -1e-12, 0.0, 0.0, 0.0]))
        assert d.values[1] == -1e-12

    def test_values_frozen(self):
        g = make_uniform_grid(1.0, 4)
        d = Distribution(g, np.zeros(5))
        with pytest.raises(ValueError):
            d.values[0] = 1.0


class TestInterpolate:
    def test_constant_reproduction(self):
        g = make_uniform_grid(2.0, 10)
        d = Distribution(g, np.full(11, 3.25))
        for w in (0.0, 0.01, 0.5, 1.37, 2.0):
            assert interpolate(d, w) == pytest.approx(3.25, rel=1e-15)

    def test_hat_function(self):
        g = make_uniform_grid(1.0, 2)
        d = Distribution(g, np.array([0.0, 1.0, 0.0]))
        assert interpolate(d, 0.25) == pytest.approx(0.5)
        assert interpolate(d, 0.75) == pytest.approx(0.5)

    def test_zero_beyond_upper_bound(self):
        g = make_uniform_grid(1.0, 2)
        d = Distribution(g, np.array([1.0, 1.0, 1.0]))
        assert interpolate(d, 1.0 + g.spacing) == 0.0

    def test_exact_at_nodes_and_linear_between(self):
        g = make_uniform_grid(3.0, 6)
        rng = np.random.default_rng(2)
        d = Distribution(g, rng.uniform(0.0, 5.0, 7))
        assert np.all(interpolate(d, g.nodes) == d.values)
        mids = 0.5 * (g.nodes[:-1] + g.nodes[1:])
        assert np.allclose(interpolate(d, mids), 0.5 * (d.values[:-1] + d.values[1:]),
                           rtol=1e-14)

    def test_negative_mass_rejected(self):
        g = make_uniform_grid(1.0, 2)
        d = Distribution(g, np.zeros(3))
        with pytest.raises(ValueError):
            interpolate(d, -0.5)


class TestTrapezoidMoment:
    def test_exact_for_linear_integrand(self):
        g = make_uniform_grid(1.0, 17)
        d = Distribution(g, np.ones(18))
        assert trapezoid_moment(d, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_count_of_constant(self):
        g = make_uniform_grid(7.0, 50)
        d = Distribution(g, np.ones(51))
        assert trapezoid_moment(d, 0.0) == pytest.approx(7.0, rel=1e-14)

    def test_hand_quadrature(self):
        g = make_uniform_grid(1.0, 2)
        d = Distribution(g, g.nodes.copy())
        # trapezoid of w^2 at {0, 0.5, 1}
        assert trapezoid_moment(d, 1.0) == pytest.approx(0.375, rel=1e-14)

    def test_second_order_convergence(self):
        def state(n):
            g = make_uniform_grid(1.0, n)
            return Distribution(g, np.sin(2.0 * np.pi * g.nodes) + 1.5)

        ref = trapezoid_moment(state(2000), 1.5)
        e_coarse = abs(trapezoid_moment(state(50), 1.5) - ref)
        e_fine = abs(trapezoid_moment(state(200), 1.5) - ref)
        assert 8.0 <= e_coarse / e_fine <= 32.0

    def test_nonnegative_count(self):
        g = make_uniform_grid(1.0, 8)
        rng = np.random.default_rng(0)
        d = Distribution(g, rng.uniform(0.0, 1.0, 9))
        assert trapezoid_moment(d, 0.0) >= 0.0

    def test_negative_exponent_rejected(self):
        g = make_uniform_grid(1.0, 2)
        with pytest.raises(ValueError):
            trapezoid_moment(Distribution(g, np.zeros(3)), -0.5)


class TestLinearInitialCondition:
    def test_midpoint_value(self):
        g = make_uniform_grid(10.0, 200)
        d = linear_initial_condition(g, 10.0, 0.1)
        assert d.values[100] == pytest.approx(5.05, rel=1e-14)
        assert d.values[0] == 10.0
        assert d.values[-1] == pytest.approx(0.1)

    def test_constant_profile(self):
        g = make_uniform_grid(5.0, 10)
        d = linear_initial_condition(g, 2.0, 2.0)
        assert np.all(d.values == 2.0)

    def test_biomass_of_reference_profile(self):
        # closed form: integral of (10 - 0.99 w) w over [0, 10] = 170
        g = make_uniform_grid(10.0, 200)
        d = linear_initial_condition(g, 10.0, 0.1)
        assert trapezoid_moment(d, 1.0) == pytest.approx(170.0, abs=0.01)
        fine = linear_initial_condition(make_uniform_grid(10.0, 20000), 10.0, 0.1)
        assert trapezoid_moment(fine, 1.0) == pytest.approx(170.0, abs=1e-6)

    def test_negative_endpoint_rejected(self):
        g = make_uniform_grid(1.0, 2)
        with pytest.raises(ValueError):
            linear_initial_condition(g, -1.0, 0.0)


class TestResample:
    def test_linear_profile_exact(self):
        coarse = make_uniform_grid(10.0, 50)
        fine = make_uniform_grid(10.0, 200)
        d = linear_initial_condition(coarse, 10.0, 0.1)
        r = resample(d, fine)
        expected = linear_initial_condition(fine, 10.0, 0.1)
        assert np.allclose(r.values, expected.values, rtol=1e-13)


class TestSnapshotCsv:
    def test_round_trip_bits(self, tmp_path):
        g = make_uniform_grid(10.0, 37)
        rng = np.random.default_rng(9)
        d = Distribution(g, rng.uniform(0.0, 1e5, 38), 1.25)
        path = tmp_path / "snap.csv"
        write_snapshot_csv(d, path)
        text = path.read_text()
        assert text.splitlines()[0] == "w,f"
        w, f = read_snapshot_csv(path)
        assert np.array_equal(f, d.values)
        assert np.allclose(w, g.nodes, rtol=0, atol=1e-16)

    def test_rows_in_increasing_order(self, tmp_path):
        g = make_uniform_grid(1.0, 5)
        d = Distribution(g, np.arange(6.0))
        path = tmp_path / "snap.csv"
        write_snapshot_csv(d, path)
        w, _ = read_snapshot_csv(path)
        assert np.all(np.diff(w) > 0)

    def test_grid_mismatch_rejected(self, tmp_path):
        g = make_uniform_grid(1.0, 5)
        d = Distribution(g, np.arange(6.0))
        path = tmp_path / "snap.csv"
        write_snapshot_csv(d, path)
        with pytest.raises(ValueError):
            distribution_from_csv(make_uniform_grid(1.0, 6), path)
        loaded = distribution_from_csv(g, path)
        assert np.array_equal(loaded.values, d.values)

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0,1\n")
        with pytest.raises(ValueError):
            read_snapshot_csv(path)
