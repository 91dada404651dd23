import math

import numpy as np
import pytest

from ddelab.dde import (
    System,
    check_bounds,
    integral_residual,
    integrate,
    omega_diagnose,
    segment_at,
)
from ddelab.history import HistoryFunction
from ddelab.spectrum import stationary_points


def random_history(rng, lo, hi, n_nodes=10):
    nodes = np.linspace(-1.0, 0.0, n_nodes)
    return HistoryFunction.from_samples(nodes, rng.uniform(lo, hi, size=n_nodes))


class TestIntegrate:
    def test_one_step_closed_form_from_cutoff_history(self):
        # constant history at the cutoff: forcing is exactly the gain
        c, d = 1.0, 7.38
        traj = integrate(System.limit(c, d), HistoryFunction.constant(1.0), 1.0)
        t = np.linspace(0.0, 1.0, 501)
        exact = math.e ** (-c * t) * (1.0 - d / c) + d / c
        assert np.max(np.abs(traj.eval_many(t) - exact)) < 1e-10

    def test_stationary_history_stays_constant(self):
        system = System.smooth(1.0, 7.38, n=100)
        xi = stationary_points(system, 0.9).interior().value
        traj = integrate(system, HistoryFunction.constant(xi), 10.0)
        t = np.linspace(0.0, 10.0, 2001)
        assert np.max(np.abs(traj.eval_many(t) - xi)) < 1e-9

    def test_supercutoff_constant_decays_exactly(self):
        traj = integrate(System.limit(1.0, 7.38), HistoryFunction.constant(1.5), 1.0)
        t = np.linspace(0.0, 1.0, 501)
        assert np.max(np.abs(traj.eval_many(t) - 1.5 * np.exp(-t))) < 1e-12

    def test_continuity_at_nodes(self):
        traj = integrate(System.limit(1.0, 7.38), HistoryFunction.exp_decay(1.0), 10.0)
        mid = traj.ts[1:-1]
        left = traj.eval_many(mid - 1e-13)
        right = traj.eval_many(mid + 1e-13)
        scale = np.maximum(1.0, np.abs(traj.xs[1:-1]))
        assert np.max(np.abs(left - right) / scale) < 1e-11

    def test_negative_history_rejected(self):
        with pytest.raises(ValueError):
            integrate(System.limit(1.0, 2.0), HistoryFunction.constant(-0.5), 1.0)

    def test_coarse_mesh_rejected(self):
        with pytest.raises(ValueError):
            integrate(System.limit(1.0, 2.0), HistoryFunction.constant(0.5), 1.0, N=50)

    def test_event_log_kinds(self):
        traj = integrate(System.limit(1.0, 7.38), HistoryFunction.exp_decay(1.0), 10.0)
        kinds = {e["kind"] for e in traj.events}
        assert kinds <= {"forcing-on", "forcing-off"}
        assert len(traj.events) >= 2
        times = [e["t"] for e in traj.events]
        assert times == sorted(times)


class TestSegmentAt:
    def test_identity_at_zero(self):
        hist = HistoryFunction.constant(0.7)
        traj = integrate(System.limit(1.0, 2.0), hist, 2.0)
        assert segment_at(traj, 0.0) is hist

    def test_constant_trajectory_segments(self):
        system = System.smooth(1.0, 7.38, n=100)
        xi = stationary_points(system, 0.9).interior().value
        traj = integrate(system, HistoryFunction.constant(xi), 5.0)
        seg = segment_at(traj, 3.0)
        s = np.linspace(-1.0, 0.0, 101)
        assert np.max(np.abs(seg.eval(s) - xi)) < 1e-9

    def test_matches_closed_form_after_one_step(self):
        c, d = 1.0, 7.38
        traj = integrate(System.limit(c, d), HistoryFunction.constant(1.0), 1.0)
        seg = segment_at(traj, 1.0)
        s = np.linspace(-1.0, 0.0, 201)
        exact = np.exp(-c * (1.0 + s)) * (1.0 - d / c) + d / c
        assert np.max(np.abs(seg.eval(s) - exact)) < 1e-10

    def test_out_of_range_rejected(self):
        traj = integrate(System.limit(1.0, 2.0), HistoryFunction.constant(0.5), 2.0)
        with pytest.raises(ValueError):
            segment_at(traj, 3.0)


class TestBounds:
    def test_band_and_slope_limit(self):
        rng = np.random.default_rng(7)
        system = System.limit(1.0, 7.38)
        for _ in range(5):
            hist = random_history(rng, 0.0, 7.38)
            rep = check_bounds(integrate(system, hist, 8.0))
            assert rep.band_ok and rep.lipschitz_ok

    def test_band_and_slope_smooth(self):
        rng = np.random.default_rng(8)
        system = System.smooth(1.0, 7.38, n=100)
        for _ in range(5):
            hist = random_history(rng, 0.0, 2 * 7.38)
            rep = check_bounds(integrate(system, hist, 8.0))
            assert rep.band_ok and rep.lipschitz_ok

    def test_zero_history_stays_zero(self):
        rep = check_bounds(integrate(System.limit(1.0, 7.38), HistoryFunction.constant(0.0), 5.0))
        assert rep.max_value == 0.0 and rep.min_value == 0.0


class TestIntegralEquation:
    def test_residual_on_random_windows(self):
        traj = integrate(System.limit(1.0, 7.38), HistoryFunction.exp_decay(1.0), 30.0)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(30):
            tau = rng.uniform(0.0, 29.0)
            t = rng.uniform(tau + 0.01, 30.0)
            worst = max(worst, integral_residual(traj, tau, t))
        assert worst < 1e-6

    def test_residual_smooth_system(self):
        traj = integrate(System.smooth(1.0, 7.38, n=50), HistoryFunction.constant(1.2), 20.0, N=400)
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(20):
            tau = rng.uniform(0.0, 19.0)
            t = rng.uniform(tau + 0.01, 20.0)
            worst = max(worst, integral_residual(traj, tau, t))
        assert worst < 1e-6


class TestMonotoneOrdering:
    def test_ordered_histories_stay_ordered_below_cutoff(self):
        system = System.limit(1.0, 1.3)
        nodes = np.linspace(-1.0, 0.0, 9)
        rng = np.random.default_rng(3)
        base = rng.uniform(0.2, 0.5, size=9)
        lo = HistoryFunction.from_samples(nodes, base)
        hi = HistoryFunction.from_samples(nodes, base + 0.05)
        ta = integrate(system, lo, 30.0)
        tb = integrate(system, hi, 30.0)
        tt = np.linspace(0.0, 30.0, 6001)
        assert np.max(tb.eval_many(tt)) < 1.0
        assert np.all(ta.eval_many(tt) <= tb.eval_many(tt) + 1e-9)


class TestEventSplit:
    def test_forced_free_interval_is_exact_decay(self):
        system = System.limit(1.0, 7.38)
        traj = integrate(system, HistoryFunction.exp_decay(1.0), 30.0)
        ups = [t for t, _ in traj.crossings(1.0, "up", 0.0, 29.0)]
        assert ups
        t0 = ups[0] + 1.0  # forcing switches off here
        x0 = traj.eval(t0)
        # stored nodes on the next half unit follow the exponential to rounding
        mask = (traj.ts > t0 + 1e-9) & (traj.ts < t0 + 0.5)
        model = x0 * np.exp(-(traj.ts[mask] - t0))
        rel = np.abs(traj.xs[mask] - model) / model
        assert np.max(rel) < 1e-10


class TestStepHalving:
    def test_fourth_order_smooth(self):
        system = System.smooth(1.0, 7.38, n=6)
        hist = HistoryFunction.constant(0.4)
        vals = [integrate(system, hist, 5.0, N=N).eval(5.0) for N in (100, 200, 400)]
        d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
        order = math.log2(d1 / d2)
        assert 3.5 < order < 4.6

    def test_high_order_limit_with_events(self):
        system = System.limit(1.0, 7.38)
        hist = HistoryFunction.exp_decay(1.0)
        vals = [integrate(system, hist, 8.0, N=N).eval(8.0) for N in (100, 200, 400)]
        d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
        assert math.log2(d1 / d2) > 3.0


class TestOmegaDiagnose:
    def test_below_equilibrium_converges_to_zero(self):
        system = System.limit(1.0, 1.3)  # interior equilibrium ~ 0.77
        traj = integrate(system, HistoryFunction.constant(0.3), 60.0)
        verdict = omega_diagnose(traj)
        assert verdict.kind == "CONVERGES_TO" and verdict.value == 0.0

    def test_constant_interior_equilibrium(self):
        # the equilibrium is unstable, so the last-digit residual of the
        # root-find grows like exp(lambda0 t); keep the horizon moderate
        system = System.smooth(1.0, 7.38, n=100)
        xi = stationary_points(system, 0.9).interior().value
        traj = integrate(system, HistoryFunction.constant(xi), 30.0)
        verdict = omega_diagnose(traj, window=10.0)
        assert verdict.kind == "CONVERGES_TO"
        assert verdict.value == pytest.approx(xi, abs=1e-6)

    def test_periodic_verdict(self):
        system = System.smooth(1.0, 7.38, n=100)
        traj = integrate(system, HistoryFunction.constant(1.2), 260.0, N=400)
        verdict = omega_diagnose(traj)
        assert verdict.kind == "PERIODIC"
        assert verdict.period > 1.0

    def test_short_horizon_rejected(self):
        traj = integrate(System.limit(1.0, 2.0), HistoryFunction.constant(0.5), 30.0)
        with pytest.raises(ValueError):
            omega_diagnose(traj, window=20.0)


class TestExport:
    def test_csv_and_events_deterministic(self, tmp_path):
        system = System.limit(1.0, 7.38)
        paths = []
        for tag in ("a", "b"):
            traj = integrate(system, HistoryFunction.exp_decay(1.0), 5.0)
            p = tmp_path / f"{tag}.csv"
            traj.export_csv(p)
            paths.append(p)
            (tmp_path / f"{tag}.json").write_text(traj.events_json())
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        header = paths[0].read_text().splitlines()[0]
        assert header == "t,x,x_delayed,derivative_flag"
