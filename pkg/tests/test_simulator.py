import dataclasses
import math

import numpy as np
import pytest

import funnelcap as fc
from funnelcap.simulator import _control_path

ZERO_REF = fc.ReferenceSpec(y_d=lambda t: 0.0, y_d_rate=lambda t: 0.0)


def identity_scenario(horizon=1.0, step=1e-3):
    """f = 0, g = 1, d = 0, y_d = 0, x0 = 0: nothing should ever move."""
    system = fc.SystemSpec(
        n=2,
        f=(lambda xs: 0.0, lambda xs: 0.0),
        g=(lambda xs: 1.0, lambda xs: 1.0),
        d=(fc.zero_signal, fc.zero_signal),
    )
    controller = fc.CascadeConfig(
        n=2,
        stages=(
            fc.StageControllerParams(v_bar=1.0, funnel=fc.FunnelParams(p=1.0, q=0.1, mu=1.0)),
            fc.StageControllerParams(v_bar=1.0, funnel=fc.FunnelParams(p=1.0, q=0.1, mu=1.0)),
        ),
    )
    return fc.Scenario(
        system=system, reference=ZERO_REF, controller=controller, bounds=None, x0=(0.0, 0.0), horizon=horizon, step=step
    )


class TestSimulate:
    def test_identity_loop_stays_exactly_at_zero(self):
        traj = fc.simulate(identity_scenario())
        assert traj.samples == 1001
        assert np.all(traj.xi == 0.0)
        assert np.all(traj.u == 0.0)
        assert np.all(traj.z == 0.0)
        assert np.all(traj.theta == 0.0)
        assert traj.events == ()

    def test_deterministic_bit_identical(self, ex1):
        sc = ex1.scenario.with_overrides(horizon=0.5)
        a = fc.simulate(sc)
        b = fc.simulate(sc)
        for name in ("t", "xi", "z", "theta", "u", "psi", "y_d"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_time_grid_and_shapes(self, ex1_trajectory):
        traj = ex1_trajectory
        assert traj.samples == 20001
        assert traj.t[0] == 0.0
        assert traj.t[-1] == pytest.approx(20.0, abs=1e-12)
        assert np.all(np.diff(traj.t) > 0.0)
        assert traj.xi.shape == (20001, 2)
        assert traj.psi.shape == (20001, 2)

    def test_pendulum_envelopes_hold(self, ex1_trajectory):
        traj = ex1_trajectory
        assert np.all(np.abs(traj.z) < traj.psi)
        assert np.all(np.abs(traj.u[:, -1]) < 8.0)
        late = traj.t >= 10.0
        assert np.max(np.abs(traj.z[late, 0])) < 0.0502
        assert traj.events == ()

    def test_start_condition_enforced(self, ex1):
        sc = dataclasses.replace(ex1.scenario, x0=(2.0, 1.0), horizon=0.05)
        with pytest.raises(fc.TrivialConditionError):
            fc.simulate(sc)

    def test_permissive_logs_and_runs_clamped(self, ex1):
        sc = dataclasses.replace(ex1.scenario, x0=(2.0, 1.0), horizon=0.05)
        traj = fc.simulate(sc, permissive=True)
        kinds = {e.kind for e in traj.events}
        assert "trivial_violation" in kinds
        assert any(e.kind == "trivial_violation" and e.stage == 1 and e.t == 0.0 for e in traj.events)
        assert "saturation" in kinds
        assert np.all(np.abs(traj.u[:, -1]) < 8.0)

    def test_dynamics_blowup_aborts_with_time(self):
        system = fc.SystemSpec(n=1, f=(lambda xs: xs[0] * xs[0],), g=(lambda xs: 1e-6,), d=(fc.zero_signal,))
        controller = fc.CascadeConfig(
            n=1,
            stages=(fc.StageControllerParams(v_bar=0.01, funnel=fc.FunnelParams(p=1e6, q=1e6, mu=1.0)),),
        )
        sc = fc.Scenario(
            system=system, reference=ZERO_REF, controller=controller, bounds=None, x0=(5.0,), horizon=1.0, step=1e-3
        )
        with pytest.raises(fc.DynamicsError) as err:
            fc.simulate(sc)
        assert 0.0 < err.value.t <= 1.0
        assert err.value.stage == 1

    def test_scenario_validation(self, ex1):
        with pytest.raises(ValueError):
            dataclasses.replace(ex1.scenario, horizon=0.0)
        with pytest.raises(ValueError):
            dataclasses.replace(ex1.scenario, step=0.0)
        with pytest.raises(ValueError):
            dataclasses.replace(ex1.scenario, substeps=0)
        with pytest.raises(ValueError):
            dataclasses.replace(ex1.scenario, x0=(0.0,))
        with pytest.raises(ValueError):
            dataclasses.replace(ex1.scenario, x0=(math.inf, 0.0))

    def test_fast_control_path_matches_cascade_exactly(self, ex1, ex2):
        rng = np.random.default_rng(7)
        for ex in (ex1, ex2):
            sc = ex.scenario
            u_last = _control_path(sc.controller, sc.reference)
            for _ in range(2000):
                state = list(rng.uniform(-4.0, 4.0, sc.system.n))
                t = float(rng.uniform(0.0, 30.0))
                assert u_last(state, t) == fc.cascade(state, t, sc.controller, sc.reference).u[-1]


class TestMonitor:
    def test_pendulum_run_is_violation_free(self, ex1, ex1_trajectory):
        report = fc.monitor(ex1_trajectory, ex1.scenario.controller, ex1.scenario.bounds)
        assert [f.name for f in report.families] == [
            "error_envelope",
            "input_cap",
            "state_envelope",
            "output_slew",
        ]
        assert report.total_violations == 0
        assert report.events == ()
        for fam in report.families:
            assert all(m > 0.0 for m in fam.min_margin)

    def test_second_example_run_is_violation_free(self, ex2, ex2_trajectory):
        report = fc.monitor(ex2_trajectory, ex2.scenario.controller, ex2.scenario.bounds)
        assert report.total_violations == 0

    def test_detects_injected_envelope_violation(self, ex1, ex1_trajectory):
        z = ex1_trajectory.z.copy()
        k = 1000
        z[k, 0] = ex1_trajectory.psi[k, 0] + 0.1
        edited = dataclasses.replace(ex1_trajectory, z=z)
        report = fc.monitor(edited, ex1.scenario.controller, ex1.scenario.bounds)
        fam = report.family("error_envelope")
        assert fam.violations == (1, 0)
        assert fam.worst_t[0] == pytest.approx(ex1_trajectory.t[k])
        assert len(report.events) == 1
        assert report.events[0].kind == "violation_error_envelope"
        assert report.events[0].stage == 1
        assert report.events[0].t == pytest.approx(ex1_trajectory.t[k])

    def test_slew_bounds_come_from_certificate(self, ex1, ex1_trajectory):
        report = fc.monitor(ex1_trajectory, ex1.scenario.controller, ex1.scenario.bounds)
        cert = fc.check_feasibility(ex1.scenario.controller, ex1.scenario.bounds, [0.0, 0.0])
        slew = report.family("output_slew")
        h = ex1.scenario.step
        u = ex1_trajectory.u
        ud = np.empty_like(u)
        ud[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        ud[0] = (u[1] - u[0]) / h
        ud[-1] = (u[-1] - u[-2]) / h
        for i, stage in enumerate(cert.stages):
            expected = stage.r - float(np.max(np.abs(ud[:, i])))
            assert slew.min_margin[i] == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch_rejected(self, ex1, ex1_trajectory):
        short = fc.BoundsSpec(k=(0.0,), g_lo=(1.0,), g_hi=(1.0,), d_bar=(0.0,), v0_bar=1.0, r0=0.5)
        with pytest.raises(ValueError):
            fc.monitor(ex1_trajectory, ex1.scenario.controller, short)

    def test_chain_rule_consistency_shrinks_quadratically(self, ex1):
        # du/dt should equal gain(theta) * dtheta/dt up to discretization error
        stages = (
            fc.StageControllerParams(v_bar=4.5, c=1.0, funnel=fc.FunnelParams(p=1.0, q=0.05, mu=0.9)),
            fc.StageControllerParams(v_bar=8.0, funnel=fc.FunnelParams(p=2.5, q=0.05, mu=1.0)),
        )
        cfg = fc.CascadeConfig(n=2, stages=stages)

        def worst_deviation(step):
            sc = dataclasses.replace(ex1.scenario, controller=cfg, horizon=2.0, step=step)
            traj = fc.simulate(sc)
            ud = (traj.u[2:, 0] - traj.u[:-2, 0]) / (2.0 * step)
            td = (traj.theta[2:, 0] - traj.theta[:-2, 0]) / (2.0 * step)
            phi = np.array([fc.stage_gain(t, stages[0]) for t in traj.theta[1:-1, 0]])
            return float(np.max(np.abs(ud - phi * td)))

        d_coarse = worst_deviation(1e-3)
        d_fine = worst_deviation(5e-4)
        assert d_coarse < 5e-3
        assert d_coarse / d_fine > 3.0


class TestCsv:
    def test_trajectory_csv_round_trip(self, ex1, tmp_path):
        traj = fc.simulate(ex1.scenario.with_overrides(horizon=0.05))
        path = tmp_path / "trajectory.csv"
        fc.write_trajectory_csv(traj, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,xi_1,xi_2,z_1,z_2,theta_1,theta_2,u_1,u_2,psi_1,psi_2,y_d"
        assert len(lines) == 1 + traj.samples
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 0], traj.t)
        assert np.array_equal(data[:, 1:3], traj.xi)
        assert np.array_equal(data[:, 3:5], traj.z)
        assert np.array_equal(data[:, 5:7], traj.theta)
        assert np.array_equal(data[:, 7:9], traj.u)
        assert np.array_equal(data[:, 9:11], traj.psi)
        assert np.array_equal(data[:, 11], traj.y_d)

    def test_events_csv(self, ex1, tmp_path):
        sc = dataclasses.replace(ex1.scenario, x0=(2.0, 1.0), horizon=0.01)
        traj = fc.simulate(sc, permissive=True)
        path = tmp_path / "events.csv"
        fc.write_events_csv(traj.events, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,kind,stage,value"
        assert len(lines) == 1 + len(traj.events)
        cells = lines[1].split(",")
        assert cells[1] == "trivial_violation"
        assert float(cells[3]) == traj.events[0].value

    def test_monitor_csv(self, ex1, ex1_trajectory, tmp_path):
        report = fc.monitor(ex1_trajectory, ex1.scenario.controller, ex1.scenario.bounds)
        path = tmp_path / "monitor.csv"
        fc.write_monitor_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "family,stage,min_margin,worst_t,violations"
        assert len(lines) == 1 + 4 * 2
        for line in lines[1:]:
            assert line.split(",")[4] == "0"
