"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; every check runs at its stated tolerance and measures its own runtime
where a budget applies.
"""

import json
import math
import time

import numpy as np

import funnelcap as fc
from funnelcap.config import resolve_config

HALF_PI = math.pi / 2.0


def _report(num: int, ok: bool, desc: str) -> None:
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {desc}")
    assert ok, f"criterion {num}: {desc}"


def _bundled(name: str):
    return resolve_config(json.loads(fc.dump_defaults(name)))


def test_criterion_1_pendulum_feasibility_arithmetic():
    # Independent evaluation of the certificate recursion, written out by
    # hand from the margin definitions with the bundled pendulum numbers.
    p = [1.0, 1.4]
    q = [0.05, 0.05]
    mu = [0.9, 1.0]
    vb = [4.5, 8.0]
    k = [0.0, 9.8 * math.sqrt(2.0)]
    g_lo = [1.0, 100.0]
    g_hi = [1.0, 100.0]
    d_bar = [0.0, 0.5]
    v0, r0 = 1.0, 0.5

    # stage 1
    hand_varphi1 = k[0] * (p[0] + v0) + d_bar[0] + g_hi[0] * p[1] + g_hi[0] * vb[0] + r0
    hand_rhs1 = (g_hi[0] + g_lo[0]) * vb[0] + mu[0] * (q[0] - p[0])
    hand_margin1 = hand_rhs1 - hand_varphi1
    hand_r1 = (hand_varphi1 / q[0] + mu[0] * (p[0] - q[0]) / p[0]) * vb[0]  # |gain_lo| = v_bar at c = pi/2
    # stage 2 (no next-envelope term at the last stage)
    norm2 = math.sqrt((p[0] + v0) ** 2 + (p[1] + vb[0]) ** 2)
    hand_varphi2 = k[1] * norm2 + d_bar[1] + g_hi[1] * vb[1] + hand_r1
    hand_rhs2 = (g_hi[1] + g_lo[1]) * vb[1] + mu[1] * (q[1] - p[1])
    hand_margin2 = hand_rhs2 - hand_varphi2
    assert abs(hand_varphi1 - 6.4) <= 1e-9 * 6.4
    assert abs(hand_margin1 - 1.745) <= 1e-9 * 1.745
    assert hand_margin2 > 0.0

    t0 = time.perf_counter()
    sc = _bundled("pendulum_ex1").scenario
    z0 = fc.cascade(sc.x0, 0.0, sc.controller, sc.reference).z
    report = fc.check_feasibility(sc.controller, sc.bounds, z0)
    elapsed = time.perf_counter() - t0

    s1, s2 = report.stages
    ok = (
        abs(s1.varphi - 6.4) <= 1e-9 * 6.4
        and abs(s1.margin - 1.745) <= 1e-9 * 1.745
        and abs(s1.varphi - hand_varphi1) <= 1e-12 * hand_varphi1
        and abs(s2.varphi - hand_varphi2) <= 1e-12 * hand_varphi2
        and abs(s2.margin - hand_margin2) <= 1e-12 * abs(hand_margin2)
        and s2.margin > 0.0
        and report.feasible
        and elapsed < 1.0
    )
    _report(
        1,
        ok,
        f"pendulum certificate: varphi_1={s1.varphi:.10g}, margin_1={s1.margin:.10g}, "
        f"margin_2={s2.margin:.6g} > 0, runtime {elapsed * 1e3:.1f} ms < 1 s",
    )


def test_criterion_2_pendulum_simulation_bounds():
    sc = _bundled("pendulum_ex1").scenario
    t0 = time.perf_counter()
    traj = fc.simulate(sc)
    report = fc.monitor(traj, sc.controller, sc.bounds)
    elapsed = time.perf_counter() - t0

    z1_inside = bool(np.all(np.abs(traj.z[:, 0]) < traj.psi[:, 0]))
    u_inside = bool(np.all(np.abs(traj.u[:, -1]) < 8.0))
    late = traj.t >= 10.0
    z1_late = float(np.max(np.abs(traj.z[late, 0])))
    families = {f.name for f in report.families}
    ok = (
        traj.samples == 20001
        and z1_inside
        and u_inside
        and z1_late < 0.0502
        and families == {"error_envelope", "input_cap", "state_envelope", "output_slew"}
        and report.total_violations == 0
        and elapsed < 10.0
    )
    _report(
        2,
        ok,
        f"pendulum 20 s run: |z1|<psi1 {z1_inside}, |u|<8 {u_inside}, "
        f"max|z1| after 10 s = {z1_late:.4g} < 0.0502, violations={report.total_violations}, "
        f"runtime {elapsed:.2f} s < 10 s",
    )


def test_criterion_3_second_example_simulation_bounds():
    sc = _bundled("nonlinear_ex2").scenario
    t0 = time.perf_counter()
    traj = fc.simulate(sc)
    elapsed = time.perf_counter() - t0
    envelope = (1.0 - 0.08) * np.exp(-0.9 * traj.t) + 0.08
    z1_inside = bool(np.all(np.abs(traj.z[:, 0]) < envelope))
    u_inside = bool(np.all(np.abs(traj.u[:, -1]) < 16.0))
    ok = traj.t[-1] >= 20.0 - 1e-9 and z1_inside and u_inside and elapsed < 10.0
    _report(
        3,
        ok,
        f"second-example 20 s run: |z1| inside (1-0.08)e^(-0.9t)+0.08 {z1_inside}, "
        f"|u|<16 {u_inside}, runtime {elapsed:.2f} s < 10 s",
    )


def test_criterion_4_region_sweeps():
    resolved1 = _bundled("pendulum_ex1")
    region1 = resolved1.region
    t0 = time.perf_counter()
    res1 = fc.feasible_region(region1.template, region1.x, region1.y)
    elapsed = time.perf_counter() - t0

    assert res1.x.size == 201 and res1.y.size == 201
    ix = int(np.argmin(np.abs(res1.x - (-0.5))))
    iy = int(np.argmin(np.abs(res1.y - 1.0)))
    start_in_region = bool(res1.feasible[iy, ix])
    nonempty = bool(res1.feasible.any())

    # sweep / point-check agreement on a deterministic sample of cells
    rng = np.random.default_rng(2024)
    agree = True
    for _ in range(2000):
        cx = int(rng.integers(0, res1.x.size))
        cy = int(rng.integers(0, res1.y.size))
        pt = fc.check_point(region1.template, res1.x[cx], res1.y[cy])
        if pt.feasible != bool(res1.feasible[cy, cx]):
            agree = False
            break

    region2 = _bundled("nonlinear_ex2").region
    probe_a = fc.check_point(region2.template, 0.5, -0.8)
    probe_b = fc.check_point(region2.template, 0.2, -0.8)
    res2 = fc.feasible_region(region2.template, region2.x, region2.y)
    iy2 = int(np.argmin(np.abs(res2.y - (-0.8))))
    sweep_a = bool(res2.feasible[iy2, int(np.argmin(np.abs(res2.x - 0.5)))])
    sweep_b = bool(res2.feasible[iy2, int(np.argmin(np.abs(res2.x - 0.2)))])

    ok = (
        elapsed < 60.0
        and nonempty
        and start_in_region
        and agree
        and probe_a.feasible
        and not probe_b.feasible
        and sweep_a == probe_a.feasible
        and sweep_b == probe_b.feasible
        and res2.feasible.any()
    )
    _report(
        4,
        ok,
        f"regions: 201x201 sweep {elapsed:.2f} s < 60 s, nonempty {nonempty}, "
        f"contains (-0.5, 1) {start_in_region}, point/sweep agreement {agree}; "
        f"second example probes: (0.5,-0.8) feasible={probe_a.feasible}, "
        f"(0.2,-0.8) feasible={probe_b.feasible} (inconsistent source claims surfaced)",
    )


def test_criterion_5_controller_property_suite():
    rng = np.random.default_rng(987654321)
    cases = 10_000
    h = 1e-6
    worst_odd = 0.0
    worst_fd = 0.0
    worst_collapse = 0.0
    monotone_ok = True
    bounded_ok = True
    gain_ok = True

    for _ in range(cases):
        v_bar = float(rng.uniform(0.5, 10.0))
        c = float(rng.uniform(0.5, 2.5))
        theta = float(rng.uniform(-0.99, 0.99))
        stage = fc.StageControllerParams(v_bar=v_bar, c=c, funnel=fc.FunnelParams(p=1.0, q=0.1, mu=1.0))

        u = fc.stage_control(theta, stage)
        worst_odd = max(worst_odd, abs(fc.stage_control(-theta, stage) + u))
        bounded_ok = bounded_ok and abs(u) < v_bar

        gap = float(rng.uniform(1e-6, 0.5))
        theta_b = min(theta + gap, 0.995)
        monotone_ok = monotone_ok and u > fc.stage_control(theta_b, stage)

        g = fc.stage_gain(theta, stage)
        lo, hi = fc.gain_range(stage)
        gain_ok = gain_ok and g < 0.0 and (lo - 1e-12 * abs(lo)) <= g <= (hi + 1e-12 * abs(lo))

        fd = (fc.stage_control(theta + h, stage) - fc.stage_control(theta - h, stage)) / (2.0 * h)
        worst_fd = max(worst_fd, abs(fd - g))

        linear = fc.StageControllerParams(v_bar=v_bar, c=HALF_PI, funnel=stage.funnel)
        worst_collapse = max(worst_collapse, abs(fc.stage_control(theta, linear) - (-v_bar * theta)))

    ok = (
        worst_odd <= 1e-12
        and monotone_ok
        and bounded_ok
        and gain_ok
        and worst_fd <= 1e-6
        and worst_collapse <= 1e-12
    )
    _report(
        5,
        ok,
        f"controller properties over {cases} random cases: odd-symmetry worst {worst_odd:.2e} <= 1e-12, "
        f"strict monotone {monotone_ok}, |u|<v_bar {bounded_ok}, gain in range and negative {gain_ok}, "
        f"central-difference worst {worst_fd:.2e} <= 1e-6, linear-collapse worst {worst_collapse:.2e} <= 1e-12",
    )


def test_criterion_6_funnel_property_suite():
    rng = np.random.default_rng(24680)
    cases = 10_000
    h = 1e-5
    band_ok = True
    rate_ok = True
    worst_fd = 0.0
    for _ in range(cases):
        q = float(rng.uniform(0.01, 5.0))
        p = q + float(rng.uniform(0.0, 5.0))
        mu = float(rng.uniform(0.01, 5.0))
        t = float(rng.uniform(1e-4, 30.0))
        params = fc.FunnelParams(p=p, q=q, mu=mu)

        v = fc.funnel_value(params, t)
        band_ok = band_ok and q <= v <= p

        r = fc.funnel_rate(params, t)
        lo, hi = fc.funnel_rate_bounds(params)
        rate_ok = rate_ok and (lo - 1e-12 * abs(lo)) <= r <= hi

        fd = (fc.funnel_value(params, t + h) - fc.funnel_value(params, t - h)) / (2.0 * h)
        worst_fd = max(worst_fd, abs(fd - r))

    ok = band_ok and rate_ok and worst_fd <= 1e-6
    _report(
        6,
        ok,
        f"funnel properties over {cases} random cases: value in [q, p] {band_ok}, "
        f"rate in [mu(q-p), 0] {rate_ok}, central-difference worst {worst_fd:.2e} <= 1e-6",
    )


def test_criterion_7_integrator_order():
    sc = _bundled("pendulum_ex1").scenario
    import dataclasses

    run = lambda scenario: fc.simulate(scenario).xi[-1]
    x_coarse = run(sc.with_overrides(horizon=2.0, step=1e-3))
    x_half = run(sc.with_overrides(horizon=2.0, step=5e-4))
    # reference integrates at exactly 1e-5 per step
    x_ref = run(dataclasses.replace(sc, horizon=2.0, step=1e-5, substeps=1))
    e_coarse = float(np.linalg.norm(np.asarray(x_coarse) - np.asarray(x_ref)))
    e_half = float(np.linalg.norm(np.asarray(x_half) - np.asarray(x_ref)))
    ratio = e_coarse / e_half
    ok = ratio >= 12.0
    _report(
        7,
        ok,
        f"step halving on the pendulum over 2 s: error {e_coarse:.3e} -> {e_half:.3e}, "
        f"ratio {ratio:.1f} >= 12 (4th-order behavior)",
    )


def test_criterion_8_identity_closed_loop():
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
    reference = fc.ReferenceSpec(y_d=lambda t: 0.0, y_d_rate=lambda t: 0.0)
    sc = fc.Scenario(
        system=system, reference=reference, controller=controller, bounds=None, x0=(0.0, 0.0), horizon=1.0, step=1e-3
    )
    traj = fc.simulate(sc)
    state_zero = bool(np.all(traj.xi == 0.0))
    input_zero = bool(np.all(traj.u == 0.0))
    ok = state_zero and input_zero and traj.events == ()
    _report(8, ok, f"identity loop: state exactly 0 {state_zero}, input exactly 0 {input_zero}, full horizon")
