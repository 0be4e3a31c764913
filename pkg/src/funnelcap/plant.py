"""Cascaded (pure-feedback) plant models, references, and the two built-in examples.

A plant of order n is described by per-stage scalar oracles:

    d(xi_i)/dt = f_i(xi_1..xi_i) + g_i(xi_1..xi_i) * xi_{i+1} + d_i(t)   (i < n)
    d(xi_n)/dt = f_n(xi_1..xi_n) + g_n(xi_1..xi_n) * u       + d_n(t)

with f_i vanishing at the origin and g_i positive on the operating domain.
Oracles are plain callables, so user systems plug in without subclassing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "SystemSpec",
    "ReferenceSpec",
    "DynamicsError",
    "eval_dynamics",
    "sine_signal",
    "zero_signal",
    "sine_reference",
    "pendulum_system",
    "sine_chain_system",
    "BUILTIN_NAMES",
    "BuiltinExample",
    "builtin_system",
    "SpotCheckStage",
    "SpotCheckReport",
    "spot_check_bounds",
]

Oracle = Callable[[Sequence[float]], float]
TimeSignal = Callable[[float], float]


@dataclass(frozen=True)
class SystemSpec:
    """Order n plus per-stage oracles f_i, g_i (functions of the first i states)
    and disturbance signals d_i (functions of time only)."""

    n: int
    f: tuple[Oracle, ...]
    g: tuple[Oracle, ...]
    d: tuple[TimeSignal, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", tuple(self.f))
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "d", tuple(self.d))
        if self.n < 1:
            raise ValueError(f"system order n must be >= 1, got {self.n}")
        for name, seq in (("f", self.f), ("g", self.g), ("d", self.d)):
            if len(seq) != self.n:
                raise ValueError(f"expected {self.n} {name}-oracles, got {len(seq)}")


@dataclass(frozen=True)
class ReferenceSpec:
    """Desired output y_d and its time derivative, both continuous and bounded."""

    y_d: TimeSignal
    y_d_rate: TimeSignal


class DynamicsError(RuntimeError):
    """A dynamics evaluation produced a non-finite value (closed-loop blowup)."""

    def __init__(self, stage: int, t: float, value: float):
        super().__init__(f"non-finite dynamics at stage {stage}, t={t}: {value}")
        self.stage = stage
        self.t = t
        self.value = value


def eval_dynamics(system: SystemSpec, state: Sequence[float], control: float, t: float) -> list[float]:
    """State derivative of the cascade driven by ``control`` at the last stage.

    Raises DynamicsError (carrying the 1-based stage index and time) if any
    component comes out non-finite.
    """
    if len(state) != system.n:
        raise ValueError(f"state has length {len(state)}, expected {system.n}")
    control = float(control)
    if not math.isfinite(control):
        raise ValueError(f"control input must be finite, got {control}")
    n = system.n
    out = []
    for i in range(n):
        prefix = state[: i + 1]
        drive = state[i + 1] if i < n - 1 else control
        val = system.f[i](prefix) + system.g[i](prefix) * drive + system.d[i](t)
        if not math.isfinite(val):
            raise DynamicsError(i + 1, t, val)
        out.append(val)
    return out


def sine_signal(amp: float, freq: float, phase: float = 0.0) -> TimeSignal:
    """Deterministic sinusoid amp*sin(freq*t + phase), used for disturbances."""
    amp = float(amp)
    freq = float(freq)
    phase = float(phase)
    return lambda t: amp * math.sin(freq * t + phase)


def zero_signal(t: float) -> float:
    return 0.0


def sine_reference(amp: float, freq: float) -> ReferenceSpec:
    """Reference y_d = amp*sin(freq*t) with its exact derivative."""
    amp = float(amp)
    freq = float(freq)
    return ReferenceSpec(
        y_d=lambda t: amp * math.sin(freq * t),
        y_d_rate=lambda t: amp * freq * math.cos(freq * t),
    )


def pendulum_system(
    m: float = 0.01,
    l: float = 1.0,
    k: float = 0.01,
    gravity: float = 9.8,
    d: tuple[TimeSignal, TimeSignal] | None = None,
) -> SystemSpec:
    """Torque-driven pendulum with viscous friction and a velocity-dependent load.

    angle rate     = angular velocity
    velocity rate  = -(gravity/l)*sin(angle) - (k/m)*velocity + sin(velocity)
                     + u/(m*l^2) + d_2(t)
    """
    if m <= 0 or l <= 0:
        raise ValueError("pendulum mass and length must be > 0")
    a_g = gravity / l
    a_k = k / m
    gain = 1.0 / (m * l * l)
    if d is None:
        d = (zero_signal, zero_signal)
    return SystemSpec(
        n=2,
        f=(lambda xs: 0.0, lambda xs: -a_g * math.sin(xs[0]) - a_k * xs[1] + math.sin(xs[1])),
        g=(lambda xs: 1.0, lambda xs: gain),
        d=d,
    )


def sine_chain_system(
    a: tuple[float, float] = (0.5, 1.0),
    b2: float = 1.0,
    gains: tuple[float, float] = (5.0, 7.0),
    d: tuple[TimeSignal, TimeSignal] | None = None,
) -> SystemSpec:
    """Two-stage chain with sinusoidal drift and constant control coefficients.

    stage-1 rate = a_1*sin(xi_1) + gains_1*xi_2 + d_1(t)
    stage-2 rate = a_2*sin(xi_1) + b2*xi_2 + gains_2*u + d_2(t)
    """
    a1, a2 = float(a[0]), float(a[1])
    g1, g2 = float(gains[0]), float(gains[1])
    b2 = float(b2)
    if d is None:
        d = (zero_signal, zero_signal)
    return SystemSpec(
        n=2,
        f=(lambda xs: a1 * math.sin(xs[0]), lambda xs: a2 * math.sin(xs[0]) + b2 * xs[1]),
        g=(lambda xs: g1, lambda xs: g2),
        d=d,
    )


BUILTIN_NAMES = ("pendulum_ex1", "nonlinear_ex2")


class BuiltinExample(NamedTuple):
    system: SystemSpec
    reference: ReferenceSpec
    scenario: object  # funnelcap.simulator.Scenario


def builtin_system(name: str) -> BuiltinExample:
    """Return a fully parameterized built-in example by name.

    ``pendulum_ex1``: the pendulum above with d_2 = 0.5*sin(t), reference
    sin(0.5 t), start (-0.5, 1), stage bounds (4.5, 8).
    ``nonlinear_ex2``: the sine chain with d = (0.2*sin t, 0.5*sin t),
    reference 0.5*sin(t), start (0.5, -0.8), stage bounds (1, 16).

    The returned scenario bundles the matching cascade, certification bounds,
    start state, and a 20 s / 1 ms integration grid.
    """
    from .controller import CascadeConfig, StageControllerParams
    from .feasibility import BoundsSpec
    from .funnel import FunnelParams
    from .simulator import Scenario

    if name == "pendulum_ex1":
        system = pendulum_system(d=(zero_signal, sine_signal(0.5, 1.0)))
        reference = sine_reference(1.0, 0.5)
        controller = CascadeConfig(
            n=2,
            stages=(
                StageControllerParams(v_bar=4.5, funnel=FunnelParams(p=1.0, q=0.05, mu=0.9)),
                StageControllerParams(v_bar=8.0, funnel=FunnelParams(p=1.4, q=0.05, mu=1.0)),
            ),
        )
        bounds = BoundsSpec(
            k=(0.0, 9.8 * math.sqrt(2.0)),
            g_lo=(1.0, 100.0),
            g_hi=(1.0, 100.0),
            d_bar=(0.0, 0.5),
            v0_bar=1.0,
            r0=0.5,
        )
        x0 = (-0.5, 1.0)
    elif name == "nonlinear_ex2":
        system = sine_chain_system(d=(sine_signal(0.2, 1.0), sine_signal(0.5, 1.0)))
        reference = sine_reference(0.5, 1.0)
        controller = CascadeConfig(
            n=2,
            stages=(
                StageControllerParams(v_bar=1.0, funnel=FunnelParams(p=1.0, q=0.08, mu=0.9)),
                StageControllerParams(v_bar=16.0, funnel=FunnelParams(p=0.4, q=0.01, mu=0.5)),
            ),
        )
        bounds = BoundsSpec(
            k=(0.5, 1.0),
            g_lo=(5.0, 7.0),
            g_hi=(5.0, 7.0),
            d_bar=(0.2, 0.5),
            v0_bar=0.5,
            r0=0.5,
        )
        x0 = (0.5, -0.8)
    else:
        raise ValueError(f"unknown built-in system {name!r}; known: {BUILTIN_NAMES}")

    # substeps = 10 keeps explicit RK4 inside its stability region for these
    # stiff examples (see the simulator module notes) while recording at 1 ms.
    scenario = Scenario(
        system=system,
        reference=reference,
        controller=controller,
        bounds=bounds,
        x0=x0,
        horizon=20.0,
        step=1e-3,
        substeps=10,
    )
    return BuiltinExample(system=system, reference=reference, scenario=scenario)


@dataclass(frozen=True)
class SpotCheckStage:
    """Numeric evidence for one stage: worst margins of the declared bounds.

    f_margin is min over samples of k_i*||prefix|| - |f_i(prefix)|; g_margin is
    min of (g_i - g_lo_i, g_hi_i - g_i).  Negative margins mean the declared
    constant is violated at ``*_worst`` (reported, never silently corrected).
    """

    stage: int
    f_margin: float
    f_violations: int
    f_worst: tuple[float, ...]
    g_margin: float
    g_violations: int
    g_worst: tuple[float, ...]


@dataclass(frozen=True)
class SpotCheckReport:
    stages: tuple[SpotCheckStage, ...]
    samples: int

    @property
    def clean(self) -> bool:
        return all(s.f_violations == 0 and s.g_violations == 0 for s in self.stages)


def spot_check_bounds(system: SystemSpec, bounds, box, samples: int = 2000, seed: int = 0) -> SpotCheckReport:
    """Sample the operating box and test the declared growth and gain constants.

    ``box`` lists one (lo, hi) interval per state.  The check is evidence, not
    proof: it reports worst margins and violation counts for |f_i| <= k_i*||.||
    and g_lo_i <= g_i <= g_hi_i over ``samples`` uniform draws.
    """
    if len(box) != system.n:
        raise ValueError(f"box must list {system.n} intervals, got {len(box)}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.array([float(b[0]) for b in box])
    hi = np.array([float(b[1]) for b in box])
    if np.any(hi < lo):
        raise ValueError("box intervals must satisfy lo <= hi")
    pts = rng.uniform(lo, hi, size=(samples, system.n))

    stages = []
    for i in range(system.n):
        f_margin = math.inf
        g_margin = math.inf
        f_viol = 0
        g_viol = 0
        f_worst: tuple[float, ...] = ()
        g_worst: tuple[float, ...] = ()
        k_i = bounds.k[i]
        g_lo_i = bounds.g_lo[i]
        g_hi_i = bounds.g_hi[i]
        for row in pts:
            prefix = tuple(row[: i + 1])
            fm = k_i * math.sqrt(sum(x * x for x in prefix)) - abs(system.f[i](prefix))
            g_val = system.g[i](prefix)
            gm = min(g_val - g_lo_i, g_hi_i - g_val)
            if fm < f_margin:
                f_margin, f_worst = fm, prefix
            if gm < g_margin:
                g_margin, g_worst = gm, prefix
            if fm < 0.0:
                f_viol += 1
            if gm < 0.0:
                g_viol += 1
        stages.append(
            SpotCheckStage(
                stage=i + 1,
                f_margin=f_margin,
                f_violations=f_viol,
                f_worst=f_worst,
                g_margin=g_margin,
                g_violations=g_viol,
                g_worst=g_worst,
            )
        )
    return SpotCheckReport(stages=tuple(stages), samples=samples)
