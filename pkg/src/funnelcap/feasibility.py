"""Analytical feasibility certificates for jointly prescribed error envelopes
and input caps, plus feasible initial-state region sweeps.

Prescribing a shrinking error envelope and a hard input cap at the same time
involves a trade-off: a tight envelope may demand more actuation than the cap
allows.  The certificate below resolves it per stage.  With

    delta_i   = [p_1 + v0_bar, ..., p_i + v_bar_{i-1}]
    varphi_i  = k_i*||delta_i|| + d_bar_i + g_hi_i*p_{i+1} + g_hi_i*v_bar_i + r_{i-1}
                (the g_hi_i*p_{i+1} term is dropped at the last stage)
    r_i       = (varphi_i/q_i + mu_i*(p_i - q_i)/p_i) * |phi_lo_i|

the prescription is certified feasible when, for every stage,

    varphi_i < (g_hi_i + g_lo_i)*v_bar_i + mu_i*(q_i - p_i)

and the start lies strictly inside every envelope, |z_i(0)| < p_i.  Here
varphi_i bounds the worst growth rate of the stage error, the right-hand side
is the worst restoring rate the capped stage output can still guarantee, and
r_i bounds the slew rate of stage i's output (which the next stage must
outrun, hence the recursion through r).

The region sweep re-runs the same arithmetic over a grid of initial states
with the envelope start values tied to the state, p_i = |z_i(0)| + delta
(two-stage systems, matching the offsets the user prescribes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controller import CascadeConfig, StageControllerParams, gain_range, stage_control
from .funnel import FunnelParams

__all__ = [
    "BoundsSpec",
    "StageFeasibility",
    "FeasibilityReport",
    "delta_vector",
    "varphi",
    "rate_bound",
    "check_feasibility",
    "RegionTemplate",
    "RegionResult",
    "PointFeasibility",
    "check_point",
    "feasible_region",
    "region_to_csv",
]


@dataclass(frozen=True)
class BoundsSpec:
    """Known constants the certificate is evaluated against.

    k      per-stage growth constants, |f_i(xs)| <= k_i*||xs||
    g_lo   per-stage lower bounds on the control coefficients g_i
    g_hi   per-stage upper bounds on g_i
    d_bar  per-stage disturbance magnitude bounds
    v0_bar bound on the reference magnitude |y_d|
    r0     bound on the reference slew rate |d(y_d)/dt|
    """

    k: tuple[float, ...]
    g_lo: tuple[float, ...]
    g_hi: tuple[float, ...]
    d_bar: tuple[float, ...]
    v0_bar: float
    r0: float

    def __post_init__(self) -> None:
        for name in ("k", "g_lo", "g_hi", "d_bar"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "v0_bar", float(self.v0_bar))
        object.__setattr__(self, "r0", float(self.r0))
        n = len(self.k)
        if n < 1:
            raise ValueError("bounds must cover at least one stage")
        for name in ("g_lo", "g_hi", "d_bar"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries like k")
        flat = self.k + self.g_lo + self.g_hi + self.d_bar + (self.v0_bar, self.r0)
        if not all(math.isfinite(v) and v >= 0.0 for v in flat):
            raise ValueError("all bound constants must be finite and >= 0")
        if any(lo > hi for lo, hi in zip(self.g_lo, self.g_hi)):
            raise ValueError("g_lo must not exceed g_hi")

    @property
    def n(self) -> int:
        return len(self.k)


def delta_vector(i: int, p: Sequence[float], v_bar: Sequence[float]) -> list[float]:
    """Stacked state-magnitude bounds [p_1 + v_bar_0, ..., p_i + v_bar_{i-1}].

    ``i`` is 1-based; ``v_bar`` must carry the reference bound prepended, so
    v_bar[0] bounds the reference and v_bar[j] bounds stage j's output.
    """
    if not 1 <= i <= len(p):
        raise IndexError(f"stage index {i} out of range 1..{len(p)}")
    if len(v_bar) < i:
        raise IndexError(f"need {i} output bounds (reference included), got {len(v_bar)}")
    return [float(p[j]) + float(v_bar[j]) for j in range(i)]


def varphi(
    i: int,
    bounds: BoundsSpec,
    funnels: Sequence[FunnelParams],
    v_bar: Sequence[float],
    r_prev: float,
) -> float:
    """Worst-case growth-rate bound of stage i's error.

    Sums the drift bound k_i*||delta_i||, the disturbance bound, the drive the
    next stage can inject (g_hi_i*p_{i+1}, absent at the last stage), the
    stage's own capped actuation seen through g_hi_i, and the slew bound
    r_{i-1} of the signal this stage is tracking.  ``v_bar`` lists the stage
    output caps v_bar_1..v_bar_n (the reference bound comes from ``bounds``).
    """
    n = len(funnels)
    p = [f.p for f in funnels]
    prepended = [bounds.v0_bar, *[float(v) for v in v_bar]]
    delta = delta_vector(i, p, prepended)
    norm = math.sqrt(sum(x * x for x in delta))
    val = bounds.k[i - 1] * norm + bounds.d_bar[i - 1] + bounds.g_hi[i - 1] * float(v_bar[i - 1]) + r_prev
    if i < n:
        val += bounds.g_hi[i - 1] * p[i]
    return val


def rate_bound(i: int, varphi_i: float, funnel_i: FunnelParams, gain_lo_i: float) -> float:
    """Slew-rate bound r_i = (varphi_i/q_i + mu_i*(p_i - q_i)/p_i) * |gain_lo_i|.

    ``gain_lo_i`` is the most-negative stage gain (first element of
    gain_range).  Bounds how fast stage i's output can move, which enters the
    next stage's growth bound.
    """
    if funnel_i.q <= 0.0 or funnel_i.p <= 0.0:
        raise ValueError("rate_bound requires positive funnel bounds p and q")
    theta_term = funnel_i.mu * (funnel_i.p - funnel_i.q) / funnel_i.p
    return (varphi_i / funnel_i.q + theta_term) * abs(gain_lo_i)


@dataclass(frozen=True)
class StageFeasibility:
    """Certificate arithmetic for one stage (1-based index).

    margin = rhs - varphi must be strictly positive, as must trivial_margin =
    p - |z0| (start strictly inside the envelope).  r is the stage's output
    slew bound fed to the next stage.
    """

    stage: int
    varphi: float
    rhs: float
    margin: float
    r: float
    p: float
    z0: float
    trivial_margin: float

    @property
    def feasible(self) -> bool:
        return self.margin > 0.0 and self.trivial_margin > 0.0


@dataclass(frozen=True)
class FeasibilityReport:
    stages: tuple[StageFeasibility, ...]
    feasible: bool

    def __str__(self) -> str:
        lines = []
        for s in self.stages:
            lines.append(
                f"stage {s.stage}: varphi={s.varphi:.6g} rhs={s.rhs:.6g} "
                f"margin={s.margin:.6g} r={s.r:.6g} p={s.p:.6g} |z0|={abs(s.z0):.6g} "
                f"trivial_margin={s.trivial_margin:.6g}"
            )
            if s.trivial_margin <= 0.0:
                lines.append(
                    f"  trivial condition violated at stage {s.stage}: "
                    f"|z_{s.stage}(0)| = {abs(s.z0):.6g} >= p_{s.stage} = {s.p:.6g}"
                )
        lines.append(f"verdict: {'FEASIBLE' if self.feasible else 'INFEASIBLE'}")
        return "\n".join(lines)


def check_feasibility(config: CascadeConfig, bounds: BoundsSpec, z0: Sequence[float]) -> FeasibilityReport:
    """Run the full per-stage certificate for a cascade and initial errors z0.

    Evaluates the varphi/r recursion from stage 1 up, the strict margin
    rhs_i - varphi_i with rhs_i = (g_hi_i + g_lo_i)*v_bar_i + mu_i*(q_i - p_i),
    and the strict start condition p_i > |z_i(0)|.  Feasible only if every
    stage passes both.
    """
    n = config.n
    if bounds.n != n:
        raise ValueError(f"bounds cover {bounds.n} stages, cascade has {n}")
    if len(z0) != n:
        raise ValueError(f"z0 has length {len(z0)}, expected {n}")
    funnels = [s.funnel for s in config.stages]
    v_bar = [s.v_bar for s in config.stages]

    stages = []
    r_prev = bounds.r0
    for i in range(1, n + 1):
        stage = config.stages[i - 1]
        fun = funnels[i - 1]
        varphi_i = varphi(i, bounds, funnels, v_bar, r_prev)
        rhs_i = (bounds.g_hi[i - 1] + bounds.g_lo[i - 1]) * stage.v_bar + fun.mu * (fun.q - fun.p)
        gain_lo_i = gain_range(stage)[0]
        r_i = rate_bound(i, varphi_i, fun, gain_lo_i)
        z0_i = float(z0[i - 1])
        stages.append(
            StageFeasibility(
                stage=i,
                varphi=varphi_i,
                rhs=rhs_i,
                margin=rhs_i - varphi_i,
                r=r_i,
                p=fun.p,
                z0=z0_i,
                trivial_margin=fun.p - abs(z0_i),
            )
        )
        r_prev = r_i
    return FeasibilityReport(stages=tuple(stages), feasible=all(s.feasible for s in stages))


@dataclass(frozen=True)
class RegionTemplate:
    """Everything a two-stage certificate needs except the initial state.

    The envelope start values are tied to the state by p_i = |z_i(0)| +
    deltas[i], so the template carries only the prescribed offsets, the fixed
    envelope tail parameters q and mu, the stage caps v_bar and shapes c, the
    certification bounds, and the reference value at t = 0.
    """

    deltas: tuple[float, float]
    q: tuple[float, float]
    mu: tuple[float, float]
    v_bar: tuple[float, float]
    c: tuple[float, float]
    bounds: BoundsSpec
    y_d0: float = 0.0

    def __post_init__(self) -> None:
        for name in ("deltas", "q", "mu", "v_bar", "c"):
            val = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, val)
            if len(val) != 2:
                raise ValueError(f"{name} must have 2 entries (region sweeps are two-stage)")
        object.__setattr__(self, "y_d0", float(self.y_d0))
        if self.bounds.n != 2:
            raise ValueError("region template bounds must cover 2 stages")
        if any(d <= 0.0 for d in self.deltas):
            raise ValueError("envelope offsets deltas must be > 0")
        if any(v <= 0.0 for v in self.q) or any(v <= 0.0 for v in self.mu):
            raise ValueError("q and mu must be > 0")
        # p_i = |z_i(0)| + deltas[i] must reach the steady-state bound q_i at
        # every cell, including z_i(0) = 0, so the derived funnel stays valid.
        if any(d < q for d, q in zip(self.deltas, self.q)):
            raise ValueError("each envelope offset must be >= the matching steady-state bound q")
        if any(v <= 0.0 for v in self.v_bar) or any(v <= 0.0 for v in self.c):
            raise ValueError("v_bar and c must be > 0")

    def stage(self, i: int, p: float) -> StageControllerParams:
        """Stage i (0-based) with its envelope start set to ``p``."""
        return StageControllerParams(
            v_bar=self.v_bar[i],
            c=self.c[i],
            funnel=FunnelParams(p=p, q=self.q[i], mu=self.mu[i]),
        )


@dataclass(frozen=True)
class PointFeasibility:
    """Certificate for one initial state under a region template."""

    x: float
    y: float
    p: tuple[float, float]
    z0: tuple[float, float]
    report: FeasibilityReport

    @property
    def feasible(self) -> bool:
        return self.report.feasible


def check_point(template: RegionTemplate, x: float, y: float) -> PointFeasibility:
    """Per-point certificate: derive p_1, p_2 from the state, then run the
    full recursion through check_feasibility (the reference route the
    vectorized sweep is validated against)."""
    x = float(x)
    y = float(y)
    z1 = x - template.y_d0
    p1 = abs(z1) + template.deltas[0]
    z2 = y - stage_control(z1 / p1, template.stage(0, p1))
    p2 = abs(z2) + template.deltas[1]
    config = CascadeConfig(n=2, stages=(template.stage(0, p1), template.stage(1, p2)))
    report = check_feasibility(config, template.bounds, (z1, z2))
    return PointFeasibility(x=x, y=y, p=(p1, p2), z0=(z1, z2), report=report)


@dataclass(frozen=True)
class RegionResult:
    """Grid sweep output: feasible mask and both stage margins per cell.

    Arrays are indexed [iy, ix]; cell (ix, iy) covers initial state
    (x[ix], y[iy]).
    """

    x: np.ndarray
    y: np.ndarray
    feasible: np.ndarray
    margin_c1: np.ndarray
    margin_c2: np.ndarray

    @property
    def fraction(self) -> float:
        return float(np.count_nonzero(self.feasible)) / self.feasible.size


def feasible_region(template: RegionTemplate, x: Sequence[float], y: Sequence[float]) -> RegionResult:
    """Vectorized certificate sweep over a rectangular grid of initial states.

    For each cell the envelope starts are p_1 = |x - y_d0| + deltas[0] and
    p_2 = |y - u_1(0)| + deltas[1] (u_1 evaluated through the stage-1 law),
    after which both stage margins are evaluated exactly as in
    check_feasibility.  A cell is feasible iff both margins are strictly
    positive; the start condition holds by construction since deltas > 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size == 0 or y.size == 0:
        raise ValueError("grid axes must be non-empty 1-D arrays")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("grid axes must be finite")

    b = template.bounds
    d1, d2 = template.deltas
    q1, q2 = template.q
    mu1, mu2 = template.mu
    vb1, vb2 = template.v_bar
    c1, c2 = template.c
    # gain_range is independent of the funnel; a flat p = q envelope is
    # always constructible
    phi_lo1 = gain_range(template.stage(0, q1))[0]

    z1 = x[None, :] - template.y_d0
    p1 = np.abs(z1) + d1
    theta1 = z1 / p1
    u1 = -(2.0 * vb1 / math.pi) * np.arctan((math.pi / (2.0 * c1)) * np.tan(0.5 * math.pi * theta1))
    z2 = y[:, None] - u1
    p2 = np.abs(z2) + d2

    varphi1 = b.k[0] * (p1 + b.v0_bar) + b.d_bar[0] + b.g_hi[0] * p2 + b.g_hi[0] * vb1 + b.r0
    margin1 = (b.g_hi[0] + b.g_lo[0]) * vb1 + mu1 * (q1 - p1) - varphi1
    r1 = (varphi1 / q1 + mu1 * (p1 - q1) / p1) * abs(phi_lo1)
    norm2 = np.sqrt((p1 + b.v0_bar) ** 2 + (p2 + vb1) ** 2)
    varphi2 = b.k[1] * norm2 + b.d_bar[1] + b.g_hi[1] * vb2 + r1
    margin2 = (b.g_hi[1] + b.g_lo[1]) * vb2 + mu2 * (q2 - p2) - varphi2

    feasible = (margin1 > 0.0) & (margin2 > 0.0)
    return RegionResult(x=x, y=y, feasible=feasible, margin_c1=margin1, margin_c2=margin2)


def region_to_csv(result: RegionResult, path) -> None:
    """Write one row per cell: x, y, feasible(0/1), margin_c1, margin_c2."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,feasible,margin_c1,margin_c2\n")
        for iy in range(result.y.size):
            for ix in range(result.x.size):
                fh.write(
                    f"{result.x[ix]:.17g},{result.y[iy]:.17g},"
                    f"{1 if result.feasible[iy, ix] else 0},"
                    f"{result.margin_c1[iy, ix]:.17g},{result.margin_c2[iy, ix]:.17g}\n"
                )
