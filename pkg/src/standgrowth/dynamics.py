"""Integration of the stand dynamics under a thinning policy.

The state (s, n) evolves by

    ds/dt = g(r(n, s)) / n * V(t)
    dn/dt = -e(t)

subject to 0 <= e <= e_max, n >= n_min, and the density ceiling r <= 1.
Integration is classic fixed-step fourth-order Runge-Kutta with three pieces
of event handling:

* when r crosses 1 or n crosses n_min inside a step, the crossing time is
  localized by bisection on the step fraction (time tolerance 1e-9);
* while a policy rides the density ceiling, the applied control is the
  ceiling-holding rate (q/2) V(t)/s and the state is projected back onto
  r = 1 after every step (rescaling s keeps the drift at round-off level);
* the integration stops at the corner (r, n) = (1, n_min), the only point
  through which a stand can leave its validity domain.

Policies are piecewise: each segment holds either a constant thinning rate or
the HOLD marker, meaning "grow freely until the density ceiling, then ride
it".  Once n reaches n_min no further trees can be cut, so the applied rate is
clamped to zero from that moment on (the crossing is recorded as an NMinHit
event); pass ``on_n_min="error"`` to treat such a crossing as a failure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Environment, Scenario, StandState

__all__ = [
    "HOLD",
    "Policy",
    "TrajectoryEvent",
    "Trajectory",
    "InfeasibleBoundary",
    "NonViable",
    "rhs",
    "drdt",
    "integrate",
    "sample_policies",
    "write_trajectory_csv",
    "write_events_json",
]

EVENT_TIME_TOL = 1e-9       # bisection tolerance for event times
EXIT_REL_TOL = 1e-7         # relative tolerance for the (r, n) = (1, n_min) corner
DEFAULT_STEPS = 4096        # default number of steps over the horizon


class _HoldLevel:
    """Marker level: ride the density ceiling (grow freely until reaching it)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HOLD"


HOLD = _HoldLevel()


class InfeasibleBoundary(RuntimeError):
    """Holding the density ceiling would require a rate above e_max."""


class NonViable(RuntimeError):
    """The policy would push the tree count below n_min."""


@dataclass(frozen=True)
class Policy:
    """Piecewise thinning schedule.

    ``levels[i]`` applies on ``[breakpoints[i-1], breakpoints[i])`` (with the
    outer segments extending to 0 and +inf); each level is a rate in
    ``[0, e_max]`` or the ``HOLD`` marker.  ``kind`` tags the canonical
    constructions ("zero", "max", "e0", "et", "esup", "boundary_hold",
    "custom"); ``meta`` carries their characteristic times.
    """

    breakpoints: tuple[float, ...]
    levels: tuple
    kind: str = "custom"
    meta: tuple = ()

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more level than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.breakpoints and self.breakpoints[0] <= 0.0:
            raise ValueError("breakpoints must be positive")
        for lv in self.levels:
            if lv is not HOLD and float(lv) < 0.0:
                raise ValueError(f"thinning rates must be non-negative (got {lv})")

    @classmethod
    def zero(cls) -> "Policy":
        return cls((), (0.0,), kind="zero")

    @classmethod
    def max_rate(cls, e_max: float) -> "Policy":
        return cls((), (float(e_max),), kind="max")

    @classmethod
    def boundary_hold(cls) -> "Policy":
        return cls((), (HOLD,), kind="boundary_hold")

    @classmethod
    def piecewise(cls, breakpoints: Sequence[float], levels: Sequence) -> "Policy":
        return cls(tuple(float(b) for b in breakpoints),
                   tuple(lv if lv is HOLD else float(lv) for lv in levels))

    def segment_index(self, t: float) -> int:
        """Index of the segment active at time t (right-continuous)."""
        i = 0
        for b in self.breakpoints:
            if t < b:
                break
            i += 1
        return i

    def level_at(self, t: float):
        return self.levels[self.segment_index(t)]

    def max_level(self) -> float:
        rates = [float(lv) for lv in self.levels if lv is not HOLD]
        return max(rates) if rates else 0.0

    def meta_dict(self) -> dict:
        return dict(self.meta)

    def describe(self) -> dict:
        """JSON-friendly description."""
        return {
            "kind": self.kind,
            "breakpoints": list(self.breakpoints),
            "levels": ["hold" if lv is HOLD else float(lv) for lv in self.levels],
            "meta": {k: v for k, v in self.meta},
        }


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    kind: str               # "RdiHitOne" | "NMinHit" | "ExitPoint" | "HorizonEnd"
    terminal: bool


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of the stand dynamics under one policy.

    Arrays share a common length: ``t`` (sample times, strictly increasing),
    ``s``, ``n``, ``e`` (control in effect on ``[t[i], t[i+1])``), ``r``
    (density index), ``drdt`` (density rate at the sample), and ``on_arc``
    (True where the state rides the density ceiling).  ``validity_end`` is
    the last time the solution is defined; ``exited`` marks departure through
    the (1, n_min) corner.  ``breaks`` lists the control-regime change times,
    which quadratures use as panel boundaries.
    """

    t: np.ndarray
    s: np.ndarray
    n: np.ndarray
    e: np.ndarray
    r: np.ndarray
    drdt: np.ndarray
    on_arc: np.ndarray
    events: tuple[TrajectoryEvent, ...]
    validity_end: float
    exited: bool
    breaks: tuple[float, ...]

    def __post_init__(self) -> None:
        for arr in (self.t, self.s, self.n, self.e, self.r, self.drdt, self.on_arc):
            arr.flags.writeable = False

    @property
    def final_state(self) -> StandState:
        return StandState(t=float(self.t[-1]), s=float(self.s[-1]), n=float(self.n[-1]))

    def interp_s(self, times) -> np.ndarray:
        return np.interp(times, self.t, self.s)

    def interp_n(self, times) -> np.ndarray:
        return np.interp(times, self.t, self.n)


def rhs(scenario: Scenario, state: StandState, e: float) -> tuple[float, float]:
    """Right-hand side (ds/dt, dn/dt) at a state under thinning rate e."""
    p = scenario.params
    if state.n <= 0.0:
        raise ValueError("rhs requires n > 0")
    if not 0.0 <= e <= p.e_max * (1.0 + 1e-12):
        raise ValueError(f"thinning rate {e} outside [0, {p.e_max}]")
    r = p.A * state.n * state.s ** (p.q / 2.0)
    ds = scenario.growth.g(r) / state.n * scenario.env.v(state.t)
    return float(ds), -float(e)


def drdt(scenario: Scenario, state: StandState, e: float) -> float:
    """Rate of change of the density index: (r/n) [ (q/2) g(r)/s V(t) - e ]."""
    p = scenario.params
    if state.n <= 0.0:
        raise ValueError("drdt requires n > 0")
    r = p.A * state.n * state.s ** (p.q / 2.0)
    g = scenario.growth.g(r)
    return float(r / state.n * (p.q / 2.0 * g / state.s * scenario.env.v(state.t) - e))


def _drdt_values(scenario: Scenario, t, s, n, e) -> np.ndarray:
    p = scenario.params
    r = p.A * n * s ** (p.q / 2.0)
    g = scenario.growth.g(r)
    return r / n * (p.q / 2.0 * g / s * scenario.env.v(t) - e)


class _Recorder:
    """Accumulates samples and events during integration."""

    def __init__(self) -> None:
        self.t: list[float] = []
        self.s: list[float] = []
        self.n: list[float] = []
        self.e: list[float] = []
        self.arc: list[bool] = []
        self.events: list[TrajectoryEvent] = []
        self.breaks: set[float] = set()

    def add(self, t: float, s: float, n: float, e: float, arc: bool) -> None:
        if self.t and t - self.t[-1] < 1e-13:
            # Collapse zero-width intervals created by events landing on nodes.
            self.s[-1], self.n[-1], self.e[-1], self.arc[-1] = s, n, e, arc
            return
        self.t.append(t)
        self.s.append(s)
        self.n.append(n)
        self.e.append(e)
        self.arc.append(arc)


def integrate(scenario: Scenario, policy: Policy, horizon: float,
              step: float | None = None, *, on_n_min: str = "clamp",
              fault_s_drift: float = 0.0) -> Trajectory:
    """Integrate the stand dynamics under ``policy`` up to ``horizon``.

    ``step`` is the nominal step size (default ``horizon / 4096``); steps are
    aligned to policy breakpoints so the control is smooth inside every span.
    ``on_n_min`` selects what happens when thinning would push n below n_min:
    ``"clamp"`` freezes the rate at zero (recording an NMinHit event) and
    ``"error"`` raises :class:`NonViable`.  ``fault_s_drift`` multiplies s by
    ``1 + fault_s_drift`` after every step; it exists solely so verification
    harnesses can prove they detect a corrupted integrator.

    Raises :class:`InfeasibleBoundary` when holding the density ceiling would
    require a rate above e_max.
    """
    p = scenario.params
    growth = scenario.growth
    env_v = scenario.env.v
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive (got {horizon})")
    if horizon > p.t_star * (1.0 + 1e-12):
        raise ValueError(f"horizon {horizon} exceeds the model validity limit t_star={p.t_star}")
    if on_n_min not in ("clamp", "error"):
        raise ValueError(f"on_n_min must be 'clamp' or 'error' (got {on_n_min})")
    for lv in policy.levels:
        if lv is not HOLD and float(lv) > p.e_max * (1.0 + 1e-12):
            raise ValueError(f"policy rate {lv} exceeds e_max={p.e_max}")
    if step is None:
        step = horizon / DEFAULT_STEPS
    if step <= 0.0:
        raise ValueError(f"step must be positive (got {step})")

    A, q2, e_max, n_min = p.A, p.q / 2.0, p.e_max, p.n_min
    arc_exp = -2.0 / p.q                    # s on the ceiling: (A n) ** arc_exp
    g = growth.g

    def rk4_free(t: float, s: float, n: float, h: float, e: float) -> tuple[float, float]:
        h2 = 0.5 * h
        k1 = g(A * n * s ** q2) / n * env_v(t)
        n1 = n - h2 * e
        vmid = env_v(t + h2)
        k2 = g(A * n1 * (s + h2 * k1) ** q2) / n1 * vmid
        k3 = g(A * n1 * (s + h2 * k2) ** q2) / n1 * vmid
        n2 = n - h * e
        k4 = g(A * n2 * (s + h * k3) ** q2) / n2 * env_v(t + h)
        return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), n2

    def rk4_arc(t: float, s: float, n: float, h: float) -> tuple[float, float]:
        h2 = 0.5 * h
        v0 = env_v(t)
        vm = env_v(t + h2)
        v1 = env_v(t + h)
        k1s = g(A * n * s ** q2) / n * v0
        k1n = -q2 * v0 / s
        sa, na = s + h2 * k1s, n + h2 * k1n
        k2s = g(A * na * sa ** q2) / na * vm
        k2n = -q2 * vm / sa
        sb, nb = s + h2 * k2s, n + h2 * k2n
        k3s = g(A * nb * sb ** q2) / nb * vm
        k3n = -q2 * vm / sb
        sc, nc = s + h * k3s, n + h * k3n
        k4s = g(A * nc * sc ** q2) / nc * v1
        k4n = -q2 * v1 / sc
        return (s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
                n + h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n))

    def bisect_step(f, h_hi: float) -> float:
        """Smallest h' in (0, h_hi] with f(h') = 0, f(0) < 0 <= f(h_hi)."""
        lo, hi = 0.0, h_hi
        while hi - lo > EVENT_TIME_TOL:
            mid = 0.5 * (lo + hi)
            if f(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
        return hi

    t = 0.0
    s = scenario.initial.s
    n = scenario.initial.n
    exhausted = n <= n_min * (1.0 + 1e-12)
    on_arc = False

    rec = _Recorder()
    rec.breaks.add(0.0)

    spans: list[tuple[float, float, object]] = []
    bounds = [0.0] + [b for b in policy.breakpoints if b < horizon] + [horizon]
    for i in range(len(bounds) - 1):
        spans.append((bounds[i], bounds[i + 1], policy.levels[policy.segment_index(bounds[i])]))

    def finish(end_time: float, terminal_kind: str, exited: bool) -> Trajectory:
        rec.events.append(TrajectoryEvent(end_time, terminal_kind, True))
        rec.breaks.add(end_time)
        ts = np.asarray(rec.t)
        ss = np.asarray(rec.s)
        ns = np.asarray(rec.n)
        es = np.asarray(rec.e)
        arcs = np.asarray(rec.arc, dtype=bool)
        rs = A * ns * ss ** q2
        dr = _drdt_values(scenario, ts, ss, ns, es)
        brks = tuple(sorted(b for b in rec.breaks if b <= end_time + 1e-12))
        return Trajectory(t=ts, s=ss, n=ns, e=es, r=rs, drdt=dr, on_arc=arcs,
                          events=tuple(rec.events), validity_end=end_time,
                          exited=exited, breaks=brks)

    def near_corner(nv: float) -> bool:
        return nv <= n_min * (1.0 + EXIT_REL_TOL)

    r = A * n * s ** q2
    rec.add(0.0, s, n, 0.0, False)  # e backfilled below once the first span is known

    for ta, tb, level in spans:
        hold = level is HOLD
        rate = 0.0 if hold else float(level)
        rec.breaks.add(ta)
        if not hold:
            on_arc = False
        elif r >= 1.0 - 1e-9:
            # Entering a hold span already at the ceiling.
            if near_corner(n):
                s = (A * n_min) ** arc_exp
                n = n_min
                rec.add(t, s, n, q2 * env_v(t) / s, True)
                return finish(t, "ExitPoint", True)
            on_arc = True
            s = (A * n) ** arc_exp
        if rec.t and abs(rec.t[-1] - ta) < 1e-13:
            # Backfill the control column of the span-opening sample.
            rec.e[-1] = q2 * env_v(t) / s if on_arc else (0.0 if exhausted else rate)
            rec.arc[-1] = on_arc
        n_steps = max(1, round((tb - ta) / step))
        h_nom = (tb - ta) / n_steps
        while t < tb - 1e-13 * max(1.0, tb):
            h = min(h_nom, tb - t)
            # The closing step of a span snaps to the boundary so breakpoint
            # sample times are exact and the control backfill can match them.
            t_after_full = tb if tb - t <= h * (1.0 + 1e-9) else t + h
            if on_arc:
                e_req = q2 * env_v(t) / s
                if e_req > e_max * (1.0 + 1e-9):
                    raise InfeasibleBoundary(
                        f"ceiling-holding rate {e_req:.6g} exceeds e_max={e_max} at t={t:.6g}")
                s1, n1 = rk4_arc(t, s, n, h)
                if n1 < n_min:
                    h_cross = bisect_step(lambda hh: n_min - rk4_arc(t, s, n, hh)[1], h)
                    t = t + h_cross
                    s = (A * n_min) ** arc_exp
                    n = n_min
                    rec.add(t, s, n, q2 * env_v(t) / s, True)
                    return finish(t, "ExitPoint", True)
                t = t_after_full
                n = n1
                s = (A * n) ** arc_exp   # projection back onto r = 1
                if fault_s_drift:
                    s *= 1.0 + fault_s_drift
                rec.add(t, s, n, q2 * env_v(t) / s, True)
            else:
                e = 0.0 if exhausted else rate
                hit_n_min = False
                if e > 0.0 and n - e * h < n_min:
                    if on_n_min == "error":
                        raise NonViable(
                            f"policy would cut below n_min={n_min} near t={t:.6g}")
                    h = bisect_step(lambda hh: n_min - (n - e * hh), h)
                    t_after_full = t + h
                    hit_n_min = True
                s1, n1 = rk4_free(t, s, n, h, e)
                r1 = A * n1 * s1 ** q2
                if r1 > 1.0:
                    def r_excess(hh: float) -> float:
                        s2, n2 = rk4_free(t, s, n, hh, e)
                        return A * n2 * s2 ** q2 - 1.0
                    h_cross = bisect_step(r_excess, h) if r < 1.0 - 1e-12 else 0.0
                    if h_cross > 0.0:
                        s1, n1 = rk4_free(t, s, n, h_cross, e)
                    else:
                        s1, n1 = s, n
                    t = t + h_cross
                    if near_corner(n1):
                        s = (A * n_min) ** arc_exp
                        n = n_min
                        rec.add(t, s, n, 0.0, False)
                        return finish(t, "ExitPoint", True)
                    if hold:
                        n = n1
                        s = (A * n) ** arc_exp
                        on_arc = True
                        rec.events.append(TrajectoryEvent(t, "RdiHitOne", False))
                        rec.breaks.add(t)
                        rec.add(t, s, n, q2 * env_v(t) / s, True)
                        r = 1.0
                        continue
                    s, n = s1, n1
                    rec.add(t, s, n, e, False)
                    return finish(t, "RdiHitOne", False)
                t = t_after_full
                s, n = s1, n1
                if fault_s_drift:
                    s *= 1.0 + fault_s_drift
                if hit_n_min:
                    n = n_min
                    exhausted = True
                    e = 0.0
                    rec.events.append(TrajectoryEvent(t, "NMinHit", False))
                    rec.breaks.add(t)
                rec.add(t, s, n, e, False)
            r = A * n * s ** q2

    return finish(horizon, "HorizonEnd", False)


def sample_policies(scenario: Scenario, count: int, rng: np.random.Generator,
                    horizon: float, *, terminal: bool = False,
                    allow_hold: bool = True, max_segments: int = 6) -> list[Policy]:
    """Random piecewise policies for sweeps and stress tests.

    Levels are drawn from {0, HOLD, uniform rate}; with ``terminal=True`` the
    final segment cuts at e_max for long enough that the stand reaches n_min
    before the horizon (the integrator's clamp then pins n(T) = n_min).
    """
    p = scenario.params
    policies = []
    for _ in range(count):
        k = int(rng.integers(1, max_segments + 1))
        bps = np.sort(rng.uniform(0.0, horizon, size=k - 1))
        bps = [float(b) for b in bps if 1e-6 < b < horizon - 1e-6]
        levels = []
        for _ in range(len(bps) + 1):
            u = rng.uniform()
            if u < 0.30:
                levels.append(0.0)
            elif u < 0.55 and allow_hold:
                levels.append(HOLD)
            else:
                levels.append(float(rng.uniform(0.0, p.e_max)))
        if terminal:
            need = (scenario.initial.n - p.n_min) / p.e_max
            t_cut = horizon - need * float(rng.uniform(1.05, 1.6))
            t_cut = max(t_cut, horizon * 0.05)
            bps = [b for b in bps if b < t_cut - 1e-6] + [t_cut]
            levels = levels[:len(bps)] + [p.e_max]
        policies.append(Policy.piecewise(bps, levels))
    return policies


def write_trajectory_csv(trajectory: Trajectory, env: Environment, path) -> None:
    """Write samples as CSV with the fixed header t,s,n,r,e,h."""
    h_vals = env.h0(trajectory.t)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "s", "n", "r", "e", "h"])
        for i in range(len(trajectory.t)):
            writer.writerow([f"{trajectory.t[i]:.12g}", f"{trajectory.s[i]:.12g}",
                             f"{trajectory.n[i]:.12g}", f"{trajectory.r[i]:.12g}",
                             f"{trajectory.e[i]:.12g}", f"{h_vals[i]:.12g}"])


def write_events_json(trajectory: Trajectory, path) -> None:
    """Write the events sidecar (times, kinds, validity end, exit flag)."""
    payload = {
        "events": [{"time": ev.time, "kind": ev.kind, "terminal": ev.terminal}
                   for ev in trajectory.events],
        "validity_end": trajectory.validity_end,
        "exited": trajectory.exited,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
