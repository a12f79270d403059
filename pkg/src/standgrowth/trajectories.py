"""Canonical thinning policies and their characteristic times.

Three named policies organize the reachable set of the dynamics:

* ``e0``   cut at e_max until the count reaches n_min, then stop;
* ``esup`` grow freely until the density ceiling, then ride it down to n_min;
* ``et``   the intermediate family indexed by a target horizon T at which the
           count reaches n_min exactly.

Their switch times have closed defining equations in terms of the cumulative
energy.  With zero cutting the count is constant and separating variables in
the density equation gives the ceiling-hit time t_up as the root of

    (q/2) n0**(2/q-1) A**(2/q) * Energy(0, t_up) = Int_{r0}^{1} u**(2/q-1)/g(u) du.

On the ceiling itself (r = 1) the count obeys a separable equation whose
integral form is

    n(T)**(1-2/q) = n(t_up)**(1-2/q) + A**(2/q) (1-q/2) * Energy(t_up, T),

which yields the ceiling-exhaustion time T_exit (count n_min reached on the
arc) and, equivalently, the maximal exit time.  All roots are found by
bracketed bisection; unreachable values are reported with the explicit
:data:`UNREACHABLE` marker rather than sentinel numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ._rootfind import bisect, solve_increasing
from .dynamics import HOLD, Policy, integrate
from .model import Scenario, StandParams, energy

__all__ = [
    "UNREACHABLE",
    "Unreachable",
    "is_unreachable",
    "CharacteristicTimes",
    "ExtremalTimes",
    "ValidityDiagnostics",
    "time_to_count",
    "t_sup0",
    "t_cap0",
    "arc_count",
    "build_policy",
    "extremal_times",
    "characteristic_times",
    "validity_diagnostics",
]


class Unreachable:
    """Marker for a characteristic time that does not exist within t_star."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unreachable"


UNREACHABLE = Unreachable()


def is_unreachable(value) -> bool:
    return value is UNREACHABLE


def time_to_count(params: StandParams, n0: float, n: float) -> float:
    """Time to thin from n0 down to n at the maximal rate: (n0 - n) / e_max."""
    if n > n0:
        raise ValueError(f"target count {n} exceeds start count {n0}")
    return (n0 - n) / params.e_max


def _density_integral(scenario: Scenario, r_lo: float, r_hi: float = 1.0) -> float:
    """Integral of u**(2/q-1)/g(u) over [r_lo, r_hi] (adaptive quadrature)."""
    q = scenario.params.q
    g = scenario.growth.g
    expo = 2.0 / q - 1.0

    def integrand(u: float) -> float:
        return u ** expo / g(u)

    val, _ = quad(integrand, r_lo, r_hi, epsrel=1e-10, limit=200)
    return float(val)


def t_sup0(scenario: Scenario):
    """First time the density reaches the ceiling under zero cutting.

    Solves the separated density equation by bisection on the cumulative
    energy; returns :data:`UNREACHABLE` when the energy over [0, t_star] is
    insufficient.
    """
    p = scenario.params
    r0 = scenario.rdi0
    target = _density_integral(scenario, r0)
    coeff = p.q / 2.0 * scenario.initial.n ** (2.0 / p.q - 1.0) * p.A ** (2.0 / p.q)

    root = solve_increasing(lambda T: coeff * energy(scenario.env, 0.0, T) - target,
                            limit=p.t_star)
    if root is None:
        return UNREACHABLE
    return root


def arc_count(scenario: Scenario, n_start: float, t_start: float, t) -> np.ndarray:
    """Tree count along the density ceiling starting from (t_start, n_start)."""
    p = scenario.params
    expo = 1.0 - 2.0 / p.q          # negative for 1 < q < 2
    coef = p.A ** (2.0 / p.q) * (1.0 - p.q / 2.0)
    ts = np.asarray(t, dtype=float)
    vals = np.array([energy(scenario.env, t_start, float(u)) for u in np.atleast_1d(ts)])
    counts = (n_start ** expo + coef * vals) ** (1.0 / expo)
    return counts if ts.ndim else float(counts[0])


def t_cap0(scenario: Scenario):
    """Time at which the ceiling arc started at t_sup0 exhausts the stand.

    Solves the constant-density count relation for the time where the count
    reaches n_min; :data:`UNREACHABLE` when t_sup0 is unreachable or the
    remaining energy is insufficient.
    """
    p = scenario.params
    t_up = t_sup0(scenario)
    if is_unreachable(t_up):
        return UNREACHABLE
    expo = 1.0 - 2.0 / p.q
    target = (p.n_min ** expo - scenario.initial.n ** expo) \
        / (p.A ** (2.0 / p.q) * (1.0 - p.q / 2.0))
    if target <= 0.0:
        return t_up
    root = solve_increasing(
        lambda T: energy(scenario.env, t_up, max(T, t_up)) - target,
        limit=p.t_star)
    if root is None or root < t_up:
        return UNREACHABLE
    return root


def build_policy(scenario: Scenario, kind: str, T: float | None = None) -> Policy:
    """Construct a canonical policy: ``"e0"``, ``"esup"``, or ``"et"`` (needs T).

    Degenerate identifications: ``et`` with T at or below the pure-cutting
    time returns the ``e0`` policy, and T at the ceiling-exhaustion time
    returns ``esup``.  T beyond that window is a domain error.
    """
    p = scenario.params
    n0 = scenario.initial.n
    t0n = time_to_count(p, n0, p.n_min)

    if kind == "e0":
        if t0n == 0.0:
            return Policy((), (0.0,), kind="e0", meta=(("t_cut_end", 0.0),))
        return Policy((t0n,), (p.e_max, 0.0), kind="e0", meta=(("t_cut_end", t0n),))

    if kind == "esup":
        t_up = t_sup0(scenario)
        t_exhaust = t_cap0(scenario)
        meta = (("t_rdi_one", None if is_unreachable(t_up) else t_up),
                ("t_exhaust", None if is_unreachable(t_exhaust) else t_exhaust))
        return Policy((), (HOLD,), kind="esup", meta=meta)

    if kind != "et":
        raise ValueError(f"unknown canonical policy kind {kind!r}")
    if T is None:
        raise ValueError("the et policy needs a target horizon T")
    if T <= 0.0:
        raise ValueError(f"target horizon must be positive (got {T})")
    if T <= t0n * (1.0 + 1e-12):
        return build_policy(scenario, "e0")

    t_up = t_sup0(scenario)
    t_exhaust = t_cap0(scenario)
    if is_unreachable(t_up) or T <= t0n + t_up:
        # Short horizon: grow freely, then one maximal-rate burst ending at T.
        t_switch = T - t0n
        return Policy((t_switch,), (0.0, p.e_max), kind="et",
                      meta=(("T", T), ("t_switch", t_switch)))
    if is_unreachable(t_exhaust) or T < t_exhaust * (1.0 - 1e-12):
        # Long horizon: free growth, ceiling arc, then a maximal-rate burst.
        # The arc-leaving time solves (T - t) e_max = n_arc(t) - n_min, which
        # is strictly decreasing in t because the arc rate stays below e_max.
        def excess(t: float) -> float:
            return (arc_count(scenario, n0, t_up, t) - p.n_min) - (T - t) * p.e_max

        t_switch = bisect(excess, t_up, T)
        return Policy((t_switch,), (HOLD, p.e_max), kind="et",
                      meta=(("T", T), ("t_switch", t_switch), ("t_rdi_one", t_up)))
    if T <= t_exhaust * (1.0 + 1e-9):
        return build_policy(scenario, "esup")
    raise ValueError(f"target horizon T={T} exceeds the ceiling-exhaustion time "
                     f"{t_exhaust}; no policy reaches n_min exactly at T")


@dataclass(frozen=True)
class ExtremalTimes:
    """Minimal/maximal time to reach the exit corner (r, n) = (1, n_min).

    ``t_lower`` comes from integrating the cut-first policy; its minimality is
    established only for the power growth family, so other growth functions
    carry ``t_lower_heuristic=True``.  ``t_upper`` is the root of the ceiling
    count relation (the slow, ceiling-riding policy attains it).
    """

    t_lower: object
    t_upper: object
    t_lower_heuristic: bool


def extremal_times(scenario: Scenario, step: float | None = None) -> ExtremalTimes:
    p = scenario.params
    t_upper = t_cap0(scenario)
    policy = build_policy(scenario, "e0")
    traj = integrate(scenario, policy, p.t_star, step=step or p.t_star / 8192)
    t_lower = traj.validity_end if traj.exited else UNREACHABLE
    heuristic = scenario.growth.kind not in ("power", "linear")
    return ExtremalTimes(t_lower=t_lower, t_upper=t_upper, t_lower_heuristic=heuristic)


@dataclass(frozen=True)
class CharacteristicTimes:
    """Bundle of the named times of a scenario (JSON-exportable)."""

    t0_n: float                   # time to thin from n(0) to n_min at e_max
    t_sup0: object                # first ceiling hit under zero cutting
    t_cap0: object                # ceiling-arc exhaustion time
    t_lower: object               # minimal exit time
    t_upper: object               # maximal exit time
    t_lower_heuristic: bool
    t_star_switch: float | None = None   # arc-leaving time of et(T), if requested

    def to_json_dict(self) -> dict:
        def enc(v):
            if v is None or is_unreachable(v):
                return None
            return float(v)

        return {
            "t0_n_min": float(self.t0_n),
            "t_sup0": enc(self.t_sup0),
            "t_cap0": enc(self.t_cap0),
            "t_lower": enc(self.t_lower),
            "t_upper": enc(self.t_upper),
            "t_lower_heuristic": bool(self.t_lower_heuristic),
            "t_star_switch": enc(self.t_star_switch),
        }


def characteristic_times(scenario: Scenario, T: float | None = None) -> CharacteristicTimes:
    p = scenario.params
    ext = extremal_times(scenario)
    t_switch = None
    if T is not None:
        try:
            policy = build_policy(scenario, "et", T=T)
        except ValueError:
            policy = None   # target beyond the exhaustion time: no switch
        if policy is not None and policy.kind == "et" and policy.breakpoints:
            md = policy.meta_dict()
            t_switch = md.get("t_switch")
    return CharacteristicTimes(
        t0_n=time_to_count(p, scenario.initial.n, p.n_min),
        t_sup0=t_sup0(scenario),
        t_cap0=t_cap0(scenario),
        t_lower=ext.t_lower,
        t_upper=ext.t_upper,
        t_lower_heuristic=ext.t_lower_heuristic,
        t_star_switch=t_switch,
    )


@dataclass(frozen=True)
class ValidityDiagnostics:
    """Sufficient-condition check for reachability of the exit corner.

    ``exit_reachable`` uses the growth lower bound ds/dt >= A s**(q/2) V: when
    even that slow path overshoots the maximal basal area by t_star, every
    admissible trajectory must leave the validity domain earlier.
    ``exit_unreachable`` uses ds/dt <= V/n_min: when even the fastest path
    cannot lift s to the ceiling-corner value, no trajectory exits.  Both are
    sufficient conditions only; neither holding is reported as indeterminate.
    """

    exit_reachable: bool
    exit_unreachable: bool
    reachable_margin: float      # s-power units; positive when reachable holds
    unreachable_margin: float    # m² slack; positive when unreachable holds

    @property
    def classification(self) -> str:
        if self.exit_reachable:
            return "reachable"
        if self.exit_unreachable:
            return "unreachable"
        return "indeterminate"

    def to_json_dict(self) -> dict:
        return {
            "exit_reachable": self.exit_reachable,
            "exit_unreachable": self.exit_unreachable,
            "reachable_margin": float(self.reachable_margin),
            "unreachable_margin": float(self.unreachable_margin),
            "classification": self.classification,
        }


def validity_diagnostics(scenario: Scenario) -> ValidityDiagnostics:
    p = scenario.params
    s0 = scenario.initial.s
    total = energy(scenario.env, 0.0, p.t_star)
    expo = 1.0 - p.q / 2.0
    reach_lhs = s0 ** expo + p.A * expo * total
    reach_margin = reach_lhs - p.s_bar ** expo
    unreach_margin = p.s_bar - (s0 + total / p.n_min)
    return ValidityDiagnostics(
        exit_reachable=reach_margin >= 0.0,
        exit_unreachable=unreach_margin > 0.0,
        reachable_margin=reach_margin,
        unreachable_margin=unreach_margin,
    )
