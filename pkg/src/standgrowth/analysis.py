"""Inequality audits: hypothesis checks, envelope bounds, and thresholds.

The analytical results about the dynamics take the form of sampled
inequalities along trajectories, all anchored to the two reference policies:
the fast, cut-first trajectory (subscript "lo" here) and the slow,
ceiling-riding trajectory (subscript "hi").  For any admissible policy

* counts are sandwiched: n_lo(t) <= n(t) <= n_hi(t);
* basal area dominates the slow reference: s(t) >= s_hi(t), and for power
  growth is itself dominated by the fast reference: s(t) <= s_lo(t);
* per-tree growth g(r)/n is sandwiched between its values on the two
  references and is nondecreasing in time;
* the relative basal-area increase s'/s is bounded below by xi_m computed
  from the slow reference.

The weighted-product comparisons (n s**b against the references, for small b
below the direct-ordering window, for the density index b = q/2, and for b
above the reversal threshold b_star) are evaluated but not asserted.  Their
textbook derivation compares the flows of (n s**b)**a along different
trajectories as if they shared one control, and counterexamples exist for
every one of the four orderings among admissible policies: a policy whose
cutting trails the fast reference undercuts the fast reference's product; a
mid-horizon cutter overtakes the ceiling-riding reference's product once the
reference is thinning on the ceiling; and the reversed ordering fails for
every early-cutting policy in an initial layer where the shared starting
state makes the count factor dominate.  All product comparisons are
therefore recorded in ``BoundReport.product_diagnostics`` (in log space so
extreme exponents stay finite) instead of the violation list.

The b-interval endpoints and the a-parametrized auxiliary bounds b1, b2 with
their crossing a_star feed the optimizer's sufficient conditions.  Audits
respect the side conditions: inequalities proved only for the power family
are skipped for other growth functions, and inadmissible b values are never
evaluated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, integrate
from .model import Scenario, rdi
from .trajectories import build_policy

__all__ = [
    "HypothesisReport",
    "ThresholdSet",
    "XiLowerBound",
    "EnvelopeRefs",
    "Violation",
    "BoundReport",
    "check_h3",
    "check_hypotheses",
    "b_star",
    "xi_lower_bound",
    "audit_trajectory",
]

AUDIT_TOL = 1e-6        # relative tolerance of the sampled inequality checks
GAMMA_UPPER_CAP = 1.0 - 1e-9   # above this the b_star threshold is treated as infinite


@dataclass(frozen=True)
class HypothesisReport:
    """Pass/fail record per model hypothesis, with a witness where failed."""

    h1_energy: bool
    h2_competition: bool
    h3_ceiling_rate: bool
    h4_elasticity: bool
    h3_margin: float
    witnesses: tuple = ()

    @property
    def all_pass(self) -> bool:
        return (self.h1_energy and self.h2_competition
                and self.h3_ceiling_rate and self.h4_elasticity)

    def to_json_dict(self) -> dict:
        return {
            "H1_energy_decreasing_convex": self.h1_energy,
            "H2_competition_shape": self.h2_competition,
            "H3_ceiling_rate_below_e_max": self.h3_ceiling_rate,
            "H4_elasticity_bounded_below": self.h4_elasticity,
            "H3_margin": float(self.h3_margin),
            "witnesses": [list(w) for w in self.witnesses],
        }


def check_h3(scenario: Scenario, s_m=None, grid: int = 1024) -> tuple[bool, float]:
    """Ceiling-rate feasibility: (q/2) V(t) / s_m(t) < e_max on a time grid.

    ``s_m`` is a lower bound for the basal area at each time; the default is
    the constant s(0), which is conservative because s never decreases.
    Returns (pass, worst margin); the margin is e_max minus the largest rate.
    """
    p = scenario.params
    if s_m is None:
        s0 = scenario.initial.s
        s_m = lambda t: np.full_like(np.asarray(t, dtype=float), s0)
    ts = np.linspace(0.0, p.t_star, grid)
    rates = p.q / 2.0 * scenario.env.v(ts) / s_m(ts)
    margin = float(p.e_max - np.max(rates))
    return margin > 0.0, margin


def check_hypotheses(scenario: Scenario, samples: int = 512,
                     rng: np.random.Generator | None = None) -> HypothesisReport:
    """Sampled verification of the four standing model hypotheses."""
    rng = rng or np.random.default_rng(0)
    growth = scenario.growth
    env = scenario.env
    witnesses = []

    # H1: V positive, non-increasing, midpoint-convex.
    ts = np.sort(rng.uniform(0.0, scenario.params.t_star, samples))
    v = env.v(ts)
    h1 = bool(np.all(v > 0.0) and np.all(np.diff(v) <= 1e-12 * v[0]))
    a = rng.uniform(0.0, scenario.params.t_star, samples)
    b = rng.uniform(0.0, scenario.params.t_star, samples)
    mid = env.v((a + b) / 2.0)
    h1 = h1 and bool(np.all(mid <= (env.v(a) + env.v(b)) / 2.0 + 1e-12 * env.v(0.0)))
    if not h1:
        witnesses.append(("H1", float(ts[0])))

    # H2: g increasing, concave, above the identity on (0, 1), endpoints fixed.
    rs = np.sort(rng.uniform(1e-4, 1.0 - 1e-4, samples))
    g = growth.g(rs)
    dg = growth.g_prime(rs)
    eps = 1e-5
    concave = growth.g(rs + eps) + growth.g(rs - eps) - 2.0 * g
    h2 = bool(np.all(dg > 0.0) and np.all(concave <= 1e-9)
              and abs(growth.g(1.0) - 1.0) < 1e-12 and abs(growth.g(0.0)) < 1e-12)
    if growth.amplifies:
        h2 = h2 and bool(np.all(g > rs))
    if not h2:
        witnesses.append(("H2", float(rs[0])))

    h3, margin = check_h3(scenario)
    if not h3:
        witnesses.append(("H3", margin))

    gam = growth.gamma(rs)
    h4 = bool(growth.gamma_lower > 0.0
              and np.all(gam >= growth.gamma_lower - 1e-12)
              and np.all(gam <= growth.gamma_upper + 1e-12)
              and np.all(gam <= 1.0 + 1e-12))
    if not h4:
        witnesses.append(("H4", float(gam.min())))

    return HypothesisReport(h1_energy=h1, h2_competition=h2, h3_ceiling_rate=h3,
                            h4_elasticity=h4, h3_margin=margin,
                            witnesses=tuple(witnesses))


@dataclass(frozen=True)
class ThresholdSet:
    """The reversed-sandwich threshold b_star with its auxiliary quantities.

    b1(a) and b2(a) are the two sufficient bounds parametrized by the
    auxiliary exponent a in (0, 1 - gamma_upper); b1 increases, b2 decreases,
    and they cross at a_star where both equal b_star.  Also carries the upper
    endpoint of the small-b (direct sandwich) interval.
    """

    b_star: float
    a_star: float
    g_floor: float            # g evaluated at the density r(n_min, s(0))
    gamma_lower: float
    gamma_upper: float
    q: float
    small_b_limit: float      # sup of admissible b for the direct sandwich

    def b1(self, a):
        return (self.q / 2.0) * (1.0 - a) / (1.0 - a - self.gamma_upper) / self.g_floor

    def b2(self, a):
        return (self.q / 2.0) / self.g_floor + (1.0 - self.q / 2.0 * self.gamma_lower) / a


def b_star(scenario: Scenario) -> ThresholdSet:
    """Threshold above which the n s**b sandwich reverses.

    Undefined (raises ValueError) when the elasticity upper bound reaches 1,
    which makes the threshold infinite.
    """
    p = scenario.params
    growth = scenario.growth
    gl, gu = growth.gamma_lower, growth.gamma_upper
    if gu >= GAMMA_UPPER_CAP:
        raise ValueError("b_star is undefined: elasticity upper bound reaches 1")
    r_floor = rdi(p, p.n_min, scenario.initial.s)
    g_floor = float(growth.g(r_floor))
    q2 = p.q / 2.0
    bs = (1.0 + q2 * (1.0 / g_floor - gl)) / (1.0 - gu)
    a_star = (1.0 - gu) * (1.0 - q2 * gl) / (1.0 + q2 * (gu / g_floor - gl))
    small_b = (1.0 - q2 * gu) / (1.0 - gl) if gl < 1.0 else np.inf
    return ThresholdSet(b_star=float(bs), a_star=float(a_star), g_floor=g_floor,
                        gamma_lower=gl, gamma_upper=gu, q=p.q,
                        small_b_limit=float(small_b))


@dataclass(frozen=True)
class XiLowerBound:
    """Lower bound xi_m(t) for the relative basal-area increase s'(t)/s(t).

    Built from the slow (ceiling-riding) reference trajectory: xi_m =
    s_hi' / (s_hi**(q/2) * s_cap**(1-q/2)) where s_cap is the maximal basal
    area, replaced by the fast reference s_lo(t) for power growth (a sharper
    bound because s never exceeds s_lo there).
    """

    t: np.ndarray
    values: np.ndarray
    form: str                 # "power" | "general"

    def __call__(self, times):
        return np.interp(times, self.t, self.values)


def _sdot(scenario: Scenario, traj: Trajectory) -> np.ndarray:
    p = scenario.params
    r = p.A * traj.n * traj.s ** (p.q / 2.0)
    return scenario.growth.g(r) / traj.n * scenario.env.v(traj.t)


def xi_lower_bound(scenario: Scenario, horizon: float,
                   step: float | None = None, *, form: str | None = None) -> XiLowerBound:
    p = scenario.params
    hi = integrate(scenario, build_policy(scenario, "esup"), horizon, step=step)
    sdot_hi = _sdot(scenario, hi)
    if form is None:
        form = "power" if scenario.growth.kind in ("power", "linear") else "general"
    if form == "power":
        lo = integrate(scenario, build_policy(scenario, "e0"), horizon, step=step)
        s_cap = np.interp(hi.t, lo.t, lo.s)
        if lo.validity_end < horizon:
            s_cap[hi.t > lo.validity_end] = p.s_bar   # frozen past the exit corner
    else:
        s_cap = np.full_like(hi.t, p.s_bar)
    vals = sdot_hi / (hi.s ** (p.q / 2.0) * s_cap ** (1.0 - p.q / 2.0))
    return XiLowerBound(t=hi.t, values=vals, form=form)


@dataclass(frozen=True)
class EnvelopeRefs:
    """Reference trajectories the envelope inequalities compare against.

    The fast reference is frozen at the exit corner (s_cap, n_min) past its
    own exit, which keeps its envelopes valid for later times; the slow
    reference never exits before any admissible horizon.  ``terminal`` holds
    the exact-target policy trajectory used for end-constrained audits.
    """

    scenario: Scenario
    fast: Trajectory
    slow: Trajectory
    terminal: Trajectory | None = None

    @classmethod
    def build(cls, scenario: Scenario, horizon: float, step: float | None = None,
              with_terminal: bool = False) -> "EnvelopeRefs":
        fast = integrate(scenario, build_policy(scenario, "e0"), horizon, step=step)
        slow = integrate(scenario, build_policy(scenario, "esup"), horizon, step=step)
        term = None
        if with_terminal:
            term = integrate(scenario, build_policy(scenario, "et", T=horizon),
                             horizon, step=step)
        return cls(scenario=scenario, fast=fast, slow=slow, terminal=term)

    def fast_sn(self, times) -> tuple[np.ndarray, np.ndarray]:
        p = self.scenario.params
        s = np.interp(times, self.fast.t, self.fast.s)
        n = np.interp(times, self.fast.t, self.fast.n)
        if self.fast.exited:
            past = np.asarray(times) > self.fast.validity_end
            s = np.where(past, p.s_bar, s)
            n = np.where(past, p.n_min, n)
        return s, n

    def slow_sn(self, times) -> tuple[np.ndarray, np.ndarray]:
        s = np.interp(times, self.slow.t, self.slow.s)
        n = np.interp(times, self.slow.t, self.slow.n)
        return s, n

    def terminal_sn(self, times) -> tuple[np.ndarray, np.ndarray]:
        if self.terminal is None:
            raise ValueError("terminal reference was not built")
        s = np.interp(times, self.terminal.t, self.terminal.s)
        n = np.interp(times, self.terminal.t, self.terminal.n)
        return s, n


@dataclass(frozen=True)
class Violation:
    time: float
    quantity: str
    lhs: float
    rhs: float

    def to_json_dict(self) -> dict:
        return {"time": self.time, "quantity": self.quantity,
                "lhs": self.lhs, "rhs": self.rhs}


@dataclass(frozen=True)
class BoundReport:
    """Outcome of auditing one trajectory against the analytical bounds.

    ``violations`` holds failures of the asserted envelopes;
    ``product_diagnostics`` records where the non-asserted fast-reference
    product orderings do not hold and does not affect ``clean``.
    """

    hypotheses: HypothesisReport
    b_star: float | None
    a_star: float | None
    xi_m: XiLowerBound | None
    violations: tuple[Violation, ...] = ()
    product_diagnostics: tuple[Violation, ...] = ()
    checks_run: tuple[str, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "hypotheses": self.hypotheses.to_json_dict(),
            "b_star": self.b_star,
            "a_star": self.a_star,
            "xi_m_form": None if self.xi_m is None else self.xi_m.form,
            "checks_run": list(self.checks_run),
            "violations": [v.to_json_dict() for v in self.violations],
            "product_diagnostics": [v.to_json_dict()
                                    for v in self.product_diagnostics],
            "clean": self.clean,
        }


def _collect(violations: list, mask: np.ndarray, times: np.ndarray, name: str,
             lhs: np.ndarray, rhs: np.ndarray, cap: int = 16) -> None:
    bad = np.flatnonzero(mask)
    for i in bad[:cap]:
        violations.append(Violation(time=float(times[i]), quantity=name,
                                    lhs=float(lhs[i]), rhs=float(rhs[i])))


def audit_trajectory(scenario: Scenario, traj: Trajectory, refs: EnvelopeRefs,
                     *, b_values=None, terminal: bool = False,
                     xi_m: XiLowerBound | None = None,
                     tol: float = AUDIT_TOL) -> BoundReport:
    """Check the envelope and monotonicity bounds at every trajectory sample.

    ``b_values`` overrides the evaluated exponents for the weighted-product
    comparisons; by default one admissible small b (plus q/2 when admissible)
    and one b above b_star are used.  All product comparisons are recorded as
    diagnostics, never asserted (see the module docstring).
    ``terminal=True`` additionally audits the end-constrained envelopes
    (requires refs.terminal and only makes sense for trajectories ending at
    n_min).
    """
    p = scenario.params
    growth = scenario.growth
    power = growth.kind in ("power", "linear")
    ts = traj.t
    s, n = traj.s, traj.n
    s_lo, n_lo = refs.fast_sn(ts)
    s_hi, n_hi = refs.slow_sn(ts)
    violations: list[Violation] = []
    checks: list[str] = []

    def rel_le(name: str, lhs, rhs, scale=None) -> None:
        checks.append(name)
        sc = np.abs(rhs) if scale is None else scale
        _collect(violations, lhs > rhs + tol * np.maximum(sc, 1e-300), ts, name, lhs, rhs)

    # Count sandwich and basal-area envelopes.
    rel_le("n_ge_fast", n_lo, n)
    rel_le("n_le_slow", n, n_hi)
    rel_le("s_ge_slow", s_hi, s)
    if power:
        rel_le("s_le_fast", s, s_lo)
    if terminal:
        s_T, n_T = refs.terminal_sn(ts)
        rel_le("n_le_terminal", n, n_T)
        if power:
            # The latest-cutting terminal policy has the slowest growth, so
            # it bounds the basal area from below on the terminal class.
            rel_le("s_ge_terminal", s_T, s)

    # Per-tree growth sandwich and its monotonicity in time.
    gpt = growth.g(p.A * n * s ** (p.q / 2.0)) / n
    gpt_hi = growth.g(p.A * n_hi * s_hi ** (p.q / 2.0)) / n_hi
    rel_le("growth_per_tree_ge_slow", gpt_hi, gpt)
    if power:
        gpt_lo = growth.g(p.A * n_lo * s_lo ** (p.q / 2.0)) / n_lo
        rel_le("growth_per_tree_le_fast", gpt, gpt_lo)
    checks.append("growth_per_tree_nondecreasing")
    diffs = np.diff(gpt)
    _collect(violations, diffs < -tol * np.abs(gpt[:-1]), ts[1:],
             "growth_per_tree_nondecreasing", -diffs, np.zeros_like(diffs))

    # Weighted-product sandwiches, in log space.
    thresholds = None
    try:
        thresholds = b_star(scenario)
    except ValueError:
        pass
    if b_values is None:
        b_values = []
        if thresholds is not None and np.isfinite(thresholds.small_b_limit):
            small_limit = thresholds.small_b_limit
            if small_limit > 0.0:
                b_values.append(("small", 0.5 * small_limit))
                # The density-index sandwich (b = q/2) is audited only with a
                # real margin below the admissibility threshold.
                if p.q / 2.0 < 0.95 * small_limit:
                    b_values.append(("small", p.q / 2.0))
            b_values.append(("large", 1.05 * thresholds.b_star))
        elif thresholds is None and growth.gamma_lower >= GAMMA_UPPER_CAP:
            # Linear growth: every positive b admits the direct sandwich.
            b_values.append(("small", p.q / 2.0))
    ln_s, ln_n = np.log(s), np.log(n)
    ln_slo, ln_nlo = np.log(s_lo), np.log(n_lo)
    ln_shi, ln_nhi = np.log(s_hi), np.log(n_hi)
    diagnostics: list[Violation] = []

    def log_le(name: str, lhs, rhs, sink=None) -> None:
        checks.append(name)
        _collect(violations if sink is None else sink,
                 lhs > rhs + tol, ts, name, lhs, rhs)

    for regime, b in b_values:
        w = ln_n + b * ln_s
        w_lo = ln_nlo + b * ln_slo
        w_hi = ln_nhi + b * ln_shi
        if regime == "small":
            log_le(f"diag_ns^b_le_slow[b={b:.4g}]", w, w_hi, sink=diagnostics)
            if power:
                log_le(f"diag_ns^b_ge_fast[b={b:.4g}]", w_lo, w, sink=diagnostics)
        else:
            # The reversed ordering cannot hold in the initial layer where
            # the shared start makes the count factor dominate.
            log_le(f"diag_reversed_ge_slow[b={b:.4g}]", w_hi, w, sink=diagnostics)
            if power:
                log_le(f"diag_reversed_le_fast[b={b:.4g}]", w, w_lo, sink=diagnostics)

    # Relative-increase floor.
    if xi_m is not None:
        checks.append("xi_ge_xi_m")
        xi = _sdot(scenario, traj) / s
        bound = xi_m(ts)
        _collect(violations, xi < bound - tol * np.maximum(np.abs(bound), 1e-300),
                 ts, "xi_ge_xi_m", bound, xi)

    hyp = check_hypotheses(scenario)
    return BoundReport(
        hypotheses=hyp,
        b_star=None if thresholds is None else thresholds.b_star,
        a_star=None if thresholds is None else thresholds.a_star,
        xi_m=xi_m,
        violations=tuple(violations),
        product_diagnostics=tuple(diagnostics),
        checks_run=tuple(checks),
    )


def report_to_json(report: BoundReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
