"""Search for the revenue-optimal thinning schedule.

Two independent routes to the same question:

* :func:`check_prop2` evaluates closed-form sufficient conditions under which
  a canonical policy is provably optimal: with power growth, a price convex
  enough in basal area (alpha above a threshold derived from the
  reversed-sandwich exponent) and a small enough effective discount make the
  cut-first policy optimal; a price concave enough makes the ceiling-riding
  policy optimal, and with a terminal count constraint the exact-target
  policy takes its place.

* :func:`brute_force` enumerates piecewise-constant policies over equal time
  intervals with the semantic level set {0, e_max, ride-the-ceiling}, which
  spans the bang-bang-plus-singular-arc structure of the candidate optima.
  Candidates are screened with a vectorized coarse-step integrator, the best
  few re-integrated at a fine step together with the canonical policies, and
  the exact objective decides.

Ties are broken toward earlier cutting (lexicographically larger cumulative
harvest), then by enumeration order, so results are deterministic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .analysis import XiLowerBound, b_star, xi_lower_bound
from .dynamics import HOLD, Policy, integrate
from .economics import EconomicModel, delta_h, objective
from .model import Scenario
from .trajectories import build_policy, is_unreachable, t_cap0, time_to_count

__all__ = [
    "Prop2Report",
    "SearchResult",
    "CanonicalComparison",
    "check_prop2",
    "brute_force",
    "compare_canonicals",
    "NoFeasiblePolicy",
]

CANONICAL_NAMES = ("E0", "ET", "Esup", "Zero", "Max")


class NoFeasiblePolicy(RuntimeError):
    """Every enumerated candidate violated the constraints."""


@dataclass(frozen=True)
class Prop2Report:
    """Which sufficient-optimality branch applies, with worst-case margins."""

    branch: str | None            # "E0Optimal" | "EsupOptimal" | "ETOptimal" | None
    alpha_margin: float | None    # alpha - alpha_star (branch i) or bound - alpha (ii)
    discount_margin: float | None  # min over the grid of rhs - delta_h
    alpha_star: float | None
    concave_bound: float | None
    xi_form: str | None

    def to_json_dict(self) -> dict:
        return {
            "branch": self.branch,
            "alpha_margin": self.alpha_margin,
            "discount_margin": self.discount_margin,
            "alpha_star": self.alpha_star,
            "concave_bound": self.concave_bound,
            "xi_form": self.xi_form,
        }


def check_prop2(scenario: Scenario, econ: EconomicModel, horizon: float,
                *, terminal_n_min: bool = False, grid: int = 1024,
                xi_m: XiLowerBound | None = None) -> Prop2Report:
    """Evaluate the sufficient-optimality conditions on a time grid.

    Requires the horizon not to exceed the maximal exit time (beyond it no
    admissible trajectory exists).  Returns the first satisfied branch:
    convex-price cut-first optimality (power growth only), then concave-price
    ceiling-riding optimality (``ETOptimal`` instead when ``terminal_n_min``).
    """
    p = scenario.params
    growth = scenario.growth
    t_upper = t_cap0(scenario)
    if not is_unreachable(t_upper) and horizon > t_upper * (1.0 + 1e-9):
        raise ValueError(f"horizon {horizon} exceeds the maximal exit time {t_upper}")

    if xi_m is None:
        xi_m = xi_lower_bound(scenario, horizon)
    ts = np.linspace(horizon / grid, horizon, grid)
    dh = delta_h(econ, scenario.env, ts)
    xv = xi_m(ts)

    alpha_star = None
    if growth.kind == "power" and growth.theta is not None and growth.theta > 0.0:
        theta = growth.theta
        try:
            alpha_star = 1.0 + (b_star(scenario).b_star - p.q / 2.0) * (1.0 - theta)
        except ValueError:
            alpha_star = None
        if alpha_star is not None and econ.alpha > alpha_star:
            margin = float(np.min(econ.alpha * (1.0 - theta) * xv - dh))
            if margin >= 0.0:
                return Prop2Report(branch="E0Optimal",
                                   alpha_margin=float(econ.alpha - alpha_star),
                                   discount_margin=margin, alpha_star=alpha_star,
                                   concave_bound=None, xi_form=xi_m.form)

    gl = growth.gamma_lower
    concave_bound = (1.0 - p.q / 2.0 * gl) / (1.0 - gl) if gl < 1.0 else np.inf
    if econ.alpha < concave_bound:
        margin = float(np.min(econ.alpha * gl * xv - dh))
        if margin >= 0.0:
            branch = "ETOptimal" if terminal_n_min else "EsupOptimal"
            return Prop2Report(branch=branch,
                               alpha_margin=float(concave_bound - econ.alpha),
                               discount_margin=margin, alpha_star=alpha_star,
                               concave_bound=float(concave_bound), xi_form=xi_m.form)

    return Prop2Report(branch=None, alpha_margin=None, discount_margin=None,
                       alpha_star=alpha_star,
                       concave_bound=None if np.isinf(concave_bound) else float(concave_bound),
                       xi_form=xi_m.form)


# ---------------------------------------------------------------------------
# Coarse vectorized screening integrator for the enumeration.

_HOLD_CODE = -1.0


def _screen_candidates(scenario: Scenario, econ: EconomicModel, horizon: float,
                       levels_matrix: np.ndarray, steps_total: int = 1024):
    """Approximate objectives for a batch of interval-coded policies.

    One fixed-step RK4 pass vectorized across candidates.  Ceiling crossings
    are refined with a single proportional substep and then projected, which
    is accurate enough for ranking; winners are re-integrated exactly.
    Returns (values, feasible, n_checkpoints).
    """
    p = scenario.params
    growth_g = scenario.growth.g
    env_v = scenario.env.v
    A, q2, e_max, n_min = p.A, p.q / 2.0, p.e_max, p.n_min
    arc_exp = -2.0 / p.q
    m, k = levels_matrix.shape
    steps_per = max(1, int(np.ceil(steps_total / k)))
    h = horizon / (k * steps_per)

    s = np.full(m, scenario.initial.s)
    n = np.full(m, scenario.initial.n)
    on_arc = np.zeros(m, dtype=bool)
    dead = np.zeros(m, dtype=bool)
    exited = np.zeros(m, dtype=bool)
    t_end = np.full(m, horizon)
    s_end = np.zeros(m)
    n_end = np.zeros(m)
    value = np.zeros(m)
    n_checkpoints = np.empty((m, k + 1))
    n_checkpoints[:, 0] = n

    def make_rk4(arc_mask):
        def deriv(t_loc, s_loc, n_loc, e_loc):
            r = A * n_loc * s_loc ** q2
            e_stage = np.where(arc_mask, q2 * env_v(t_loc) / s_loc, e_loc) \
                if arc_mask is not None else e_loc
            return growth_g(r) / n_loc * env_v(t_loc), -e_stage

        def rk4(t0, s0, n0, e0, hh):
            k1s, k1n = deriv(t0, s0, n0, e0)
            k2s, k2n = deriv(t0 + hh / 2, s0 + hh / 2 * k1s, n0 + hh / 2 * k1n, e0)
            k3s, k3n = deriv(t0 + hh / 2, s0 + hh / 2 * k2s, n0 + hh / 2 * k2n, e0)
            k4s, k4n = deriv(t0 + hh, s0 + hh * k3s, n0 + hh * k3n, e0)
            return (s0 + hh / 6 * (k1s + 2 * k2s + 2 * k3s + k4s),
                    n0 + hh / 6 * (k1n + 2 * k2n + 2 * k3n + k4n))

        return rk4

    t = 0.0
    for seg in range(k):
        seg_levels = levels_matrix[:, seg]
        hold_mask = seg_levels == _HOLD_CODE
        on_arc &= hold_mask          # numeric segments leave the ceiling
        for _ in range(steps_per):
            active = ~(dead | exited)
            if not active.any():
                break
            # Rates: ceiling-holding where on the arc, else the coded level
            # clamped so the count cannot undershoot n_min inside the step.
            e_free = np.where(hold_mask, 0.0, np.maximum(seg_levels, 0.0))
            e_free = np.minimum(e_free, np.maximum(n - n_min, 0.0) / h)
            e_arc = q2 * env_v(t) / s
            e = np.where(on_arc, e_arc, e_free)
            e[~active] = 0.0
            pr0 = econ.k * s ** econ.alpha * scenario.env.h0(t) * np.exp(-econ.delta * t)

            rk4 = make_rk4(on_arc & active)
            s_new, n_new = rk4(t, s, n, e, h)
            # Project ceiling riders back onto r = 1; catch their exhaustion.
            proj = on_arc & active
            if proj.any():
                hit = proj & (n_new < n_min)
                if hit.any():
                    frac = (n[hit] - n_min) / np.maximum(n[hit] - n_new[hit], 1e-300)
                    t_end[hit] = t + frac * h
                    s_end[hit] = (A * n_min) ** arc_exp
                    n_end[hit] = n_min
                    value[hit] += frac * h * pr0[hit] * e[hit]
                    exited |= hit
                    proj &= ~hit
                n_new = np.where(proj, np.maximum(n_new, n_min), n_new)
                s_new = np.where(proj, (A * n_new) ** arc_exp, s_new)

            r_new = A * n_new * s_new ** q2
            crossing = active & ~on_arc & (r_new > 1.0)
            if crossing.any():
                rk4_free = make_rk4(None)
                r_old = A * n[crossing] * s[crossing] ** q2
                frac = np.clip((1.0 - r_old) / np.maximum(r_new[crossing] - r_old, 1e-300),
                               0.0, 1.0)
                s_c, n_c = rk4_free(t, s[crossing], n[crossing], e[crossing], frac * h)
                idx = np.flatnonzero(crossing)
                at_corner = n_c <= n_min * (1.0 + 1e-7)
                allowed = hold_mask[idx]
                # Corner reached while crossing: legitimate exit.
                corner_idx = idx[at_corner]
                if corner_idx.size:
                    t_end[corner_idx] = t + frac[at_corner] * h
                    s_end[corner_idx] = (A * n_min) ** arc_exp
                    n_end[corner_idx] = n_min
                    value[corner_idx] += frac[at_corner] * h * pr0[corner_idx] * e[corner_idx]
                    exited[corner_idx] = True
                # Ceiling reached under a hold level: ride it from here on.
                ride_idx = idx[~at_corner & allowed]
                if ride_idx.size:
                    rk4_arc = make_rk4(True)
                    fr = frac[~at_corner & allowed]
                    nn = n_c[~at_corner & allowed]
                    nn = np.maximum(nn, n_min)
                    s_ride = (A * nn) ** arc_exp
                    # Finish the step on the arc.
                    s_fin, n_fin = rk4_arc(t + fr * h, s_ride, nn,
                                           q2 * env_v(t + fr * h) / s_ride,
                                           (1.0 - fr) * h)
                    n_fin = np.maximum(n_fin, n_min * (1.0 + 1e-12))
                    s_new[ride_idx] = (A * n_fin) ** arc_exp
                    n_new[ride_idx] = n_fin
                    on_arc[ride_idx] = True
                # Ceiling reached under a numeric level: constraint violated.
                dead_idx = idx[~at_corner & ~allowed]
                if dead_idx.size:
                    dead[dead_idx] = True

            adv = ~(dead | exited)
            s = np.where(adv, s_new, s)
            n = np.where(adv, n_new, n)
            pr1 = econ.k * s ** econ.alpha * scenario.env.h0(t + h) * np.exp(-econ.delta * (t + h))
            e_val = np.where(on_arc, q2 * env_v(t + h) / s, e)
            value += np.where(adv, 0.5 * h * (pr0 * e + pr1 * e_val), 0.0)
            t += h
        n_checkpoints[:, seg + 1] = n

    final = ~(dead | exited)
    s_end = np.where(final, s, s_end)
    n_end = np.where(final, n, n_end)
    t_end = np.where(final, horizon, t_end)
    terminal_value = econ.k * s_end ** econ.alpha * scenario.env.h0(t_end) \
        * np.exp(-econ.delta * t_end) * n_end
    values = value + terminal_value
    values[dead] = -np.inf
    return values, ~dead, n_checkpoints, n_end


def _levels_to_policy(levels_row: np.ndarray, horizon: float, k: int) -> Policy:
    bps = [horizon * (i + 1) / k for i in range(k - 1)]
    levels = [HOLD if code == _HOLD_CODE else float(code) for code in levels_row]
    # Merge equal adjacent levels so the integrator sees minimal spans.
    merged_b, merged_l = [], [levels[0]]
    for b, lv in zip(bps, levels[1:]):
        if lv is merged_l[-1] or (lv is not HOLD and merged_l[-1] is not HOLD
                                  and float(lv) == float(merged_l[-1])):
            continue
        merged_b.append(b)
        merged_l.append(lv)
    return Policy.piecewise(merged_b, merged_l)


@dataclass(frozen=True)
class SearchResult:
    best_policy: Policy
    best_value: float
    canonical_values: dict
    condition_report: Prop2Report
    gap: float                     # best value minus the best canonical value
    enumerated: int
    feasible: int

    def to_json_dict(self) -> dict:
        return {
            "best_policy": self.best_policy.describe(),
            "best_value": self.best_value,
            "canonical_values": self.canonical_values,
            "condition_report": self.condition_report.to_json_dict(),
            "gap": self.gap,
            "enumerated": self.enumerated,
            "feasible": self.feasible,
        }


def _cumulative_cut_key(scenario: Scenario, traj, horizon: float) -> tuple:
    ts = np.linspace(0.0, min(horizon, traj.validity_end), 129)
    return tuple(np.round(-traj.interp_n(ts), 9))


def canonical_policies(scenario: Scenario, horizon: float) -> dict[str, Policy]:
    """The five named policies entering every search, deduplicated by window."""
    p = scenario.params
    out = {
        "E0": build_policy(scenario, "e0"),
        "Esup": build_policy(scenario, "esup"),
        "Zero": Policy.zero(),
        "Max": Policy.max_rate(p.e_max),
    }
    t0n = time_to_count(p, scenario.initial.n, p.n_min)
    t_exhaust = t_cap0(scenario)
    if horizon > t0n and (is_unreachable(t_exhaust) or horizon <= t_exhaust * (1.0 + 1e-9)):
        out["ET"] = build_policy(scenario, "et", T=horizon)
    return out


def brute_force(scenario: Scenario, econ: EconomicModel, horizon: float,
                n_intervals: int = 8, levels: tuple = ("0", "max", "hold"),
                *, terminal_n_min: bool = False, fine_step: float | None = None,
                rescore_top: int = 8, candidates_csv=None) -> SearchResult:
    """Enumerate interval policies and return the revenue maximizer.

    ``levels`` entries are rates, ``"0"``/``"max"``/``"hold"``, or floats.
    Enumeration is capped at 10 intervals (3^10 candidates).  Candidates that
    would break the density ceiling are discarded; candidates that exhaust
    the stand early clear-cut at the exit corner.  With ``terminal_n_min``
    only schedules ending at n(T) = n_min compete.  The screening pass runs
    at roughly 1024 steps over the horizon; the best ``rescore_top``
    candidates and all canonical policies are re-integrated at ``fine_step``
    (default horizon/4096) before the final comparison.
    """
    p = scenario.params
    if not 1 <= n_intervals <= 10:
        raise ValueError("n_intervals must lie in 1..10")
    codes = []
    for lv in levels:
        if lv == "hold" or lv is HOLD:
            codes.append(_HOLD_CODE)
        elif lv == "0":
            codes.append(0.0)
        elif lv == "max":
            codes.append(p.e_max)
        else:
            val = float(lv)
            if not 0.0 <= val <= p.e_max:
                raise ValueError(f"level {lv} outside [0, e_max]")
            codes.append(val)
    codes = sorted(set(codes))

    matrix = np.array(list(itertools.product(codes, repeat=n_intervals)))
    values, feasible, n_checks, n_end = _screen_candidates(
        scenario, econ, horizon, matrix)
    if terminal_n_min:
        reaches = n_end <= p.n_min * (1.0 + 1e-6)
        values = np.where(reaches, values, -np.inf)
        feasible = feasible & reaches

    if candidates_csv is not None:
        with open(candidates_csv, "w") as fh:
            fh.write("candidate,levels,approx_value,feasible\n")
            for i in range(matrix.shape[0]):
                lv = "|".join("hold" if c == _HOLD_CODE else f"{c:g}" for c in matrix[i])
                v = "" if not np.isfinite(values[i]) else f"{values[i]:.10g}"
                fh.write(f"{i},{lv},{v},{int(feasible[i])}\n")

    order = np.argsort(-values, kind="stable")
    top = [i for i in order[:max(rescore_top, 1)] if np.isfinite(values[i])]

    fine_step = fine_step if fine_step is not None else horizon / 4096
    contenders: list[tuple[str, Policy]] = []
    for i in top:
        contenders.append((f"cand{i}", _levels_to_policy(matrix[i], horizon, n_intervals)))
    canon = canonical_policies(scenario, horizon)
    canonical_values: dict[str, float | None] = {name: None for name in CANONICAL_NAMES}

    best = None   # (value, cut_key, order_idx, name, policy)
    for idx, (name, policy) in enumerate(itertools.chain(
            canon.items(), contenders)):
        traj = integrate(scenario, policy, horizon, step=fine_step)
        if not traj.exited and traj.validity_end < horizon * (1.0 - 1e-12):
            if name in canonical_values:
                canonical_values[name] = None
            continue
        if terminal_n_min and traj.n[-1] > p.n_min * (1.0 + 1e-6):
            if name in canonical_values:
                canonical_values[name] = None
            continue
        val = objective(scenario, econ, traj)
        if name in canonical_values:
            canonical_values[name] = val
        tie_tol = 1e-12 * max(1.0, abs(val), 0.0 if best is None else abs(best[0]))
        if best is None or val > best[0] + tie_tol:
            key = _cumulative_cut_key(scenario, traj, horizon)
            best = (val, key, idx, name, policy)
        elif val >= best[0] - tie_tol:
            key = _cumulative_cut_key(scenario, traj, horizon)
            if key > best[1]:
                best = (val, key, idx, name, policy)

    if best is None:
        raise NoFeasiblePolicy("no candidate satisfied the constraints")

    cond = check_prop2(scenario, econ, horizon, terminal_n_min=terminal_n_min)
    feasible_canon = [v for v in canonical_values.values() if v is not None]
    gap = best[0] - max(feasible_canon) if feasible_canon else float("nan")
    return SearchResult(
        best_policy=best[4],
        best_value=float(best[0]),
        canonical_values=canonical_values,
        condition_report=cond,
        gap=float(gap),
        enumerated=int(matrix.shape[0]),
        feasible=int(np.count_nonzero(feasible)),
    )


@dataclass(frozen=True)
class CanonicalComparison:
    values: dict
    dominant: str | None
    cut_first_dominates: bool
    margins: dict

    def to_json_dict(self) -> dict:
        return {"values": self.values, "dominant": self.dominant,
                "cut_first_dominates": self.cut_first_dominates,
                "margins": self.margins}


def compare_canonicals(scenario: Scenario, econ: EconomicModel, horizon: float,
                       step: float | None = None) -> CanonicalComparison:
    """Objective of each canonical policy; flags whether cut-first wins.

    Policies that cannot stay inside the constraints over the horizon are
    reported with value None.
    """
    values: dict[str, float | None] = {name: None for name in CANONICAL_NAMES}
    for name, policy in canonical_policies(scenario, horizon).items():
        traj = integrate(scenario, policy, horizon, step=step)
        if not traj.exited and traj.validity_end < horizon * (1.0 - 1e-12):
            continue
        values[name] = objective(scenario, econ, traj)
    feasible = {k: v for k, v in values.items() if v is not None}
    dominant = None
    if feasible:
        # Ties within 1e-9 relative resolve in the listed canonical order
        # (Max with the n_min clamp reproduces E0 exactly, for example).
        top = max(feasible.values())
        dominant = next(k for k, v in feasible.items()
                        if v >= top - 1e-9 * max(1.0, abs(top)))
    e0_val = values.get("E0")
    margins = {}
    if e0_val is not None:
        margins = {k: e0_val - v for k, v in feasible.items() if k != "E0"}
    return CanonicalComparison(
        values=values,
        dominant=dominant,
        cut_first_dominates=dominant == "E0",
        margins=margins,
    )


def search_result_to_json(result: SearchResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
