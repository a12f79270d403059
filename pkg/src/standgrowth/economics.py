"""Timber price model and the revenue objective of a thinning schedule.

A tree of basal area s sold at time t is worth

    P(s, t) = k * s**alpha * h0(t) * exp(-delta * t)

(price per unit volume proxy k s**alpha, times height, discounted at rate
delta; thinning costs are netted into k).  Since d/dt[h0 e^{-delta t}] =
-(delta - h0'/h0) h0 e^{-delta t}, the effective discount is

    delta_h(t) = delta - h0'(t) / h0(t),

negative while height growth outpaces monetary discounting.

The planning objective over a horizon T sums discounted thinning revenue and
the final clear-cut:

    J = Int_0^T P(s, t) e(t) dt + P(s(T), T) n(T).

Integrating by parts (dn/dt = -e) gives the equivalent form

    J = Int_0^T dP(s(t), t)/dt * n(t) dt + P(s(0), 0) n(0),

whose integrand expands to k e^{-delta t} [alpha s**(alpha-1) h0 g(r) V
+ n s**alpha (h0' - delta h0)].  Both forms are computed independently
(composite Simpson on the trajectory grid, split at control-regime changes)
and agreeing values are a strong end-to-end check of the integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .dynamics import Trajectory
from .model import Environment, Scenario

__all__ = [
    "EconomicModel",
    "price",
    "delta_h",
    "objective",
    "objective_ibp",
    "revenue_rate",
]


@dataclass(frozen=True)
class EconomicModel:
    """Price scale k, basal-area exponent alpha, discount rate delta."""

    k: float
    alpha: float
    delta: float

    def __post_init__(self) -> None:
        if self.k <= 0.0:
            raise ValueError(f"k must be positive (got {self.k})")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive (got {self.alpha})")
        if self.delta < 0.0:
            raise ValueError(f"delta must be non-negative (got {self.delta})")


def price(econ: EconomicModel, env: Environment, s, t):
    """Discounted per-tree price k s**alpha h0(t) exp(-delta t)."""
    return econ.k * s ** econ.alpha * env.h0(t) * np.exp(-econ.delta * t)


def delta_h(econ: EconomicModel, env: Environment, t):
    """Effective discount delta - h0'(t)/h0(t); singular where h0 vanishes."""
    h = env.h0(t)
    if np.any(np.asarray(h) == 0.0):
        raise ZeroDivisionError("delta_h is singular where h0(t) = 0")
    return econ.delta - env.h0.derivative(t) / h


def _panel_indices(t: np.ndarray, breaks) -> list[int]:
    """Sample indices nearest to the panel boundary times."""
    idx = {0, len(t) - 1}
    for b in breaks:
        idx.add(int(np.argmin(np.abs(t - b))))
    return sorted(idx)


def _piecewise_simpson(t: np.ndarray, y: np.ndarray, breaks) -> float:
    """Composite Simpson split at the given panel boundaries."""
    total = 0.0
    idx = _panel_indices(t, breaks)
    for a, b in zip(idx, idx[1:]):
        if b == a:
            continue
        if b - a == 1:
            total += 0.5 * (y[a] + y[b]) * (t[b] - t[a])
        else:
            total += simpson(y[a:b + 1], x=t[a:b + 1])
    return float(total)


def _left_rates(scenario: Scenario, traj: Trajectory, a: int, b: int) -> np.ndarray:
    """Control values on panel [t_a, t_b] with the panel's own left-limit at t_b.

    Sampled rates are right-continuous, so the closing node of a panel carries
    the next regime's rate; inside one panel the control is either constant
    (use the opening value) or the ceiling-holding rate (recompute from s, t).
    """
    e = traj.e[a:b + 1].copy()
    if traj.on_arc[a]:
        p = scenario.params
        e[-1] = p.q / 2.0 * scenario.env.v(traj.t[b]) / traj.s[b]
    else:
        e[-1] = e[0]
    return e


def objective(scenario: Scenario, econ: EconomicModel, traj: Trajectory) -> float:
    """Discounted revenue: thinning integral plus final clear-cut value.

    The final term values the remaining trees at the last valid time of the
    trajectory (the horizon, or the exit corner when the stand leaves its
    validity domain earlier).
    """
    t, s = traj.t, traj.s
    pr = price(econ, scenario.env, s, t)
    total = 0.0
    idx = _panel_indices(t, traj.breaks)
    for a, b in zip(idx, idx[1:]):
        if b == a:
            continue
        e_panel = _left_rates(scenario, traj, a, b)
        y = pr[a:b + 1] * e_panel
        if b - a == 1:
            total += 0.5 * (y[0] + y[1]) * (t[b] - t[a])
        else:
            total += simpson(y, x=t[a:b + 1])
    total += float(pr[-1] * traj.n[-1])
    return float(total)


def revenue_rate(scenario: Scenario, econ: EconomicModel, s, n, t):
    """Integrand of the by-parts objective: d/dt[P(s(t), t)] * n at a state.

    Uses h0' - delta h0 directly so the expression stays finite at t = 0
    where the effective discount itself is singular.
    """
    p = scenario.params
    env = scenario.env
    r = p.A * n * s ** (p.q / 2.0)
    g = scenario.growth.g(r)
    disc = np.exp(-econ.delta * t)
    growth_term = econ.alpha * s ** (econ.alpha - 1.0) * env.h0(t) * g * env.v(t)
    decay_term = n * s ** econ.alpha * (env.h0.derivative(t) - econ.delta * env.h0(t))
    return econ.k * disc * (growth_term + decay_term)


def objective_ibp(scenario: Scenario, econ: EconomicModel, traj: Trajectory) -> float:
    """Objective via the integration-by-parts form (independent route)."""
    t = traj.t
    y = revenue_rate(scenario, econ, traj.s, traj.n, t)
    total = _piecewise_simpson(t, y, traj.breaks)
    total += float(price(econ, scenario.env, traj.s[0], t[0]) * traj.n[0])
    return float(total)
