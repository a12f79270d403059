"""Core state, parameter, and function families of the stand-growth model.

The stand is described by two state variables: the basal area per tree ``s``
(cross-section at 1.3 m, in m²) and the tree count ``n``.  Density is measured
by the relative density index (RDI)

    r(n, s) = A * n * s**(q/2),

the ratio of the actual tree count to the self-thinning maximum
``n_max(s) = exp(C0) * s**(-q/2)`` (Reineke's rule, with ``A = exp(-C0)``).
Valid stands keep ``r <= 1`` and ``n >= n_min``.

Growth is driven by a stand-level energy supply ``V(t)`` (basal-area increment
per year at full density), reduced at lower density by a competition factor
``g(r)``; each tree then grows at ``g(r)/n * V(t)``.  Thinning removes trees at
a rate ``e(t)`` bounded by ``e_max``.  The dominant height ``h0(t)`` is an
output only: it never feeds back into the dynamics.

This module holds the immutable parameter/state containers, the competition
function family ``g`` with its derived functionals, the environment families
for ``V`` and ``h0``, and the pointwise operations (``rdi``, ``g_eval``,
``script_g``, ``gamma``, ``boundary_control``, ``energy``).  All of them accept
scalars or numpy arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "StandParams",
    "StandState",
    "GrowthFunction",
    "GrowthEnergy",
    "DominantHeight",
    "Environment",
    "Scenario",
    "rdi",
    "g_eval",
    "script_g",
    "gamma",
    "boundary_control",
    "energy",
]

# Margin added to sampled/closed-form elasticity bounds so that strict
# bracketing holds at floating-point resolution.
_GAMMA_MARGIN = 1e-9
# Elasticity of the Fagacees family tends to 1 as r -> 0; its reported upper
# bound is taken at this offset from 0.
_GAMMA_EDGE = 1e-6


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class StandParams:
    """Species/site constants of the stand.

    q        Reineke exponent, must satisfy 1 < q < 2.
    A        self-thinning coefficient exp(-C0) (trees^-1 * m^-q).
    n_min    minimum tree count kept in the stand.
    e_max    maximum thinning rate (trees/year).
    t_star   validity horizon of the model (years).
    """

    q: float
    A: float
    n_min: float
    e_max: float
    t_star: float

    def __post_init__(self) -> None:
        _require(1.0 < self.q < 2.0, f"q must satisfy 1 < q < 2 (got {self.q})")
        _require(self.A > 0.0, f"A must be positive (got {self.A})")
        _require(self.n_min > 0.0, f"n_min must be positive (got {self.n_min})")
        _require(self.e_max > 0.0, f"e_max must be positive (got {self.e_max})")
        _require(self.t_star > 0.0, f"t_star must be positive (got {self.t_star})")
        _require(np.isfinite(self.s_bar) and self.s_bar > 0.0,
                 "derived maximal basal area (A*n_min)**(-2/q) must be finite and positive")

    @property
    def s_bar(self) -> float:
        """Largest basal area compatible with the density ceiling at n = n_min."""
        return float((self.A * self.n_min) ** (-2.0 / self.q))


@dataclass(frozen=True)
class StandState:
    """Instantaneous state: time t (years), basal area s (m²), tree count n."""

    t: float
    s: float
    n: float

    def __post_init__(self) -> None:
        _require(self.s > 0.0, f"s must be positive (got {self.s})")
        _require(self.n > 0.0, f"n must be positive (got {self.n})")

    def rdi(self, params: StandParams) -> float:
        return float(rdi(params, self.n, self.s))


@dataclass(frozen=True)
class GrowthFunction:
    """Competition reduction factor g(r) with its derived functionals.

    Three variants:

    * ``fagacees``: g(r) = (1+p) r / (r+p), p > 0 (hyperbolic saturation);
    * ``power``:    g(r) = r**(1-theta), 0 <= theta < 1;
    * ``linear``:   g(r) = r, the degenerate theta = 0 case in which
      competition does not amplify per-tree growth (g(r) > r fails).

    Derived quantities: ``script_g(r) = d/dr [r/g(r)]`` and the elasticity
    ``gamma(r) = r g'(r) / g(r)``, together with the bounds ``gamma_lower``
    and ``gamma_upper`` over densities in (0, 1).
    """

    kind: str
    p: float | None = None
    theta: float | None = None
    gamma_lower: float = field(init=False)
    gamma_upper: float = field(init=False)

    def __post_init__(self) -> None:
        if self.kind == "fagacees":
            _require(self.p is not None and self.p > 0.0,
                     f"fagacees shape p must be positive (got {self.p})")
            lo = self.p / (1.0 + self.p)           # attained at r = 1
            hi = self.p / (self.p + _GAMMA_EDGE)   # sup 1 approached as r -> 0
        elif self.kind == "power":
            _require(self.theta is not None and 0.0 <= self.theta < 1.0,
                     f"power exponent theta must lie in [0, 1) (got {self.theta})")
            lo = hi = 1.0 - self.theta
        elif self.kind == "linear":
            lo = hi = 1.0
        else:
            raise ValueError(f"unknown growth variant {self.kind!r}")
        object.__setattr__(self, "gamma_lower", max(lo - _GAMMA_MARGIN, 0.0))
        object.__setattr__(self, "gamma_upper", min(hi + _GAMMA_MARGIN, 1.0))

    @classmethod
    def fagacees(cls, p: float) -> "GrowthFunction":
        return cls(kind="fagacees", p=p)

    @classmethod
    def power(cls, theta: float) -> "GrowthFunction":
        return cls(kind="power", theta=theta)

    @classmethod
    def linear(cls) -> "GrowthFunction":
        return cls(kind="linear")

    # The closed forms below are polymorphic in r (float or ndarray).

    def g(self, r):
        if self.kind == "fagacees":
            return (1.0 + self.p) * r / (r + self.p)
        if self.kind == "power":
            return r ** (1.0 - self.theta)
        return r

    def g_prime(self, r):
        if self.kind == "fagacees":
            return (1.0 + self.p) * self.p / (r + self.p) ** 2
        if self.kind == "power":
            if self.theta == 0.0:
                return np.ones_like(np.asarray(r, dtype=float)) if np.ndim(r) else 1.0
            return (1.0 - self.theta) * r ** (-self.theta)
        return np.ones_like(np.asarray(r, dtype=float)) if np.ndim(r) else 1.0

    def script_g(self, r):
        """d/dr [r / g(r)] = (g(r) - r g'(r)) / g(r)**2."""
        if self.kind == "fagacees":
            res = 1.0 / (1.0 + self.p)
            return np.full_like(np.asarray(r, dtype=float), res) if np.ndim(r) else res
        if self.kind == "power":
            if self.theta == 0.0:
                return np.zeros_like(np.asarray(r, dtype=float)) if np.ndim(r) else 0.0
            return self.theta * r ** (self.theta - 1.0)
        return np.zeros_like(np.asarray(r, dtype=float)) if np.ndim(r) else 0.0

    def gamma(self, r):
        """Elasticity r g'(r) / g(r); lies in (0, 1] under concavity."""
        if self.kind == "fagacees":
            return self.p / (r + self.p)
        if self.kind == "power":
            res = 1.0 - self.theta
            return np.full_like(np.asarray(r, dtype=float), res) if np.ndim(r) else res
        return np.ones_like(np.asarray(r, dtype=float)) if np.ndim(r) else 1.0

    @property
    def amplifies(self) -> bool:
        """True when g(r) > r on (0, 1) (fails only for the linear variant)."""
        return not (self.kind == "linear" or (self.kind == "power" and self.theta == 0.0))


@dataclass(frozen=True)
class GrowthEnergy:
    """Stand-level energy available for basal-area growth, V(t) (m²/year).

    Two families, both positive, non-increasing, and convex:

    * ``exponential``: V(t) = v0 * exp(-lam * t)
    * ``hyperbolic``:  V(t) = v0 / (1 + lam * t)

    ``lam = 0`` (constant supply) is accepted for testing convenience even
    though the model calls for strictly decreasing energy; construction then
    sets ``weakly_decreasing`` and emits a warning.
    """

    family: str
    v0: float
    lam: float
    weakly_decreasing: bool = field(init=False)

    def __post_init__(self) -> None:
        _require(self.family in ("exponential", "hyperbolic"),
                 f"unknown energy family {self.family!r}")
        _require(self.v0 > 0.0, f"v0 must be positive (got {self.v0})")
        _require(self.lam >= 0.0, f"lambda must be non-negative (got {self.lam})")
        object.__setattr__(self, "weakly_decreasing", self.lam == 0.0)
        if self.weakly_decreasing:
            warnings.warn("lambda = 0 gives a constant (only weakly decreasing) "
                          "energy supply", stacklevel=2)

    def value(self, t):
        if self.family == "exponential":
            return self.v0 * np.exp(-self.lam * t)
        return self.v0 / (1.0 + self.lam * t)

    __call__ = value

    def integral(self, t0: float, t1: float) -> float:
        """Closed-form cumulative energy over [t0, t1]."""
        if t1 < t0:
            raise ValueError(f"empty interval: t0={t0} > t1={t1}")
        if self.lam == 0.0:
            return self.v0 * (t1 - t0)
        if self.family == "exponential":
            return self.v0 * (np.exp(-self.lam * t0) - np.exp(-self.lam * t1)) / self.lam
        return self.v0 / self.lam * np.log((1.0 + self.lam * t1) / (1.0 + self.lam * t0))


@dataclass(frozen=True)
class DominantHeight:
    """Dominant height h0(t) (m): saturating family h_inf * t / (t + tau).

    Positive, increasing, and concave for t > 0, with h0(0) = 0.
    """

    h_inf: float
    tau: float
    family: str = "saturating"

    def __post_init__(self) -> None:
        _require(self.family == "saturating",
                 f"unknown height family {self.family!r}")
        _require(self.h_inf > 0.0, f"h_inf must be positive (got {self.h_inf})")
        _require(self.tau > 0.0, f"tau must be positive (got {self.tau})")

    def value(self, t):
        return self.h_inf * t / (t + self.tau)

    __call__ = value

    def derivative(self, t):
        return self.h_inf * self.tau / (t + self.tau) ** 2

    def relative_rate(self, t):
        """h0'(t) / h0(t) = tau / (t (t + tau)); singular at t = 0."""
        return self.tau / (t * (t + self.tau))


@dataclass(frozen=True)
class Environment:
    """Growth-energy supply V and dominant-height output h0.

    The realized tree height equals ``h0`` because all trees share the same
    basal area, so ``h0`` doubles as the per-tree height output.
    """

    v: GrowthEnergy
    h0: DominantHeight


@dataclass(frozen=True)
class Scenario:
    """Full problem instance: parameters, growth function, environment, start."""

    params: StandParams
    growth: GrowthFunction
    env: Environment
    initial: StandState

    def __post_init__(self) -> None:
        _require(self.initial.t == 0.0,
                 f"initial state must have t = 0 (got {self.initial.t})")
        _require(self.initial.n >= self.params.n_min,
                 f"initial n={self.initial.n} below n_min={self.params.n_min}")
        r0 = self.initial.rdi(self.params)
        _require(r0 < 1.0, f"initial RDI must be below 1 (got {r0})")

    @property
    def rdi0(self) -> float:
        return self.initial.rdi(self.params)


# ---------------------------------------------------------------------------
# Pointwise operations.


def rdi(params: StandParams, n, s):
    """Relative density index r = A * n * s**(q/2)."""
    if np.any(np.asarray(n) <= 0.0) or np.any(np.asarray(s) <= 0.0):
        raise ValueError("rdi requires n > 0 and s > 0")
    return params.A * n * s ** (params.q / 2.0)


def _check_r_range(r, lo_open: bool) -> None:
    arr = np.asarray(r)
    if lo_open:
        if np.any(arr <= 0.0) or np.any(arr > 1.0):
            raise ValueError("density must lie in (0, 1]")
    else:
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("density must lie in [0, 1]")


def g_eval(growth: GrowthFunction, r):
    """Competition factor g(r) for r in [0, 1]."""
    _check_r_range(r, lo_open=False)
    return growth.g(r)


def script_g(growth: GrowthFunction, r):
    """(g(r) - r g'(r)) / g(r)**2, the derivative of r/g(r); r in (0, 1]."""
    _check_r_range(r, lo_open=True)
    return growth.script_g(r)


def gamma(growth: GrowthFunction, r):
    """Elasticity r g'(r)/g(r) of the competition factor; r in (0, 1]."""
    _check_r_range(r, lo_open=True)
    return growth.gamma(r)


def boundary_control(params: StandParams, env: Environment, s, t):
    """Thinning rate (q/2) V(t)/s that freezes the RDI on the r = 1 ceiling."""
    if np.any(np.asarray(s) <= 0.0):
        raise ValueError("boundary control requires s > 0")
    return params.q / 2.0 * env.v(t) / s


def energy(env: Environment, t0: float, t1: float) -> float:
    """Cumulative growth energy over [t0, t1] (closed form per family)."""
    if not 0.0 <= t0 <= t1:
        raise ValueError(f"need 0 <= t0 <= t1 (got t0={t0}, t1={t1})")
    return float(env.v.integral(t0, t1))


def energy_quad(env: Environment, t0: float, t1: float, rtol: float = 1e-10) -> float:
    """Cumulative energy by adaptive quadrature (fallback / cross-check path)."""
    if not 0.0 <= t0 <= t1:
        raise ValueError(f"need 0 <= t0 <= t1 (got t0={t0}, t1={t1})")
    if t0 == t1:
        return 0.0
    val, _ = quad(env.v.value, t0, t1, epsrel=rtol, limit=200)
    return float(val)
