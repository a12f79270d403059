"""Bracketed bisection helpers used by the characteristic-time solvers.

All solvers in this package use plain bisection: every target function is
monotone in its argument, brackets are cheap to establish by a doubling scan,
and bisection gives a guaranteed absolute tolerance on the root.
"""

from __future__ import annotations

from typing import Callable

TIME_TOL = 1e-9
MAX_ITER = 200


class BracketError(RuntimeError):
    """No sign change found while scanning for a bracket."""


def bisect(f: Callable[[float], float], lo: float, hi: float,
           xtol: float = TIME_TOL, max_iter: int = MAX_ITER) -> float:
    """Root of ``f`` in ``[lo, hi]``; ``f(lo)`` and ``f(hi)`` must not share a sign."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}] (f(lo)={flo}, f(hi)={fhi})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < xtol:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def solve_increasing(f: Callable[[float], float], limit: float,
                     xtol: float = TIME_TOL) -> float | None:
    """First root of an increasing ``f`` on ``[0, limit]``.

    The bracket is established by a doubling scan from 0.  Returns ``None``
    when ``f`` stays negative on the whole interval (root unreachable).
    """
    f0 = f(0.0)
    if f0 >= 0.0:
        return 0.0
    if f(limit) < 0.0:
        return None
    lo = 0.0
    hi = min(limit, max(xtol, limit / 1024.0))
    while f(hi) < 0.0:
        lo = hi
        hi = min(2.0 * hi, limit)
    return bisect(f, lo, hi, xtol=xtol)
