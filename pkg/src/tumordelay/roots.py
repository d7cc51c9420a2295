"""Bracketing root finders used for the stationary radius and the critical radius."""

from __future__ import annotations

from typing import Callable

from tumordelay.errors import ConvergenceError


def expand_bracket(f: Callable[[float], float], lo: float, hi: float, *, max_doublings: int = 60):
    """Double ``hi`` until ``f`` changes sign on ``[lo, hi]``."""
    flo = f(lo)
    fhi = f(hi)
    for _ in range(max_doublings):
        if flo == 0.0 or fhi == 0.0 or (flo > 0) != (fhi > 0):
            return lo, hi, flo, fhi
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = f(hi)
    raise ConvergenceError(f"no sign change found up to {hi:g}")


def bisect(f: Callable[[float], float], lo: float, hi: float, *, xtol: float = 1e-13,
           flo: float | None = None, max_iter: int = 400) -> float:
    """Plain bisection on a sign-changing bracket until its width is below ``xtol``."""
    flo = f(lo) if flo is None else flo
    if flo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise ConvergenceError("bisection did not reach the requested width")


def newton_polish(f: Callable[[float], float], df: Callable[[float], float], x: float,
                  steps: int = 2) -> float:
    """A fixed number of Newton steps, keeping the iterate if a step misbehaves."""
    for _ in range(steps):
        d = df(x)
        if d == 0.0:
            break
        x_new = x - f(x) / d
        if not x_new > 0.0:
            break
        x = x_new
    return x
