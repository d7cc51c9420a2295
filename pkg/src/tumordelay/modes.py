"""Zeroth-order linear stability of the stationary disk, mode by mode.

A boundary perturbation ``rho_n(t) cos(n theta)`` evolves, at zeroth order in
the delay, as ``exp[(-A_n + mu B_n) t]``. Mode 0 always decays, mode 1 (a
translation) is neutral, and modes ``n >= 2`` are stable exactly when
``mu < A_n / B_n``. The smallest of these thresholds is the one for mode 2.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from tumordelay.besselkit import pn_table
from tumordelay.errors import DomainError
from tumordelay.roots import bisect

N_MAX = 64


@functools.total_ordering
class _Unbounded:
    """Threshold of the modes that are stable for every ``mu``.

    Compares above every real number so ``min`` over thresholds ignores it,
    but is not itself a float.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("unbounded")

    def __float__(self):
        return math.inf

    def __repr__(self):
        return "UNBOUNDED"


UNBOUNDED = _Unbounded()


def _ratios(n: int, r0: float):
    return pn_table(max(n, 2) + 1, r0)


def coeff_a(n: int, r0: float) -> float:
    """Surface-tension rate ``n (n^2 - 1) / r0^3``."""
    if n < 0:
        raise DomainError("mode number must be nonnegative")
    return n * (n * n - 1) / r0**3


def coeff_b(n: int, r0: float, alpha: float, sigma_bar: float) -> float:
    """Proliferation coefficient multiplying ``mu`` in the mode growth rate."""
    if n < 0:
        raise DomainError("mode number must be nonnegative")
    t = _ratios(n, r0)
    p0, p1, p = t[0], t[1], t[n]
    h = n / r0 + r0 * p
    front = alpha * sigma_bar * r0 * p0 / (alpha + r0 * p0)
    return float(front * (n * p1 - p + alpha * r0 * (p1 - p)) / (h + alpha))


def growth_rate(n: int, mu: float, r0: float, alpha: float, sigma_bar: float) -> float:
    """``-A_n + mu B_n``."""
    return -coeff_a(n, r0) + mu * coeff_b(n, r0, alpha, sigma_bar)


def mu_n(n: int, r0: float, alpha: float, sigma_bar: float):
    """Stability threshold of mode ``n``; ``UNBOUNDED`` for ``n`` in {0, 1}."""
    if n < 2:
        return UNBOUNDED
    t = _ratios(n, r0)
    p0, p1, p = t[0], t[1], t[n]
    lead = (alpha + r0 * p0) / (alpha * sigma_bar * r0**4 * p0)
    num = n * (n * n - 1) * (n / r0 + alpha + r0 * p)
    den = (n + alpha * r0) * p1 - (1 + alpha * r0) * p
    return float(lead * num / den)


def mu_star(r0: float, alpha: float, sigma_bar: float) -> float:
    """Linear stability threshold, the mode-2 value."""
    return mu_n(2, r0, alpha, sigma_bar)


def mu_star_exhaustive(r0: float, alpha: float, sigma_bar: float, n_max: int = N_MAX) -> float:
    """Minimum of the thresholds over ``n = 0..n_max``, by enumeration."""
    return float(min(mu_n(n, r0, alpha, sigma_bar) for n in range(0, n_max + 1)))


def q_functions(n: int, r):
    """The three coefficient functions whose positivity orders the thresholds in ``n``."""
    t = pn_table(n + 1, r)
    p1, p, pp = t[1], t[n], t[n + 1]
    r2 = np.asarray(r, dtype=float) ** 2
    q1 = 3 * p1 - (n + 2) * p + (n - 1) * pp
    q2 = ((6 * n + 3) * p1 - (n + 2) ** 2 * p + (n * n - 1) * pp
          - (n - 1) * r2 * p1 * p + (n + 2) * r2 * p1 * pp - 3 * r2 * p * pp)
    q3 = (3 * n * (n + 1) * p1 - (n + 1) * (n + 2) * p + n * (n - 1) * pp
          - (n * n - 1) * r2 * p1 * p + n * (n + 2) * r2 * p1 * pp - 3 * r2 * p * pp)
    return q1, q2, q3


def e_functions(x):
    """Coefficients ``(E0, E1, E2)`` of the numerator of ``d mu_star / d alpha`` as a quadratic in alpha."""
    p0, p1, p2 = pn_table(2, x)[:3]
    x = np.asarray(x, dtype=float)
    e0 = -x * p0 * (x * p2 + 2 / x) * (2 * p1 - p2)
    e1 = -2 * x * p0 * (2 + x * x * p2) * (p1 - p2)
    e2 = (p0 + p2) * (p2 / (p0 + p2) - x * x * (p1 - p2))
    if e0.ndim == 0:
        return float(e0), float(e1), float(e2)
    return e0, e1, e2


def dmu_star_dalpha(r0: float, alpha: float, sigma_bar: float) -> float:
    """Closed-form ``d mu_star / d alpha`` through the E polynomial."""
    p0, p1, p2 = pn_table(2, r0)[:3]
    e0, e1, e2 = e_functions(r0)
    e = e0 + e1 * alpha + e2 * alpha**2
    den = alpha**2 * (2 * p1 - p2 + alpha * r0 * (p1 - p2)) ** 2
    return float(6.0 / (sigma_bar * r0**4 * p0) * e / den)


def dmu_star_dalpha_fd(r0: float, alpha: float, sigma_bar: float, rel_step: float = 1e-5) -> float:
    """Central finite difference of ``mu_star`` in ``alpha``."""
    h = rel_step * alpha
    return (mu_star(r0, alpha + h, sigma_bar) - mu_star(r0, alpha - h, sigma_bar)) / (2 * h)


def critical_radius(lo: float = 1.0, hi: float = 4.0, xtol: float = 1e-10) -> float:
    """Radius above which ``mu_star`` decreases in ``alpha``: the sign change of ``E2``."""
    return bisect(lambda x: e_functions(x)[2], lo, hi, xtol=xtol)


def decay_bound(n: int, mu: float, r0: float, alpha: float, sigma_bar: float) -> float:
    """Uniform constant ``delta2`` with ``rate(m) <= -delta2 m^3`` for all ``m >= 2``.

    The constant does not depend on ``n``; it is accepted so callers can pass
    the mode they are bounding.

    Raises
    ------
    DomainError
        If ``n < 2`` or unless ``0 < mu < mu_star``.
    """
    if n < 2:
        raise DomainError("decay bound applies to modes n >= 2")
    ms = mu_star(r0, alpha, sigma_bar)
    if not 0 < mu < ms:
        raise DomainError(f"decay bound needs 0 < mu < mu_star = {ms:.6g}")
    return 0.75 * (1.0 - mu / ms) / r0**3


def rho0_trajectory(n: int, rho_init: float, mu: float, r0: float, alpha: float, sigma_bar: float,
                    t_grid) -> np.ndarray:
    """Closed-form zeroth-order amplitude ``rho_n(0) exp(rate t)``."""
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise DomainError("t_grid must be nonnegative and increasing")
    return rho_init * np.exp(growth_rate(n, mu, r0, alpha, sigma_bar) * t)


def rho0_integrate(n: int, rho_init: float, mu: float, r0: float, alpha: float, sigma_bar: float,
                   t_end: float, dt: float) -> float:
    """RK4 integration of the zeroth-order mode ODE; cross-checks the closed form."""
    rate = growth_rate(n, mu, r0, alpha, sigma_bar)
    steps = max(1, int(math.ceil(t_end / dt)))
    h = t_end / steps
    y = rho_init
    for _ in range(steps):
        k1 = rate * y
        k2 = rate * (y + 0.5 * h * k1)
        k3 = rate * (y + 0.5 * h * k2)
        k4 = rate * (y + h * k3)
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


@dataclass
class ModeReport:
    n: int
    a_n: float
    b_n: float
    mu_n: object
    rate: float
    delta2: float

    def row(self) -> dict:
        return {"n": self.n, "a_n": self.a_n, "b_n": self.b_n, "mu_n": float(self.mu_n),
                "rate": self.rate, "delta2": self.delta2}


def mode_report(n: int, mu: float, r0: float, alpha: float, sigma_bar: float) -> ModeReport:
    ms = mu_star(r0, alpha, sigma_bar)
    delta2 = decay_bound(2, mu, r0, alpha, sigma_bar) if 0 < mu < ms else 0.0
    return ModeReport(n, coeff_a(n, r0), coeff_b(n, r0, alpha, sigma_bar), mu_n(n, r0, alpha, sigma_bar),
                      growth_rate(n, mu, r0, alpha, sigma_bar), delta2)


def stability_map(alphas, r0s, mu: float, sigma_bar: float) -> list[dict]:
    """Rows ``(alpha, r0, mu_star, rate_n2, delta2, dmu_dalpha, mu_star_decreasing)`` over a grid."""
    rows = []
    for r0 in np.atleast_1d(r0s):
        for a in np.atleast_1d(alphas):
            ms = mu_star(float(r0), float(a), sigma_bar)
            d = dmu_star_dalpha(float(r0), float(a), sigma_bar)
            rows.append({
                "alpha": float(a),
                "r0": float(r0),
                "mu_star": ms,
                "rate_n2": growth_rate(2, mu, float(r0), float(a), sigma_bar),
                "delta2": 0.75 * (1 - mu / ms) / float(r0) ** 3 if mu < ms else float("nan"),
                "dmu_dalpha": d,
                "mu_star_decreasing": int(d < 0),
            })
    return rows
