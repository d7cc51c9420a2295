r"""Modified Bessel functions of the first kind and the ratio functions built on them.

The central object is the ratio

.. math::
    P_n(r) = \frac{I_{n+1}(r)}{r I_n(r)},

evaluated by downward recurrence ``P_n = 1 / (r^2 P_{n+1} + 2(n+1))``. The
recurrence contracts in the downward direction, so a crude tail seed is
forgotten geometrically fast. Every closed form elsewhere in the package is
expressed through ``P_n`` and ``I_n``.

All functions accept scalars or numpy arrays for the radial argument and
return the same shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from tumordelay.errors import DomainError

# Below this argument the power series is used verbatim. All terms are
# positive, so there is no cancellation; the limit only guards overflow.
SERIES_MAX = 700.0
START_OFFSET = 40


def _as_radius(r, *, positive: bool = False) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("radial argument must be finite")
    if positive:
        if np.any(arr <= 0.0):
            raise DomainError("radial argument must be positive")
    elif np.any(arr < 0.0):
        raise DomainError("radial argument must be nonnegative")
    return arr


def _check_order(n: int, minimum: int = 0) -> int:
    if int(n) != n or n < minimum:
        raise DomainError(f"order must be an integer >= {minimum}, got {n!r}")
    return int(n)


def _unwrap(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def bessel_i(n: int, r):
    """Modified Bessel function ``I_n(r)`` for integer ``n >= 0`` and ``r >= 0``.

    Summed from the defining power series with term-ratio termination at a
    relative size of 1e-17.

    Raises
    ------
    DomainError
        For negative or non-finite ``r``, or ``r`` beyond the overflow limit.
    """
    n = _check_order(n)
    x = _as_radius(r)
    if np.any(x > SERIES_MAX):
        raise DomainError(f"I_n overflows double precision for r > {SERIES_MAX}")
    half = 0.5 * x
    q = half * half
    term = half**n / math.factorial(n)
    total = term.copy()
    k = 0
    while True:
        k += 1
        term = term * q / (k * (n + k))
        total = total + term
        # terms peak near k ~ r/2; only stop once past the peak
        if k > 2 and np.all(term <= 1e-17 * total):
            break
        if k > 4000:
            raise DomainError("bessel series failed to terminate")
    return _unwrap(total, r)


def bessel_i_derivative(n: int, r, order: int = 1):
    r"""``d^k I_n / dr^k`` from the binomial expansion of ``I_n' = (I_{n-1}+I_{n+1})/2``.

    Uses ``I_{-m} = I_m`` for integer orders, so no division by ``r`` occurs
    and the result is exact up to rounding at ``r = 0``.
    """
    n = _check_order(n)
    x = _as_radius(r)
    out = np.zeros_like(x)
    for j in range(order + 1):
        out = out + math.comb(order, j) * np.asarray(bessel_i(abs(n - order + 2 * j), x))
    return _unwrap(out / 2.0**order, r)


def bessel_i_asymptotic(n: int, r):
    """Large-argument form of ``I_n`` keeping the first two correction terms."""
    n = _check_order(n)
    x = _as_radius(r, positive=True)
    m = 4.0 * n * n
    corr = 1.0 - (m - 1.0) / (8.0 * x) + (m - 1.0) * (m - 9.0) / (2.0 * (8.0 * x) ** 2)
    return _unwrap(np.exp(x) / np.sqrt(2.0 * np.pi * x) * corr, r)


def pn_table(n_max: int, r, *, start_offset: int = START_OFFSET, tail_seed: float | None = None):
    """All ratios ``P_0 .. P_{n_max}`` from a single downward sweep.

    Parameters
    ----------
    n_max : int
        Highest order returned.
    r : float or array_like
        Nonnegative argument.
    start_offset : int
        The sweep starts at order ``n_max + start_offset + ceil(max r)``.
    tail_seed : float, optional
        Override for the seed at the starting order. The default is the
        ``r = 0`` value ``1 / (2 N + 2)``.

    Returns
    -------
    ndarray
        Shape ``(n_max + 1,) + shape(r)``.
    """
    n_max = _check_order(n_max)
    x = _as_radius(r)
    x2 = x * x
    r_top = float(np.max(x)) if x.size else 0.0
    start = max(n_max + int(start_offset) + int(math.ceil(r_top)), n_max + 1)
    p = np.full_like(x, 1.0 / (2 * start + 2) if tail_seed is None else tail_seed)
    out = np.empty((n_max + 1,) + x.shape)
    for k in range(start - 1, -1, -1):
        p = 1.0 / (x2 * p + 2.0 * (k + 1))
        if k <= n_max:
            out[k] = p
    return out


def pn(n: int, r, **kwargs):
    """Bessel ratio ``P_n(r) = I_{n+1}(r) / (r I_n(r))``, with ``P_n(0) = 1/(2n+2)``."""
    n = _check_order(n)
    table = pn_table(n, r, **kwargs)
    return _unwrap(table[n], r)


def pn_derivative(n: int, r):
    """``P_n'(r) = 1/r - 2(n+1) P_n / r - r P_n^2`` for ``r > 0``."""
    x = _as_radius(r, positive=True)
    p = np.asarray(pn(n, x))
    return _unwrap(1.0 / x - 2.0 * (n + 1) * p / x - x * p * p, r)


def gn(n: int, r):
    """``G_n(r) = r^2 (P_1(r) - P_n(r))`` for ``n >= 2`` and ``r > 0``."""
    n = _check_order(n, 2)
    x = _as_radius(r, positive=True)
    table = pn_table(n, x)
    return _unwrap(x * x * (table[1] - table[n]), r)


def hn(n: int, x):
    """``h_n(x) = n/x + x P_n(x)`` for ``x > 0``; equals ``I_n'(x) / I_n(x)``."""
    n = _check_order(n)
    y = _as_radius(x, positive=True)
    return _unwrap(n / y + y * np.asarray(pn(n, y)), x)


def positive_combination(n: int, s1: float, s2: float, r) -> np.ndarray:
    """``S1 P_{n+1}(r) - S2 P_n(r)``; positive on ``r > 0`` whenever positive at 0."""
    table = pn_table(n + 1, r)
    return s1 * table[n + 1] - s2 * table[n]


# --------------------------------------------------------------------------
# identity residuals

@dataclass
class ResidualTable:
    """Per-point residuals of the Bessel identities.

    ``rows`` holds ``(identity_id, n, r, residual)``. Inequality checks store
    the signed slack (positive when the inequality holds) instead of a
    residual; their ids are listed in ``inequalities``.
    """

    rows: list[tuple[str, int, float, float]] = field(default_factory=list)
    inequalities: frozenset[str] = frozenset({"turan_upper", "turan_lower"})

    def add(self, ident: str, n: int, r: Iterable[float], values: Iterable[float]) -> None:
        for ri, vi in zip(np.atleast_1d(r), np.atleast_1d(values)):
            self.rows.append((ident, int(n), float(ri), float(vi)))

    def identities(self) -> list[str]:
        seen: dict[str, None] = {}
        for ident, *_ in self.rows:
            seen.setdefault(ident, None)
        return list(seen)

    def max_residual(self, ident: str) -> float:
        vals = [v for i, _, _, v in self.rows if i == ident]
        return max(vals) if vals else float("nan")

    def min_slack(self, ident: str) -> float:
        vals = [v for i, _, _, v in self.rows if i == ident]
        return min(vals) if vals else float("nan")

    def summary(self) -> dict[str, float]:
        out = {}
        for ident in self.identities():
            out[ident] = self.min_slack(ident) if ident in self.inequalities else self.max_residual(ident)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["identity-id", "n", "r", "residual"])
            for ident, n, r, v in self.rows:
                writer.writerow([ident, n, f"{r:.17g}", f"{v:.17g}"])


# identity id -> (short description, tier); tier "exact" uses only closed
# forms, tier "fd" differentiates numerically
IDENTITIES = {
    "bessel_ode": ("I_n'' + I_n'/r - (1 + n^2/r^2) I_n = 0", "exact"),
    "recurrence": ("I_{n+1} = I_{n-1} - (2n/r) I_n", "exact"),
    "derivative_lower": ("I_n' + (n/r) I_n = I_{n-1}", "exact"),
    "derivative_upper": ("I_n' - (n/r) I_n = I_{n+1}", "exact"),
    "turan_upper": ("I_{n-1} I_{n+1} < I_n^2", "inequality"),
    "turan_lower": ("I_{n-1} I_{n+1} > I_n^2 - (2/r) I_n I_{n+1}", "inequality"),
    "product_series_m0": ("I_0 I_n equals its product power series", "exact"),
    "product_series_m1": ("I_1 I_n equals its product power series", "exact"),
    "product_series_m2": ("I_2 I_n equals its product power series", "exact"),
    "product_series_m3": ("I_3 I_n equals its product power series", "exact"),
    "bessel_ode_fd": ("I_n ODE with numerically differentiated I_n", "fd"),
    "derivative_lower_fd": ("lowering relation, numerical I_n'", "fd"),
    "derivative_upper_fd": ("raising relation, numerical I_n'", "fd"),
    "d_r_I1": ("d/dr [r I_1] = r I_0", "fd"),
    "d_r2I0_2rI1": ("d/dr [r^2 I_0 - 2 r I_1] = r^2 I_1", "fd"),
    "d_quadratic": ("d/dr [r^2 (I_1^2 - I_0^2)/2 + r I_0 I_1] = r I_1^2", "fd"),
    "L1_r_1m2I2": ("L_1 (r [1 - 2 I_2]) = 2 r I_0", "fd"),
    "L1_quadratic": ("L_1 (r [I_0 I_2 - I_1^2]) = 4 I_1 [I_0 - I_1/r]", "fd"),
}


def _rel(terms: list[np.ndarray]) -> np.ndarray:
    """Residual of ``sum(terms) = 0`` relative to the largest term."""
    total = np.zeros_like(terms[0])
    scale = np.zeros_like(terms[0])
    for t in terms:
        total = total + t
        scale = np.maximum(scale, np.abs(t))
    return np.abs(total) / np.where(scale > 0, scale, 1.0)


def fd_first(f: Callable, r: np.ndarray) -> np.ndarray:
    """Central difference with step ``1e-5 * max(1, r)``."""
    h = 1e-5 * np.maximum(1.0, r)
    return (f(r + h) - f(r - h)) / (2.0 * h)


def fd_second(f: Callable, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order five-point first and second derivatives.

    The step ``1e-3 * max(1, r)`` keeps the rounding error of the second
    difference near 1e-10 relative.
    """
    h = 1e-3 * np.maximum(1.0, r)
    h = np.minimum(h, 0.5 * r)
    fm2, fm1, f0, fp1, fp2 = f(r - 2 * h), f(r - h), f(r), f(r + h), f(r + 2 * h)
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
    return d1, d2


def _l1_residual(u: Callable, rhs: np.ndarray, r: np.ndarray) -> np.ndarray:
    d1, d2 = fd_second(u, r)
    return _rel([-d2, -d1 / r, u(r) / r**2, -rhs])


def _product_series(m: int, n: int, r: np.ndarray) -> np.ndarray:
    total = np.zeros_like(r)
    half = 0.5 * r
    for k in range(400):
        logc = (math.lgamma(m + n + 2 * k + 1) - math.lgamma(k + 1) - math.lgamma(m + k + 1)
                - math.lgamma(n + k + 1) - math.lgamma(m + n + k + 1))
        term = np.exp(logc + (m + n + 2 * k) * np.log(half))
        total = total + term
        if k > r.max() and np.all(term <= 1e-17 * total):
            break
    return total


def identity_residuals(r_grid, n_max: int) -> ResidualTable:
    """Residuals of the Bessel identities over a radial grid and orders ``<= n_max``.

    Algebraic identities use ``I_n' = (I_{n-1} + I_{n+1})/2`` for the exact
    tier; the ``*_fd`` identities and the derivative identities of the
    ``r I_1`` / ``L_1`` family use central finite differences of the
    closed-form left-hand sides. Residuals are relative to the largest term.
    """
    r = _as_radius(r_grid, positive=True)
    if np.any(r > 30.0):
        raise DomainError("identity grid must lie in (0, 30]")
    if n_max > 64:
        raise DomainError("n_max must be <= 64")
    table = ResidualTable()
    I = {k: np.asarray(bessel_i(k, r)) for k in range(0, n_max + 3)}

    def dI(k):
        return 0.5 * (I[abs(k - 1)] + I[k + 1])

    def d2I(k):
        return 0.25 * (I[abs(k - 2)] + 2 * I[k] + I[k + 2])

    for n in range(0, n_max + 1):
        table.add("bessel_ode", n, r, _rel([d2I(n), dI(n) / r, -I[n], -(n * n / r**2) * I[n]]))
        table.add("derivative_upper", n, r, _rel([dI(n), -(n / r) * I[n], -I[n + 1]]))

        def In(x, k=n):
            return np.asarray(bessel_i(k, x))

        d1, d2 = fd_second(In, r)
        table.add("bessel_ode_fd", n, r, _rel([d2, d1 / r, -I[n], -(n * n / r**2) * I[n]]))
        fd = fd_first(In, r)
        table.add("derivative_upper_fd", n, r, _rel([fd, -(n / r) * I[n], -I[n + 1]]))
        if n >= 1:
            table.add("recurrence", n, r, _rel([I[n + 1], -I[n - 1], (2 * n / r) * I[n]]))
            table.add("derivative_lower", n, r, _rel([dI(n), (n / r) * I[n], -I[n - 1]]))
            table.add("derivative_lower_fd", n, r, _rel([fd, (n / r) * I[n], -I[n - 1]]))
            sq = I[n] ** 2
            table.add("turan_upper", n, r, (sq - I[n - 1] * I[n + 1]) / sq)
            table.add("turan_lower", n, r, (I[n - 1] * I[n + 1] - sq + (2 / r) * I[n] * I[n + 1]) / sq)

    for m in range(0, 4):
        for n in range(m, 7 - m):
            prod = np.asarray(bessel_i(m, r)) * np.asarray(bessel_i(n, r))
            table.add(f"product_series_m{m}", n, r, _rel([prod, -_product_series(m, n, r)]))

    def i0(x):
        return np.asarray(bessel_i(0, x))

    def i1(x):
        return np.asarray(bessel_i(1, x))

    def i2(x):
        return np.asarray(bessel_i(2, x))

    table.add("d_r_I1", 1, r, _rel([fd_first(lambda x: x * i1(x), r), -r * I[0]]))
    table.add("d_r2I0_2rI1", 1, r,
              _rel([fd_first(lambda x: x * x * i0(x) - 2 * x * i1(x), r), -r * r * I[1]]))
    table.add("d_quadratic", 1, r, _rel([
        fd_first(lambda x: 0.5 * x * x * (i1(x) ** 2 - i0(x) ** 2) + x * i0(x) * i1(x), r),
        -r * I[1] ** 2,
    ]))
    table.add("L1_r_1m2I2", 1, r, _l1_residual(lambda x: x * (1 - 2 * i2(x)), 2 * r * I[0], r))
    table.add("L1_quadratic", 1, r, _l1_residual(
        lambda x: x * (i0(x) * i2(x) - i1(x) ** 2), 4 * I[1] * (I[0] - I[1] / r), r))
    return table
