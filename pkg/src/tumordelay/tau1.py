"""First-order-in-delay corrections to the linearized mode dynamics.

Each boundary mode ``cos(n theta)`` carries an amplitude ``rho_n = rho0_n +
tau rho1_n``. The zeroth-order part is a pure exponential. The first-order
part obeys a linear ODE whose forcing comes from three radial boundary-value
problems ``L_n u = f`` with ``u(R) = 0``, where

    L_n = -d^2/dr^2 - (1/r) d/dr + n^2 / r^2.

Those are solved here by a Green's-function quadrature that builds the
regularity condition at ``r = 0`` into the kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from tumordelay.besselkit import bessel_i, bessel_i_derivative, pn_table
from tumordelay.errors import DomainError
from tumordelay.modes import coeff_a, coeff_b, growth_rate
from tumordelay.profile import RadialProfile, write_columns
from tumordelay.stationary import ModelParams, StationaryReport, nutrient_amplitude

N_CELLS = 2048
GAUSS_POINTS = 6


# --------------------------------------------------------------------------
# the radial operator L_n

@dataclass
class LnBvp:
    """``L_n u = forcing`` on ``(0, radius)`` with ``u(radius) = boundary_value``, ``u`` bounded at 0."""

    n: int
    radius: float
    forcing: RadialProfile | Callable
    boundary_value: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("mode number must be nonnegative")
        if not self.radius > 0:
            raise DomainError("radius must be positive")


class _GreenIntegrals:
    """Cumulative Green's-function integrals of ``s f(s)`` on a uniform cell grid.

    For ``n >= 1`` the two weighted integrals

        A(r) = int_0^r (s/r)^n s f ds,   B(r) = int_r^R (r/s)^n s f ds

    are accumulated cell by cell with factors ``(r_k / r_{k+1})^n <= 1``, so
    the recursion never amplifies rounding. For ``n = 0`` the weights are
    ``1`` and ``log(R/s)``.
    """

    def __init__(self, n: int, radius: float, f: Callable, n_cells: int, gauss_points: int):
        self.n, self.radius, self.f = n, radius, f
        self.nodes = np.linspace(0.0, radius, n_cells + 1)
        self.nodes[-1] = radius
        self.gx, self.gw = leggauss(gauss_points)
        lo, hi = self.nodes[:-1], self.nodes[1:]
        half = 0.5 * (hi - lo)
        s = lo[:, None] + half[:, None] * (self.gx[None, :] + 1.0)
        fs = np.asarray(f(s), dtype=float)
        if fs.shape != s.shape:
            fs = np.broadcast_to(fs, s.shape)
        if not np.all(np.isfinite(fs)):
            raise DomainError("forcing is not finite on (0, radius)")
        probe = np.asarray(f(np.array([radius * 1e-9])), dtype=float)
        if not np.all(np.isfinite(probe)) or np.max(np.abs(probe)) > 1e6 * (1.0 + np.max(np.abs(fs))):
            raise DomainError("forcing is singular at r = 0")
        wsf = half[:, None] * self.gw[None, :] * s * fs
        self.lower = np.zeros(n_cells + 1)
        self.upper = np.zeros(n_cells + 1)
        if n == 0:
            self.lower[1:] = np.cumsum(wsf.sum(axis=1))
            tail = (wsf * np.log(radius / s)).sum(axis=1)
            # the log weight is singular at the origin; grade the first cell
            tail[0] = self._graded_log(lo[:1], hi[:1])[0]
            self.upper[:-1] = np.cumsum(tail[::-1])[::-1]
            return
        with np.errstate(divide="ignore"):
            shrink = (lo / hi) ** n
            cell_a = (wsf * (s / hi[:, None]) ** n).sum(axis=1)
            cell_b = (wsf * (lo[:, None] / s) ** n).sum(axis=1)
        for k in range(n_cells):
            self.lower[k + 1] = shrink[k] * self.lower[k] + cell_a[k]
        for k in range(n_cells - 1, -1, -1):
            self.upper[k] = shrink[k] * self.upper[k + 1] + cell_b[k]

    def _partial(self, a, b, weight):
        half = 0.5 * (b - a)
        s = a[:, None] + half[:, None] * (self.gx[None, :] + 1.0)
        fs = np.broadcast_to(np.asarray(self.f(s), dtype=float), s.shape)
        return (half[:, None] * self.gw[None, :] * s * fs * weight(s)).sum(axis=1)

    def _graded_log(self, a, b, levels: int = 48):
        """``int_a^b s f log(R/s) ds`` on dyadic pieces shrinking toward ``a``.

        Each piece is no wider than its distance from ``a``, so Gauss-Legendre
        stays accurate even when ``a`` sits on the logarithmic singularity.
        """
        log_w = lambda s: np.log(self.radius / s)  # noqa: E731
        width = b - a
        total = np.zeros_like(a)
        for j in range(levels):
            total += self._partial(a + width * 0.5 ** (j + 1), a + width * 0.5**j, log_w)
        return total + self._partial(a, a + width * 0.5**levels, log_w)

    def at(self, r):
        """``(A(r), B(r))`` for ``n >= 1`` or ``(M(r), N(r))`` for ``n = 0``, at arbitrary ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > self.radius * (1 + 1e-14)):
            raise DomainError("evaluation radius outside [0, radius]")
        k = np.clip(np.searchsorted(self.nodes, r, side="right") - 1, 0, len(self.nodes) - 2)
        lo, hi = self.nodes[k], self.nodes[k + 1]
        n, radius = self.n, self.radius
        if n == 0:
            low = self.lower[k] + self._partial(lo, r, lambda s: 1.0)
            up = self.upper[k + 1] + self._partial(r, hi, lambda s: np.log(radius / s))
            near = lo == 0.0
            if np.any(near):
                up[near] = self.upper[1] + self._graded_log(r[near], hi[near])
            return low, up
        safe = np.where(r > 0, r, 1.0)
        low = (lo / safe) ** n * self.lower[k] + self._partial(lo, r, lambda s: (s / safe[:, None]) ** n)
        up = (r / hi) ** n * self.upper[k + 1] + self._partial(r, hi, lambda s: (r[:, None] / s) ** n)
        return np.where(r > 0, low, 0.0), np.where(r > 0, up, 0.0)


def ln_solve(problem: LnBvp, n_cells: int = N_CELLS, gauss_points: int = GAUSS_POINTS) -> RadialProfile:
    """Solve ``L_n u = f``, ``u(R) = b``, ``u`` bounded at the origin.

    The solution is written through the homogeneous pair ``r^n, r^-n``
    (``1, log r`` for ``n = 0``) as

        u = b (r/R)^n + [A(r) + B(r) - (r/R)^n A(R)] / (2n)
        u = b + log(R/r) M(r) + N(r)                          (n = 0)

    with cumulative integrals evaluated by Gauss-Legendre quadrature on each
    cell of a uniform grid. The returned profile evaluates exactly at any
    radius through ``func`` and ``dfunc``.

    Raises
    ------
    DomainError
        If the forcing is not finite or blows up at the origin.
    """
    n, radius, b = problem.n, float(problem.radius), float(problem.boundary_value)
    f = problem.forcing
    green = _GreenIntegrals(n, radius, f, n_cells, gauss_points)
    a_total = green.lower[-1]

    if n == 0:
        def u(r):
            r_arr = np.asarray(r, dtype=float)
            low, up = green.at(r_arr)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = b + np.where(low != 0, np.log(radius / np.atleast_1d(r_arr)) * low, 0.0) + up
            return val.reshape(r_arr.shape) if r_arr.ndim else float(val[0])

        def du(r):
            r_arr = np.asarray(r, dtype=float)
            low, _ = green.at(r_arr)
            rr = np.atleast_1d(r_arr)
            val = np.where(rr > 0, -low / np.where(rr > 0, rr, 1.0), 0.0)
            return val.reshape(r_arr.shape) if r_arr.ndim else float(val[0])
    else:
        # u'(0) is nonzero only for n = 1, where B(r)/r tends to int_0^R f
        if n == 1:
            origin_slope = b / radius + 0.5 * quad_total(f, radius, green) - 0.5 * a_total / radius
        else:
            origin_slope = 0.0

        def u(r):
            r_arr = np.asarray(r, dtype=float)
            rr = np.atleast_1d(r_arr)
            low, up = green.at(rr)
            ratio = (rr / radius) ** n
            val = b * ratio + (low + up - ratio * a_total) / (2 * n)
            return val.reshape(r_arr.shape) if r_arr.ndim else float(val[0])

        def du(r):
            r_arr = np.asarray(r, dtype=float)
            rr = np.atleast_1d(r_arr)
            low, up = green.at(rr)
            safe = np.where(rr > 0, rr, 1.0)
            scale = safe ** (n - 1) / radius**n
            val = n * b * scale + (up - low) / (2 * safe) - 0.5 * scale * a_total
            val = np.where(rr > 0, val, origin_slope)
            return val.reshape(r_arr.shape) if r_arr.ndim else float(val[0])

    nodes = green.nodes
    values = u(nodes)
    deriv = du(nodes)
    return RadialProfile(radius, nodes, values, float(deriv[-1]), deriv, u, du)


def quad_total(f: Callable, radius: float, green: _GreenIntegrals) -> float:
    """``int_0^R f(s) ds`` on the Green's-function cell grid."""
    lo, hi = green.nodes[:-1], green.nodes[1:]
    half = 0.5 * (hi - lo)
    s = lo[:, None] + half[:, None] * (green.gx[None, :] + 1.0)
    fs = np.broadcast_to(np.asarray(f(s), dtype=float), s.shape)
    return float((half[:, None] * green.gw[None, :] * fs).sum())


def _fd_derivatives(u: Callable, r: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Five-point first and second differences with the stencil kept inside ``[0, radius]``."""
    h = np.minimum(2e-4 * np.maximum(1.0, r), np.minimum(r, radius - r) / 2)
    um2, um1, u0, up1, up2 = u(r - 2 * h), u(r - h), u(r), u(r + h), u(r + 2 * h)
    d1 = (um2 - 8 * um1 + 8 * up1 - up2) / (12 * h)
    d2 = (-um2 + 16 * um1 - 30 * u0 + 16 * up1 - up2) / (12 * h * h)
    return d1, d2


def ln_residual(problem: LnBvp, solution: RadialProfile, r) -> np.ndarray:
    """Relative residual of ``L_n u - f`` by five-point finite differences.

    Each residual is divided by the largest of the terms ``|u''|``,
    ``|u'/r|``, ``|n^2 u / r^2|`` and ``|f|`` at that radius.
    """
    r = np.asarray(r, dtype=float)
    d1, d2 = _fd_derivatives(solution, r, problem.radius)
    u = solution(r)
    f = np.asarray(problem.forcing(r), dtype=float)
    terms = [-d2, -d1 / r, problem.n**2 * u / r**2, -f]
    scale = np.max(np.abs(np.stack(terms)), axis=0)
    return np.abs(sum(terms)) / np.where(scale > 0, scale, 1.0)


# --------------------------------------------------------------------------
# zeroth- and first-order mode quantities

@dataclass
class ModeState:
    """Mode amplitudes at one instant: zeroth- and first-order in the delay."""

    rho0: float
    rho1: float


class FirstOrderMode:
    """Closed-form coefficients and Green's-function pieces for one mode ``n``.

    All perturbation quantities are linear in ``(rho0, rho1)``; the methods
    take the amplitudes explicitly.
    """

    def __init__(self, n: int, params: ModelParams, stationary: StationaryReport,
                 n_cells: int = N_CELLS):
        if n < 0:
            raise DomainError("mode number must be nonnegative")
        self.n, self.params, self.n_cells = n, params, n_cells
        R = self.r0 = stationary.r0
        self.r1 = stationary.r1
        a, mu = params.alpha, params.mu
        table = pn_table(max(n, 1) + 1, R)
        self.p0, self.p1, self.pn = float(table[0]), float(table[1]), float(table[n])
        self.c = nutrient_amplitude(a, params.sigma_bar, R)
        self.lam = stationary.lam
        self.h = n / R + R * self.pn
        self.kappa = self.lam / (a + self.h)
        self.i0R = float(bessel_i(0, R))
        self.inR = float(bessel_i(n, R))
        self.k_mode = (n * n - 1) / R**2 - mu * self.kappa
        self.rate0 = growth_rate(n, mu, R, a, params.sigma_bar)
        self._unit = None

    # zeroth order ----------------------------------------------------------
    def omega0(self, r, rho0=1.0):
        return -self.kappa * np.asarray(bessel_i(self.n, r)) / self.inR * rho0

    def omega0_r(self, r, rho0=1.0):
        return -self.kappa * np.asarray(bessel_i_derivative(self.n, r)) / self.inR * rho0

    def omega0_rr(self, r, rho0=1.0):
        return -self.kappa * np.asarray(bessel_i_derivative(self.n, r, 2)) / self.inR * rho0

    def q0(self, r, rho0=1.0):
        r = np.asarray(r, dtype=float)
        return -self.params.mu * self.omega0(r, rho0) + self.k_mode * (r / self.r0) ** self.n * rho0

    def q0_r(self, r, rho0=1.0):
        r = np.asarray(r, dtype=float)
        n = self.n
        poly = n * r ** max(n - 1, 0) / self.r0**n if n > 0 else 0.0 * r
        return -self.params.mu * self.omega0_r(r, rho0) + self.k_mode * poly * rho0

    def q0_rr_boundary(self, rho0=1.0) -> float:
        """Closed form of ``q0''(r0)``."""
        n, R, mu = self.n, self.r0, self.params.mu
        return ((n * n - 1) * (n * n - n) / R**4 + mu * self.kappa * (1 - self.pn)) * rho0

    def sigma0_r(self, r):
        return self.c * np.asarray(bessel_i(1, r)) / self.i0R

    def p0_r(self, r):
        r = np.asarray(r, dtype=float)
        mu = self.params.mu
        return mu * self.params.sigma_tilde * r / 2 - mu * self.c * np.asarray(bessel_i(1, r)) / self.i0R

    def p0_rr_boundary(self) -> float:
        return self.params.mu * self.c * (2 * self.p0 - 1)

    def p0_rrr_boundary(self) -> float:
        """Closed form of ``p0'''(r0)``."""
        R = self.r0
        return -self.params.mu * self.c * R * self.p0 * (1 - self.p1)

    def p1_rr_boundary(self) -> float:
        """Closed form of ``p1''(r0)``."""
        R, a = self.r0, self.params.alpha
        num = 2 * self.p0 + R * R * self.p1 + a * R * (1 - self.p1)
        return self.params.mu * self.c * num / (a + R * self.p0) * self.p0 * self.r1

    # first order -----------------------------------------------------------
    def h_coefficient(self) -> float:
        """Coefficient ``H`` in the closed form of ``omega1``."""
        n, R, a = self.n, self.r0, self.params.alpha
        p0, p1, pn = self.p0, self.p1, self.pn
        d = a + R * p0
        first = (1 - p0 + a * R * p0) / (a + self.h) * (1 - pn + (n * n - n) / R**2 + a * self.h)
        second = ((1 - p0 - R * R * (p0 - p1) - a * R * (p0 - p1)) / d
                  - a * a * (1 - R * R * (p0 - p1)) / d) * p0
        return first + second

    def omega1_amplitude(self, rho0: float, rho1: float) -> float:
        """``omega1(r0)`` from the displayed closed form."""
        return (-self.lam * rho1 + self.c * self.h_coefficient() * self.r1 * rho0) / (self.params.alpha + self.h)

    def omega1_amplitude_from_boundary(self, rho0: float, rho1: float) -> float:
        """``omega1(r0)`` solved directly from its Robin condition, with exact Bessel derivatives."""
        R, a, r1 = self.r0, self.params.alpha, self.r1
        c, i0R = self.c, self.i0R
        s0_rr = c * bessel_i_derivative(0, R, 2) / i0R
        s0_rrr = c * bessel_i_derivative(0, R, 3) / i0R
        s1k = -self.lam * r1 / (a + R * self.p0) / i0R
        s1_r = s1k * bessel_i_derivative(0, R, 1)
        s1_rr = s1k * bessel_i_derivative(0, R, 2)
        rhs = (-(self.omega0_rr(R, rho0) + a * self.omega0_r(R, rho0)) * r1
               - self.lam * rho1
               - (s0_rrr * r1 + a * s0_rr * r1 + s1_rr + a * s1_r) * rho0)
        return float(rhs / (self.h + a))

    def omega1(self, rho0: float, rho1: float) -> RadialProfile:
        amp = self.omega1_amplitude(rho0, rho1)
        n, inR = self.n, self.inR
        return RadialProfile.from_function(
            lambda r: amp * np.asarray(bessel_i(n, r)) / inR, self.r0, self.n_cells + 1,
            lambda r: amp * np.asarray(bessel_i_derivative(n, r)) / inR)

    def forcings(self) -> tuple[Callable, Callable, Callable]:
        """Right-hand sides of the three Green problems per unit ``rho0``."""
        mu, rate = self.params.mu, self.rate0
        return (
            lambda r: mu * self.sigma0_r(r) * self.q0_r(r),
            lambda r: mu * self.omega0_r(r) * self.p0_r(r),
            lambda r: -mu * rate * self.omega0(r),
        )

    def forcing_displayed(self, r):
        """Closed form of the first forcing, written through ``P_0`` and ``P_n``."""
        r = np.asarray(r, dtype=float)
        n, R, mu = self.n, self.r0, self.params.mu
        tab = pn_table(n, r)
        inner = (mu * self.kappa * np.asarray(bessel_i(n, r)) / self.inR * (n + r * r * tab[n])
                 + self.k_mode * n * (r / R) ** n)
        return mu * self.c * np.asarray(bessel_i(0, r)) * tab[0] / self.i0R * inner

    def unit_responses(self) -> tuple[RadialProfile, RadialProfile, RadialProfile]:
        """``u1, u2, u3`` for ``rho0 = 1``; cached because every forcing is proportional to ``rho0``."""
        if self._unit is None:
            self._unit = tuple(ln_solve(LnBvp(self.n, self.r0, f, 0.0), self.n_cells) for f in self.forcings())
        return self._unit

    def c3_displayed(self, rho0: float, rho1: float) -> float:
        n, R, mu = self.n, self.r0, self.params.mu
        a = self.params.alpha
        brace = (mu / (a + self.h) * (self.c * self.h_coefficient() - self.lam * R * self.pn)
                 - (n + 2) * (n * n - 1) / R**3)
        return (self.r1 * rho0 / R**n * brace
                + ((n * n - 1) / R**2 - self.lam * mu / (a + self.h)) * rho1 / R**n)

    def u4_boundary(self, rho0: float, rho1: float) -> float:
        """Dirichlet datum of the homogeneous piece, from the first-order boundary condition."""
        n, R, mu, r1 = self.n, self.r0, self.params.mu, self.r1
        return (mu * self.omega1_amplitude(rho0, rho1) - self.q0_r(R, rho0) * r1
                + (n * n - 1) / R**2 * rho1 - 2 * (n * n - 1) / R**3 * r1 * rho0)

    def q1_boundary_value(self, rho0: float, rho1: float) -> float:
        n, R, r1 = self.n, self.r0, self.r1
        return float(-self.q0_r(R, rho0) * r1 + (n * n - 1) / R**2 * rho1
                     - 2 * (n * n - 1) / R**3 * r1 * rho0)

    def q1_boundary_slope_displayed(self, rho0: float, rho1: float, u_slopes: float) -> float:
        """Closed-form ``q1'(r0)`` given the summed boundary slopes of ``u1 + u2 + u3``."""
        n, R, mu, a = self.n, self.r0, self.params.mu, self.params.alpha
        lin = n * (n * n - 1) / R**3 + self.lam * mu * R * self.pn / (a + self.h)
        src = (mu * R * self.pn / (a + self.h) * (self.c * self.h_coefficient() + self.lam * n / R)
               + n * (n + 2) * (n * n - 1) / R**4)
        return u_slopes + lin * rho1 - src * self.r1 * rho0

    def linear_coefficient(self) -> float:
        """Coefficient ``k`` in ``d rho1/dt = -k rho1 + (forcing)``, as displayed."""
        n, R, mu, a = self.n, self.r0, self.params.mu, self.params.alpha
        return (n * (n * n - 1) / R**3 + self.lam * mu * R * self.pn / (a + self.h)
                - mu * self.c * R * R * self.p0 * self.p1)

    def q1_mode1_profile(self, rho0: float, rho1: float) -> RadialProfile:
        """Closed-form ``q1`` for the translation mode."""
        R, a, mu = self.r0, self.params.alpha, self.params.mu
        c, p0, i0R = self.c, self.p0, self.i0R
        i1R = float(bessel_i(1, R))
        g = (mu * c) ** 2 * R * p0 / i0R
        w_amp = c / i0R * (-rho1 + self.r1 * rho0 * (1 - p0 + a * R * p0) / (a + R * p0))
        c4 = mu * c * p0 * (-rho1 + mu * c / (2 * i0R) * rho0)

        def inner(r):
            i0, i1, i2 = (np.asarray(bessel_i(k, r)) for k in (0, 1, 2))
            return (i0 * i2 - i1 * i1) / i1R - (1 - 2 * i2) / R

        def inner_r(r):
            i0, i1, i2 = (np.asarray(bessel_i(k, r)) for k in (0, 1, 2))
            d0, d1, d2 = (np.asarray(bessel_i_derivative(k, r)) for k in (0, 1, 2))
            return (d0 * i2 + i0 * d2 - 2 * i1 * d1) / i1R + 2 * d2 / R

        def q(r):
            r = np.asarray(r, dtype=float)
            return (-mu * w_amp * np.asarray(bessel_i(1, r)) + c4 * r
                    + g * rho0 / 2 * inner(r) * r)

        def dq(r):
            r = np.asarray(r, dtype=float)
            return (-mu * w_amp * np.asarray(bessel_i_derivative(1, r)) + c4
                    + g * rho0 / 2 * (inner(r) + r * inner_r(r)))

        return RadialProfile.from_function(q, R, self.n_cells + 1, dq)

    def mode1_forcing(self, r, rho0: float = 1.0):
        """Displayed forcing of ``L_1(q1 + mu omega1)`` for the translation mode."""
        r = np.asarray(r, dtype=float)
        R, mu, c, p0 = self.r0, self.params.mu, self.c, self.p0
        g = (mu * c) ** 2 * R * p0 / self.i0R
        i0, i1 = np.asarray(bessel_i(0, r)), np.asarray(bessel_i(1, r))
        i1_over_r = np.asarray(pn_table(0, r)[0]) * i0
        return g * rho0 * (2 * i1 / float(bessel_i(1, R)) * (i0 - i1_over_r) - r * i0 / R)

    def mode1_boundary(self, rho0: float, rho1: float) -> float:
        """Displayed Dirichlet datum of ``q1 + mu omega1`` for the translation mode."""
        R, a, mu, c, p0, p1 = self.r0, self.params.alpha, self.params.mu, self.c, self.p0, self.p1
        return mu * c * R * p0 * (-rho1 + self.r1 * rho0 * (p0 + a * R * (p0 - p1)) / (a + R * p0))

    def mode1_slope_displayed(self, rho0: float, rho1: float) -> float:
        """Closed-form ``q1'(r0)`` for the translation mode."""
        R, a, p0, p1 = self.r0, self.params.alpha, self.p0, self.p1
        return self.params.mu * self.c * ((1 - 2 * p0) * rho1
                                          - self.r1 * rho0 * p0 / (a + R * p0)
                                          * (R * R * p1 + 2 * p0 + a * R * (1 - p1)))

    def q1_profile(self, rho0: float, rho1: float) -> RadialProfile:
        """Assemble ``q1 = -mu omega1 + rho0 (u1 + u2 + u3) + C3 r^n`` for ``n != 1``."""
        if self.n == 1:
            raise DomainError("mode 1 has its own closed form; use q1_mode1")
        n, R, mu = self.n, self.r0, self.params.mu
        units = self.unit_responses()
        w_amp = self.omega1_amplitude(rho0, rho1)
        c3 = self.u4_boundary(rho0, rho1) / R**n
        inR = self.inR

        def q(r):
            r = np.asarray(r, dtype=float)
            return (-mu * w_amp * np.asarray(bessel_i(n, r)) / inR
                    + rho0 * sum(u(r) for u in units) + c3 * r**n)

        def dq(r):
            r = np.asarray(r, dtype=float)
            poly = n * r ** (n - 1) if n > 0 else 0.0 * r
            return (-mu * w_amp * np.asarray(bessel_i_derivative(n, r)) / inR
                    + rho0 * sum(u.slope(r) for u in units) + c3 * poly)

        return RadialProfile.from_function(q, R, self.n_cells + 1, dq)

    def q1_slope(self, rho0: float, rho1: float) -> float:
        """``q1'(r0)`` from the assembled profile (or the mode-1 closed form)."""
        if self.n == 1:
            return float(self.q1_mode1_profile(rho0, rho1).boundary_derivative)
        return float(self.q1_profile(rho0, rho1).boundary_derivative)

    def rho1_rhs(self, rho0: float, rho1: float) -> float:
        """Right-hand side of the first-order amplitude equation from the boundary velocity."""
        r1 = self.r1
        return (-self.p0_rr_boundary() * rho1
                - (self.p0_rrr_boundary() * r1 + self.p1_rr_boundary()) * rho0
                - self.q0_rr_boundary(rho0) * r1
                - self.q1_slope(rho0, rho1))

    def rhs_split(self) -> tuple[float, float]:
        """``(k, F)`` with ``d rho1/dt = -k rho1 + F rho0``, from two unit evaluations."""
        base = self.rho1_rhs(0.0, 0.0)
        k = -(self.rho1_rhs(0.0, 1.0) - base)
        forcing = self.rho1_rhs(1.0, 0.0) - base
        return k, forcing


# --------------------------------------------------------------------------
# public operations

def omega1(n: int, params: ModelParams, stationary: StationaryReport, rho0: float, rho1: float) -> RadialProfile:
    """First-order nutrient perturbation, proportional to ``I_n(r)``."""
    return FirstOrderMode(n, params, stationary).omega1(rho0, rho1)


def q1_assemble(n: int, params: ModelParams, stationary: StationaryReport, mode_state: ModeState) -> RadialProfile:
    """First-order pressure perturbation for ``n != 1``."""
    if n == 1:
        raise DomainError("mode 1 has its own closed form; use q1_mode1")
    return FirstOrderMode(n, params, stationary).q1_profile(mode_state.rho0, mode_state.rho1)


def q1_mode1(params: ModelParams, stationary: StationaryReport, rho0_1: float, rho1_1: float) -> RadialProfile:
    """First-order pressure perturbation of the translation mode, in closed form."""
    return FirstOrderMode(1, params, stationary).q1_mode1_profile(rho0_1, rho1_1)


@dataclass
class Rho1Trajectory:
    """First-order amplitude history of one mode.

    Attributes
    ----------
    rate_envelope : float
        Slope of ``log |rho1|`` fitted over ``t >= 1``; ``nan`` if the
        trajectory vanishes.
    """

    n: int
    t_grid: np.ndarray
    values: np.ndarray
    rate_envelope: float
    rho0: np.ndarray = field(default=None)
    linear_coefficient: float = float("nan")
    forcing_coefficient: float = float("nan")
    rate0: float = float("nan")

    def composed(self, tau: float) -> np.ndarray:
        return self.rho0 + tau * self.values

    def to_csv(self, path, tau: float = 0.0) -> None:
        write_columns(path, {"t": self.t_grid, "rho0_n": self.rho0, "rho1_n": self.values,
                             "rho_n": self.composed(tau)})

    def metadata(self) -> dict:
        return {"n": self.n, "rate0": self.rate0, "linear_coefficient": self.linear_coefficient,
                "forcing_coefficient": self.forcing_coefficient, "rate_envelope": self.rate_envelope}

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metadata(), fh, indent=2)


def fit_rate(t: np.ndarray, values: np.ndarray, t_min: float = 1.0) -> float:
    """Least-squares slope of ``log |values|`` over ``t >= t_min``."""
    mask = (t >= t_min) & (np.abs(values) > 1e-300)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(t[mask], np.log(np.abs(values[mask])), 1)[0])


def rho1_evolve(n: int, params: ModelParams, stationary: StationaryReport, rho0_init: float,
                rho1_init: float, t_grid, *, reassemble: bool = False,
                dt: float | None = None) -> Rho1Trajectory:
    """Integrate the first-order amplitude equation with classical RK4.

    The right-hand side is the boundary-velocity condition with ``q1'(r0)``
    taken from the assembled pressure perturbation. It is linear in
    ``(rho0, rho1)``, so by default its two coefficients are extracted once;
    ``reassemble=True`` rebuilds ``q1`` at every stage instead.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must start at 0 and increase")
    mode = FirstOrderMode(n, params, stationary)
    k, forcing = mode.rhs_split()
    rate0 = mode.rate0

    if reassemble:
        def rhs(t, y):
            return mode.rho1_rhs(rho0_init * math.exp(rate0 * t), y)
    else:
        def rhs(t, y):
            return -k * y + forcing * rho0_init * math.exp(rate0 * t)

    if dt is None:
        dt = 1e-2 * min(1.0, 1.0 / abs(k)) if k != 0 else 1e-2
    values = np.empty_like(t_grid)
    values[0] = y = float(rho1_init)
    for i in range(1, len(t_grid)):
        t0, t1 = t_grid[i - 1], t_grid[i]
        steps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / steps
        t = t0
        for _ in range(steps):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        values[i] = y
    rho0 = rho0_init * np.exp(rate0 * t_grid)
    return Rho1Trajectory(n, t_grid, values, fit_rate(t_grid, values), rho0, k, forcing, rate0)


def rho1_secular(n: int, params: ModelParams, stationary: StationaryReport, rho0_init: float,
                 rho1_init: float, t_grid) -> np.ndarray:
    """Exact solution ``(rho1(0) + F rho0(0) t) exp(rate0 t)``.

    Valid because the decay coefficient of ``rho1`` equals that of ``rho0``,
    which makes the forcing resonant.
    """
    mode = FirstOrderMode(n, params, stationary)
    _, forcing = mode.rhs_split()
    t = np.asarray(t_grid, dtype=float)
    return (rho1_init + forcing * rho0_init * t) * np.exp(mode.rate0 * t)


def linear_coefficient_from_threshold(n: int, params: ModelParams, r0: float) -> float:
    """``(1 - mu / mu0_n) A_n``, equal to ``A_n - mu B_n``."""
    return coeff_a(n, r0) - params.mu * coeff_b(n, r0, params.alpha, params.sigma_bar)


def p1_rr_boundary_quadrature(params: ModelParams, stationary: StationaryReport) -> float:
    """``p1''(r0)`` from the pressure equation, with the flux integral done by adaptive quadrature."""
    mode = FirstOrderMode(0, params, stationary)
    R, mu = mode.r0, params.mu
    s1 = stationary.sigma1

    def integrand(l):
        return (mode.sigma0_r(l) * mode.p0_r(l) + s1(l)) * l

    flux = quad(integrand, 0.0, R, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    p1_r = -mu / R * flux
    return float(-p1_r / R - mu * (mode.p0_r(R) * mode.sigma0_r(R) + s1(R)))
