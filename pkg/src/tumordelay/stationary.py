"""Radially symmetric stationary solution with delay.

Zeroth order in the delay: closed-form nutrient and pressure profiles, the
radius ``r0`` from a scalar root, and the boundary quantity ``lambda``.
First order: the radius correction ``r1`` so that ``R(tau) ~ r0 + tau r1``.
The full delayed problem is solved on the unit disk by a nested iteration:
an outer root-find on the radius and an inner fixed point for the pressure
gradient that drives the backward cell characteristics.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from tumordelay.besselkit import bessel_i, pn, pn_derivative, pn_table
from tumordelay.errors import (
    ConvergenceError,
    DelayTooLargeError,
    DomainError,
    NoStationaryRadiusError,
)
from tumordelay.profile import RadialProfile
from tumordelay.roots import bisect, expand_bracket, newton_polish

N_NODES = 1024


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the tumour model.

    Attributes
    ----------
    alpha : float
        Angiogenesis rate (Robin coefficient of the nutrient boundary condition).
    sigma_bar : float
        Nutrient concentration outside the tumour.
    sigma_tilde : float
        Proliferation threshold concentration, ``0 < sigma_tilde < sigma_bar``.
    mu : float
        Tumour aggressiveness.
    tau : float
        Proliferation delay, ``tau >= 0``.
    """

    alpha: float
    sigma_bar: float
    sigma_tilde: float
    mu: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "sigma_bar", "sigma_tilde", "mu", "tau"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
        for name in ("alpha", "sigma_bar", "sigma_tilde", "mu"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.tau < 0:
            raise DomainError("tau must be nonnegative")
        if self.sigma_tilde >= self.sigma_bar:
            raise NoStationaryRadiusError(
                "no stationary radius: sigma_tilde must be smaller than sigma_bar")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def nutrient_amplitude(alpha: float, sigma_bar: float, r0: float) -> float:
    """``alpha sigma_bar / (alpha + r0 P_0(r0))``, the boundary nutrient level."""
    return alpha * sigma_bar / (alpha + r0 * pn(0, r0))


def _r0_equation(alpha: float, sigma_bar: float, sigma_tilde: float):
    target = sigma_tilde / (2.0 * sigma_bar)

    def f(r):
        p = pn(0, r)
        return alpha * p / (alpha + r * p) - target

    def df(r):
        p = pn(0, r)
        return alpha * (alpha * pn_derivative(0, r) - p * p) / (alpha + r * p) ** 2

    return f, df


def solve_r0(params: ModelParams) -> float:
    """Zeroth-order stationary radius.

    The unique positive root of ``alpha P_0(R) / (alpha + R P_0(R)) = sigma_tilde / (2 sigma_bar)``.
    The left side decreases from 1/2 at ``R = 0``, so the root is bracketed
    by doubling, bisected to width 1e-13 and polished by two Newton steps.
    """
    if params.sigma_tilde >= params.sigma_bar:
        raise NoStationaryRadiusError("no stationary radius: sigma_tilde >= sigma_bar")
    f, df = _r0_equation(params.alpha, params.sigma_bar, params.sigma_tilde)
    lo = 1e-8
    if f(lo) <= 0.0:
        lo = 0.0
    lo, hi, flo, _ = expand_bracket(f, lo, max(1.0, 2 * lo))
    r = bisect(f, lo, hi, xtol=1e-13, flo=flo)
    if r > 1e-6:
        r = newton_polish(f, df, r, steps=2)
    if abs(f(r)) > 1e-12:
        raise ConvergenceError(f"stationary radius residual {f(r):.3e} exceeds 1e-12")
    return r


def dirichlet_radius(params: ModelParams) -> float:
    """Large-``alpha`` limit of ``r0``: the root of ``P_0(R) = sigma_tilde / (2 sigma_bar)``."""
    target = params.sigma_tilde / (2.0 * params.sigma_bar)
    return brentq(lambda r: pn(0, r) - target, 1e-12, 4.0 / target + 10.0, xtol=1e-15)


def sigma0(params: ModelParams, r0: float, n_nodes: int = N_NODES) -> RadialProfile:
    """Zeroth-order nutrient ``c I_0(r) / I_0(r0)`` on ``[0, r0]``."""
    c = nutrient_amplitude(params.alpha, params.sigma_bar, r0)
    i0r0 = bessel_i(0, r0)

    def f(r):
        return c * bessel_i(0, r) / i0r0

    def df(r):
        return c * bessel_i(1, r) / i0r0

    return RadialProfile.from_function(f, r0, n_nodes, df)


def p0(params: ModelParams, r0: float, n_nodes: int = N_NODES) -> RadialProfile:
    """Zeroth-order pressure with ``p(r0) = 1/r0`` and vanishing gradient at both ends."""
    mu, st = params.mu, params.sigma_tilde
    c = nutrient_amplitude(params.alpha, params.sigma_bar, r0)
    i0r0 = bessel_i(0, r0)

    def f(r):
        r = np.asarray(r, dtype=float)
        return (mu * st * r * r / 4 - mu * c * bessel_i(0, r) / i0r0 + mu * c + 1.0 / r0
                - mu * st * r0 * r0 / 4)

    def df(r):
        r = np.asarray(r, dtype=float)
        return mu * st * r / 2 - mu * c * bessel_i(1, r) / i0r0

    return RadialProfile.from_function(f, r0, n_nodes, df)


def p0_second_derivative_boundary(params: ModelParams, r0: float) -> float:
    """``p0''(r0) = mu c (2 P_0(r0) - 1)``; negative."""
    c = nutrient_amplitude(params.alpha, params.sigma_bar, r0)
    return params.mu * c * (2.0 * pn(0, r0) - 1.0)


def lam(params: ModelParams, r0: float) -> float:
    """``(sigma0'' + alpha sigma0')`` at ``r0``, i.e. ``c [1 - P_0 + alpha r0 P_0]``."""
    c = nutrient_amplitude(params.alpha, params.sigma_bar, r0)
    p = pn(0, r0)
    return c * (1.0 - p + params.alpha * r0 * p)


def solve_r1(params: ModelParams, r0: float) -> float:
    """First-order delay correction to the stationary radius; positive and linear in ``mu``."""
    a, sb = params.alpha, params.sigma_bar
    p_0, p_1 = pn_table(1, r0)
    numer = 0.5 * params.mu * a * sb * (1.0 - (4.0 + r0 * r0) * p_0 * p_0)
    denom = (p_0 + a * r0 * (p_0 - p_1)) * p_0
    return float(numer / denom)


def sigma1(params: ModelParams, r0: float, r1: float, n_nodes: int = N_NODES) -> RadialProfile:
    """First-order nutrient correction ``-lambda r1 / (alpha + r0 P_0) I_0(r) / I_0(r0)``."""
    k = -lam(params, r0) * r1 / (params.alpha + r0 * pn(0, r0)) / bessel_i(0, r0)
    return RadialProfile.from_function(lambda r: k * bessel_i(0, r), r0, n_nodes,
                                       lambda r: k * bessel_i(1, r))


@dataclass
class DelayedStationary:
    """Numerical solution of the full delayed stationary problem (physical units)."""

    radius: float
    tau: float
    nodes: np.ndarray
    sigma: np.ndarray
    sigma_delayed: np.ndarray
    pressure: np.ndarray
    pressure_gradient: np.ndarray
    xi_back: np.ndarray
    inner_iterations: int
    integral_residual: float
    contraction: float


@dataclass
class StationaryReport:
    params: ModelParams
    r0: float
    lam: float
    r1: float
    r_star: float
    sigma0: RadialProfile
    p0: RadialProfile
    sigma1: RadialProfile
    delayed: DelayedStationary | None = None

    def to_dict(self) -> dict:
        out = {f"param_{k}": v for k, v in asdict(self.params).items()}
        out.update(r0=self.r0, lambda_=self.lam, r1=self.r1, r_star=self.r_star)
        out["lambda"] = out.pop("lambda_")
        if self.delayed is not None:
            out.update(
                r_delayed=self.delayed.radius,
                delayed_integral_residual=self.delayed.integral_residual,
                delayed_inner_iterations=self.delayed.inner_iterations,
                delayed_contraction=self.delayed.contraction,
            )
        return out

    def profile_columns(self) -> dict[str, np.ndarray]:
        return {
            "r": self.sigma0.nodes,
            "sigma0": self.sigma0.values,
            "p0": self.p0.values,
            "sigma1": self.sigma1.values,
        }


def stationary_report(params: ModelParams, n_nodes: int = N_NODES) -> StationaryReport:
    """Zeroth- and first-order stationary quantities in closed form."""
    r0 = solve_r0(params)
    r1 = solve_r1(params, r0)
    return StationaryReport(
        params=params,
        r0=r0,
        lam=lam(params, r0),
        r1=r1,
        r_star=r0 + params.tau * r1,
        sigma0=sigma0(params, r0, n_nodes),
        p0=p0(params, r0, n_nodes),
        sigma1=sigma1(params, r0, r1, n_nodes),
    )


# --------------------------------------------------------------------------
# full delayed stationary problem on the unit disk

def trace_back_autonomous(grad: np.ndarray, x: np.ndarray, scale: float, duration: float,
                          substeps: int) -> tuple[np.ndarray, int]:
    """Positions at ``s = -duration`` of characteristics ``dxi/ds = -scale * grad(xi)``.

    ``grad`` is sampled on ``x`` (the unit interval); starting points are the
    nodes themselves. Returns the traced positions and how many stage
    evaluations had to be clamped back into ``[0, 1]``.
    """
    spline = CubicSpline(x, grad)
    h = duration / substeps
    clamps = 0

    def vel(y):
        nonlocal clamps
        out_of_range = (y < 0.0) | (y > 1.0)
        if np.any(out_of_range):
            clamps += int(np.count_nonzero(out_of_range))
            y = np.clip(y, 0.0, 1.0)
        # reversed time: d xi / d(-s) = +scale * grad
        return scale * spline(y)

    y = x.copy()
    for _ in range(substeps):
        k1 = vel(y)
        k2 = vel(y + 0.5 * h * k1)
        k3 = vel(y + 0.5 * h * k2)
        k4 = vel(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    out_of_range = (y < 0.0) | (y > 1.0)
    clamps += int(np.count_nonzero(out_of_range))
    return np.clip(y, 0.0, 1.0), clamps


class _UnitDiskProblem:
    """Inner fixed point for a trial radius, in unit-disk variables."""

    def __init__(self, params: ModelParams, n_nodes: int, substeps: int, tol: float, max_inner: int):
        self.params = params
        self.x = np.linspace(0.0, 1.0, n_nodes)
        self.substeps = substeps
        self.tol = tol
        self.max_inner = max_inner
        self.warm: np.ndarray | None = None
        self.iterations = 0
        self.contraction = 0.0
        self.last = None

    def nutrient(self, radius: float):
        c = nutrient_amplitude(self.params.alpha, self.params.sigma_bar, radius)
        i0 = bessel_i(0, radius)
        return lambda y: c * np.asarray(bessel_i(0, radius * y)) / i0

    def undelayed_gradient(self, radius: float) -> np.ndarray:
        mu, st = self.params.mu, self.params.sigma_tilde
        c = nutrient_amplitude(self.params.alpha, self.params.sigma_bar, radius)
        x = self.x
        return radius**2 * (mu * st * radius * x / 2
                            - mu * c * np.asarray(bessel_i(1, radius * x)) / bessel_i(0, radius))

    def gradient_from_source(self, source: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
        x = self.x
        cum = cumulative_simpson(source * x, x=x, initial=0.0)
        g = np.zeros_like(x)
        g[1:] = -self.params.mu * radius**3 * cum[1:] / x[1:]
        return g, float(cum[-1])

    def solve(self, radius: float):
        """Integral residual ``int_0^1 (sigma(xi) - sigma_tilde) x dx`` at the fixed point."""
        p = self.params
        sig = self.nutrient(radius)
        g = self.warm if self.warm is not None else self.undelayed_gradient(radius)
        prev = None
        bad = 0
        for k in range(1, self.max_inner + 1):
            xi, clamps = trace_back_autonomous(g, self.x, radius**-3, p.tau, self.substeps)
            delayed = sig(xi)
            g_new, integral = self.gradient_from_source(delayed - p.sigma_tilde, radius)
            diff = float(np.max(np.abs(g_new - g)))
            g = g_new
            self.iterations += 1
            if prev is not None and prev > 0:
                ratio = diff / prev
                self.contraction = max(self.contraction, ratio) if diff > 1e3 * self.tol else self.contraction
                bad = bad + 1 if (ratio >= 1.0 and diff > 1e3 * self.tol) else 0
                if bad >= 2:
                    raise DelayTooLargeError(
                        f"delay too large: pressure iteration does not contract (ratio {ratio:.3g})")
            if diff <= self.tol * max(1.0, float(np.max(np.abs(g)))):
                break
            prev = diff
        else:
            raise DelayTooLargeError(
                f"delay too large: pressure iteration did not settle in {self.max_inner} steps")
        self.warm = g
        self.last = (radius, g, xi, delayed, clamps)
        return integral


def solve_stationary_delayed(params: ModelParams, tol: float = 1e-12, *, n_nodes: int = N_NODES,
                             substeps: int = 64, max_inner: int = 200) -> StationaryReport:
    """Radius and profiles of the full delayed stationary problem.

    The zeroth-order closed forms seed the iteration; ``tau = 0`` returns them
    directly. The characteristic ODE is integrated with classical RK4 using
    ``substeps`` steps over the delay window.

    Raises
    ------
    DelayTooLargeError
        When the pressure fixed point does not contract or no radius
        balances the delayed source.
    """
    report = stationary_report(params, n_nodes)
    r0 = report.r0
    if params.tau == 0.0:
        nodes = report.sigma0.nodes
        report.delayed = DelayedStationary(
            radius=r0, tau=0.0, nodes=nodes, sigma=report.sigma0.values,
            sigma_delayed=report.sigma0.values, pressure=report.p0.values,
            pressure_gradient=report.p0.derivative, xi_back=nodes.copy(), inner_iterations=0,
            integral_residual=abs(float(pn(0, r0) * nutrient_amplitude(params.alpha, params.sigma_bar, r0)
                                        - params.sigma_tilde / 2)),
            contraction=0.0,
        )
        return report

    problem = _UnitDiskProblem(params, n_nodes, substeps, min(tol, 1e-13), max_inner)
    f_lo = problem.solve(r0)
    if f_lo <= 0.0:
        raise DelayTooLargeError("delay too large: delayed source has no balancing radius above r0")
    step = max(params.tau * report.r1, 1e-6 * r0)
    hi = r0 + 2 * step
    for _ in range(60):
        f_hi = problem.solve(hi)
        if f_hi < 0.0:
            break
        step *= 2.0
        hi = r0 + 2 * step
    else:
        raise DelayTooLargeError("delay too large: no sign change of the delayed balance")
    radius = brentq(problem.solve, r0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = problem.solve(radius)
    if abs(residual) > tol:
        raise ConvergenceError(f"delayed balance residual {residual:.3e} exceeds {tol:.1e}")
    _, g, xi, delayed, _ = problem.last
    x = problem.x
    # hat p(x) = 1 - int_x^1 g, physical p(r) = hat p(r/R) / R
    tail = cumulative_simpson(g[::-1], x=-x[::-1], initial=0.0)[::-1]
    p_hat = 1.0 - tail
    report.delayed = DelayedStationary(
        radius=radius, tau=params.tau, nodes=radius * x,
        sigma=problem.nutrient(radius)(x), sigma_delayed=delayed,
        pressure=p_hat / radius, pressure_gradient=g / radius**2, xi_back=radius * xi,
        inner_iterations=problem.iterations, integral_residual=abs(residual),
        contraction=problem.contraction,
    )
    return report
