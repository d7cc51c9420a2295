"""Time stepping of the radially symmetric free-boundary problem with delay.

The nutrient is quasi-steady and solved in closed form on the current disk.
The pressure at time ``t`` is driven by the nutrient a delay ``tau`` earlier,
sampled at the position the cell occupied then. Those positions come from
tracing the Darcy velocity ``-p_r`` backward through the stored history.
Profiles live on a fixed number of nodes uniform in ``x = r / R(t)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import cumulative_simpson

from tumordelay.besselkit import bessel_i
from tumordelay.errors import DelayTooLargeError, DomainError, SimulationAborted
from tumordelay.profile import RadialProfile, write_columns
from tumordelay.stationary import ModelParams, nutrient_amplitude

N_NODES = 1024
SUBSTEPS_PER_TAU = 16
RADIUS_FLOOR = 1e-4
STEADY_SLOPE = 1e-9
STEADY_COUNT = 100
EXTRAP_LIMIT = 1.05
# traced boundary cells land on the past boundary up to discretization error
LANDING_SLACK = 1e-6


# --------------------------------------------------------------------------
# compiled kernel: backward characteristics through the history

@numba.njit(cache=True)
def _interp_cubic(values, x):
    """Four-point Lagrange interpolation on the uniform grid of ``[0, 1]``."""
    n = values.shape[0]
    u = x * (n - 1)
    i = int(math.floor(u))
    j0 = min(max(i - 1, 0), n - 4)
    t = u - j0
    # nodes at t = 0, 1, 2, 3
    l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0
    l1 = t * (t - 2.0) * (t - 3.0) / 2.0
    l2 = -t * (t - 1.0) * (t - 3.0) / 2.0
    l3 = t * (t - 1.0) * (t - 2.0) / 6.0
    return l0 * values[j0] + l1 * values[j0 + 1] + l2 * values[j0 + 2] + l3 * values[j0 + 3]


@numba.njit(cache=True)
def _bracket(s, times, count):
    """Record index ``k`` and weight ``w`` with ``s = (1 - w) t_k + w t_{k+1}``."""
    k = count - 2
    while k > 0 and times[k] > s:
        k -= 1
    t0 = times[k]
    t1 = times[k + 1]
    w = (s - t0) / (t1 - t0) if t1 > t0 else 0.0
    return k, min(max(w, 0.0), 1.0)


@numba.njit(cache=True)
def _field(y, k, w, radii, grads):
    """Pressure gradient at radius ``y`` between records ``k`` and ``k + 1``.

    Positions slightly outside a record's disk use the boundary cubic as an
    extrapolant; beyond ``EXTRAP_LIMIT`` they are clamped and reported.
    """
    x0 = y / radii[k]
    x1 = y / radii[k + 1]
    clamped = 0
    if x0 < 0.0 or x1 < 0.0 or x0 > EXTRAP_LIMIT or x1 > EXTRAP_LIMIT:
        clamped = 1
    x0 = min(max(x0, 0.0), EXTRAP_LIMIT)
    x1 = min(max(x1, 0.0), EXTRAP_LIMIT)
    g = (1.0 - w) * _interp_cubic(grads[k], x0) + w * _interp_cubic(grads[k + 1], x1)
    return g, clamped


@numba.njit(cache=True, fastmath=True)
def _trace_back(r_start, t_now, tau, substeps, times, radii, grads, count):
    """Positions at ``t_now - tau`` of cells now at ``r_start``; classical RK4 in reversed time."""
    n = r_start.shape[0]
    y = r_start.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    h = tau / substeps
    clamps = 0
    for j in range(substeps):
        s = t_now - j * h
        ka, wa = _bracket(s, times, count)
        kb, wb = _bracket(s - 0.5 * h, times, count)
        kc, wc = _bracket(s - h, times, count)
        # d xi / d(-s) = + p_r(xi, s)
        for i in range(n):
            g, c = _field(y[i], ka, wa, radii, grads)
            k1[i] = g
            clamps += c
        for i in range(n):
            g, c = _field(y[i] + 0.5 * h * k1[i], kb, wb, radii, grads)
            k2[i] = g
            clamps += c
        for i in range(n):
            g, c = _field(y[i] + 0.5 * h * k2[i], kb, wb, radii, grads)
            k3[i] = g
            clamps += c
        for i in range(n):
            g, c = _field(y[i] + h * k3[i], kc, wc, radii, grads)
            clamps += c
            y[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + g)
    return y, clamps


# --------------------------------------------------------------------------
# history and state

class DelayHistory:
    """Time-ordered ``(t, R, p_r)`` records covering at least the last delay window.

    Gradients are stored on the shared ``x`` grid, so record ``k`` describes
    ``p_r(R_k x, t_k)``. Storage is a pair of contiguous arrays that the
    compiled tracer reads directly.
    """

    def __init__(self, window: float, n_nodes: int, capacity: int):
        self.window = float(window)
        self.times = np.empty(capacity)
        self.radii = np.empty(capacity)
        self.grads = np.empty((capacity, n_nodes))
        self.count = 0

    def push(self, t: float, radius: float, grad: np.ndarray) -> None:
        if self.count and t <= self.times[self.count - 1]:
            raise ValueError("history times must increase")
        if self.count == len(self.times):
            self._prune(t)
        if self.count == len(self.times):
            self._grow()
        self.times[self.count] = t
        self.radii[self.count] = radius
        self.grads[self.count] = grad
        self.count += 1

    def replace_last(self, radius: float, grad: np.ndarray) -> None:
        self.radii[self.count - 1] = radius
        self.grads[self.count - 1] = grad

    def _prune(self, t_now: float) -> None:
        # keep the last record at or before t_now - window and everything after
        keep_from = int(np.searchsorted(self.times[:self.count], t_now - self.window, side="right")) - 1
        keep_from = max(keep_from - 1, 0)
        if keep_from == 0:
            return
        m = self.count - keep_from
        self.times[:m] = self.times[keep_from:self.count]
        self.radii[:m] = self.radii[keep_from:self.count]
        self.grads[:m] = self.grads[keep_from:self.count]
        self.count = m

    def _grow(self) -> None:
        cap = 2 * len(self.times)
        for name in ("times", "radii"):
            new = np.empty(cap)
            new[:self.count] = getattr(self, name)[:self.count]
            setattr(self, name, new)
        grads = np.empty((cap, self.grads.shape[1]))
        grads[:self.count] = self.grads[:self.count]
        self.grads = grads

    @property
    def span(self) -> float:
        return float(self.times[self.count - 1] - self.times[0]) if self.count else 0.0

    def samples(self) -> list[tuple[float, RadialProfile, float]]:
        """Records as ``(time, pressure-gradient profile, radius)``."""
        x = np.linspace(0.0, 1.0, self.grads.shape[1])
        out = []
        for k in range(self.count):
            radius = float(self.radii[k])
            g = self.grads[k].copy()
            out.append((float(self.times[k]),
                        RadialProfile(radius, radius * x, g, float(g[-1])), radius))
        return out


@dataclass
class SimState:
    """Current time, radius and history, plus the previous boundary velocity for the two-step update."""

    t: float
    radius: float
    history: DelayHistory | None
    velocity: float = float("nan")
    prev_velocity: float | None = None
    grad: np.ndarray | None = field(default=None, repr=False)
    prev_grad: np.ndarray | None = field(default=None, repr=False)
    clamps: int = 0


@dataclass
class SimResult:
    params: ModelParams
    dt: float
    t: np.ndarray
    radius: np.ndarray
    boundary_gradient: np.ndarray
    converged: bool
    steps: int
    clamps: int
    final_state: SimState = field(repr=False, default=None)

    @property
    def limit_radius(self) -> float:
        return float(self.radius[-1])

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "limit_radius": self.limit_radius,
            "step_count": int(self.steps),
            "t_final": float(self.t[-1]),
            "dt": self.dt,
            "tau": self.params.tau,
            "clamp_count": int(self.clamps),
        }

    def to_csv(self, path) -> None:
        write_columns(path, {"t": self.t, "radius": self.radius,
                             "boundary_pressure_gradient": self.boundary_gradient})

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)


# --------------------------------------------------------------------------
# the stepper

class RadialSimulator:
    """Method-of-steps integrator for the radial problem.

    Parameters
    ----------
    params : ModelParams
        Model parameters, including the delay ``tau``.
    dt : float
        Time step. With ``tau > 0`` it must satisfy ``dt <= tau / 4`` and
        divide ``tau`` evenly, so the delayed time always falls on a record.
    n_nodes : int
        Nodes uniform in ``x = r / R``.
    passes : int
        Fixed-point corrections of the current pressure gradient per step,
        after the linear-extrapolation guess.
    """

    def __init__(self, params: ModelParams, dt: float, n_nodes: int = N_NODES,
                 substeps: int = SUBSTEPS_PER_TAU, passes: int = 1, warmup_tol: float = 1e-13,
                 warmup_max: int = 200):
        if not dt > 0:
            raise DomainError("dt must be positive")
        if params.tau > 0:
            ratio = params.tau / dt
            if ratio < 4 - 1e-9:
                raise DomainError(f"dt = {dt} exceeds tau / 4 = {params.tau / 4}")
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise DomainError("dt must divide tau into a whole number of steps")
        self.params, self.dt = params, float(dt)
        self.x = np.linspace(0.0, 1.0, n_nodes)
        self.substeps, self.passes = substeps, passes
        self.warmup_tol, self.warmup_max = warmup_tol, warmup_max

    # fields -----------------------------------------------------------------
    def nutrient(self, radius: float, r):
        c = nutrient_amplitude(self.params.alpha, self.params.sigma_bar, radius)
        return c * np.asarray(bessel_i(0, r)) / bessel_i(0, radius)

    def gradient_from_source(self, source: np.ndarray, radius: float) -> np.ndarray:
        """``p_r(R x) = -(mu R / x) int_0^x (S - sigma_tilde) y dy`` on the node grid."""
        x = self.x
        cum = cumulative_simpson((source - self.params.sigma_tilde) * x, x=x, initial=0.0)
        g = np.zeros_like(x)
        g[1:] = -self.params.mu * radius * cum[1:] / x[1:]
        return g

    def pressure(self, radius: float, grad: np.ndarray) -> np.ndarray:
        """Pressure on the node grid with ``p(R) = 1/R``."""
        x = self.x
        tail = cumulative_simpson(grad[::-1], x=-x[::-1], initial=0.0)[::-1]
        return 1.0 / radius - radius * tail

    def _delayed_gradient(self, state_t: float, radius: float, history: DelayHistory) -> tuple[np.ndarray, int]:
        p = self.params
        xi, clamps = _trace_back(radius * self.x, state_t, p.tau, self.substeps,
                                 history.times, history.radii, history.grads, history.count)
        t_past = state_t - p.tau
        k = int(np.argmin(np.abs(history.times[:history.count] - t_past)))
        r_past = float(history.radii[k])
        out = (xi < 0.0) | (xi > (1 + LANDING_SLACK) * r_past)
        clamps += int(np.count_nonzero(out))
        xi = np.clip(xi, 0.0, r_past)
        return self.gradient_from_source(self.nutrient(r_past, xi), radius), clamps

    # set-up -----------------------------------------------------------------
    def initial_state(self, radius_init: float) -> SimState:
        """State at ``t = 0`` with time-independent data on ``[-tau, 0]``.

        With a delay, the frozen-domain gradient must be consistent with the
        characteristics it generates; it is found by fixed-point iteration.
        """
        if not radius_init > RADIUS_FLOOR:
            raise DomainError("initial radius must exceed the radius floor")
        p = self.params
        if p.tau == 0:
            g = self.gradient_from_source(self.nutrient(radius_init, radius_init * self.x), radius_init)
            return SimState(0.0, radius_init, None, -float(g[-1]), None, g, None)
        steps_per_tau = int(round(p.tau / self.dt))
        history = DelayHistory(p.tau, len(self.x), 2 * steps_per_tau + 8)
        g = self.gradient_from_source(self.nutrient(radius_init, radius_init * self.x), radius_init)
        history.push(-p.tau, radius_init, g)
        history.push(0.0, radius_init, g)
        prev = None
        clamps = 0
        for _ in range(self.warmup_max):
            history.grads[0] = g
            history.grads[1] = g
            g_new, clamps = self._delayed_gradient(0.0, radius_init, history)
            diff = float(np.max(np.abs(g_new - g)))
            g = g_new
            if diff <= self.warmup_tol * max(1.0, float(np.max(np.abs(g)))):
                break
            if prev is not None and diff >= prev and diff > 1e3 * self.warmup_tol:
                raise DelayTooLargeError("delay too large: warm-up pressure iteration does not contract")
            prev = diff
        else:
            raise DelayTooLargeError("delay too large: warm-up pressure iteration did not settle")
        # rebuild a time-constant history on [-tau, 0] at step resolution
        history = DelayHistory(p.tau, len(self.x), 2 * steps_per_tau + 8)
        for k in range(steps_per_tau, -1, -1):
            history.push(-k * self.dt, radius_init, g)
        return SimState(0.0, radius_init, history, -float(g[-1]), None, g, None, clamps)

    # one step ---------------------------------------------------------------
    def step(self, state: SimState) -> SimState:
        """Advance radius and history by one time step.

        The radius uses the two-step Adams-Bashforth formula (forward Euler on
        the first step). The new gradient starts from linear extrapolation
        and receives ``passes`` fixed-point corrections.
        """
        dt, p = self.dt, self.params
        v = state.velocity
        if state.prev_velocity is None:
            radius = state.radius + dt * v
        else:
            radius = state.radius + dt * (1.5 * v - 0.5 * state.prev_velocity)
        if not radius > RADIUS_FLOOR or not math.isfinite(radius):
            raise SimulationAborted(f"radius {radius:.3e} fell below the floor {RADIUS_FLOOR:g} at t = {state.t + dt:.6g}")
        t_new = state.t + dt
        clamps = state.clamps
        if p.tau == 0:
            g = self.gradient_from_source(self.nutrient(radius, radius * self.x), radius)
        else:
            history = state.history
            g = state.grad if state.prev_grad is None else 2.0 * state.grad - state.prev_grad
            history.push(t_new, radius, g)
            c = 0
            for _ in range(self.passes):
                g, c = self._delayed_gradient(t_new, radius, history)
                history.replace_last(radius, g)
            clamps += c
        return SimState(t_new, radius, state.history, -float(g[-1]), v, g, state.grad, clamps)


def step(state: SimState, dt: float, params: ModelParams) -> SimState:
    """One time step of the radial problem (see ``RadialSimulator.step``)."""
    return RadialSimulator(params, dt).step(state)


def run(params: ModelParams, radius_init: float, t_end: float, dt: float, *,
        n_nodes: int = N_NODES, stop_when_converged: bool = True, record_every: int = 1) -> SimResult:
    """Integrate from a time-independent initial state until ``t_end``.

    The run is flagged converged once ``|dR/dt| < 1e-9`` has held for 100
    consecutive steps; with ``stop_when_converged`` it ends there.
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    sim = RadialSimulator(params, dt, n_nodes)
    state = sim.initial_state(radius_init)
    ts, rs, gs = [0.0], [state.radius], [-state.velocity]
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    quiet = 0
    converged = False
    k = 0
    for k in range(1, n_steps + 1):
        state = sim.step(state)
        quiet = quiet + 1 if abs(state.velocity) < STEADY_SLOPE else 0
        if k % record_every == 0 or k == n_steps:
            ts.append(state.t)
            rs.append(state.radius)
            gs.append(-state.velocity)
        if quiet >= STEADY_COUNT:
            converged = True
            if stop_when_converged:
                if ts[-1] != state.t:
                    ts.append(state.t)
                    rs.append(state.radius)
                    gs.append(-state.velocity)
                break
    return SimResult(params, dt, np.array(ts), np.array(rs), np.array(gs), converged, k, state.clamps, state)


def radius_at(params: ModelParams, radius_init: float, t_final: float, dt: float, **kw) -> float:
    """Radius at ``t_final`` without early stopping; used for self-convergence studies."""
    res = run(params, radius_init, t_final, dt, stop_when_converged=False, record_every=10**9, **kw)
    return float(res.radius[-1])


def self_convergence_order(params: ModelParams, radius_init: float, t_final: float, dt: float) -> dict:
    """Observed order from radii at a fixed time with steps ``dt``, ``dt/2``, ``dt/4``."""
    r = [radius_at(params, radius_init, t_final, dt / 2**k) for k in range(3)]
    d1, d2 = abs(r[0] - r[1]), abs(r[1] - r[2])
    order = math.log2(d1 / d2) if d2 > 0 and d1 > 0 else float("inf")
    return {"radii": r, "differences": [d1, d2], "order": order}


def load_config(path) -> dict[str, str]:
    """Read ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out
