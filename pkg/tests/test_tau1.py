import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tumordelay import modes
from tumordelay.besselkit import bessel_i
from tumordelay.errors import DomainError
from tumordelay.profile import read_columns
from tumordelay.tau1 import (
    FirstOrderMode,
    LnBvp,
    ModeState,
    fit_rate,
    linear_coefficient_from_threshold,
    ln_residual,
    ln_solve,
    omega1,
    p1_rr_boundary_quadrature,
    q1_assemble,
    q1_mode1,
    rho1_evolve,
    rho1_secular,
)

R = 2.0
GRID = np.linspace(0.0, R, 41)
RHO0, RHO1 = 0.7, 0.3


@pytest.fixture(scope="module")
def mode_cache(standard_params, standard_report):
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = FirstOrderMode(n, standard_params, standard_report)
        return cache[n]

    return get


def test_homogeneous_solution():
    s = ln_solve(LnBvp(2, R, lambda r: 0 * r, 1.0))
    assert np.max(np.abs(s(GRID) - (GRID / R) ** 2)) < 1e-14


def test_mode1_bessel_identities():
    u = lambda r: r * (1 - 2 * bessel_i(2, r))  # noqa: E731
    s = ln_solve(LnBvp(1, R, lambda r: 2 * r * bessel_i(0, r), float(u(R))))
    assert np.max(np.abs(s(GRID) - u(GRID))) < 1e-13

    u2 = lambda r: r * (bessel_i(0, r) * bessel_i(2, r) - bessel_i(1, r) ** 2)  # noqa: E731

    def f(r):
        safe = np.where(r > 0, r, 1.0)
        return 4 * bessel_i(1, r) * (bessel_i(0, r) - np.where(r > 0, bessel_i(1, r) / safe, 0.0))

    s = ln_solve(LnBvp(1, R, f, float(u2(R))))
    assert np.max(np.abs(s(GRID) - u2(GRID))) < 1e-13


@pytest.mark.parametrize("n", [0, 1, 3, 10])
def test_residual_small(n):
    pb = LnBvp(n, R, lambda r: np.cos(r) + r**2, 0.3)
    s = ln_solve(pb)
    assert s(R) == pytest.approx(0.3, abs=1e-14)
    r = np.linspace(0.01, R - 0.01, 100)
    assert np.max(ln_residual(pb, s, r)) < 1e-6


def test_log_solution_for_mode_zero():
    # L_0 u = 1 with u(R) = 0 gives u = (R^2 - r^2) / 4
    s = ln_solve(LnBvp(0, R, lambda r: np.ones_like(r)))
    assert np.max(np.abs(s(GRID) - (R * R - GRID**2) / 4)) < 1e-14
    assert s.slope(1.0) == pytest.approx(-0.5, abs=1e-13)


def test_singular_forcing_rejected():
    with pytest.raises(DomainError):
        ln_solve(LnBvp(2, R, lambda r: 1.0 / np.where(r > 0, r, 0.0) ** 3))
    with pytest.raises(DomainError):
        ln_solve(LnBvp(2, R, lambda r: np.full_like(r, np.nan)))


def test_bad_problem_rejected():
    with pytest.raises(DomainError):
        LnBvp(-1, R, np.cos)
    with pytest.raises(DomainError):
        LnBvp(2, 0.0, np.cos)


@given(st.integers(min_value=0, max_value=12), st.floats(min_value=0.2, max_value=8.0))
def test_monomial_exact(n, radius):
    m = n + 2
    s = ln_solve(LnBvp(n, radius, lambda r: (n * n - m * m) * r**n, radius**m), n_cells=256)
    r = np.linspace(0.0, radius, 11)
    assert np.max(np.abs(s(r) - r**m)) <= 1e-12 * max(1.0, radius**m)


@given(st.integers(min_value=0, max_value=8), st.floats(-3, 3), st.floats(-3, 3))
def test_solver_linear(n, a, b):
    f, g = np.cos, np.exp
    u = ln_solve(LnBvp(n, R, f), n_cells=256)
    v = ln_solve(LnBvp(n, R, g), n_cells=256)
    w = ln_solve(LnBvp(n, R, lambda r: a * f(r) + b * g(r)), n_cells=256)
    assert np.max(np.abs(w.values - a * u.values - b * v.values)) < 1e-11


def test_p1_second_derivative_closed_form(standard_params, standard_report, mode_cache):
    assert mode_cache(0).p1_rr_boundary() == pytest.approx(
        p1_rr_boundary_quadrature(standard_params, standard_report), rel=1e-10)


@pytest.mark.parametrize("n", [0, 2, 3, 5])
def test_omega1_amplitude_two_routes(mode_cache, n):
    m = mode_cache(n)
    assert m.omega1_amplitude(RHO0, RHO1) == pytest.approx(
        m.omega1_amplitude_from_boundary(RHO0, RHO1), rel=1e-12)


@pytest.mark.parametrize("n", [0, 2, 3, 5])
def test_displayed_constant_matches_boundary(mode_cache, n):
    m = mode_cache(n)
    assert m.c3_displayed(RHO0, RHO1) * m.r0**n == pytest.approx(m.u4_boundary(RHO0, RHO1), rel=1e-12)


@pytest.mark.parametrize("n", [0, 2, 3, 5])
def test_forcing_displayed(mode_cache, n):
    m = mode_cache(n)
    r = np.linspace(0.01, m.r0, 50)
    assert np.max(np.abs(m.forcings()[0](r) - m.forcing_displayed(r))) < 1e-13


@pytest.mark.parametrize("n", [0, 2, 3, 5])
def test_q1_slope_and_boundary(mode_cache, n):
    m = mode_cache(n)
    slopes = sum(u.boundary_derivative for u in m.unit_responses()) * RHO0
    assert m.q1_slope(RHO0, RHO1) == pytest.approx(
        m.q1_boundary_slope_displayed(RHO0, RHO1, slopes), rel=1e-10)
    q = m.q1_profile(RHO0, RHO1)
    assert q(m.r0) == pytest.approx(m.q1_boundary_value(RHO0, RHO1), rel=1e-12)


@pytest.mark.parametrize("n", [0, 2, 3, 5, 10])
def test_linear_coefficient_equals_zeroth_order_decay(standard_params, mode_cache, n):
    m = mode_cache(n)
    k, _ = m.rhs_split()
    assert k == pytest.approx(-m.rate0, rel=1e-10)
    assert m.linear_coefficient() == pytest.approx(
        linear_coefficient_from_threshold(n, standard_params, m.r0), rel=1e-10)


def test_translation_mode(standard_params, mode_cache):
    m = mode_cache(1)
    r = np.linspace(0.0, m.r0, 50)
    p = standard_params
    generic = p.mu * (m.sigma0_r(r) * m.q0_r(r) + m.omega0_r(r) * m.p0_r(r))
    assert np.max(np.abs(generic - m.mode1_forcing(r))) < 1e-13
    q = m.q1_mode1_profile(RHO0, RHO1)
    w = m.omega1(RHO0, RHO1)
    s = ln_solve(LnBvp(1, m.r0, lambda x: m.mode1_forcing(x, RHO0), m.mode1_boundary(RHO0, RHO1)))
    assert np.max(np.abs(q(r) + p.mu * w(r) - s(r))) < 1e-12
    assert q.boundary_derivative == pytest.approx(m.mode1_slope_displayed(RHO0, RHO1), rel=1e-10)
    assert abs(m.rho1_rhs(RHO0, RHO1)) < 1e-12
    with pytest.raises(DomainError):
        m.q1_profile(RHO0, RHO1)


def test_public_wrappers(standard_params, standard_report):
    state = ModeState(RHO0, RHO1)
    q = q1_assemble(3, standard_params, standard_report, state)
    assert q(standard_report.r0) == pytest.approx(
        FirstOrderMode(3, standard_params, standard_report).q1_boundary_value(RHO0, RHO1))
    w = omega1(3, standard_params, standard_report, RHO0, RHO1)
    assert np.all(np.isfinite(w.values))
    assert np.all(np.isfinite(q1_mode1(standard_params, standard_report, RHO0, RHO1).values))


@pytest.mark.parametrize("n", [0, 2, 5])
def test_rho1_matches_secular_solution(standard_params, standard_report, n):
    t = np.linspace(0.0, 5.0, 51)
    traj = rho1_evolve(n, standard_params, standard_report, 1.0, 0.2, t)
    exact = rho1_secular(n, standard_params, standard_report, 1.0, 0.2, t)
    assert np.max(np.abs(traj.values - exact)) < 1e-10


def test_reassembled_rhs_agrees(standard_params, standard_report):
    t = np.linspace(0.0, 1.0, 5)
    fast = rho1_evolve(2, standard_params, standard_report, 1.0, 0.0, t)
    slow = rho1_evolve(2, standard_params, standard_report, 1.0, 0.0, t, reassemble=True, dt=0.05)
    assert np.max(np.abs(fast.values - slow.values)) < 1e-7


def test_mode1_first_order_constant(standard_params, standard_report):
    t = np.linspace(0.0, 10.0, 101)
    traj = rho1_evolve(1, standard_params, standard_report, 1.0, 0.4, t)
    assert np.max(np.abs(traj.values - 0.4)) < 1e-8
    assert np.all(traj.rho0 == 1.0)


def test_instability_above_threshold(standard_params, standard_report):
    ms = modes.mu_star(standard_report.r0, 1.0, 1.0)
    p = standard_params.with_(mu=2 * ms)
    from tumordelay.stationary import stationary_report
    rep = stationary_report(p)
    traj = rho1_evolve(2, p, rep, 1.0, 0.0, np.linspace(0, 5, 11))
    assert traj.rate0 > 0
    assert abs(traj.values[-1]) > abs(traj.values[1])


def test_trajectory_outputs(standard_params, standard_report, tmp_path):
    t = np.linspace(0.0, 3.0, 31)
    traj = rho1_evolve(3, standard_params, standard_report, 1.0, 0.0, t)
    traj.to_csv(tmp_path / "t.csv", tau=0.02)
    cols = read_columns(tmp_path / "t.csv")
    assert list(cols) == ["t", "rho0_n", "rho1_n", "rho_n"]
    assert np.array_equal(cols["rho1_n"], traj.values)
    assert np.array_equal(cols["rho_n"], traj.rho0 + 0.02 * traj.values)
    traj.to_json(tmp_path / "t.json")
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["n"] == 3


def test_bad_time_grid(standard_params, standard_report):
    with pytest.raises(DomainError):
        rho1_evolve(2, standard_params, standard_report, 1.0, 0.0, [0.5, 1.0])


def test_fit_rate():
    t = np.linspace(0, 5, 51)
    assert fit_rate(t, 3.0 * np.exp(-2.0 * t)) == pytest.approx(-2.0)
    assert np.isnan(fit_rate(t, np.zeros_like(t)))
