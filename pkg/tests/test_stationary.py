import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, trapezoid

from tumordelay import besselkit as bk
from tumordelay.errors import DelayTooLargeError, DomainError, NoStationaryRadiusError
from tumordelay.profile import read_columns, write_columns
from tumordelay.stationary import (
    ModelParams,
    dirichlet_radius,
    lam,
    nutrient_amplitude,
    p0_second_derivative_boundary,
    solve_r0,
    solve_r1,
    solve_stationary_delayed,
    stationary_report,
)
from tests.oracles import frozen


@st.composite
def admissible(draw):
    alpha = draw(st.floats(min_value=0.05, max_value=20.0))
    sigma_bar = draw(st.floats(min_value=0.2, max_value=5.0))
    frac = draw(st.floats(min_value=0.05, max_value=0.95))
    mu = draw(st.floats(min_value=0.1, max_value=10.0))
    return ModelParams(alpha, sigma_bar, frac * sigma_bar, mu)


def test_r0_matches_mpmath(standard_params):
    assert solve_r0(standard_params) == pytest.approx(frozen.R0_STANDARD, rel=1e-13)


def test_nutrient_balance_by_quadrature(standard_params, standard_report):
    sig = standard_report.sigma0
    val, _ = quad(lambda r: (sig(r) - standard_params.sigma_tilde) * r, 0, standard_report.r0,
                  epsabs=1e-14)
    assert abs(val) < 1e-12


def test_nutrient_robin_condition(standard_params, standard_report):
    sig, r0 = standard_report.sigma0, standard_report.r0
    a, sb = standard_params.alpha, standard_params.sigma_bar
    assert sig.slope(r0) + a * (sig(r0) - sb) == pytest.approx(0.0, abs=1e-14)


def test_pressure_boundary_data(standard_report):
    p, r0 = standard_report.p0, standard_report.r0
    assert p(r0) == pytest.approx(1.0 / r0, rel=1e-14)
    assert abs(p.slope(r0)) < 1e-13
    assert abs(p.slope(0.0)) < 1e-15


def test_pressure_solves_poisson(standard_params, standard_report):
    p, sig = standard_report.p0, standard_report.sigma0
    r = np.linspace(0.2, standard_report.r0 - 0.05, 15)
    h = 1e-4
    lap = (p(r + h) - 2 * p(r) + p(r - h)) / h**2 + (p(r + h) - p(r - h)) / (2 * h * r)
    rhs = -standard_params.mu * (sig(r) - standard_params.sigma_tilde)
    assert np.max(np.abs(lap - rhs)) < 1e-6


def test_pressure_second_derivative_closed_form(standard_params, standard_report):
    p, r0 = standard_report.p0, standard_report.r0
    h = 1e-4
    fd = (p.slope(r0 + h) - p.slope(r0 - h)) / (2 * h)
    assert p0_second_derivative_boundary(standard_params, r0) == pytest.approx(fd, rel=1e-7)
    assert p0_second_derivative_boundary(standard_params, r0) < 0


def test_lambda_closed_form(standard_params, standard_report):
    r0 = standard_report.r0
    c = nutrient_amplitude(1.0, 1.0, r0)
    sig2 = c * bk.bessel_i_derivative(0, r0, 2) / bk.bessel_i(0, r0)
    sig1 = c * bk.bessel_i_derivative(0, r0, 1) / bk.bessel_i(0, r0)
    assert lam(standard_params, r0) == pytest.approx(sig2 + standard_params.alpha * sig1, rel=1e-13)


def test_zero_delay_returns_r0(standard_params):
    rep = solve_stationary_delayed(standard_params)
    assert rep.delayed.radius == rep.r0
    assert rep.r_star == rep.r0


def test_r1_is_radius_slope_in_delay(standard_params):
    tau = 0.01
    rep = solve_stationary_delayed(standard_params.with_(tau=tau))
    slope = (rep.delayed.radius - rep.r0) / tau
    assert slope == pytest.approx(rep.r1, abs=1e-4)


def test_delayed_solution_invariants(standard_params):
    rep = solve_stationary_delayed(standard_params.with_(tau=0.02))
    d = rep.delayed
    assert d.pressure[-1] == pytest.approx(1.0 / d.radius, rel=1e-13)
    # the boundary characteristic stays on the boundary
    assert d.xi_back[-1] == pytest.approx(d.radius, abs=1e-9)
    x = d.nodes
    balance = trapezoid((d.sigma_delayed - standard_params.sigma_tilde) * x, x)
    assert abs(balance) < 1e-6
    assert d.contraction < 1


def test_delay_too_large():
    with pytest.raises(DelayTooLargeError, match="delay too large"):
        solve_stationary_delayed(ModelParams(1.0, 1.0, 0.5, 1.0, tau=12.8))


@pytest.mark.parametrize("kw", [
    {"alpha": 0.0}, {"sigma_bar": -1.0}, {"mu": 0.0}, {"tau": -0.1}, {"alpha": float("nan")},
])
def test_invalid_params(kw):
    base = {"alpha": 1.0, "sigma_bar": 1.0, "sigma_tilde": 0.5, "mu": 1.0}
    base.update(kw)
    with pytest.raises(DomainError):
        ModelParams(**base)


def test_no_stationary_radius_message():
    with pytest.raises(NoStationaryRadiusError, match="no stationary radius"):
        ModelParams(1.0, 1.0, 1.0, 1.0)


def test_large_alpha_approaches_dirichlet_radius():
    p = ModelParams(1e7, 1.0, 0.5, 1.0)
    assert solve_r0(p) == pytest.approx(dirichlet_radius(p), rel=1e-5)


def test_report_serialization(standard_report, tmp_path):
    d = standard_report.to_dict()
    assert all(isinstance(v, float) for v in d.values())
    assert {"r0", "r1", "lambda", "r_star"} <= set(d)
    cols = standard_report.profile_columns()
    path = tmp_path / "p.csv"
    write_columns(path, cols)
    back = read_columns(path)
    for k, v in cols.items():
        assert np.array_equal(back[k], v)


@given(admissible())
def test_r0_root(params):
    r0 = solve_r0(params)
    p = bk.pn(0, r0)
    lhs = params.alpha * p / (params.alpha + r0 * p)
    assert lhs == pytest.approx(params.sigma_tilde / (2 * params.sigma_bar), abs=1e-12)


@given(admissible())
def test_r0_decreases_with_threshold(params):
    lower = params.with_(sigma_tilde=0.9 * params.sigma_tilde)
    assert solve_r0(lower) > solve_r0(params)


@given(admissible())
def test_r0_increases_with_alpha(params):
    assert solve_r0(params.with_(alpha=1.5 * params.alpha)) > solve_r0(params)


@given(admissible())
def test_r1_positive_and_linear_in_mu(params):
    r0 = solve_r0(params)
    r1 = solve_r1(params, r0)
    assert r1 > 0
    assert solve_r1(params.with_(mu=2 * params.mu), r0) == pytest.approx(2 * r1, rel=1e-13)


@given(admissible())
def test_stationary_report_consistent(params):
    rep = stationary_report(params, n_nodes=64)
    assert rep.r_star == rep.r0
    assert rep.sigma0.nodes[-1] == rep.r0
    assert rep.lam > 0
