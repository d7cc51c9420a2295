import json

import numpy as np
import pytest
from scipy.integrate import simpson

from tumordelay import radialsim
from tumordelay.errors import DomainError, SimulationAborted
from tumordelay.profile import read_columns
from tumordelay.radialsim import (
    DelayHistory,
    RadialSimulator,
    _trace_back,
    load_config,
    run,
    self_convergence_order,
    step,
)
from tumordelay.stationary import solve_r0, solve_stationary_delayed

TAU = 0.02
DT = 0.005


@pytest.fixture(scope="module")
def delayed(standard_params):
    return solve_stationary_delayed(standard_params.with_(tau=TAU))


def test_zero_delay_stationary_is_fixed(standard_params):
    r0 = solve_r0(standard_params)
    res = run(standard_params, r0, 20.0, 0.01, stop_when_converged=False)
    assert np.max(np.abs(res.radius - r0)) < 1e-6
    assert res.converged


def test_delayed_stationary_is_fixed(standard_params, delayed):
    p = standard_params.with_(tau=TAU)
    radius = delayed.delayed.radius
    res = run(p, radius, 20.0, DT, stop_when_converged=False, record_every=20)
    assert np.max(np.abs(res.radius - radius)) < 1e-6
    assert res.clamps == 0


def test_one_step_from_stationary_is_small(standard_params, delayed):
    p = standard_params.with_(tau=TAU)
    sim = RadialSimulator(p, DT)
    state = sim.initial_state(delayed.delayed.radius)
    nxt = step(state, DT, p)
    assert abs(nxt.radius - state.radius) < 10 * DT**2 * 1e-3


def test_warmup_gradient_matches_stationary_solver(standard_params, delayed):
    p = standard_params.with_(tau=TAU)
    d = delayed.delayed
    state = RadialSimulator(p, DT).initial_state(d.radius)
    assert np.max(np.abs(state.grad - d.pressure_gradient)) < 1e-6


def test_boundary_characteristic_stays_on_boundary(standard_params, delayed):
    p = standard_params.with_(tau=TAU)
    d = delayed.delayed
    sim = RadialSimulator(p, DT)
    state = sim.initial_state(d.radius)
    h = state.history
    xi, _ = _trace_back(d.radius * sim.x, 0.0, TAU, 16, h.times, h.radii, h.grads, h.count)
    assert xi[-1] == pytest.approx(d.radius, abs=1e-9)
    assert abs(xi[0]) < 1e-12


def test_conservation_at_equilibrium(standard_params, delayed):
    p = standard_params.with_(tau=TAU)
    d = delayed.delayed
    res = run(p, d.radius, 2.0, DT, stop_when_converged=False, record_every=400)
    st = res.final_state
    sim = RadialSimulator(p, DT)
    h = st.history
    xi, _ = _trace_back(st.radius * sim.x, st.t, TAU, 16, h.times, h.radii, h.grads, h.count)
    r = st.radius * sim.x
    r_past = float(np.interp(st.t - TAU, h.times[:h.count], h.radii[:h.count]))
    integral = simpson((sim.nutrient(r_past, np.clip(xi, 0, r_past)) - p.sigma_tilde) * r, x=r)
    assert abs(integral) < 1e-9


def test_zero_delay_monotone_convergence(standard_params):
    r0 = solve_r0(standard_params)
    res = run(standard_params, 1.1 * r0, 200.0, 0.01)
    assert res.converged
    assert np.all(np.diff(res.radius) <= 1e-15)
    assert res.limit_radius == pytest.approx(r0, abs=1e-6)


def test_zero_delay_second_order(standard_params):
    r0 = solve_r0(standard_params)
    out = self_convergence_order(standard_params, 0.8 * r0, 1.0, 0.01)
    assert out["order"] > 1.9


def test_dt_must_respect_delay(standard_params):
    p = standard_params.with_(tau=TAU)
    with pytest.raises(DomainError):
        RadialSimulator(p, 0.01)
    with pytest.raises(DomainError):
        RadialSimulator(p, 0.003)
    with pytest.raises(DomainError):
        RadialSimulator(p, 0.0)


def test_bad_inputs(standard_params):
    with pytest.raises(DomainError):
        run(standard_params, 1.0, -1.0, 0.01)
    with pytest.raises(DomainError):
        run(standard_params, 1e-6, 1.0, 0.01)


def test_radius_floor_aborts(standard_params, monkeypatch):
    monkeypatch.setattr(radialsim, "RADIUS_FLOOR", 1.55)
    with pytest.raises(SimulationAborted):
        run(standard_params, 1.6, 50.0, 0.01)


def test_history_prunes_and_grows():
    h = DelayHistory(window=0.1, n_nodes=4, capacity=4)
    for k in range(50):
        h.push(0.01 * k, 1.0 + k, np.full(4, float(k)))
    assert h.times[0] <= 0.49 - 0.1
    assert h.span >= 0.1
    assert h.count < 50
    with pytest.raises(ValueError):
        h.push(0.0, 1.0, np.zeros(4))
    t, prof, radius = h.samples()[-1]
    assert t == pytest.approx(0.49) and radius == 50.0 and prof.values[0] == 49.0


def test_result_outputs(standard_params, tmp_path):
    res = run(standard_params, 1.2, 0.5, 0.01)
    res.to_csv(tmp_path / "sim.csv")
    cols = read_columns(tmp_path / "sim.csv")
    assert list(cols) == ["t", "radius", "boundary_pressure_gradient"]
    assert np.array_equal(cols["radius"], res.radius)
    res.to_json(tmp_path / "sim.json")
    summary = json.loads((tmp_path / "sim.json").read_text())
    assert {"converged", "limit_radius", "step_count"} <= set(summary)
    assert summary["step_count"] == 50


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# run\nalpha = 2\nsigma-bar=1.5  # trailing\n\n")
    assert load_config(path) == {"alpha": "2", "sigma_bar": "1.5"}
    path.write_text("alpha 2\n")
    with pytest.raises(DomainError):
        load_config(path)
