import numpy as np
import pytest

from oracles import X0, window_cost
from toppmpc.integrator import StepConfig, simulate_constant
from toppmpc.model import NOMINAL_STATE, ModelParams, State
from toppmpc.mpc import (ControlledRun, MpcConfig, MpcRunError, golden_section, grid_costs,
                         predicted_cost, run_receding_horizon, solve_step)

P = ModelParams()
CFG = MpcConfig()
HYPER = State(600.0, 0.0, 0.0, 0.028, 0.0)


def test_config_defaults():
    assert (CFG.T, CFG.N, CFG.lam, CFG.u_eq_max, CFG.horizon) == (2.0, 20, 60.0, 3.0, 365.0)
    assert CFG.window == 40.0
    assert CFG.n_periods == 183


def test_cost_at_hyperglycemic_equilibrium():
    assert predicted_cost(HYPER, 0.0, CFG, P) == pytest.approx(600.0 ** 2 * 40, rel=1e-12)


def test_cost_additivity_with_input():
    c = predicted_cost(HYPER, 1.0, CFG, P)
    assert c == pytest.approx(1.44e7 + 2400.0, rel=1e-6)
    assert c == pytest.approx(window_cost(HYPER.as_array(), 1.0, 60.0), rel=1e-8)


@pytest.mark.parametrize("u", [0.0, 0.7, 1.5, 3.0])
def test_cost_matches_reference(u):
    assert predicted_cost(NOMINAL_STATE, u, CFG, P) == pytest.approx(
        window_cost(X0, u, 60.0), rel=1e-8)


@pytest.mark.parametrize("u", [0.3, 2.0])
def test_lambda_zero_is_pure_glucose_integral(u):
    c60 = predicted_cost(NOMINAL_STATE, u, CFG, P)
    c0 = predicted_cost(NOMINAL_STATE, u, MpcConfig(lam=0.0), P)
    assert c0 == pytest.approx(c60 - 60.0 * u * u * 40.0, rel=1e-14)
    assert c0 == pytest.approx(window_cost(X0, u, 0.0), rel=1e-8)


def test_candidate_outside_bounds_rejected():
    with pytest.raises(ValueError):
        predicted_cost(NOMINAL_STATE, 3.5, CFG, P)


def test_grid_costs_match_scalar_evaluation():
    us, costs = grid_costs(NOMINAL_STATE, CFG, P)
    assert len(us) == 31 and us[0] == 0.0 and us[-1] == 3.0
    scalar = np.array([predicted_cost(NOMINAL_STATE, u, CFG, P) for u in us])
    assert np.array_equal(costs, scalar)


def test_golden_section_on_parabola():
    x, fx, n = golden_section(lambda u: (u - 0.3) ** 2, 0.0, 1.0, 1e-6)
    assert x == pytest.approx(0.3, abs=1e-6) and fx < 1e-12 and n > 10


@pytest.mark.parametrize("x", [NOMINAL_STATE, State(180.0, 40.0, 200.0, 0.3, 2e6),
                               State(120.0, 60.0, 900.0, 0.05, 8e6), HYPER])
def test_solve_step_never_worse_than_grid(x):
    us, costs = grid_costs(x, CFG, P)
    res = solve_step(x, CFG, P)
    assert 0.0 <= res.u <= CFG.u_eq_max
    assert res.cost <= costs.min() * (1 + 1e-9)
    assert res.cost == predicted_cost(x, res.u, CFG, P)


def test_healthy_equilibrium_needs_no_exercise():
    pinned = P.replace(c=0.0)
    assert solve_step(NOMINAL_STATE, CFG, pinned).u == 0.0


def test_first_move_matches_brute_force():
    res = solve_step(NOMINAL_STATE, CFG, P)
    fine = np.linspace(0.0, 3.0, 301)
    brute = fine[int(np.argmin([predicted_cost(NOMINAL_STATE, u, CFG, P) for u in fine]))]
    assert res.u == pytest.approx(brute, abs=1e-2)


def test_first_move_from_nominal_start():
    # Documented discrepancy: the window cost here is minimised at the upper bound.
    assert solve_step(NOMINAL_STATE, CFG, P).u == pytest.approx(1.5, abs=CFG.refine_tol)


@pytest.mark.parametrize("x", [NOMINAL_STATE, HYPER, State(150.0, 30.0, 100.0, 0.1, 1e6)])
def test_huge_lambda_gives_zero(x):
    assert solve_step(x, MpcConfig(lam=1e9), P).u == 0.0


def test_zero_lambda_gives_max_at_start():
    assert solve_step(NOMINAL_STATE, MpcConfig(lam=0.0), P).u == 3.0


def test_run_shape(nominal_run):
    run = nominal_run
    assert len(run.inputs) == CFG.n_periods
    assert np.all((run.inputs >= 0) & (run.inputs <= CFG.u_eq_max))
    assert np.array_equal(run.times, 2.0 * np.arange(183))
    assert run.trajectory.times[-1] == 365.0 and run.t_end == 365.0
    assert np.array_equal(run.trajectory.states[-1], run.final_state.as_array())
    assert np.array_equal(run.trajectory.times, np.arange(366.0))
    assert np.all(run.trajectory.states >= 0)


def test_run_reaches_normoglycemia(nominal_run):
    assert nominal_run.final_state.G == pytest.approx(100.0, rel=0.05)


def test_input_shape_front_loaded(nominal_run):
    u = nominal_run.inputs
    assert nominal_run.times[int(np.argmax(u))] < 365.0 / 2
    assert np.all(u[nominal_run.times >= 365.0 - 30.0] < 0.05)


def test_effort_in_target_band(nominal_run):
    # Documented discrepancy: this controller spends about twice the effort.
    assert 143.0 <= nominal_run.effort() <= 193.0


def test_receding_horizon_restart_is_deterministic(nominal_run):
    k = 150
    rest = run_receding_horizon(State.from_array(nominal_run.states_at_k[k]), CFG, P,
                                start_period=k)
    assert np.array_equal(rest.inputs, nominal_run.inputs[k:])
    assert rest.final_state == nominal_run.final_state


def test_zero_input_bound_is_open_loop():
    cfg = MpcConfig(u_eq_max=0.0)
    run = run_receding_horizon(NOMINAL_STATE, cfg, P)
    ol = simulate_constant(NOMINAL_STATE, 0.0, 365.0, StepConfig(), P)
    assert np.all(run.inputs == 0.0)
    assert np.array_equal(run.trajectory.states, ol.states)


@pytest.mark.slow
def test_effort_nonincreasing_in_lambda(nominal_run):
    etas = [run_receding_horizon(NOMINAL_STATE, MpcConfig(lam=lam), P,
                                 record_trajectory=False).effort() for lam in (6.0, 600.0)]
    assert etas[0] >= nominal_run.effort() >= etas[1]


def test_inputs_csv_round_trip(nominal_run, tmp_path):
    text = nominal_run.inputs_csv()
    assert text.splitlines()[0] == "k,t_days,u_eq_star,cost_predicted,G_at_k"
    back = ControlledRun.read_inputs_csv(text)
    assert np.array_equal(back["u_eq_star"], nominal_run.inputs)
    assert np.array_equal(back["G_at_k"], nominal_run.G_at_k)
    assert np.array_equal(back["k"], np.arange(183))
    nominal_run.inputs_csv(tmp_path / "i.csv")
    assert (tmp_path / "i.csv").read_text() == text


def test_failure_carries_partial_run():
    cfg = MpcConfig(horizon=6.0, N=2, step=StepConfig(h=0.01))
    with pytest.raises(MpcRunError) as err:
        run_receding_horizon(NOMINAL_STATE, cfg, P)
    # the very first solve fails: every grid candidate blows up at h = 0.01
    partial = err.value.partial
    assert len(partial.inputs) == 0 and partial.effort() == 0.0
    assert "period 0" in str(err.value)
