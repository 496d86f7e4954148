import numpy as np
import pytest

from conftest import J_CONST
from hcv_optctl import optimizer as opt_mod
from hcv_optctl.cost_adjoint import CostWeights
from hcv_optctl.model import PVR_DOSE, TYPICAL_PATIENT, ControlSchedule
from hcv_optctl.optimizer import (
    LOG_HEADER,
    OptimizerSettings,
    Termination,
    optimize,
    project,
    projected_gradient,
    sti_switches,
)


@pytest.fixture(scope="module")
def default_run():
    from hcv_optctl.steady_states import infected_steady_state

    x0 = infected_steady_state(TYPICAL_PATIENT)
    return optimize(ControlSchedule.constant(PVR_DOSE), x0, TYPICAL_PATIENT)


@pytest.mark.parametrize(
    "pair, expected",
    [((1.3, -0.2), (1.0, 0.0)), ((0.5, 0.5), (0.5, 0.5)), ((1.0, 0.0), (1.0, 0.0))],
)
def test_project_examples(pair, expected):
    assert tuple(project([pair])[0]) == expected


def test_project_is_idempotent(rng):
    values = rng.normal(0.5, 1.0, (50, 2))
    once = project(values)
    np.testing.assert_array_equal(project(once), once)
    assert once.min() >= 0.0 and once.max() <= 1.0


def test_projected_gradient_masks_blocked_components():
    values = np.array([[0.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    grad = np.array([[2.0, -3.0], [-2.0, 3.0], [1.0, -1.0]])
    np.testing.assert_array_equal(
        projected_gradient(values, grad), [[0.0, 0.0], [-2.0, 3.0], [1.0, -1.0]]
    )


@pytest.mark.parametrize(
    "kwargs",
    [
        {"max_iters": 0},
        {"grad_tol": 0.0},
        {"armijo_c": 1.0},
        {"backtrack_factor": 0.0},
        {"initial_step": -1.0},
        {"mesh_intervals": 0},
    ],
)
def test_settings_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerSettings(**kwargs)


def test_zero_weights_is_a_no_op(x_inf):
    start = ControlSchedule.constant(PVR_DOSE, 224.0, 32)
    res = optimize(start, x_inf, TYPICAL_PATIENT, CostWeights.zeros())
    assert res.termination is Termination.CONVERGED
    assert res.iterations == 0
    assert res.schedule == start
    assert res.cost == 0.0


def test_default_run_descends_and_stays_feasible(default_run):
    res = default_run
    costs = np.array(res.cost_history)
    assert np.all(np.diff(costs) <= 0.0)
    assert res.cost <= J_CONST
    assert res.schedule.values.min() >= 0.0 and res.schedule.values.max() <= 1.0
    assert res.schedule.n_intervals == 224
    assert res.final_trajectory.total_cost == res.cost


def test_default_run_clears_virus_by_end_of_treatment(default_run):
    final = default_run.final_trajectory.final_state
    assert final.viral_load < 50.0


def test_descent_on_coarse_mesh_with_many_iterations(x_inf):
    # balanced weights give a well-conditioned problem that needs many steps
    w = CostWeights(w_v=1e-12, w_i=1e-12, w_t=1e-14)
    start = ControlSchedule.constant(PVR_DOSE, 224.0, 16)
    res = optimize(start, x_inf, TYPICAL_PATIENT, w, OptimizerSettings(max_iters=15))
    assert res.iterations >= 5
    assert np.all(np.diff(res.cost_history) <= 0.0)
    assert res.cost < res.cost_history[0]


def test_optimize_is_deterministic(x_inf):
    start = ControlSchedule.constant(PVR_DOSE, 224.0, 32)
    a = optimize(start, x_inf, TYPICAL_PATIENT)
    b = optimize(start, x_inf, TYPICAL_PATIENT)
    assert a.cost_history == b.cost_history
    assert np.array_equal(a.schedule.values, b.schedule.values)


def test_doubling_mesh_does_not_worsen_cost(x_inf):
    coarse = optimize(ControlSchedule.constant(PVR_DOSE, 224.0, 56), x_inf, TYPICAL_PATIENT)
    fine = optimize(ControlSchedule.constant(PVR_DOSE, 224.0, 112), x_inf, TYPICAL_PATIENT)
    # costs are negative, so "worse" means larger
    assert fine.cost <= coarse.cost + 0.01 * abs(coarse.cost)


def test_line_search_failure_is_reported(x_inf, monkeypatch):
    start = ControlSchedule.constant(PVR_DOSE, 224.0, 4)

    def rigged(schedule, *args):
        # every move away from the start looks worse
        moved = not np.array_equal(schedule.values, start.values)
        return (1.0 if moved else 0.0), np.ones((4, 2)), None

    monkeypatch.setattr(opt_mod, "cost_and_gradient", rigged)
    res = optimize(start, x_inf, TYPICAL_PATIENT)
    assert res.termination is Termination.LINE_SEARCH_FAILURE
    assert res.iterations == 0
    assert res.schedule == start


def test_max_iters_termination(x_inf):
    w = CostWeights(w_v=1e-12, w_i=1e-12, w_t=1e-14)
    res = optimize(
        ControlSchedule.constant(PVR_DOSE, 224.0, 8), x_inf, TYPICAL_PATIENT, w,
        OptimizerSettings(max_iters=2, grad_tol=1e-300),
    )
    assert res.termination is Termination.MAX_ITERS
    assert res.iterations == 2


def test_sti_switch_count():
    values = [[0.0, 0.5], [1.0, 0.5], [0.95, 0.0], [0.5, 1.0], [0.05, 0.0], [1.0, 1.0]]
    sched = ControlSchedule(np.arange(7.0), values)
    assert sti_switches(sched) == (3, 3)


def test_log_layout(default_run, tmp_path):
    path = tmp_path / "log.csv"
    default_run.write_log(path)
    lines = path.read_text().splitlines()
    assert tuple(lines[0].split(",")) == LOG_HEADER
    assert len(lines) == default_run.iterations + 2
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == default_run.cost_history[0]
