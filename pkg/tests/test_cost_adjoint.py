import numpy as np
import pytest

from conftest import J_CONST, TIGHT, fd_gradient, gradient_mismatch
from hcv_optctl.cost_adjoint import (
    CostWeights,
    cost_and_gradient,
    gradient,
    running_cost,
    total_cost,
)
from hcv_optctl.model import (
    PVR_DOSE,
    TYPICAL_PATIENT,
    ControlInput,
    ControlSchedule,
    ModelParameters,
    State,
)

UNIT = CostWeights()
# keeps the cost O(1)-O(100) so finite differences resolve every component
BALANCED = CostWeights(w_v=1e-12, w_i=1e-12, w_t=1e-14)


def _weekly(values):
    return ControlSchedule(np.linspace(0.0, 224.0, 33), values)


@pytest.mark.parametrize(
    "state, control, expected",
    [
        (State(0, 0, 0, 0), ControlInput(0, 0), 0.0),
        (State(1, 0, 0, 0), ControlInput(0, 0), -1.0),
        (State(0, 1, 1, 1), ControlInput(1, 1), 7.0),
    ],
)
def test_running_cost_examples(state, control, expected):
    assert running_cost(state, control, UNIT) == expected


def test_running_cost_weighted_terms():
    w = CostWeights(2.0, 3.0, 5.0, 7.0, 11.0)
    got = running_cost(State(1.5, 2.0, 0.25, 0.5), ControlInput(0.5, 0.2), w)
    assert got == pytest.approx(2 * 0.75**2 + 3 * 4 - 5 * 2.25 + 7 * 0.25 + 11 * 0.04, rel=1e-15)


def test_running_cost_symmetric_in_virion_pools(rng):
    for _ in range(20):
        T, I, a, b = rng.uniform(0, 1e7, 4)
        u = ControlInput(*rng.uniform(0, 1, 2))
        assert running_cost(State(T, I, a, b), u, UNIT) == running_cost(State(T, I, b, a), u, UNIT)


def test_weights_validation():
    with pytest.raises(ValueError):
        CostWeights(w_t=-1.0)
    with pytest.raises(ValueError):
        CostWeights(w_v=float("nan"))
    assert CostWeights.zeros().all_zero
    assert not UNIT.all_zero


def test_zero_weights_give_zero_cost(x_inf, rng):
    sched = _weekly(rng.uniform(0, 1, (32, 2)))
    assert total_cost(sched, x_inf, TYPICAL_PATIENT, CostWeights.zeros()) == 0.0


def test_equilibrium_cost_is_horizon_times_integrand(x_inf):
    sched = ControlSchedule.constant(ControlInput(), 224.0, 224)
    want = 224.0 * running_cost(x_inf, ControlInput(), UNIT)
    assert total_cost(sched, x_inf, TYPICAL_PATIENT, UNIT) == pytest.approx(want, rel=1e-4)


def test_constant_dose_reference_cost(x_inf):
    sched = ControlSchedule.constant(PVR_DOSE)
    cost = total_cost(sched, x_inf, TYPICAL_PATIENT, UNIT, TIGHT)
    assert cost == pytest.approx(J_CONST, rel=1e-12)
    # default tolerances agree with the tight reference
    assert total_cost(sched, x_inf, TYPICAL_PATIENT, UNIT) == pytest.approx(J_CONST, rel=1e-10)


@pytest.mark.parametrize("factor", [2, 3, 7])
def test_cost_invariant_under_mesh_refinement(x_inf, factor):
    sched = ControlSchedule.constant(PVR_DOSE, 224.0, 32)
    coarse = total_cost(sched, x_inf, TYPICAL_PATIENT, UNIT, TIGHT)
    fine = total_cost(sched.refine(factor), x_inf, TYPICAL_PATIENT, UNIT, TIGHT)
    assert abs(fine - coarse) < 1e-8 * abs(coarse)


def test_zero_weights_give_zero_gradient(x_inf, rng):
    sched = _weekly(rng.uniform(0, 1, (32, 2)))
    np.testing.assert_array_equal(gradient(sched, x_inf, TYPICAL_PATIENT, CostWeights.zeros()), 0.0)


def test_cost_and_gradient_consistent(x_inf):
    sched = ControlSchedule.constant(PVR_DOSE, 224.0, 16)
    cost, grad, traj = cost_and_gradient(sched, x_inf, TYPICAL_PATIENT, UNIT)
    assert cost == traj.total_cost == total_cost(sched, x_inf, TYPICAL_PATIENT, UNIT)
    np.testing.assert_array_equal(grad, gradient(sched, x_inf, TYPICAL_PATIENT, UNIT))
    assert grad.shape == (16, 2)


@pytest.mark.parametrize("seed", [1, 2])
def test_gradient_matches_finite_differences(x_inf, seed):
    rng = np.random.default_rng(seed)
    sched = _weekly(rng.uniform(0.2, 0.8, (32, 2)))
    _, grad, _ = cost_and_gradient(sched, x_inf, TYPICAL_PATIENT, UNIT, TIGHT)
    assert gradient_mismatch(grad, fd_gradient(sched, x_inf, TYPICAL_PATIENT, UNIT)) <= 1.0


def test_gradient_under_parameter_perturbations(rng):
    # unit weights put |J| near 4e16 for some draws, beyond what finite
    # differences resolve on late intervals, so use the balanced weights
    for _ in range(3):
        P = ModelParameters(*(TYPICAL_PATIENT.to_array()[:9] * rng.uniform(0.5, 1.5, 9)))
        x0 = State(*(np.array([3e6, 5e5, 5e6, 0.0]) * rng.uniform(0.8, 1.2, 4)))
        sched = _weekly(rng.uniform(0.2, 0.8, (32, 2)))
        _, grad, _ = cost_and_gradient(sched, x0, P, BALANCED, TIGHT)
        assert gradient_mismatch(grad, fd_gradient(sched, x0, P, BALANCED)) <= 1.0


@pytest.mark.parametrize("pair", [(1.0, 0.3), (0.5, 1.0)])
def test_gradient_at_upper_bound_matches_one_sided_differences(x_inf, pair):
    sched = _weekly(np.tile(pair, (32, 1)))
    _, grad, _ = cost_and_gradient(sched, x_inf, TYPICAL_PATIENT, BALANCED, TIGHT)
    assert gradient_mismatch(grad, fd_gradient(sched, x_inf, TYPICAL_PATIENT, BALANCED)) <= 1.0


def test_penalty_only_gradient_is_analytic(x_inf, rng):
    w = CostWeights(0.0, 0.0, 0.0, 3.0, 5.0)
    values = rng.uniform(0, 1, (32, 2))
    grad = gradient(_weekly(values), x_inf, TYPICAL_PATIENT, w)
    np.testing.assert_allclose(grad, 7.0 * 2 * values * [3.0, 5.0], rtol=1e-9)
