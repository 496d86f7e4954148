import logging
import math

import numpy as np
import pytest

from hcv_optctl import steady_states as ss
from hcv_optctl.model import TYPICAL_PATIENT, ControlInput, ModelParameters, State
from hcv_optctl.steady_states import (
    DegenerateEfficacyError,
    infected_steady_state,
    steady_state_set,
    uninfected_steady_state,
    verify_fixed_point,
)


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _perturbed(rng):
    base = TYPICAL_PATIENT.to_array()[:9]
    return ModelParameters(*(base * rng.uniform(0.5, 1.5, 9)))


def test_uninfected_no_production():
    P = TYPICAL_PATIENT.replace(s=1e-300)
    T = uninfected_steady_state(P).T
    assert T == pytest.approx(P.t_max * (P.r - P.d) / P.r, rel=1e-12)


def test_uninfected_equal_birth_and_death():
    P = TYPICAL_PATIENT.replace(d=TYPICAL_PATIENT.r)
    assert uninfected_steady_state(P).T == pytest.approx(math.sqrt(P.s * P.t_max / P.r), rel=1e-12)


def test_uninfected_matches_bisection_root(params):
    P = params
    quad = lambda T: P.s + P.r * T * (1 - T / P.t_max) - P.d * T  # noqa: E731
    root = _bisect(quad, 0.0, 10 * P.t_max)
    state = uninfected_steady_state(P)
    assert state.T == pytest.approx(root, rel=1e-12)
    assert (state.I, state.V_I, state.V_NI) == (0.0, 0.0, 0.0)
    assert verify_fixed_point(state, ControlInput(), P).passed


def test_infected_drug_free_is_fixed_point(params):
    state = infected_steady_state(params)
    assert all(v > 0 for v in (state.T, state.I, state.V_I))
    assert verify_fixed_point(state, ControlInput(), params).passed


def test_infected_without_ribavirin_has_no_noninfectious_virions(params):
    assert infected_steady_state(params, 0.3, 0.0).V_NI == 0.0


@pytest.mark.parametrize("rho", [0.1, 0.3, 0.5])
def test_infected_virion_ratio(params, rho):
    state = infected_steady_state(params, 0.2, rho)
    assert state.V_I / state.V_NI == pytest.approx((1 - rho) / rho, rel=1e-12)
    assert verify_fixed_point(state, ControlInput(0.2, rho), params).passed


@pytest.mark.parametrize("eps, rho", [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
def test_infected_degenerate_dose(params, eps, rho):
    with pytest.raises(DegenerateEfficacyError):
        infected_steady_state(params, eps, rho)


def test_strong_dose_has_no_infected_equilibrium(params):
    # basic reproduction number falls below one
    assert infected_steady_state(params, 0.95, 0.0) is None
    sset = steady_state_set(params, 0.95, 0.0)
    assert sset.infected is None
    assert sset.uninfected == uninfected_steady_state(params)


def test_verify_fixed_point_origin_fails(params):
    rep = verify_fixed_point(State(0, 0, 0, 0), ControlInput(), params)
    assert not rep.passed
    assert rep.residuals[0] == params.s
    assert rep.max_norm == params.s


def test_verify_fixed_point_rejects_bad_tol(params):
    with pytest.raises(ValueError):
        verify_fixed_point(State(0, 0, 0, 0), ControlInput(), params, tol=0.0)


def test_steady_state_set_auxiliaries(params):
    sset = steady_state_set(params, 0.2, 0.1)
    assert sset.epsilon_star == pytest.approx(0.8)
    assert sset.rho_star == pytest.approx(0.9)
    A = 0.8 * 0.9 * params.p * params.beta * params.t_max / params.c
    assert sset.aux_A == pytest.approx(A, rel=1e-14)
    D = params.t_max / params.r**2 * (
        A * (params.r - params.delta) + params.r * (params.d - params.delta)
    )
    assert sset.aux_D == pytest.approx(D, rel=1e-14)


def test_random_parameter_sets(rng):
    checked = 0
    for _ in range(100):
        P = _perturbed(rng)
        assert verify_fixed_point(uninfected_steady_state(P), ControlInput(), P).passed
        x = ss._closed_form_infected(P, 0.0, 0.0)
        if np.all(x >= 0):
            assert verify_fixed_point(State.from_array(x), ControlInput(), P).passed
            checked += 1
    assert checked > 50


def test_uninfected_independent_of_dose(params):
    doses = [(0, 0), (0.5, 0.2), (0.9, 0.9)]
    states = {steady_state_set(params, e, r).uninfected for e, r in doses}
    assert len(states) == 1


def test_more_interferon_lowers_infectious_load(params):
    # healthy cells rise and infectious virions fall until the infection clears
    for rho in (0.0, 0.2, 0.5):
        previous = None
        for eps in np.linspace(0.0, 0.99, 60):
            state = infected_steady_state(params, eps, rho)
            if state is None:
                break
            if previous is not None:
                assert state.T >= previous.T
                assert state.V_I <= previous.V_I
            previous = state
        assert state is None


def test_newton_fallback_recovers_equilibrium(params, monkeypatch, caplog):
    good = ss._closed_form_infected(params, 0.0, 0.0)
    monkeypatch.setattr(ss, "_closed_form_infected", lambda P, e, r: good * [1.02, 0.97, 1.05, 1.0])
    with caplog.at_level(logging.WARNING, logger="hcv_optctl.steady_states"):
        state = infected_steady_state(params)
    assert "Newton refinement" in caplog.text
    assert verify_fixed_point(state, ControlInput(), params).passed
    np.testing.assert_allclose(state.to_array(), good, rtol=1e-6)
