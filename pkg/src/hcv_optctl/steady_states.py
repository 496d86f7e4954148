"""Closed-form equilibria of the HCV model and their numerical verification."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ControlInput, ModelParameters, State, jacobian, rhs

__all__ = [
    "DegenerateEfficacyError",
    "FixedPointReport",
    "SteadyStateSet",
    "uninfected_steady_state",
    "infected_steady_state",
    "steady_state_set",
    "verify_fixed_point",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6


class DegenerateEfficacyError(ValueError):
    """Raised when ``epsilon == 1`` or ``rho == 1`` makes the closed form singular."""


@dataclass(frozen=True)
class FixedPointReport:
    residuals: np.ndarray
    max_norm: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_norm < self.threshold


@dataclass(frozen=True)
class SteadyStateSet:
    """Both equilibria at a fixed dose.

    ``infected`` is ``None`` when the dose is strong enough that no infected
    equilibrium with nonnegative components exists.
    """

    uninfected: State
    infected: State | None
    aux_A: float
    aux_D: float
    epsilon_star: float
    rho_star: float


def verify_fixed_point(
    state: State,
    control: ControlInput,
    params: ModelParameters,
    tol: float = DEFAULT_TOL,
) -> FixedPointReport:
    """Residual of ``rhs`` at ``state``; passes when the max-norm is below ``tol * s``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    res = np.abs(rhs(state, control, params))
    return FixedPointReport(res, float(res.max()), tol * params.s)


def uninfected_steady_state(params: ModelParameters) -> State:
    P = params
    if P.r <= 0:
        raise ValueError("uninfected steady state needs r > 0")
    disc = (P.r - P.d) ** 2 + 4.0 * P.r * P.s / P.t_max
    T_u = P.t_max / (2.0 * P.r) * (P.r - P.d + math.sqrt(disc))
    return State(T_u, 0.0, 0.0, 0.0)


def _auxiliary(params: ModelParameters, epsilon: float, rho: float):
    P = params
    eps_star = 1.0 - epsilon
    rho_star = 1.0 - rho
    A = eps_star * rho_star * P.p * P.beta * P.t_max / P.c
    D = P.t_max / P.r**2 * (A * (P.r - P.delta) + P.r * (P.d - P.delta))
    return A, D, eps_star, rho_star


def _closed_form_infected(params: ModelParameters, epsilon: float, rho: float) -> np.ndarray:
    P = params
    A, D, eps_star, _ = _auxiliary(params, epsilon, rho)
    rho_star = 1.0 - rho
    b = P.r**2 * D / A**2
    T_i = 0.5 * (-b + math.sqrt(b * b + 4.0 * P.r * P.s * P.t_max / A**2))
    I_i = T_i * (A / P.r - 1.0) + P.t_max - P.delta * P.t_max / P.r
    V_Ii = eps_star * rho_star * P.p / P.c * I_i
    V_NIi = eps_star * rho * P.p / P.c * I_i
    return np.array([T_i, I_i, V_Ii, V_NIi])


def _damped_newton(x0, control, params, tol, max_iter=50):
    x = np.array(x0, dtype=float)
    f = rhs(x, control, params)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol * params.s:
            return x
        dx = np.linalg.solve(jacobian(x, control, params), -f)
        lam = 1.0
        while lam > 1e-10:
            trial = x + lam * dx
            f_trial = rhs(trial, control, params)
            if np.max(np.abs(f_trial)) < np.max(np.abs(f)):
                break
            lam *= 0.5
        x, f = trial, f_trial
    return x


def infected_steady_state(
    params: ModelParameters, epsilon: float = 0.0, rho: float = 0.0
) -> State | None:
    """Infected equilibrium under constant efficacies.

    Returns ``None`` when the formulas give a negative component, meaning the
    dose clears the infection.
    """
    control = ControlInput(epsilon, rho)
    if epsilon == 1.0 or rho == 1.0:
        raise DegenerateEfficacyError(
            f"closed form is singular for epsilon={epsilon}, rho={rho}"
        )
    x = _closed_form_infected(params, epsilon, rho)
    if np.any(x < 0):
        return None

    report = verify_fixed_point(State.from_array(x), control, params)
    if not report.passed:
        refined = _damped_newton(x, control, params, DEFAULT_TOL)
        log.warning(
            "closed-form infected state residual %.3e exceeds %.3e; "
            "Newton refinement moved it by %s",
            report.max_norm,
            report.threshold,
            refined - x,
        )
        x = refined
        if np.any(x < 0):
            return None
    return State.from_array(x)


def steady_state_set(
    params: ModelParameters, epsilon: float = 0.0, rho: float = 0.0
) -> SteadyStateSet:
    A, D, eps_star, rho_star = _auxiliary(params, epsilon, rho)
    return SteadyStateSet(
        uninfected=uninfected_steady_state(params),
        infected=infected_steady_state(params, epsilon, rho),
        aux_A=A,
        aux_D=D,
        epsilon_star=eps_star,
        rho_star=rho_star,
    )
