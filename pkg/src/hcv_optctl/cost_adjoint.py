"""Treatment cost functional and its adjoint gradient.

The running cost is

    L(x, u) = w_V (V_I + V_NI)^2 + w_I I^2 - w_T T^2 + w_eps eps^2 + w_rho rho^2

and the total cost is its integral over the schedule horizon, accumulated
as a fifth state variable during forward integration.

Gradient derivation
-------------------
With Hamiltonian ``H = L + lam . f`` and ``g = r (1 - (T + I)/T_max)``,
``a = r / T_max``, ``E = eps_bar``, ``R = rho_bar`` (decayed efficacies) and
``D = exp(-k (t - t_end)_+)`` the decay factor, the costate obeys
``lam' = -dH/dx`` with ``lam(horizon) = 0``:

    dH/dT    = -2 w_T T + lam_T (g - a T - d - beta V_I) + lam_I (beta V_I - a I)
    dH/dI    =  2 w_I I - lam_T a T + lam_I (g - a I - delta)
                + (1 - E) p ((1 - R) lam_VI + R lam_VNI)
    dH/dV_I  =  2 w_V (V_I + V_NI) + beta T (lam_I - lam_T) - c lam_VI
    dH/dV_NI =  2 w_V (V_I + V_NI) - c lam_VNI

and the control partials are

    dH/deps = 2 w_eps eps - D p I ((1 - R) lam_VI + R lam_VNI)
    dH/drho = 2 w_rho rho + D (1 - E) p I (lam_VNI - lam_VI)

For a piecewise-constant schedule, ``dJ/du_j`` is the integral of ``dH/du``
over interval ``j``. The eps/rho penalty is applied to the raw control.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import _kernels as K
from .integrator import (
    IntegratorSettings,
    Trajectory,
    _raise_for_status,
    integrate,
    pack_parameters,
)
from .model import ControlInput, ControlSchedule, ModelParameters, State

__all__ = [
    "ControlSchedule",
    "CostWeights",
    "running_cost",
    "total_cost",
    "gradient",
    "cost_and_gradient",
]


@dataclass(frozen=True)
class CostWeights:
    w_v: float = 1.0
    w_i: float = 1.0
    w_t: float = 1.0
    w_eps: float = 1.0
    w_rho: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"weight {f.name} must be finite and >= 0, got {value!r}")

    @classmethod
    def zeros(cls) -> CostWeights:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    @property
    def all_zero(self) -> bool:
        return not any(astuple(self))

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def running_cost(state: State, control: ControlInput, weights: CostWeights) -> float:
    w = weights
    load = state.V_I + state.V_NI
    return (
        w.w_v * load**2
        + w.w_i * state.I**2
        - w.w_t * state.T**2
        + w.w_eps * control.epsilon**2
        + w.w_rho * control.rho**2
    )


def _forward(schedule, initial, params, weights, settings) -> Trajectory:
    return integrate(
        initial, schedule, params, schedule.t0, schedule.horizon, settings, weights=weights
    )


def total_cost(
    schedule: ControlSchedule,
    initial: State,
    params: ModelParameters,
    weights: CostWeights | None = None,
    settings: IntegratorSettings | None = None,
) -> float:
    weights = weights or CostWeights()
    return _forward(schedule, initial, params, weights, settings).total_cost


def _adjoint(traj: Trajectory, schedule, params, weights, settings) -> np.ndarray:
    settings = settings or IntegratorSettings()
    q = pack_parameters(params, weights)
    n = traj.times.size - 1
    status, t_fail, grad, _ = K.adjoint_solve(
        np.ascontiguousarray(schedule.mesh),
        np.ascontiguousarray(schedule.values),
        q,
        traj.times,
        np.ascontiguousarray(traj.states),
        np.ascontiguousarray(traj._slopes_start[:, :4]),
        np.ascontiguousarray(traj._slopes_end[:, :4]),
        n,
        settings.rel_tol,
        np.full(6, settings.abs_tol),
        settings.max_step,
        settings.initial_step,
        settings.max_steps,
    )
    _raise_for_status(status, t_fail)
    return grad


def cost_and_gradient(
    schedule: ControlSchedule,
    initial: State,
    params: ModelParameters,
    weights: CostWeights | None = None,
    settings: IntegratorSettings | None = None,
) -> tuple[float, np.ndarray, Trajectory]:
    """Total cost, per-interval gradient ``(N, 2)`` and the forward trajectory."""
    weights = weights or CostWeights()
    traj = _forward(schedule, initial, params, weights, settings)
    if weights.all_zero:
        return traj.total_cost, np.zeros_like(schedule.values), traj
    return traj.total_cost, _adjoint(traj, schedule, params, weights, settings), traj


def gradient(
    schedule: ControlSchedule,
    initial: State,
    params: ModelParameters,
    weights: CostWeights | None = None,
    settings: IntegratorSettings | None = None,
) -> np.ndarray:
    """``(dJ/d eps_j, dJ/d rho_j)`` for every schedule interval, shape ``(N, 2)``."""
    return cost_and_gradient(schedule, initial, params, weights, settings)[1]
