"""Adaptive Dormand-Prince 5(4) integration of the HCV model.

Integration restarts at every control-mesh breakpoint so piecewise-constant
controls are never smeared across a step. Dense output is cubic Hermite on
the stored step-end derivatives.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from . import _kernels as K
from .model import ControlInput, ControlSchedule, ModelParameters, State

__all__ = [
    "IntegratorSettings",
    "Trajectory",
    "IntegrationError",
    "StepSizeUnderflow",
    "BlowUpError",
    "StepLimitExceeded",
    "integrate",
    "sample",
    "TRAJECTORY_HEADER",
]

TRAJECTORY_HEADER = ("t", "T", "I", "V_I", "V_NI", "eps", "rho")


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t!r}")
        self.t = t


class StepSizeUnderflow(IntegrationError):
    pass


class BlowUpError(IntegrationError):
    """Non-finite state or a negative excursion beyond ``10 * abs_tol``."""


class StepLimitExceeded(IntegrationError):
    """More than ``max_steps`` accepted steps, typically a stiff regime."""


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-6
    max_step: float = 10.0
    initial_step: float = 1e-2
    max_steps: int = 1_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "initial_step"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        steps = self.max_steps
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        if self.rel_tol > 1e-2:
            raise ValueError(f"rel_tol must be <= 1e-2, got {self.rel_tol!r}")


def _segments(control, t0, t1):
    if isinstance(control, ControlInput):
        return np.array([t0, t1]), np.array([[control.epsilon, control.rho]])
    if not isinstance(control, ControlSchedule):
        raise TypeError(f"unsupported control type {type(control).__name__}")
    if t0 < control.mesh[0] or t1 > control.mesh[-1]:
        raise ValueError(
            f"schedule covers [{control.mesh[0]}, {control.mesh[-1]}], "
            f"integration requested on [{t0}, {t1}]"
        )
    inner = control.mesh[(control.mesh > t0) & (control.mesh < t1)]
    seg_mesh = np.concatenate([[t0], inner, [t1]])
    values = control.values[control.interval_index(seg_mesh[:-1])]
    return seg_mesh, np.ascontiguousarray(values)


def _raise_for_status(status, t_fail):
    if status == K.STEP_UNDERFLOW:
        raise StepSizeUnderflow("step size underflow", t_fail)
    if status == K.BLOW_UP:
        raise BlowUpError("non-finite state", t_fail)
    if status == K.NEGATIVE_STATE:
        raise BlowUpError("state left the nonnegative orthant", t_fail)
    if status == K.TOO_MANY_STEPS:
        raise StepLimitExceeded("step limit exceeded", t_fail)


def pack_parameters(params: ModelParameters, weights=None) -> np.ndarray:
    q = np.zeros(K.N_Q)
    q[:10] = params.to_array()
    if weights is not None:
        q[12:17] = weights.to_array()
    return q


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted integration steps with dense-output support.

    ``cost`` is the running-cost integral accumulated alongside the state
    (all zeros when no cost weights were supplied).
    """

    times: np.ndarray
    states: np.ndarray
    cost: np.ndarray
    control: ControlInput | ControlSchedule
    params: ModelParameters
    _slopes_start: np.ndarray = field(repr=False)
    _slopes_end: np.ndarray = field(repr=False)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> State:
        return State.from_array(np.maximum(self.states[-1], 0.0))

    @property
    def initial_state(self) -> State:
        return State.from_array(self.states[0])

    @property
    def total_cost(self) -> float:
        return float(self.cost[-1])

    @property
    def viral_load(self) -> np.ndarray:
        return self.states[:, 2] + self.states[:, 3]

    def efficacies(self, times) -> np.ndarray:
        """Effective (decayed) ``(eps, rho)`` acting at each of ``times``."""
        times = np.asarray(times, dtype=float)
        if isinstance(self.control, ControlInput):
            base = np.tile([self.control.epsilon, self.control.rho], (times.size, 1))
        else:
            base = self.control.values[self.control.interval_index(times)]
        P = self.params
        decay = np.exp(-P.k * np.maximum(times - P.t_end, 0.0))
        return base * decay[:, None]

    def output_times(self, cadence: float = 0.25) -> np.ndarray:
        if cadence <= 0:
            raise ValueError("cadence must be positive")
        n = int(math.floor((self.t1 - self.t0) / cadence + 1e-9)) + 1
        times = self.t0 + cadence * np.arange(n)
        if times[-1] < self.t1 - 1e-9 * max(1.0, abs(self.t1)):
            times = np.append(times, self.t1)
        else:
            times[-1] = min(times[-1], self.t1)
        return times

    def to_csv(self, path: str | PathLike, cadence: float = 0.25) -> None:
        times = self.output_times(cadence)
        states = sample(self, times)
        eff = self.efficacies(times)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRAJECTORY_HEADER)
            for t, x, u in zip(times, states, eff):
                writer.writerow([repr(float(v)) for v in (t, *x, *u)])


def integrate(
    initial: State,
    control: ControlInput | ControlSchedule,
    params: ModelParameters,
    t0: float,
    t1: float,
    settings: IntegratorSettings | None = None,
    weights=None,
) -> Trajectory:
    """Integrate the model from ``t0`` to ``t1`` under ``control``.

    ``weights`` (a :class:`~hcv_optctl.cost_adjoint.CostWeights`) switches on
    accumulation of the running cost as a fifth state variable.
    """
    settings = settings or IntegratorSettings()
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got t0={t0!r}, t1={t1!r}")
    if not isinstance(initial, State):
        initial = State.from_array(initial)

    seg_mesh, seg_values = _segments(control, float(t0), float(t1))
    q = pack_parameters(params, weights)
    y0 = np.append(initial.to_array(), 0.0)
    atol = np.full(5, settings.abs_tol)
    status, t_fail, n, ts, ys, f0, f1 = K.forward_solve(
        seg_mesh, seg_values, y0, q, settings.rel_tol, atol,
        settings.max_step, settings.initial_step, settings.max_steps,
    )
    _raise_for_status(status, t_fail)

    ys = ys[: n + 1].copy()
    return Trajectory(
        times=ts[: n + 1].copy(),
        states=ys[:, :4],
        cost=ys[:, 4],
        control=control,
        params=params,
        _slopes_start=f0[:n].copy(),
        _slopes_end=f1[:n].copy(),
    )


def sample(traj: Trajectory, query_times) -> np.ndarray:
    """Interpolated states at ``query_times``, shape ``(len(query_times), 4)``."""
    tq = np.asarray(query_times, dtype=float).reshape(-1)
    if tq.size == 0:
        return np.empty((0, 4))
    ts = traj.times
    if tq.min() < ts[0] or tq.max() > ts[-1]:
        raise ValueError(
            f"query times must lie in [{ts[0]}, {ts[-1]}], got [{tq.min()}, {tq.max()}]"
        )
    n = ts.size - 1
    idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, n - 1)
    h = ts[idx + 1] - ts[idx]
    th = ((tq - ts[idx]) / h)[:, None]
    h = h[:, None]
    y = traj.states
    d0 = traj._slopes_start[idx, :4]
    d1 = traj._slopes_end[idx, :4]
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = th**3 - 2 * th**2 + th
    h01 = -2 * th**3 + 3 * th**2
    h11 = th**3 - th**2
    return h00 * y[idx] + h10 * h * d0 + h01 * y[idx + 1] + h11 * h * d1


