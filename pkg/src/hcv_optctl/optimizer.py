"""Projected gradient descent with Armijo backtracking over a control schedule."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .cost_adjoint import CostWeights, cost_and_gradient
from .integrator import IntegratorSettings, Trajectory
from .model import ControlSchedule, ModelParameters, State

__all__ = [
    "OptimizerSettings",
    "OptimizationResult",
    "Termination",
    "project",
    "projected_gradient",
    "optimize",
    "sti_switches",
    "LOG_HEADER",
]

log = logging.getLogger(__name__)

LOG_HEADER = ("iter", "cost", "proj_grad_norm", "step")

# backtracking gives up once the trial step shrinks below this fraction of a unit move
_MIN_STEP_SCALE = 1e-14


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILURE = "line_search_failure"


@dataclass(frozen=True)
class OptimizerSettings:
    """Settings for :func:`optimize`.

    ``initial_step`` is the largest control change (in efficacy units) tried
    on a free component at the start of each line search. ``grad_tol=None``
    means ``1e-3`` times the initial projected-gradient norm.
    """

    max_iters: int = 500
    grad_tol: float | None = None
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    mesh_intervals: int = 224

    def __post_init__(self):
        if self.max_iters < 1 or self.mesh_intervals < 1:
            raise ValueError("max_iters and mesh_intervals must be >= 1")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not (math.isfinite(self.initial_step) and self.initial_step > 0):
            raise ValueError("initial_step must be positive")


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    """A locally optimal schedule and the descent history that produced it."""

    schedule: ControlSchedule
    cost_history: list[float]
    projected_grad_norm_history: list[float]
    termination: Termination
    final_trajectory: Trajectory
    step_history: list[float] = field(default_factory=list)

    @property
    def cost(self) -> float:
        return self.cost_history[-1]

    @property
    def iterations(self) -> int:
        return len(self.cost_history) - 1

    def log_rows(self):
        steps = [0.0, *self.step_history]
        return list(
            zip(range(len(self.cost_history)), self.cost_history,
                self.projected_grad_norm_history, steps)
        )

    def write_log(self, path: str | PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LOG_HEADER)
            for it, cost, pg, step in self.log_rows():
                writer.writerow([it, repr(float(cost)), repr(float(pg)), repr(float(step))])


def project(values) -> np.ndarray:
    """Clamp control pairs componentwise onto ``[0, 1]``."""
    return np.clip(np.asarray(values, dtype=float), 0.0, 1.0)


def projected_gradient(values: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Gradient with components removed where a bound blocks descent."""
    pg = grad.copy()
    pg[(values <= 0.0) & (grad > 0.0)] = 0.0
    pg[(values >= 1.0) & (grad < 0.0)] = 0.0
    return pg


def optimize(
    initial_schedule: ControlSchedule,
    initial_state: State,
    params: ModelParameters,
    weights: CostWeights | None = None,
    opt: OptimizerSettings | None = None,
    integ: IntegratorSettings | None = None,
) -> OptimizationResult:
    """Minimize total cost over the schedule values by projected gradient descent.

    Each iteration tries ``x - alpha * g`` projected onto the box, with
    ``alpha`` scaled so the largest free component moves by the current step
    scale, and backtracks until the Armijo condition
    ``J(x+) <= J(x) + c <g, x+ - x>`` holds.
    """
    weights = weights or CostWeights()
    opt = opt or OptimizerSettings()
    integ = integ or IntegratorSettings()

    schedule = initial_schedule.with_values(project(initial_schedule.values))
    x = schedule.values.copy()
    cost, grad, traj = cost_and_gradient(schedule, initial_state, params, weights, integ)
    pg_norm = float(np.max(np.abs(projected_gradient(x, grad))))
    grad_tol = opt.grad_tol if opt.grad_tol is not None else 1e-3 * pg_norm

    costs, pg_norms, steps = [cost], [pg_norm], []
    scale = opt.initial_step
    termination = Termination.MAX_ITERS

    for it in range(opt.max_iters):
        if pg_norm <= grad_tol:
            termination = Termination.CONVERGED
            break

        accepted = None
        while scale >= _MIN_STEP_SCALE:
            alpha = scale / pg_norm
            x_new = project(x - alpha * grad)
            if np.array_equal(x_new, x):
                break
            trial = schedule.with_values(x_new)
            c_new, g_new, t_new = cost_and_gradient(
                trial, initial_state, params, weights, integ
            )
            if c_new <= cost + opt.armijo_c * float(np.sum(grad * (x_new - x))):
                accepted = trial, c_new, g_new, t_new
                break
            scale *= opt.backtrack_factor

        if accepted is None:
            termination = Termination.LINE_SEARCH_FAILURE
            log.warning("line search failed at iteration %d (cost %.6e)", it, cost)
            break

        schedule, cost, grad, traj = accepted
        steps.append(float(np.max(np.abs(schedule.values - x))))
        x = schedule.values.copy()
        pg_norm = float(np.max(np.abs(projected_gradient(x, grad))))
        costs.append(cost)
        pg_norms.append(pg_norm)
        log.debug("iter %d cost %.10e pg %.3e step %.3e", it + 1, cost, pg_norm, steps[-1])
        scale = min(opt.initial_step, scale / opt.backtrack_factor)
    else:
        if pg_norm <= grad_tol:
            termination = Termination.CONVERGED

    return OptimizationResult(
        schedule=schedule,
        cost_history=costs,
        projected_grad_norm_history=pg_norms,
        termination=termination,
        final_trajectory=traj,
        step_history=steps,
    )


def sti_switches(schedule: ControlSchedule, low: float = 0.1, high: float = 0.9) -> tuple[int, int]:
    """Number of on/off switches for each drug.

    Intervals at or below ``low`` count as off, at or above ``high`` as on;
    intermediate values are skipped.
    """
    counts = []
    for column in schedule.values.T:
        states = [v >= high for v in column if v <= low or v >= high]
        counts.append(int(sum(a != b for a, b in zip(states, states[1:]))))
    return counts[0], counts[1]
