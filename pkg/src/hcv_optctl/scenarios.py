"""Experiment drivers: constant dosing, optimized treatment and post-treatment follow-up."""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .cost_adjoint import CostWeights
from .integrator import IntegratorSettings, Trajectory, integrate, sample
from .model import PVR_DOSE, ControlInput, ControlSchedule, ModelParameters, State
from .optimizer import OptimizationResult, OptimizerSettings, Termination, optimize
from .steady_states import infected_steady_state

__all__ = [
    "Label",
    "ScenarioOutcome",
    "FollowupOutcome",
    "DETECTION_THRESHOLD",
    "FOLLOWUP_DAYS",
    "HORIZON",
    "classify_treatment",
    "classify_followup",
    "pretreatment_state",
    "nadir_viral_load",
    "run_constant_dose",
    "run_optimized",
    "run_followup",
    "terminal_control",
    "followup_after",
    "is_non_decreasing",
    "write_schedule_csv",
    "SCHEDULE_HEADER",
    "SUMMARY_HEADER",
]

DETECTION_THRESHOLD = 50.0
FOLLOWUP_DAYS = 180.0
HORIZON = 224.0
SCHEDULE_HEADER = ("t_start", "t_end", "eps", "rho")
SUMMARY_HEADER = ("scenario", "label", "nadir", "eot_load", "eof_load")


class Label(str, enum.Enum):
    SVR = "SVR"
    PVR = "PVR"
    RELAPSE = "relapse"
    NONRESPONSE = "nonresponse"


@dataclass(frozen=True, eq=False)
class FollowupOutcome:
    label: Label
    trajectory: Trajectory
    detection_threshold: float
    end_of_followup_viral_load: float
    max_viral_load: float
    max_infected: float
    relapse_time: float | None


@dataclass(frozen=True, eq=False)
class ScenarioOutcome:
    label: Label
    treatment_trajectory: Trajectory
    detection_threshold: float
    nadir_viral_load: float
    end_of_treatment_viral_load: float
    followup: FollowupOutcome | None = None
    optimization: OptimizationResult | None = None

    @property
    def followup_trajectory(self) -> Trajectory | None:
        return None if self.followup is None else self.followup.trajectory

    @property
    def end_of_followup_viral_load(self) -> float | None:
        return None if self.followup is None else self.followup.end_of_followup_viral_load

    def with_followup(self, followup: FollowupOutcome) -> ScenarioOutcome:
        return ScenarioOutcome(
            label=classify_followup(self.label, followup.label),
            treatment_trajectory=self.treatment_trajectory,
            detection_threshold=self.detection_threshold,
            nadir_viral_load=self.nadir_viral_load,
            end_of_treatment_viral_load=self.end_of_treatment_viral_load,
            followup=followup,
            optimization=self.optimization,
        )

    def summary_row(self, scenario: str) -> tuple[str, ...]:
        eof = self.end_of_followup_viral_load
        return (
            scenario,
            self.label.value,
            repr(float(self.nadir_viral_load)),
            repr(float(self.end_of_treatment_viral_load)),
            "" if eof is None else repr(float(eof)),
        )


def _loads(traj: Trajectory) -> np.ndarray:
    return np.maximum(traj.viral_load, 0.0)


def classify_treatment(traj: Trajectory, threshold: float = DETECTION_THRESHOLD) -> Label:
    """Label an on-treatment trajectory.

    SVR when the final viral load is at or below ``threshold``; PVR when it is
    above but the nadir fell at least two-fold below the initial load;
    nonresponse otherwise.
    """
    v = _loads(traj)
    if v[-1] <= threshold:
        return Label.SVR
    if v.min() <= 0.5 * v[0]:
        return Label.PVR
    return Label.NONRESPONSE


def classify_followup(treatment_label: Label, followup_label: Label) -> Label:
    if treatment_label is Label.SVR:
        return followup_label
    return treatment_label


def pretreatment_state(params: ModelParameters) -> State:
    """Drug-free infected equilibrium used as the patient's initial condition."""
    state = infected_steady_state(params, 0.0, 0.0)
    if state is None:
        raise ValueError("parameters admit no drug-free infected equilibrium")
    return state


def nadir_viral_load(traj: Trajectory) -> float:
    """Minimum viral load, refined on the dense output around the lowest node."""
    v = _loads(traj)
    k = int(np.argmin(v))
    lo = traj.times[max(k - 1, 0)]
    hi = traj.times[min(k + 1, v.size - 1)]
    best = float(v[k])
    for _ in range(3):
        grid = np.linspace(lo, hi, 201)
        x = sample(traj, grid)
        loads = np.maximum(x[:, 2] + x[:, 3], 0.0)
        j = int(np.argmin(loads))
        best = min(best, float(loads[j]))
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    return best


def _outcome(traj, threshold, optimization=None) -> ScenarioOutcome:
    v = _loads(traj)
    return ScenarioOutcome(
        label=classify_treatment(traj, threshold),
        treatment_trajectory=traj,
        detection_threshold=threshold,
        nadir_viral_load=nadir_viral_load(traj),
        end_of_treatment_viral_load=float(v[-1]),
        optimization=optimization,
    )


def run_constant_dose(
    params: ModelParameters,
    dose: ControlInput = PVR_DOSE,
    horizon: float = HORIZON,
    detection_threshold: float = DETECTION_THRESHOLD,
    integ: IntegratorSettings | None = None,
) -> ScenarioOutcome:
    params = params.replace(t_end=horizon)
    traj = integrate(pretreatment_state(params), dose, params, 0.0, horizon, integ)
    return _outcome(traj, detection_threshold)


def run_optimized(
    params: ModelParameters,
    weights: CostWeights | None = None,
    opt: OptimizerSettings | None = None,
    integ: IntegratorSettings | None = None,
    detection_threshold: float = DETECTION_THRESHOLD,
    horizon: float = HORIZON,
    initial_dose: ControlInput = PVR_DOSE,
) -> ScenarioOutcome:
    """Optimize from the constant ``initial_dose`` and classify the result."""
    opt = opt or OptimizerSettings()
    params = params.replace(t_end=horizon)
    schedule = ControlSchedule.constant(initial_dose, horizon, opt.mesh_intervals)
    result = optimize(schedule, pretreatment_state(params), params, weights, opt, integ)
    if result.termination is Termination.LINE_SEARCH_FAILURE:
        warnings.warn(
            "optimizer stopped on a line-search failure; reporting the last accepted "
            "schedule",
            RuntimeWarning,
            stacklevel=2,
        )
    return _outcome(result.final_trajectory, detection_threshold, result)


def _crossing_time(traj: Trajectory, k: int, threshold: float) -> float:
    """First time in step ``k - 1 .. k`` where the dense viral load exceeds ``threshold``."""
    lo, hi = float(traj.times[k - 1]), float(traj.times[k])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        x = sample(traj, [mid])[0]
        if x[2] + x[3] > threshold:
            hi = mid
        else:
            lo = mid
    return hi


def run_followup(
    end_state: State,
    terminal_control: ControlInput,
    params: ModelParameters,
    followup_days: float = FOLLOWUP_DAYS,
    detection_threshold: float = DETECTION_THRESHOLD,
    integ: IntegratorSettings | None = None,
) -> FollowupOutcome:
    """Simulate after treatment stops at ``params.t_end`` with washing-out efficacies.

    Relapse means the viral load started at or below ``detection_threshold``
    and later exceeded it; a load above threshold from the start is a
    nonresponse.
    """
    t0 = params.t_end
    traj = integrate(end_state, terminal_control, params, t0, t0 + followup_days, integ)
    v = _loads(traj)
    above = np.nonzero(v > detection_threshold)[0]
    relapse_time = None
    if v[0] > detection_threshold:
        label = Label.NONRESPONSE
    elif above.size:
        label = Label.RELAPSE
        relapse_time = _crossing_time(traj, int(above[0]), detection_threshold)
    else:
        label = Label.SVR
    return FollowupOutcome(
        label=label,
        trajectory=traj,
        detection_threshold=detection_threshold,
        end_of_followup_viral_load=float(v[-1]),
        max_viral_load=float(v.max()),
        max_infected=float(traj.states[:, 1].max()),
        relapse_time=relapse_time,
    )


def terminal_control(outcome: ScenarioOutcome) -> ControlInput:
    """Efficacies in force at the end of treatment."""
    control = outcome.treatment_trajectory.control
    if isinstance(control, ControlSchedule):
        return control.at(control.horizon)
    return control


def followup_after(
    outcome: ScenarioOutcome,
    followup_days: float = FOLLOWUP_DAYS,
    integ: IntegratorSettings | None = None,
) -> ScenarioOutcome:
    """Attach a follow-up run starting from the end of ``outcome``'s treatment."""
    traj = outcome.treatment_trajectory
    params = traj.params.replace(t_end=traj.t1)
    followup = run_followup(
        traj.final_state,
        terminal_control(outcome),
        params,
        followup_days,
        outcome.detection_threshold,
        integ,
    )
    return outcome.with_followup(followup)


def is_non_decreasing(traj: Trajectory, component: int = 0, rel_tol: float = 1e-6) -> bool:
    """Whether a state component never drops by more than ``rel_tol`` of its scale."""
    x = traj.states[:, component]
    return bool(np.all(np.diff(x) >= -rel_tol * np.max(np.abs(x))))


def write_schedule_csv(control: ControlInput | ControlSchedule, path: str | PathLike,
                       t0: float = 0.0, t1: float = HORIZON) -> None:
    if isinstance(control, ControlInput):
        rows = [(t0, t1, control.epsilon, control.rho)]
    else:
        rows = [
            (a, b, eps, rho)
            for a, b, (eps, rho) in zip(control.mesh[:-1], control.mesh[1:], control.values)
        ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCHEDULE_HEADER)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
