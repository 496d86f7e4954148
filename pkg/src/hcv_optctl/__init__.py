"""Simulation and optimal drug scheduling for a four-compartment HCV model."""

from .cost_adjoint import CostWeights, cost_and_gradient, gradient, running_cost, total_cost
from .integrator import (
    BlowUpError,
    IntegrationError,
    IntegratorSettings,
    StepLimitExceeded,
    StepSizeUnderflow,
    Trajectory,
    integrate,
    sample,
)
from .model import (
    PVR_DOSE,
    TYPICAL_PATIENT,
    ControlInput,
    ControlSchedule,
    ModelParameters,
    State,
    effective_efficacy,
    positive_part,
    rhs,
)
from .optimizer import OptimizationResult, OptimizerSettings, Termination, optimize, project
from .scenarios import (
    Label,
    ScenarioOutcome,
    followup_after,
    run_constant_dose,
    run_followup,
    run_optimized,
)
from .steady_states import (
    SteadyStateSet,
    infected_steady_state,
    steady_state_set,
    uninfected_steady_state,
    verify_fixed_point,
)

__all__ = [
    "CostWeights",
    "cost_and_gradient",
    "gradient",
    "running_cost",
    "total_cost",
    "BlowUpError",
    "IntegrationError",
    "IntegratorSettings",
    "StepLimitExceeded",
    "StepSizeUnderflow",
    "Trajectory",
    "integrate",
    "sample",
    "PVR_DOSE",
    "TYPICAL_PATIENT",
    "ControlInput",
    "ControlSchedule",
    "ModelParameters",
    "State",
    "effective_efficacy",
    "positive_part",
    "rhs",
    "OptimizationResult",
    "OptimizerSettings",
    "Termination",
    "optimize",
    "project",
    "Label",
    "ScenarioOutcome",
    "followup_after",
    "run_constant_dose",
    "run_followup",
    "run_optimized",
    "SteadyStateSet",
    "infected_steady_state",
    "steady_state_set",
    "uninfected_steady_state",
    "verify_fixed_point",
]

__version__ = "0.1.0"
