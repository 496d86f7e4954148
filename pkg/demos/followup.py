"""
After treatment stops
=====================

Drug efficacies wash out exponentially once treatment ends. Even when the
virus is far below the detection limit at the last dose, the infected cells
that remain restart the infection once the drugs have decayed.
"""

from hcv_optctl import TYPICAL_PATIENT, ControlInput
from hcv_optctl.scenarios import followup_after, run_constant_dose, run_optimized

for name, outcome in (
    ("optimized schedule", run_optimized(TYPICAL_PATIENT)),
    ("full efficacy (1, 1)", run_constant_dose(TYPICAL_PATIENT, ControlInput(1.0, 1.0))),
):
    full = followup_after(outcome, 180.0)
    fu = full.followup
    end = outcome.treatment_trajectory.final_state
    print(f"{name}: end-of-treatment load {outcome.end_of_treatment_viral_load:.3g} IU/ml, "
          f"I = {end.I:.3g}")
    when = "never" if fu.relapse_time is None else f"on day {fu.relapse_time:.1f}"
    print(f"  follow-up label {full.label.value}, load crosses 50 IU/ml {when}, "
          f"end-of-follow-up load {fu.end_of_followup_viral_load:.3g} IU/ml")
