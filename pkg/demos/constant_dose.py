"""
Partial response under constant dosing
=======================================

A patient at the untreated infected equilibrium receives a constant
interferon/ribavirin dose for 32 weeks. Viral load drops by two orders of
magnitude, then rebounds: a partial virologic response.
"""

from hcv_optctl import PVR_DOSE, TYPICAL_PATIENT, sample
from hcv_optctl.scenarios import run_constant_dose

out = run_constant_dose(TYPICAL_PATIENT, PVR_DOSE)
traj = out.treatment_trajectory
print(f"label: {out.label.value}")
print(f"initial load {traj.viral_load[0]:.4g}, nadir {out.nadir_viral_load:.4g}, "
      f"end of treatment {out.end_of_treatment_viral_load:.4g} IU/ml")

# weekly snapshot of the viral load
weeks = range(0, 33, 4)
x = sample(traj, [7.0 * w for w in weeks])
for w, row in zip(weeks, x):
    print(f"week {w:2d}: V = {row[2] + row[3]:.4g} IU/ml, T = {row[0]:.4g}")

traj.to_csv("constant_dose_trajectory.csv")
