"""
Equilibria of the untreated and treated patient
================================================

Closed-form steady states of the model, checked by plugging them back into
the right-hand side, and how the infected equilibrium moves as interferon
efficacy rises until the infection can no longer sustain itself.
"""

import numpy as np

from hcv_optctl import TYPICAL_PATIENT, ControlInput, steady_state_set, verify_fixed_point

# drug-free equilibria for the typical patient
sset = steady_state_set(TYPICAL_PATIENT)
for name, state in (("uninfected", sset.uninfected), ("infected", sset.infected)):
    rep = verify_fixed_point(state, ControlInput(), TYPICAL_PATIENT)
    print(f"{name:>10}: T={state.T:.6g} I={state.I:.6g} V_I={state.V_I:.6g} "
          f"V_NI={state.V_NI:.6g}  residual={rep.max_norm:.2e}")

# sweep interferon efficacy with a fixed ribavirin efficacy
print("\n  eps      T          I          V_I + V_NI")
for eps in np.linspace(0.0, 0.9, 10):
    infected = steady_state_set(TYPICAL_PATIENT, eps, 0.12216).infected
    if infected is None:
        print(f"{eps:5.2f}  no infected equilibrium: this dose clears the infection")
        break
    print(f"{eps:5.2f}  {infected.T:.4e}  {infected.I:.4e}  {infected.viral_load:.4e}")
