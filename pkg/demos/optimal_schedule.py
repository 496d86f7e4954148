"""
Optimized drug schedule
=======================

Projected gradient descent on daily efficacies, started from the constant
dose. With unit weights the healthy-cell reward dominates the cost, so the
optimizer pushes interferon to full efficacy for most of the course. A
second run with rebalanced weights shows how the schedule responds when
drug use carries a visible price.
"""

import numpy as np

from hcv_optctl import TYPICAL_PATIENT, CostWeights, OptimizerSettings
from hcv_optctl.optimizer import sti_switches
from hcv_optctl.scenarios import run_optimized


def describe(title, out):
    res = out.optimization
    eps, rho = res.schedule.values.T
    print(f"{title}: {res.termination.value} after {res.iterations} iterations")
    print(f"  cost {res.cost_history[0]:.6e} -> {res.cost:.6e}")
    print(f"  end-of-treatment load {out.end_of_treatment_viral_load:.3g} IU/ml "
          f"({out.label.value})")
    print(f"  eps: mean {eps.mean():.3f}, days at full efficacy {int(np.sum(eps >= 1.0))}")
    print(f"  rho: mean {rho.mean():.3f}")
    print(f"  on/off switches (eps, rho): {sti_switches(res.schedule)}")


describe("unit weights", run_optimized(TYPICAL_PATIENT))

# scale the state terms down so the drug penalties matter
balanced = CostWeights(w_v=1e-12, w_i=1e-12, w_t=1e-14, w_eps=1.0, w_rho=1.0)
describe(
    "balanced weights",
    run_optimized(TYPICAL_PATIENT, balanced, OptimizerSettings(max_iters=200)),
)
