import numpy as np
import pytest

from hcv_optctl import PVR_DOSE, TYPICAL_PATIENT, ControlSchedule, IntegratorSettings, integrate
from hcv_optctl.cost_adjoint import CostWeights, cost_and_gradient
from hcv_optctl.steady_states import infected_steady_state

TIGHT = IntegratorSettings(rel_tol=1e-12, abs_tol=1e-10)

# constant-dose cost from the drug-free infected state, computed once at
# TIGHT tolerances and cross-checked against an 8th-order solver
J_CONST = -2.111347579515152e16

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure run time only."""
    x0 = infected_steady_state(TYPICAL_PATIENT)
    sched = ControlSchedule.constant(PVR_DOSE, 224.0, 4)
    integrate(x0, sched, TYPICAL_PATIENT, 0.0, 224.0)
    cost_and_gradient(sched, x0, TYPICAL_PATIENT, CostWeights())


@pytest.fixture
def params():
    return TYPICAL_PATIENT


@pytest.fixture
def x_inf():
    return infected_steady_state(TYPICAL_PATIENT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def fd_gradient(schedule, x0, params, weights, settings=TIGHT, h=1e-4, one_sided_at_bound=True):
    """Central differences of total_cost; second-order one-sided at the box edges."""
    from hcv_optctl.cost_adjoint import total_cost

    base = np.array(schedule.values)
    grad = np.zeros_like(base)

    def J(values):
        return total_cost(schedule.with_values(values), x0, params, weights, settings)

    j0 = None
    for idx in np.ndindex(base.shape):
        v = base[idx]
        shifted = []
        if v + h <= 1.0 and v - h >= 0.0:
            offsets = (h, -h)
        elif one_sided_at_bound and v + 2 * h > 1.0:
            offsets = (-h, -2 * h)
        else:
            offsets = (h, 2 * h)
        for off in offsets:
            vals = base.copy()
            vals[idx] = v + off
            shifted.append(J(vals))
        if offsets[0] == -offsets[1]:
            grad[idx] = (shifted[0] - shifted[1]) / (2 * h)
        else:
            if j0 is None:
                j0 = J(base)
            sign = 1.0 if offsets[0] > 0 else -1.0
            grad[idx] = sign * (-3 * j0 + 4 * shifted[0] - shifted[1]) / (2 * h)
    return grad


def gradient_mismatch(adjoint, fd, rel=1e-4, floor=1e-6):
    """Worst ratio of |adjoint - fd| to the allowed tolerance (<= 1 passes)."""
    allowed = np.maximum(rel * np.abs(fd), floor)
    return float(np.max(np.abs(adjoint - fd) / allowed))
