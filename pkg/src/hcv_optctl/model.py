"""Four-compartment HCV model with interferon and ribavirin efficacies.

State variables are healthy hepatocytes ``T``, infected hepatocytes ``I``,
infectious virions ``V_I`` and noninfectious virions ``V_NI``:

.. math::

    \\begin{aligned}
    \\dot T &= s + r T (1 - (T + I)/T_{max}) - d T - \\beta V_I T \\\\
    \\dot I &= \\beta V_I T + r I (1 - (T + I)/T_{max}) - \\delta I \\\\
    \\dot V_I &= (1 - \\bar\\rho)(1 - \\bar\\epsilon) p I - c V_I \\\\
    \\dot V_{NI} &= \\bar\\rho (1 - \\bar\\epsilon) p I - c V_{NI}
    \\end{aligned}

where the effective efficacies decay exponentially once treatment stops,
``eps_bar = eps * exp(-k (t - t_end)_+)`` and likewise for ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

__all__ = [
    "ModelParameters",
    "State",
    "ControlInput",
    "ControlSchedule",
    "TYPICAL_PATIENT",
    "PVR_DOSE",
    "positive_part",
    "effective_efficacy",
    "rhs",
    "jacobian",
]

STATE_NAMES = ("T", "I", "V_I", "V_NI")


@dataclass(frozen=True)
class ModelParameters:
    """Rate and capacity constants of the model.

    Rate constants ``d``, ``r``, ``delta``, ``c`` and ``k`` are per day and
    ``beta`` is in ml/IU/day. ``p`` may be zero (no virion production);
    every other rate and capacity must be positive. Defaults are the typical
    patient values that produce a partial virologic response under constant
    dosing.
    """

    t_max: float = 18.5e6
    s: float = 61.7e3
    d: float = 0.003
    r: float = 0.00562
    p: float = 25.1
    k: float = 0.0238
    beta: float = 4.1684e-9
    delta: float = 1.2110e-1
    c: float = 2.7018
    t_end: float = 224.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"parameter {f.name} must be finite, got {value!r}")
            if f.name in ("t_end", "p"):
                if value < 0:
                    raise ValueError(f"{f.name} must be >= 0, got {value!r}")
            elif value <= 0:
                raise ValueError(f"parameter {f.name} must be > 0, got {value!r}")

    def replace(self, **changes) -> ModelParameters:
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def to_array(self) -> np.ndarray:
        """Pack as ``[t_max, s, d, r, p, k, beta, delta, c, t_end]``."""
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)


TYPICAL_PATIENT = ModelParameters()


@dataclass(frozen=True)
class State:
    """Compartment concentrations (H/ml for cells, IU/ml for virions)."""

    T: float
    I: float  # noqa: E741
    V_I: float
    V_NI: float

    def __post_init__(self):
        for name in STATE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"state component {name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"state component {name} must be >= 0, got {value!r}")

    @property
    def viral_load(self) -> float:
        return self.V_I + self.V_NI

    def to_array(self) -> np.ndarray:
        return np.array([self.T, self.I, self.V_I, self.V_NI], dtype=float)

    @classmethod
    def from_array(cls, values) -> State:
        T, I, V_I, V_NI = (float(v) for v in values)  # noqa: E741
        return cls(T, I, V_I, V_NI)


@dataclass(frozen=True)
class ControlInput:
    """Drug efficacies: ``epsilon`` for interferon, ``rho`` for ribavirin."""

    epsilon: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "rho"):
            value = getattr(self, name)
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


PVR_DOSE = ControlInput(epsilon=6.1382e-1, rho=1.2216e-1)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Piecewise-constant efficacies on a time mesh.

    ``values[j]`` holds ``(epsilon, rho)`` on ``[mesh[j], mesh[j+1])``; the
    final value also applies at ``mesh[-1]``.
    """

    mesh: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        mesh = _readonly(self.mesh)
        values = _readonly(self.values)
        if mesh.ndim != 1 or mesh.size < 2:
            raise ValueError("mesh needs at least two breakpoints")
        if not np.all(np.isfinite(mesh)) or np.any(np.diff(mesh) <= 0):
            raise ValueError("mesh must be finite and strictly increasing")
        if values.shape != (mesh.size - 1, 2):
            raise ValueError(
                f"values must have shape ({mesh.size - 1}, 2), got {values.shape}"
            )
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise ValueError("schedule values must lie in [0, 1]")
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(
        cls, control: ControlInput, horizon: float = 224.0, n_intervals: int = 224
    ) -> ControlSchedule:
        mesh = np.linspace(0.0, horizon, n_intervals + 1)
        values = np.tile([control.epsilon, control.rho], (n_intervals, 1))
        return cls(mesh, values)

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    @property
    def t0(self) -> float:
        return float(self.mesh[0])

    @property
    def horizon(self) -> float:
        return float(self.mesh[-1])

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.mesh)

    def with_values(self, values) -> ControlSchedule:
        return ControlSchedule(self.mesh, values)

    def interval_index(self, t):
        """Index of the interval containing ``t`` (right-continuous)."""
        idx = np.searchsorted(self.mesh, t, side="right") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def at(self, t: float) -> ControlInput:
        eps, rho = self.values[self.interval_index(t)]
        return ControlInput(float(eps), float(rho))

    def refine(self, factor: int = 2) -> ControlSchedule:
        """Split every interval into ``factor`` equal pieces, keeping values."""
        pieces = [
            np.linspace(a, b, factor + 1)[:-1] for a, b in zip(self.mesh[:-1], self.mesh[1:])
        ]
        mesh = np.append(np.concatenate(pieces), self.mesh[-1])
        return ControlSchedule(mesh, np.repeat(self.values, factor, axis=0))

    def __eq__(self, other):
        if not isinstance(other, ControlSchedule):
            return NotImplemented
        return np.array_equal(self.mesh, other.mesh) and np.array_equal(
            self.values, other.values
        )


def positive_part(a: float) -> float:
    """``a`` if ``a >= 0`` else ``0``."""
    return a if a >= 0 else 0.0


def effective_efficacy(base: float, t: float, t_end: float, k: float) -> float:
    """Efficacy after exponential washout past the end of treatment."""
    return base * math.exp(-k * positive_part(t - t_end))


def _check_finite(name, values):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values: {values!r}")


def rhs(
    state: State | np.ndarray,
    control: ControlInput,
    params: ModelParameters,
    t: float = 0.0,
) -> np.ndarray:
    """Time derivative ``(dT, dI, dV_I, dV_NI)`` of the model."""
    x = state.to_array() if isinstance(state, State) else np.asarray(state, dtype=float)
    _check_finite("state", x)
    T, I, V, W = x  # noqa: E741
    P = params
    eps = effective_efficacy(control.epsilon, t, P.t_end, P.k)
    rho = effective_efficacy(control.rho, t, P.t_end, P.k)

    growth = P.r * (1.0 - (T + I) / P.t_max)
    production = (1.0 - eps) * P.p * I
    return np.array(
        [
            P.s + growth * T - P.d * T - P.beta * V * T,
            P.beta * V * T + growth * I - P.delta * I,
            (1.0 - rho) * production - P.c * V,
            rho * production - P.c * W,
        ]
    )


def jacobian(
    state: State | np.ndarray,
    control: ControlInput,
    params: ModelParameters,
    t: float = 0.0,
) -> np.ndarray:
    """State Jacobian of :func:`rhs`; row ``i`` holds the partials of component ``i``."""
    x = state.to_array() if isinstance(state, State) else np.asarray(state, dtype=float)
    _check_finite("state", x)
    T, I, V, _ = x  # noqa: E741
    P = params
    eps = effective_efficacy(control.epsilon, t, P.t_end, P.k)
    rho = effective_efficacy(control.rho, t, P.t_end, P.k)

    growth = P.r * (1.0 - (T + I) / P.t_max)
    a = P.r / P.t_max
    return np.array(
        [
            [growth - a * T - P.d - P.beta * V, -a * T, -P.beta * T, 0.0],
            [P.beta * V - a * I, growth - a * I - P.delta, P.beta * T, 0.0],
            [0.0, (1.0 - rho) * (1.0 - eps) * P.p, -P.c, 0.0],
            [0.0, rho * (1.0 - eps) * P.p, 0.0, -P.c],
        ]
    )
