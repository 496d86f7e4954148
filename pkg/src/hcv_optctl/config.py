"""Run configuration: a single flat JSON document.

Every key is optional; see ``KNOWN_KEYS`` for the full key set. Model
parameter keys match :class:`~hcv_optctl.model.ModelParameters`; the
integrator's initial step is ``ode_initial_step`` so it does not collide
with the optimizer's ``initial_step``. ``t_end`` defaults to ``horizon``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .cost_adjoint import CostWeights
from .integrator import IntegratorSettings
from .model import PVR_DOSE, ControlInput, ModelParameters
from .optimizer import OptimizerSettings
from .scenarios import DETECTION_THRESHOLD, FOLLOWUP_DAYS, HORIZON

__all__ = ["ConfigError", "RunConfig", "SCENARIOS", "parse_config", "load_config", "dump_config"]

SCENARIOS = ("steady-state", "simulate", "optimize", "followup", "full")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    parameters: ModelParameters = field(default_factory=ModelParameters)
    weights: CostWeights = field(default_factory=CostWeights)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    scenario: str = "full"
    dose: ControlInput = PVR_DOSE
    horizon: float = HORIZON
    followup_days: float = FOLLOWUP_DAYS
    detection_threshold: float = DETECTION_THRESHOLD
    output_dir: str = "hcv_output"
    output_cadence: float = 0.25


_PARAM_KEYS = tuple(f.name for f in fields(ModelParameters))
_WEIGHT_KEYS = tuple(f.name for f in fields(CostWeights))
_OPT_KEYS = tuple(f.name for f in fields(OptimizerSettings))
_INTEG_KEYS = {"rel_tol": "rel_tol", "abs_tol": "abs_tol", "max_step": "max_step",
               "ode_initial_step": "initial_step", "max_steps": "max_steps"}
_DOSE_KEYS = {"epsilon": "epsilon", "rho": "rho"}
_SCALAR_KEYS = ("scenario", "horizon", "followup_days", "detection_threshold",
                "output_dir", "output_cadence")
_INT_KEYS = {"max_iters", "mesh_intervals", "max_steps"}
_STR_KEYS = {"scenario", "output_dir"}
_NULLABLE_KEYS = {"grad_tol", "t_end"}

KNOWN_KEYS = (
    _PARAM_KEYS + _WEIGHT_KEYS + _OPT_KEYS + tuple(_INTEG_KEYS) + tuple(_DOSE_KEYS) + _SCALAR_KEYS
)


def _check_type(key, value):
    if value is None:
        if key not in _NULLABLE_KEYS:
            raise ConfigError(f"{key}: null is not allowed")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if key in _INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _build(name, cls, kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid {name}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse JSON config text into a fully-defaulted :class:`RunConfig`."""
    text = text.strip()
    try:
        raw = json.loads(text) if text else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    raw = {key: _check_type(key, value) for key, value in raw.items()}

    scalars = {k: raw[k] for k in _SCALAR_KEYS if k in raw}
    if scalars.get("scenario", "full") not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}")
    for key in ("horizon", "followup_days", "detection_threshold", "output_cadence"):
        value = scalars.get(key)
        if value is not None and not (math.isfinite(value) and value > 0):
            raise ConfigError(f"{key} must be positive and finite, got {value!r}")

    horizon = scalars.get("horizon", HORIZON)
    params = {k: raw[k] for k in _PARAM_KEYS if raw.get(k) is not None}
    params.setdefault("t_end", horizon)

    return RunConfig(
        parameters=_build("model parameters", ModelParameters, params),
        weights=_build("cost weights", CostWeights, {k: raw[k] for k in _WEIGHT_KEYS if k in raw}),
        optimizer=_build(
            "optimizer settings", OptimizerSettings, {k: raw[k] for k in _OPT_KEYS if k in raw}
        ),
        integrator=_build(
            "integrator settings",
            IntegratorSettings,
            {attr: raw[k] for k, attr in _INTEG_KEYS.items() if k in raw},
        ),
        dose=_build(
            "dose",
            ControlInput,
            {attr: raw.get(k, getattr(PVR_DOSE, attr)) for k, attr in _DOSE_KEYS.items()},
        ),
        **scalars,
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def config_to_dict(config: RunConfig) -> dict:
    out = {}
    out.update(asdict(config.parameters))
    out.update(asdict(config.weights))
    out.update(asdict(config.optimizer))
    integ = asdict(config.integrator)
    out.update({k: integ[attr] for k, attr in _INTEG_KEYS.items()})
    out.update({k: getattr(config.dose, attr) for k, attr in _DOSE_KEYS.items()})
    out.update({k: getattr(config, k) for k in _SCALAR_KEYS})
    return out


def dump_config(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2)
