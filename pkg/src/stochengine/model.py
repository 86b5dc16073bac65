"""Engine parameters, drive profiles and configuration loading.

The bath temperature is ``T(t) = T0 + eps*T1*cos(w t)`` and the stiffness of
the quadratic potential ``U = q(t) x^2 / 2`` is
``q(t) = q0 + eps*q1*cos(w t - phi)``.  A mass of zero selects the overdamped
model everywhere in the package.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidParameters

OVERDAMPED = "overdamped"
UNDERDAMPED = "underdamped"

#: Mass used for underdamped runs when the configuration does not give one.
DEFAULT_UNDERDAMPED_MASS = 1.0


def wrap_angle(phi: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    wrapped = math.remainder(phi, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class EngineParams:
    """Physical and drive constants of the engine.

    Construction never raises; call :func:`validate` or :func:`require_valid`
    to check well-posedness.
    """

    m: float = 0.0
    gamma: float = 1.0
    k_B: float = 1.0
    omega: float = 2.0
    T0: float = 1.0
    T1: float = 0.5
    q0: float = 1.0
    epsilon: float = 1.0

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def model(self) -> str:
        return OVERDAMPED if self.m == 0 else UNDERDAMPED

    @property
    def is_overdamped(self) -> bool:
        return self.m == 0

    def with_(self, **changes) -> "EngineParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ControlProfile:
    """Single-harmonic stiffness protocol ``q0 + eps*q1*cos(w t - phi)``."""

    q0: float
    q1: float = 0.0
    phi: float = 0.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.q1 < 0:
            raise InvalidParameters(f"control amplitude q1 must be >= 0, got {self.q1}")
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))

    @classmethod
    def for_params(cls, params: EngineParams, q1: float = 0.0, phi: float = 0.0):
        return cls(q0=params.q0, q1=q1, phi=phi, epsilon=params.epsilon)

    @property
    def amplitude(self) -> float:
        """Actual stiffness modulation amplitude ``eps*q1``."""
        return self.epsilon * self.q1

    def fourier(self) -> np.ndarray:
        """Fourier coefficients ``[a_-1, a_0, a_1]`` of q(t) in ``exp(i n w t)``."""
        a1 = 0.5 * self.amplitude * np.exp(-1j * self.phi)
        return np.array([np.conj(a1), self.q0, a1], dtype=complex)


@dataclass(frozen=True)
class TemperatureProfile:
    T0: float
    T1: float
    epsilon: float
    omega: float

    @classmethod
    def for_params(cls, params: EngineParams):
        return cls(params.T0, params.T1, params.epsilon, params.omega)

    def __call__(self, t):
        return self.T0 + self.epsilon * self.T1 * np.cos(self.omega * t)


def temperature_at(params: EngineParams, t):
    """Bath temperature at time ``t`` (scalar or array)."""
    return params.T0 + params.epsilon * params.T1 * np.cos(params.omega * t)


def control_at(profile: ControlProfile, omega: float, t):
    """Stiffness q(t)."""
    return profile.q0 + profile.amplitude * np.cos(omega * t - profile.phi)


def control_rate_at(profile: ControlProfile, omega: float, t):
    """Exact time derivative of :func:`control_at`."""
    return -profile.amplitude * omega * np.sin(omega * t - profile.phi)


def validate(params: EngineParams) -> list[str]:
    """Return every violated invariant of ``params``; empty means valid."""
    errors = []

    def finite(name):
        value = getattr(params, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            errors.append(f"{name} must be a finite number, got {value!r}")
            return False
        return True

    if not all([finite(name) for name in ("m", "gamma", "k_B", "omega", "T0", "T1", "q0", "epsilon")]):
        return errors
    if params.m < 0:
        errors.append("mass m must be >= 0 (0 selects the overdamped model)")
    if params.gamma <= 0:
        errors.append("viscosity gamma must be positive")
    if params.k_B <= 0:
        errors.append("boltzmann constant k_B must be positive")
    if params.omega <= 0:
        errors.append("frequency omega must be positive")
    if params.T1 < 0:
        errors.append("temperature amplitude T1 must be >= 0")
    if params.epsilon < 0:
        errors.append("perturbation epsilon must be >= 0")
    if params.T0 <= 0:
        errors.append("mean temperature T0 must be positive")
    elif params.T0 <= params.epsilon * abs(params.T1):
        errors.append(
            "temperature non-positive: T0 - epsilon*T1 = "
            f"{params.T0 - params.epsilon * params.T1:g} <= 0"
        )
    if params.q0 <= 0:
        errors.append("nominal gain q0 must be positive")
    return errors


def require_valid(params: EngineParams, underdamped: bool | None = None) -> None:
    """Raise :class:`InvalidParameters` listing all violations."""
    errors = validate(params)
    if underdamped and params.m == 0:
        errors.append("underdamped model requires m > 0")
    if underdamped is False and params.m != 0:
        errors.append("overdamped model requires m == 0")
    if errors:
        raise InvalidParameters(errors)


# -- presets ---------------------------------------------------------------

def table1_overdamped(**changes) -> EngineParams:
    """Overdamped reference parameters (eps=1, gamma=1, omega=2, T1=0.5, T0=1, q0=1)."""
    return EngineParams(m=0.0, gamma=1.0, omega=2.0, T0=1.0, T1=0.5, q0=1.0, epsilon=1.0).with_(**changes)


def table1_underdamped(m: float = DEFAULT_UNDERDAMPED_MASS, **changes) -> EngineParams:
    """Underdamped reference parameters; q0=10 for stability, mass defaults to 1."""
    return EngineParams(m=m, gamma=1.0, omega=2.0, T0=1.0, T1=0.5, q0=10.0, epsilon=1.0).with_(**changes)


# -- configuration ---------------------------------------------------------

PARAM_KEYS = ("m", "gamma", "k_B", "omega", "T0", "T1", "q0", "epsilon")
CONTROL_KEYS = ("q1", "phi")
CONFIG_KEYS = PARAM_KEYS + CONTROL_KEYS


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: parameters plus an optional explicit control.

    ``q1``/``phi`` of ``None`` mean "use the analytic optimum".
    ``metadata`` records choices made on the user's behalf.
    """

    params: EngineParams
    q1: float | None = None
    phi: float | None = None
    metadata: dict = field(default_factory=dict)


def parse_config(doc: dict, model: str | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a flat key-value mapping.

    Missing keys take the reference defaults for ``model`` (the underdamped
    reference uses q0=10 and m=1).  Unknown keys raise :class:`ConfigError`.
    """
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a flat key-value mapping")
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError([f"unknown configuration key: {k}" for k in unknown])
    values = {}
    errors = []
    for key, value in doc.items():
        if value is None and key in CONTROL_KEYS:
            values[key] = None
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{key} must be a number, got {value!r}")
            continue
        values[key] = float(value)
    if errors:
        raise ConfigError(errors)

    if model is None:
        model = UNDERDAMPED if values.get("m", 0.0) > 0 else OVERDAMPED
    if model not in (OVERDAMPED, UNDERDAMPED):
        raise ConfigError(f"unknown model {model!r}")

    metadata = {"model": model}
    if model == OVERDAMPED:
        base = table1_overdamped()
        if values.get("m", 0.0) != 0.0:
            raise ConfigError("overdamped model requires m = 0")
    else:
        base = table1_underdamped()
        if "m" not in values or values["m"] == 0.0:
            values["m"] = DEFAULT_UNDERDAMPED_MASS
            metadata["m_defaulted"] = True
    params = base.with_(**{k: v for k, v in values.items() if k in PARAM_KEYS})
    problems = validate(params)
    if problems:
        raise ConfigError(problems)
    return RunConfig(params=params, q1=values.get("q1"), phi=values.get("phi"), metadata=metadata)


def load_config(path: str | Path, model: str | None = None) -> RunConfig:
    """Read a JSON configuration file, see :func:`parse_config`."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(doc, model=model)
