"""Covariance (Lyapunov) dynamics in the time domain.

Overdamped variance::

    dS/dt = -(2/gamma) q(t) S + (2/gamma) k_B T(t)

Underdamped covariance of (x, v), propagated as the 3-vector (S11, S12, S22)::

    dS11/dt = 2 S12
    dS12/dt = S22 - (q/m) S11 - (gamma/m) S12
    dS22/dt = -2 (q/m) S12 - 2 (gamma/m) S22 + 2 gamma k_B T / m^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameters, ModelMismatch, NoConvergence, StepTooCoarse
from .model import (
    OVERDAMPED,
    UNDERDAMPED,
    ControlProfile,
    EngineParams,
    control_at,
    require_valid,
    temperature_at,
)


@dataclass(frozen=True)
class IntegratorOptions:
    steps_per_period: int = 10_000
    max_cycles: int = 200
    steady_tol: float = 1e-10

    def __post_init__(self):
        errors = []
        if int(self.steps_per_period) != self.steps_per_period or self.steps_per_period < 100:
            errors.append("steps_per_period must be an integer >= 100")
        if int(self.max_cycles) != self.max_cycles or self.max_cycles < 1:
            errors.append("max_cycles must be an integer >= 1")
        if not self.steady_tol > 0:
            errors.append("steady_tol must be positive")
        if errors:
            raise InvalidParameters(errors)


@dataclass(frozen=True, eq=False)
class CovarianceTrajectory:
    """Second moments sampled on a uniform grid spanning one period.

    ``samples`` has shape ``(n+1,)`` (overdamped variance) or ``(n+1, 3)``
    holding ``S11, S12, S22``.  ``derivative`` holds the exact right-hand
    side at every sample.
    """

    model: str
    t: np.ndarray
    samples: np.ndarray
    derivative: np.ndarray
    params: EngineParams
    profile: ControlProfile
    cycles: int = 0
    defect: float = 0.0
    source: str = "time-domain"
    meta: dict = field(default_factory=dict)

    @property
    def sigma11(self) -> np.ndarray:
        return self.samples if self.model == OVERDAMPED else self.samples[:, 0]

    @property
    def sigma12(self) -> np.ndarray:
        self._need_underdamped()
        return self.samples[:, 1]

    @property
    def sigma22(self) -> np.ndarray:
        self._need_underdamped()
        return self.samples[:, 2]

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1

    def _need_underdamped(self):
        if self.model != UNDERDAMPED:
            raise ModelMismatch("velocity moments exist only for the underdamped model")


# -- right-hand sides --------------------------------------------------------

def overdamped_rhs(params: EngineParams, profile: ControlProfile, t, sigma):
    """dS/dt of the overdamped variance equation; vectorises over ``t``."""
    q = control_at(profile, params.omega, t)
    T = temperature_at(params, t)
    return (2.0 / params.gamma) * (params.k_B * T - q * sigma)


def _underdamped_vec_rhs(params, q, T, s11, s12, s22):
    m, g = params.m, params.gamma
    return (
        2.0 * s12,
        s22 - (q / m) * s11 - (g / m) * s12,
        -2.0 * (q / m) * s12 - 2.0 * (g / m) * s22 + 2.0 * g * params.k_B * T / m**2,
    )


def underdamped_rhs(params: EngineParams, profile: ControlProfile, t, sigma):
    """``A S + S A' + D D'`` for a symmetric 2x2 covariance ``sigma``."""
    if params.m <= 0:
        raise ModelMismatch("underdamped dynamics require m > 0")
    sigma = np.asarray(sigma, dtype=float)
    q = control_at(profile, params.omega, t)
    T = temperature_at(params, t)
    d11, d12, d22 = _underdamped_vec_rhs(params, q, T, sigma[0, 0], 0.5 * (sigma[0, 1] + sigma[1, 0]), sigma[1, 1])
    return np.array([[d11, d12], [d12, d22]])


def rhs_on_grid(params: EngineParams, profile: ControlProfile, t, samples):
    """Exact right-hand side evaluated at each sample of a trajectory array."""
    if params.is_overdamped:
        return overdamped_rhs(params, profile, t, samples)
    q = control_at(profile, params.omega, t)
    T = temperature_at(params, t)
    return np.column_stack(_underdamped_vec_rhs(params, q, T, samples[:, 0], samples[:, 1], samples[:, 2]))


def equilibrium(params: EngineParams):
    """Static-bath stationary moments (equipartition)."""
    s11 = params.k_B * params.T0 / params.q0
    if params.is_overdamped:
        return s11
    return (s11, 0.0, params.k_B * params.T0 / params.m)


def make_trajectory(params, profile, t, samples, **kw) -> CovarianceTrajectory:
    t = np.asarray(t, dtype=float)
    samples = np.asarray(samples, dtype=float)
    return CovarianceTrajectory(
        model=params.model,
        t=t,
        samples=samples,
        derivative=rhs_on_grid(params, profile, t, samples),
        params=params,
        profile=profile,
        **kw,
    )


# -- fixed-step RK4 over one period ------------------------------------------

def _half_step_tables(params, profile, n):
    """q and T at every half step of an n-step period (2n+1 points)."""
    th = np.linspace(0.0, params.period, 2 * n + 1)
    return control_at(profile, params.omega, th).tolist(), temperature_at(params, th).tolist()


def _rk4_period_overdamped(params, qs, Ts, n, s0):
    h = params.period / n
    c = 2.0 / params.gamma
    kB = params.k_B
    out = [s0]
    s = s0
    for i in range(n):
        q0, qm, q1 = qs[2 * i], qs[2 * i + 1], qs[2 * i + 2]
        T0, Tm, T1 = Ts[2 * i], Ts[2 * i + 1], Ts[2 * i + 2]
        k1 = c * (kB * T0 - q0 * s)
        k2 = c * (kB * Tm - qm * (s + 0.5 * h * k1))
        k3 = c * (kB * Tm - qm * (s + 0.5 * h * k2))
        k4 = c * (kB * T1 - q1 * (s + h * k3))
        s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(s)
    return np.array(out)


def _rk4_period_underdamped(params, qs, Ts, n, s0):
    h = params.period / n
    m, g = params.m, params.gamma
    gm, noise = g / m, 2.0 * g * params.k_B / m**2

    def f(q, T, a, b, c):
        qm = q / m
        return 2.0 * b, c - qm * a - gm * b, -2.0 * qm * b - 2.0 * gm * c + noise * T

    a, b, c = s0
    out = [s0]
    for i in range(n):
        q0, qm, q1 = qs[2 * i], qs[2 * i + 1], qs[2 * i + 2]
        T0, Tm, T1 = Ts[2 * i], Ts[2 * i + 1], Ts[2 * i + 2]
        ka = f(q0, T0, a, b, c)
        kb = f(qm, Tm, a + 0.5 * h * ka[0], b + 0.5 * h * ka[1], c + 0.5 * h * ka[2])
        kc = f(qm, Tm, a + 0.5 * h * kb[0], b + 0.5 * h * kb[1], c + 0.5 * h * kb[2])
        kd = f(q1, T1, a + h * kc[0], b + h * kc[1], c + h * kc[2])
        a = a + h / 6.0 * (ka[0] + 2.0 * kb[0] + 2.0 * kc[0] + kd[0])
        b = b + h / 6.0 * (ka[1] + 2.0 * kb[1] + 2.0 * kc[1] + kd[1])
        c = c + h / 6.0 * (ka[2] + 2.0 * kb[2] + 2.0 * kc[2] + kd[2])
        out.append((a, b, c))
    return np.array(out)


def integrate_period(params: EngineParams, profile: ControlProfile, n_steps: int, initial):
    """Samples over one period from ``initial`` with ``n_steps`` RK4 steps."""
    qs, Ts = _half_step_tables(params, profile, n_steps)
    if params.is_overdamped:
        return _rk4_period_overdamped(params, qs, Ts, n_steps, float(initial))
    return _rk4_period_underdamped(params, qs, Ts, n_steps, tuple(float(x) for x in initial))


def _first_indefinite(params, t, samples):
    """Index of the first sample that is not positive definite, else None."""
    if params.is_overdamped:
        bad = ~(samples > 0)
    else:
        s11, s12, s22 = samples[:, 0], samples[:, 1], samples[:, 2]
        bad = ~((s11 > 0) & (s22 > 0) & (s11 * s22 - s12 * s12 > 0))
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def _rel_diff(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))


def integrate_to_periodic_steady_state(
    params: EngineParams,
    profile: ControlProfile,
    opts: IntegratorOptions | None = None,
) -> CovarianceTrajectory:
    """Relax the moment equations to their periodic orbit.

    Starts from the static-bath equilibrium and integrates whole periods
    until the relative start-to-end defect drops below ``opts.steady_tol``.
    The converged period is then re-integrated with half the step as a
    resolution check.

    Raises :class:`NoConvergence` when the defect stays above tolerance for
    ``opts.max_cycles`` periods or positivity is lost, and
    :class:`StepTooCoarse` when step halving moves the period-end state by
    more than ``10 * steady_tol``.
    """
    opts = opts or IntegratorOptions()
    require_valid(params)
    n = int(opts.steps_per_period)
    qs, Ts = _half_step_tables(params, profile, n)
    stepper = _rk4_period_overdamped if params.is_overdamped else _rk4_period_underdamped
    t = np.linspace(0.0, params.period, n + 1)

    start = equilibrium(params)
    defect = math.inf
    for cycle in range(1, opts.max_cycles + 1):
        samples = stepper(params, qs, Ts, n, start)
        bad = _first_indefinite(params, t, samples)
        if bad is not None:
            raise NoConvergence(
                f"covariance lost positive definiteness at t = {cycle - 1} periods + {t[bad]:.6g}",
                time=(cycle - 1) * params.period + t[bad],
            )
        end = samples[-1]
        defect = _rel_diff(end, samples[0])
        if defect <= opts.steady_tol:
            fine = integrate_period(params, profile, 2 * n, samples[0])[-1]
            change = _rel_diff(fine, end)
            if change > 10.0 * opts.steady_tol:
                raise StepTooCoarse(
                    f"halving the step changed the period-end state by {change:.3g} "
                    f"(> {10.0 * opts.steady_tol:.3g}); increase steps_per_period"
                )
            return make_trajectory(params, profile, t, samples, cycles=cycle, defect=defect)
        start = float(end) if params.is_overdamped else tuple(end)
    raise NoConvergence(
        f"no periodic steady state after {opts.max_cycles} periods (defect {defect:.3g})",
        defect=defect,
    )


# -- Floquet stability ---------------------------------------------------------

def _homogeneous_generator(params, q):
    m, g = params.m, params.gamma
    return np.array(
        [
            [0.0, 2.0, 0.0],
            [-q / m, -g / m, 1.0],
            [0.0, -2.0 * q / m, -2.0 * g / m],
        ]
    )


def monodromy(params: EngineParams, profile: ControlProfile, steps_per_period: int = 4000) -> np.ndarray:
    """One-period propagator of the homogeneous covariance dynamics.

    Returns a 1x1 array for the overdamped model and the 3x3 map on
    ``(S11, S12, S22)`` for the underdamped model.
    """
    if params.is_overdamped:
        # the cosine part of q integrates to zero over a period
        return np.array([[math.exp(-2.0 * profile.q0 * params.period / params.gamma)]])
    n = int(steps_per_period)
    h = params.period / n
    qs, _ = _half_step_tables(params, profile, n)
    M = np.eye(3)
    for i in range(n):
        L0 = _homogeneous_generator(params, qs[2 * i])
        Lm = _homogeneous_generator(params, qs[2 * i + 1])
        L1 = _homogeneous_generator(params, qs[2 * i + 2])
        k1 = L0 @ M
        k2 = Lm @ (M + 0.5 * h * k1)
        k3 = Lm @ (M + 0.5 * h * k2)
        k4 = L1 @ (M + h * k3)
        M = M + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return M


def floquet_stability(
    params: EngineParams,
    profile: ControlProfile,
    opts: IntegratorOptions | None = None,
) -> float:
    """Spectral radius of the homogeneous one-period covariance map.

    Values below one mean the covariance relaxes to a unique periodic
    orbit.  Parameters are not validated so marginal cases (q0 = 0) can be
    probed.
    """
    steps = opts.steps_per_period if opts else 4000
    M = monodromy(params, profile, steps)
    return float(np.max(np.abs(np.linalg.eigvals(M))))
