"""Work, heat split and efficiency from a one-period covariance trajectory.

Ensemble heat rates for the quadratic potential:

* overdamped: ``dQ/dt = q(t) dS/dt / 2`` with ``dS/dt`` from the moment ODE
* underdamped: ``dQ/dt = gamma (k_B T(t)/m - S22(t))``

Between grid samples the state is evaluated with the cubic Hermite
interpolant built from the samples and their exact derivatives.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect

from .errors import ModelMismatch, PeriodMismatch
from .model import OVERDAMPED, ControlProfile, EngineParams, control_at, control_rate_at, temperature_at
from .moments import CovarianceTrajectory, overdamped_rhs

PERIOD_RTOL = 1e-9
ROOT_XTOL = 1e-12  # period-relative
DEGENERATE_QH = 1e-12


@dataclass(frozen=True)
class CycleReport:
    W: float
    Qh: float
    Qc: float
    power: float
    eta: float
    degenerate: bool = False
    zero_crossings: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def first_law_residual(self) -> float:
        return self.W - (self.Qh - self.Qc)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["zero_crossings"] = list(self.zero_crossings)
        d.update(d.pop("meta"))
        return d


def _check_period(trajectory: CovarianceTrajectory, omega: float):
    period = 2.0 * math.pi / omega
    span = trajectory.t[-1] - trajectory.t[0]
    if abs(span - period) > PERIOD_RTOL * period:
        raise PeriodMismatch(f"trajectory spans {span:.12g}, drive period is {period:.12g}")


def _check_model(params: EngineParams, trajectory: CovarianceTrajectory):
    if params.model != trajectory.model:
        raise ModelMismatch(f"trajectory is {trajectory.model} but parameters describe the {params.model} model")


def cycle_work(profile: ControlProfile, trajectory: CovarianceTrajectory) -> float:
    """Work extracted per cycle, ``-1/2 * integral of dq/dt * S11``."""
    omega = trajectory.params.omega
    _check_period(trajectory, omega)
    if profile.amplitude == 0:
        return 0.0
    integrand = control_rate_at(profile, omega, trajectory.t) * trajectory.sigma11
    return float(-0.5 * simpson(integrand, x=trajectory.t))


class _HeatRate:
    """Heat rate along a trajectory at arbitrary times within its period."""

    def __init__(self, params: EngineParams, profile: ControlProfile, trajectory: CovarianceTrajectory):
        _check_model(params, trajectory)
        self.params, self.profile, self.trajectory = params, profile, trajectory
        t = trajectory.t
        if trajectory.model == OVERDAMPED:
            self._spline = CubicHermiteSpline(t, trajectory.samples, trajectory.derivative)
        else:
            self._spline = CubicHermiteSpline(t, trajectory.samples[:, 2], trajectory.derivative[:, 2])

    def on_grid(self) -> np.ndarray:
        traj = self.trajectory
        if traj.model == OVERDAMPED:
            return 0.5 * control_at(self.profile, self.params.omega, traj.t) * traj.derivative
        return self._underdamped(traj.t, traj.samples[:, 2])

    def _underdamped(self, t, s22):
        p = self.params
        return p.gamma * (p.k_B * temperature_at(p, t) / p.m - s22)

    def __call__(self, t):
        p = self.params
        if self.trajectory.model == OVERDAMPED:
            sigma = self._spline(t)
            return 0.5 * control_at(self.profile, p.omega, t) * overdamped_rhs(p, self.profile, t, sigma)
        return self._underdamped(t, self._spline(t))


def heat_rate(params: EngineParams, profile: ControlProfile, trajectory: CovarianceTrajectory, t):
    """Ensemble heat flow into the particle at time(s) ``t``."""
    return _HeatRate(params, profile, trajectory)(t)


def _simpson_piece(f, a, b, fa, fb):
    return (b - a) / 6.0 * (fa + 4.0 * f(0.5 * (a + b)) + fb)


def split_heat(params: EngineParams, profile: ControlProfile, trajectory: CovarianceTrajectory):
    """Heat absorbed ``Qh`` and released ``Qc`` over one period.

    Sign changes of the heat rate are bracketed on the sample grid and
    refined by bisection; each grid interval is integrated with Simpson's
    rule, split exactly at the refined crossings.

    Returns ``(Qh, Qc, crossings)`` with ``Qh, Qc >= 0``.
    """
    _check_period(trajectory, params.omega)
    rate = _HeatRate(params, profile, trajectory)
    t = trajectory.t
    h = rate.on_grid()
    mid = rate(0.5 * (t[:-1] + t[1:]))
    pieces = (t[1:] - t[:-1]) / 6.0 * (h[:-1] + 4.0 * mid + h[1:])

    sa, sb = np.sign(h[:-1]), np.sign(h[1:])
    crossing = np.flatnonzero(sa * sb < 0)
    # a sample sitting exactly on zero between opposite signs
    exact = [i for i in range(1, len(h) - 1) if h[i] == 0 and h[i - 1] * h[i + 1] < 0]

    pos = np.where(pieces > 0, pieces, 0.0)
    neg = np.where(pieces < 0, -pieces, 0.0)
    pos[crossing] = 0.0
    neg[crossing] = 0.0
    crossings = [float(t[i]) for i in exact]
    xtol = ROOT_XTOL * params.period
    for i in crossing:
        a, b = float(t[i]), float(t[i + 1])
        root = bisect(rate, a, b, xtol=xtol, maxiter=200)
        crossings.append(root)
        left = _simpson_piece(rate, a, root, h[i], 0.0)
        right = _simpson_piece(rate, root, b, 0.0, h[i + 1])
        for part in (left, right):
            if part > 0:
                pos[i] += part
            else:
                neg[i] -= part
    crossings.sort()
    return float(math.fsum(pos)), float(math.fsum(neg)), tuple(crossings)


def efficiency(W: float, Qh: float, Qc: float, omega: float, zero_crossings=(), tol: float = DEGENERATE_QH, **meta) -> CycleReport:
    """Assemble a :class:`CycleReport`; ``Qh <= tol`` is flagged degenerate."""
    degenerate = not Qh > tol
    eta = 0.0 if degenerate else W / Qh
    return CycleReport(
        W=W,
        Qh=Qh,
        Qc=Qc,
        power=omega / (2.0 * math.pi) * W,
        eta=eta,
        degenerate=degenerate,
        zero_crossings=tuple(zero_crossings),
        meta=dict(meta),
    )


def cycle_report(params: EngineParams, profile: ControlProfile, trajectory: CovarianceTrajectory) -> CycleReport:
    """Work, heat split, power and efficiency of one steady-state cycle."""
    W = cycle_work(profile, trajectory)
    Qh, Qc, crossings = split_heat(params, profile, trajectory)
    return efficiency(W, Qh, Qc, params.omega, crossings, source=trajectory.source)
