"""Closed-form small-perturbation results for both engine models.

Angles follow ``angle(x + i y) = atan2(y, x)`` and the optimal protocol is
always ``q0 + eps*q1*cos(w t - phi)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidRegime
from .model import ControlProfile, EngineParams, require_valid, wrap_angle


@dataclass(frozen=True)
class OptimalControl:
    q1_star: float
    phi_star: float
    power_leading: float
    symbols: dict = field(default_factory=dict)

    def profile(self, params: EngineParams) -> ControlProfile:
        return ControlProfile.for_params(params, self.q1_star, self.phi_star)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("symbols"))
        return d


@dataclass(frozen=True)
class EfficiencyReport:
    """Heat split and efficiency at maximal power.

    ``degenerate`` marks ``Qh == 0`` (no temperature modulation), in which
    case ``eta`` is reported as 0.
    """

    Qh: float
    Qc: float
    W: float
    eta: float
    degenerate: bool = False
    kappa: float | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    t1: float | None = None
    t2: float | None = None
    symbols: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("symbols"))
        return d


# -- overdamped --------------------------------------------------------------

def overdamped_optimum(params: EngineParams) -> OptimalControl:
    require_valid(params)
    g_, w, q0 = params.gamma, params.omega, params.q0
    g = math.hypot(g_ * w, 2.0 * q0)
    q1 = q0 * g * params.T1 / (2.0 * g_ * w * params.T0)
    phi = math.atan2(-2.0 * q0, g_ * w)
    power = params.epsilon**2 * params.k_B * q0 * params.T1**2 / (8.0 * g_ * params.T0)
    return OptimalControl(q1, wrap_angle(phi), power, {"g": g})


def overdamped_variance_first_order(params: EngineParams, t):
    """Variance to first order in eps under the optimal protocol."""
    return params.k_B * params.T0 / params.q0 + params.epsilon * (
        params.k_B * params.T1 / (params.gamma * params.omega)
    ) * np.sin(params.omega * t)


def overdamped_efficiency(params: EngineParams) -> EfficiencyReport:
    """Heat in/out per cycle to second order and first-order efficiency.

    ``eta`` is the first-order value ``eps*pi*T1/(4*T0)``; it agrees with
    ``W/Qh`` only up to O(eps^2).
    """
    require_valid(params)
    eps, w = params.epsilon, params.omega
    base = eps * params.k_B * params.T1 * params.q0 / (params.gamma * w)
    corr = eps * math.pi * params.T1 / (8.0 * params.T0)
    Qh, Qc = base * (1.0 + corr), base * (1.0 - corr)
    degenerate = not Qh > 0
    eta = 0.0 if degenerate else eps * math.pi * params.T1 / (4.0 * params.T0)
    return EfficiencyReport(
        Qh=Qh,
        Qc=Qc,
        W=Qh - Qc,
        eta=eta,
        degenerate=degenerate,
        t1=math.pi / (2.0 * w),
        t2=3.0 * math.pi / (2.0 * w),
        symbols={"eta_ratio": 0.0 if degenerate else (Qh - Qc) / Qh},
    )


def carnot_comparison(params: EngineParams) -> float:
    """Ratio of first-order efficiency to Carnot between ``T0 +- eps*T1``."""
    if not (params.T1 > 0 and params.epsilon > 0):
        raise ValueError("Carnot comparison needs T1 > 0 and epsilon > 0")
    eps, T0, T1 = params.epsilon, params.T0, params.T1
    eta = eps * math.pi * T1 / (4.0 * T0)
    eta_carnot = 2.0 * eps * T1 / (T0 + eps * T1)
    return eta / eta_carnot


def carnot_limit(params: EngineParams, eps: float = 1e-6) -> float:
    """Small-eps limit of :func:`carnot_comparison`.

    The ratio is affine in eps, so the two-point extrapolation from ``eps``
    and ``2*eps`` to zero is exact up to rounding.
    """
    r1 = carnot_comparison(params.with_(epsilon=eps))
    r2 = carnot_comparison(params.with_(epsilon=2.0 * eps))
    return 2.0 * r1 - r2


# -- underdamped -------------------------------------------------------------

def _underdamped_symbols(params: EngineParams) -> dict:
    require_valid(params, underdamped=True)
    m, g_, w, q0 = params.m, params.gamma, params.omega, params.q0
    alpha = 4.0 * q0 * g_ - 3.0 * w**2 * g_ * m
    beta = w * (2.0 * g_**2 + 4.0 * q0 * m - w**2 * m**2)
    denom = 2.0 * g_ * beta - alpha * w * m
    if not denom > 0:
        raise InvalidRegime(
            f"2*gamma*beta - alpha*omega*m = {denom:.6g} <= 0: perturbative optimum not valid"
        )
    re, im = 2.0 * q0 / m - w**2, w * g_ / m
    return {
        "alpha": alpha,
        "beta": beta,
        "denom": denom,
        "r": math.hypot(alpha, beta),
        "r2": math.hypot(re, im),
        "theta": math.atan2(im, re),
    }


def underdamped_optimum(params: EngineParams) -> OptimalControl:
    s = _underdamped_symbols(params)
    q0, g_ = params.q0, params.gamma
    q1 = q0 * g_ * params.T1 * s["r"] / (params.T0 * s["denom"])
    phi = math.atan2(-s["alpha"], s["beta"])
    power = params.epsilon**2 * q0 * params.omega * params.k_B * g_**2 * params.T1**2 / (2.0 * params.T0 * s["denom"])
    return OptimalControl(q1, wrap_angle(phi), power, s)


def underdamped_covariance_first_order(params: EngineParams, t):
    """First-order ``(S11, S12, S22)`` under the optimal protocol.

    S22 carries ``+ r2/r sin(w t - phi* + theta)``; this is the form whose
    heat rate reproduces the kappa amplitudes of :func:`underdamped_efficiency`.
    """
    s = _underdamped_symbols(params)
    phi = underdamped_optimum(params).phi_star
    m, g_, w, kB = params.m, params.gamma, params.omega, params.k_B
    eps, T1, q0 = params.epsilon, params.T1, params.q0
    wt = w * np.asarray(t, dtype=float)
    amp = g_ * kB * T1 / s["denom"]
    s11 = kB * params.T0 / q0 + eps * 2.0 * amp * (2.0 * g_ * np.sin(wt) - m * w * np.cos(wt))
    s12 = eps * w * amp * (2.0 * g_ * np.cos(wt) + m * w * np.sin(wt))
    s22 = (
        kB * params.T0 / m
        + eps * (2.0 * g_ * kB * T1 * s["r2"] / s["r"]) * np.sin(wt - phi + s["theta"])
        + eps * 2.0 * q0 * w * amp * np.cos(wt - 2.0 * phi)
    )
    return s11, s12, s22


def underdamped_efficiency(params: EngineParams) -> EfficiencyReport:
    """First-order heat input and efficiency at maximal power."""
    s = _underdamped_symbols(params)
    opt = underdamped_optimum(params)
    m, g_, w, kB = params.m, params.gamma, params.omega, params.k_B
    eps, T1, q0, phi = params.epsilon, params.T1, params.q0, opt.phi_star
    kappa1 = 2.0 * m * g_ * s["r2"] / s["r"]
    kappa2 = 2.0 * m * g_ * q0 * w / s["denom"]
    cos_part = 1.0 - kappa1 * math.sin(s["theta"] - phi) - kappa2 * math.cos(2.0 * phi)
    sin_part = -kappa1 * math.cos(s["theta"] - phi) - kappa2 * math.sin(2.0 * phi)
    kappa = math.hypot(cos_part, sin_part)
    Qh = eps * 2.0 * kappa * g_ * kB * T1 / (m * w)
    W = 2.0 * math.pi / w * opt.power_leading
    degenerate = not Qh > 0
    eta = 0.0 if degenerate else eps * math.pi * m * w * q0 * g_ * T1 / (2.0 * kappa * params.T0 * s["denom"])
    symbols = dict(s)
    symbols["g"] = math.hypot(g_ * w, 2.0 * q0)
    return EfficiencyReport(
        Qh=Qh,
        Qc=Qh - W,
        W=W,
        eta=eta,
        degenerate=degenerate,
        kappa=kappa,
        kappa1=kappa1,
        kappa2=kappa2,
        symbols=symbols,
    )


# -- dispatch ----------------------------------------------------------------

def optimum(params: EngineParams) -> OptimalControl:
    return overdamped_optimum(params) if params.is_overdamped else underdamped_optimum(params)


def efficiency_report(params: EngineParams) -> EfficiencyReport:
    return overdamped_efficiency(params) if params.is_overdamped else underdamped_efficiency(params)


def analytic_report(params: EngineParams) -> dict:
    """Flat report of optimum, heat split and all intermediate symbols."""
    opt = optimum(params)
    eff = efficiency_report(params)
    report = {"model": params.model}
    report.update(params.as_dict())
    report.update({k: v for k, v in opt.as_dict().items()})
    report["power"] = report.pop("power_leading")
    for key, value in eff.as_dict().items():
        report.setdefault(key, value)
    if params.T1 > 0 and params.epsilon > 0:
        report["carnot_ratio"] = carnot_comparison(params)
    return report
