"""Parameter sweeps: power surfaces, efficiency curves and eps-convergence."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import EngineError, InvalidParameters, InvalidRegime
from .model import ControlProfile, EngineParams, require_valid, wrap_angle
from .moments import IntegratorOptions, integrate_to_periodic_steady_state
from .spectral import DEFAULT_MODES, solve_spectral, spectral_power, to_trajectory
from .thermo import cycle_report, cycle_work

SPECTRAL = "spectral"
TIME_DOMAIN = "time-domain"
SOLVERS = (SPECTRAL, TIME_DOMAIN)


def _check_solver(solver):
    if solver not in SOLVERS:
        raise InvalidParameters(f"unknown solver {solver!r}; choose from {SOLVERS}")


def _failure_tag(exc: Exception) -> str:
    return f"failed:{type(exc).__name__}"


def numeric_power(params, profile, solver=SPECTRAL, modes=DEFAULT_MODES, opts=None):
    """Power of one protocol and the solver's condition estimate (NaN for time domain)."""
    if solver == SPECTRAL:
        sol = solve_spectral(params, profile, modes)
        return spectral_power(sol), sol.condition
    traj = integrate_to_periodic_steady_state(params, profile, opts)
    return params.omega / (2.0 * math.pi) * cycle_work(profile, traj), math.nan


def numeric_cycle(params, profile, solver=SPECTRAL, modes=DEFAULT_MODES, opts=None, n_steps=4000):
    """Steady-state :class:`~stochengine.thermo.CycleReport` from either solver."""
    if solver == SPECTRAL:
        traj = to_trajectory(solve_spectral(params, profile, modes), n_steps)
    else:
        traj = integrate_to_periodic_steady_state(params, profile, opts)
    return cycle_report(params, profile, traj)


# -- power surface ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepGrid:
    """Rectangular (q1, phi) grid of power values.

    Every cell carries ``status`` ``"ok"`` or ``"failed:<Error>"``; failed
    cells hold NaN power.
    """

    q1: np.ndarray
    phi: np.ndarray
    power: np.ndarray
    status: np.ndarray
    condition: np.ndarray
    solver: str
    params: EngineParams
    modes: int
    analytic: analytic.OptimalControl | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.power.shape

    @property
    def ok(self) -> np.ndarray:
        return self.status == "ok"

    @property
    def argmax(self) -> tuple[int, int]:
        masked = np.where(self.ok, self.power, -np.inf)
        i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
        return int(i), int(j)

    @property
    def best(self) -> tuple[float, float, float]:
        i, j = self.argmax
        return float(self.q1[i]), float(self.phi[j]), float(self.power[i, j])

    def cell_size(self) -> tuple[float, float]:
        dq = float(self.q1[1] - self.q1[0]) if len(self.q1) > 1 else math.inf
        dp = float(self.phi[1] - self.phi[0]) if len(self.phi) > 1 else math.inf
        return dq, dp

    def distance_in_cells(self) -> tuple[float, float] | None:
        """Offsets of the numeric argmax from the analytic optimum, in cells."""
        if self.analytic is None:
            return None
        q1, phi, _ = self.best
        dq, dp = self.cell_size()
        return (
            abs(q1 - self.analytic.q1_star) / dq,
            abs(wrap_angle(phi - self.analytic.phi_star)) / dp,
        )

    def summary(self) -> dict:
        q1, phi, power = self.best
        out = {
            "solver": self.solver,
            "modes": self.modes,
            "n_q1": len(self.q1),
            "n_phi": len(self.phi),
            "n_failed": int(np.sum(~self.ok)),
            "argmax_q1": q1,
            "argmax_phi": phi,
            "argmax_power": power,
        }
        if self.analytic is not None:
            dq, dp = self.distance_in_cells()
            out.update(
                analytic_q1=self.analytic.q1_star,
                analytic_phi=self.analytic.phi_star,
                analytic_power_leading=self.analytic.power_leading,
                distance_q1_cells=dq,
                distance_phi_cells=dp,
            )
        return out


def _linspace(spec):
    lo, hi, n = spec
    if int(n) != n or n < 1:
        raise InvalidParameters("grid axes need an integer point count >= 1")
    return np.linspace(float(lo), float(hi), int(n))


def sweep_power(
    params: EngineParams,
    q1_range=(0.0, 1.0, 101),
    phi_range=(-math.pi, math.pi, 101),
    solver: str = SPECTRAL,
    modes: int = DEFAULT_MODES,
    opts: IntegratorOptions | None = None,
    workers: int = 1,
) -> SweepGrid:
    """Evaluate the steady-state power on a (q1, phi) grid.

    Ranges are ``(min, max, n_points)``.  Cells are returned in grid index
    order regardless of ``workers``.
    """
    _check_solver(solver)
    require_valid(params)
    q1s, phis = _linspace(q1_range), _linspace(phi_range)
    cells = [(i, j) for i in range(len(q1s)) for j in range(len(phis))]

    def evaluate(cell):
        i, j = cell
        # phi is used unwrapped for evaluation; the grid keeps the requested values
        profile = ControlProfile.for_params(params, q1s[i], phis[j])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                power, cond = numeric_power(params, profile, solver, modes, opts)
            return power, "ok", cond
        except EngineError as exc:
            return math.nan, _failure_tag(exc), getattr(exc, "condition", None) or math.nan

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, cells))
    else:
        results = [evaluate(c) for c in cells]

    shape = (len(q1s), len(phis))
    power = np.array([r[0] for r in results], dtype=float).reshape(shape)
    status = np.array([r[1] for r in results], dtype=object).reshape(shape)
    cond = np.array([r[2] for r in results], dtype=float).reshape(shape)
    try:
        opt = analytic.optimum(params)
    except InvalidRegime:
        opt = None
    return SweepGrid(q1s, phis, power, status, cond, solver, params, modes, opt)


# -- efficiency curve -----------------------------------------------------------------

@dataclass(frozen=True)
class EfficiencyPoint:
    T1: float
    eta_numeric: float
    eta_analytic: float
    status: str = "ok"


def efficiency_curve(
    params: EngineParams,
    T1_values,
    solver: str = SPECTRAL,
    modes: int = DEFAULT_MODES,
    opts: IntegratorOptions | None = None,
    n_steps: int = 4000,
) -> list[EfficiencyPoint]:
    """Numeric vs first-order efficiency at the analytic optimum for each T1.

    ``params.epsilon`` is held fixed.  Points with no heat input are tagged
    ``"degenerate"``; solver failures are tagged ``"failed:<Error>"``.
    """
    _check_solver(solver)
    points = []
    for T1 in T1_values:
        p = params.with_(T1=float(T1))
        try:
            require_valid(p)
            opt = analytic.optimum(p)
            eta_a = analytic.efficiency_report(p).eta
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                report = numeric_cycle(p, opt.profile(p), solver, modes, opts, n_steps)
        except EngineError as exc:
            points.append(EfficiencyPoint(float(T1), math.nan, math.nan, _failure_tag(exc)))
            continue
        status = "degenerate" if report.degenerate else "ok"
        points.append(EfficiencyPoint(float(T1), report.eta, eta_a, status))
    return points


def fit_efficiency_slope(points) -> float:
    """Slope of eta at T1 -> 0 from a least-squares fit ``a*T1 + b*T1^2``.

    Degenerate and failed points are excluded.  The quadratic term absorbs
    the O(T1^2) curvature that would otherwise bias a straight-line fit.
    """
    use = [p for p in points if p.status == "ok"]
    if len(use) < 2:
        raise ValueError("need at least two non-degenerate points to fit a slope")
    T = np.array([p.T1 for p in use])
    eta = np.array([p.eta_numeric for p in use])
    design = np.column_stack([T, T * T])
    coef, *_ = np.linalg.lstsq(design, eta, rcond=None)
    return float(coef[0])


def analytic_efficiency_slope(params: EngineParams) -> float:
    """d(eta)/d(T1) of the first-order efficiency (linear in T1 for both models)."""
    if params.is_overdamped:
        return params.epsilon * math.pi / (4.0 * params.T0)
    # kappa does not depend on T1, so any admissible T1 > 0 gives the slope
    T1 = 0.5 * params.T0 / max(params.epsilon, 1.0)
    return analytic.underdamped_efficiency(params.with_(T1=T1)).eta / T1


# -- eps-convergence table ----------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    epsilon: float
    power_numeric: float
    power_analytic: float
    eta_numeric: float
    eta_analytic: float

    @property
    def power_error(self) -> float:
        return abs(self.power_numeric - self.power_analytic)

    @property
    def eta_error(self) -> float:
        return abs(self.eta_numeric - self.eta_analytic)


@dataclass(frozen=True)
class ComparisonTable:
    rows: list
    power_slope: float
    eta_slope: float
    monotone: bool

    def as_dict(self):
        return {"power_slope": self.power_slope, "eta_slope": self.eta_slope, "monotone": self.monotone}


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def compare_report(
    params: EngineParams,
    eps_values=(0.2, 0.1, 0.05, 0.025),
    solver: str = SPECTRAL,
    modes: int = DEFAULT_MODES,
    opts: IntegratorOptions | None = None,
    n_steps: int = 4000,
) -> ComparisonTable:
    """Numeric-minus-analytic errors of power and efficiency against eps."""
    _check_solver(solver)
    eps_values = [float(e) for e in eps_values]
    if len(eps_values) < 2 or any(e <= 0 for e in eps_values) or any(
        b >= a for a, b in zip(eps_values, eps_values[1:])
    ):
        raise InvalidParameters("eps list must hold at least two strictly positive, decreasing values")
    rows = []
    for eps in eps_values:
        p = params.with_(epsilon=eps)
        require_valid(p)
        opt = analytic.optimum(p)
        eta_a = analytic.efficiency_report(p).eta
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            profile = opt.profile(p)
            report = numeric_cycle(p, profile, solver, modes, opts, n_steps)
            if solver == SPECTRAL:
                power, _ = numeric_power(p, profile, solver, modes, opts)
            else:
                power = report.power
        rows.append(ComparisonRow(eps, power, opt.power_leading, report.eta, eta_a))
    eps = np.array(eps_values)
    p_err = np.array([r.power_error for r in rows])
    e_err = np.array([r.eta_error for r in rows])
    monotone = bool(np.all(np.diff(p_err) < 0) and np.all(np.diff(e_err) < 0))
    return ComparisonTable(rows, _loglog_slope(eps, p_err), _loglog_slope(eps, e_err), monotone)
