"""Harmonic-balance solution of the periodic Lyapunov equations.

Every periodic quantity is expanded as ``f(t) = sum_n f_n exp(i n w t)`` and
truncated to ``|n| <= N``.  Because q(t) and T(t) carry a single harmonic,
mode ``n`` couples only to ``n-1``, ``n`` and ``n+1`` and the balance
equations form a banded linear system that is factorised directly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, onenormest

from .errors import NonRealPower, SingularSystem, TruncationWarning
from .model import OVERDAMPED, UNDERDAMPED, ControlProfile, EngineParams, require_valid
from .moments import CovarianceTrajectory, make_trajectory

DEFAULT_MODES = 100
TRUNCATION_RATIO = 1e-12
#: Reciprocal condition numbers below this are reported as singular.
SINGULAR_RCOND = 1e-14
POWER_IMAG_TOL = 1e-12

COMPONENTS = {OVERDAMPED: ("Sigma",), UNDERDAMPED: ("S11", "S12", "S22")}


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Fourier coefficients for modes ``-N..N``.

    ``coeffs[N + n]`` is mode ``n``; for the underdamped model each row holds
    the ``S11, S12, S22`` coefficients.  ``a`` is ``[a_-1, a_0, a_1]``.
    """

    model: str
    N: int
    coeffs: np.ndarray
    a: np.ndarray
    params: EngineParams
    profile: ControlProfile
    condition: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def mode(self, n: int, component: int = 0) -> complex:
        row = self.coeffs[self.N + n]
        return complex(row if self.model == OVERDAMPED else row[component])

    def sigma11_coeffs(self) -> np.ndarray:
        return self.coeffs if self.model == OVERDAMPED else self.coeffs[:, 0]


# -- banded linear algebra ---------------------------------------------------

class _BandSystem:
    """Complex banded matrix in LAPACK gbtrf storage, filled entry by entry."""

    def __init__(self, size, kl, ku):
        self.size, self.kl, self.ku = size, kl, ku
        self.ab = np.zeros((2 * kl + ku + 1, size), dtype=complex)

    def add(self, rows, cols, values):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        keep = (cols >= 0) & (cols < self.size)
        values = np.broadcast_to(values, rows.shape)
        np.add.at(self.ab, (self.kl + self.ku + rows[keep] - cols[keep], cols[keep]), values[keep])

    def dense(self):
        out = np.zeros((self.size, self.size), dtype=complex)
        for j in range(self.size):
            lo, hi = max(0, j - self.ku), min(self.size, j + self.kl + 1)
            rows = np.arange(lo, hi)
            out[rows, j] = self.ab[self.kl + self.ku + rows - j, j]
        return out

    def one_norm(self):
        return float(np.max(np.sum(np.abs(self.ab), axis=0)))

    def solve(self, rhs):
        norm = self.one_norm()
        lu, piv, info = lapack.zgbtrf(self.ab, self.kl, self.ku)
        if info > 0:
            raise SingularSystem(f"exact zero pivot in column {info} of the balance system", condition=math.inf)
        if info < 0:  # pragma: no cover - argument error in our own call
            raise RuntimeError(f"zgbtrf argument error {info}")

        def apply(vec, trans):
            x, inf = lapack.zgbtrs(lu, self.kl, self.ku, np.asarray(vec, complex).reshape(-1, 1), piv, trans=trans)
            return x.ravel()

        inverse = LinearOperator(
            (self.size, self.size),
            matvec=lambda v: apply(v, 0),
            rmatvec=lambda v: apply(v, 2),
            dtype=complex,
        )
        with np.errstate(over="ignore", invalid="ignore"):  # tiny entries in sign(Y)
            condition = norm * onenormest(inverse)
        if not np.isfinite(condition) or condition * SINGULAR_RCOND > 1.0:
            raise SingularSystem(
                f"balance system numerically singular (1-norm condition estimate {condition:.3g})",
                condition=condition,
            )
        x = apply(rhs, 0)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution of the balance system", condition=condition)
        return x, condition


def _check_conjugate_symmetry(coeffs, tol=1e-9):
    flipped = np.conj(coeffs[::-1])
    scale = max(float(np.max(np.abs(coeffs))), np.finfo(float).tiny)
    err = float(np.max(np.abs(coeffs - flipped))) / scale
    if err > tol:
        raise SingularSystem(f"solved coefficients break conjugate symmetry (relative defect {err:.3g})")


def _warn_truncation(coeffs, N):
    ratio = float(np.max(np.abs(coeffs[-1])) / max(np.max(np.abs(coeffs[N])), np.finfo(float).tiny))
    if ratio > TRUNCATION_RATIO:
        warnings.warn(
            f"highest retained mode N={N} has relative size {ratio:.3g}; increase the truncation",
            TruncationWarning,
            stacklevel=3,
        )
    return ratio


def _temperature_modes(params):
    """Nonzero Fourier coefficients of T(t): T0 at 0 and eps*T1/2 at +-1."""
    half = 0.5 * params.epsilon * params.T1
    return {-1: half, 0: params.T0, 1: half}


def _check_modes(N):
    if int(N) != N or N < 2:
        raise ValueError(f"truncation N must be an integer >= 2, got {N}")
    return int(N)


# -- solvers --------------------------------------------------------------------

def solve_overdamped_spectral(params: EngineParams, profile: ControlProfile, N: int = DEFAULT_MODES) -> SpectralSolution:
    """Harmonic balance of the overdamped variance equation.

    Row ``n`` reads ``i w n c_n + (2/gamma) sum_k a_k c_{n-k} = (2/gamma) k_B T_n``.
    """
    require_valid(params, underdamped=False)
    N = _check_modes(N)
    a = profile.fourier()
    size = 2 * N + 1
    n = np.arange(-N, N + 1)
    rows = n + N
    c = 2.0 / params.gamma
    band = _BandSystem(size, 1, 1)
    band.add(rows, rows, 1j * params.omega * n + c * a[1])
    band.add(rows, rows + 1, c * a[0])  # a_-1 multiplies c_{n+1}
    band.add(rows, rows - 1, c * a[2])  # a_1 multiplies c_{n-1}
    rhs = np.zeros(size, dtype=complex)
    for k, Tk in _temperature_modes(params).items():
        rhs[N + k] = c * params.k_B * Tk
    coeffs, cond = band.solve(rhs)
    _check_conjugate_symmetry(coeffs)
    ratio = _warn_truncation(coeffs, N)
    return SpectralSolution(OVERDAMPED, N, coeffs, a, params, profile, cond, {"tail_ratio": ratio, "band": band})


def solve_underdamped_spectral(params: EngineParams, profile: ControlProfile, N: int = DEFAULT_MODES) -> SpectralSolution:
    """Harmonic balance of the vectorised underdamped Lyapunov equation.

    Unknowns are interleaved as ``(S11_n, S12_n, S22_n)`` so that the
    coupling through ``a_{+-1}`` stays within 4 sub- and 2 super-diagonals.
    """
    require_valid(params, underdamped=True)
    N = _check_modes(N)
    a = profile.fourier()
    m, g, w = params.m, params.gamma, params.omega
    size = 3 * (2 * N + 1)
    n = np.arange(-N, N + 1)
    r0 = 3 * (n + N)
    r1, r2 = r0 + 1, r0 + 2
    band = _BandSystem(size, 4, 2)
    # S11 row: i w n S11 - 2 S12 = 0
    band.add(r0, r0, 1j * w * n)
    band.add(r0, r1, -2.0)
    # S12 row: (i w n + g/m) S12 - S22 + (1/m) (q * S11)_n = 0
    band.add(r1, r1, 1j * w * n + g / m)
    band.add(r1, r2, -1.0)
    # S22 row: (i w n + 2g/m) S22 + (2/m) (q * S12)_n = 2 g k_B T_n / m^2
    band.add(r2, r2, 1j * w * n + 2.0 * g / m)
    for k, ak in zip((-1, 0, 1), a):
        band.add(r1, r0 - 3 * k, ak / m)
        band.add(r2, r1 - 3 * k, 2.0 * ak / m)
    rhs = np.zeros(size, dtype=complex)
    for k, Tk in _temperature_modes(params).items():
        rhs[3 * (N + k) + 2] = 2.0 * g * params.k_B * Tk / m**2
    x, cond = band.solve(rhs)
    coeffs = x.reshape(2 * N + 1, 3)
    _check_conjugate_symmetry(coeffs)
    ratio = _warn_truncation(coeffs, N)
    return SpectralSolution(UNDERDAMPED, N, coeffs, a, params, profile, cond, {"tail_ratio": ratio, "band": band})


def solve_spectral(params: EngineParams, profile: ControlProfile, N: int = DEFAULT_MODES) -> SpectralSolution:
    if params.is_overdamped:
        return solve_overdamped_spectral(params, profile, N)
    return solve_underdamped_spectral(params, profile, N)


# -- derived quantities -----------------------------------------------------------

def spectral_power(solution: SpectralSolution) -> float:
    """Mean extracted power ``-(i w / 2) (a_1 c_-1 - a_-1 c_1)`` on S11."""
    c = solution.sigma11_coeffs()
    N = solution.N
    a_m1, _, a_1 = solution.a
    w = solution.params.omega
    left, right = a_1 * c[N - 1], a_m1 * c[N + 1]
    value = -0.5j * w * (left - right)
    scale = 0.5 * w * (abs(left) + abs(right))
    if abs(value.imag) > POWER_IMAG_TOL * max(scale, abs(value.real)):
        raise NonRealPower(f"spectral power has imaginary part {value.imag:.3g} (scale {scale:.3g})")
    return float(value.real)


def reconstruct(solution: SpectralSolution, t) -> np.ndarray:
    """Evaluate the truncated Fourier series at times ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phase = np.exp(1j * solution.params.omega * np.outer(t, solution.modes))
    return np.real(phase @ solution.coeffs)


def to_trajectory(solution: SpectralSolution, n_steps: int = 10_000) -> CovarianceTrajectory:
    """Sample the reconstructed covariance on a uniform one-period grid."""
    t = np.linspace(0.0, solution.params.period, int(n_steps) + 1)
    samples = reconstruct(solution, t)
    return make_trajectory(solution.params, solution.profile, t, samples, source=f"spectral N={solution.N}")
