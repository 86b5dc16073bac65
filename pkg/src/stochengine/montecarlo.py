"""Euler-Maruyama ensembles with per-trajectory work and heat bookkeeping.

Each trajectory ``j`` draws its noise from its own generator seeded by
``SeedSequence([seed, j])``, so results do not depend on blocking, chunking
or the order in which blocks are processed.  Trajectories are advanced in
fixed-size blocks; per-block partial sums are combined in block order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameters, Unstable
from .model import ControlProfile, EngineParams, control_at, control_rate_at, require_valid, temperature_at

BLOCK_SIZE = 4096
CHUNK_STEPS = 256
OVERFLOW_GUARD = 1e100
MIN_STEPS_PER_PERIOD = 1000


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run settings.

    ``dt=None`` means ``period / 10_000``.  The period must be an integer
    multiple of ``dt`` (to 1e-9 relative) so every period uses the same grid.
    """

    n_traj: int = 100_000
    dt: float | None = None
    n_periods: int = 1
    burn_in_periods: int = 20
    seed: int = 0
    samples_per_period: int = 100
    workers: int = 1

    def __post_init__(self):
        errors = []
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            errors.append("n_traj must be an integer >= 1")
        if self.dt is not None and not self.dt > 0:
            errors.append("dt must be positive")
        if int(self.n_periods) != self.n_periods or self.n_periods < 1:
            errors.append("n_periods must be an integer >= 1")
        if int(self.burn_in_periods) != self.burn_in_periods or self.burn_in_periods < 0:
            errors.append("burn_in_periods must be an integer >= 0")
        if not 0 <= int(self.seed) < 2**64:
            errors.append("seed must be a 64-bit unsigned integer")
        if self.samples_per_period < 1:
            errors.append("samples_per_period must be >= 1")
        if errors:
            raise InvalidParameters(errors)

    def steps_per_period(self, period: float) -> int:
        if self.dt is None:
            return 10_000
        n = period / self.dt
        steps = round(n)
        if steps < 1 or abs(n - steps) > 1e-9 * n:
            raise InvalidParameters(f"period {period:g} is not an integer multiple of dt {self.dt:g}")
        if steps < MIN_STEPS_PER_PERIOD:
            raise InvalidParameters(f"dt must be at most period/{MIN_STEPS_PER_PERIOD}, got period/{steps}")
        if steps % self.samples_per_period:
            raise InvalidParameters("steps per period must be a multiple of samples_per_period")
        return steps


@dataclass(frozen=True, eq=False)
class McEnsembleStats:
    """Ensemble moments at sample times and per-trajectory energy balances.

    ``moments`` maps a name (``x``, ``xx``, and for the underdamped model
    ``vv``, ``xv``) to ``(mean, standard_error)`` arrays over ``t``.  Times
    are measured from the start of the measurement window.
    """

    model: str
    t: np.ndarray
    moments: dict
    W: np.ndarray
    Q: np.ndarray
    dE: np.ndarray
    dt: float
    config: McConfig
    params: EngineParams
    profile: ControlProfile
    meta: dict = field(default_factory=dict)

    @property
    def n_traj(self) -> int:
        return len(self.W)

    def mean(self, name):
        return self.moments[name][0]

    def stderr(self, name):
        return self.moments[name][1]

    @property
    def residual(self) -> np.ndarray:
        """Per-trajectory first-law residual ``dE - (Q + W)``."""
        return self.dE - (self.Q + self.W)

    def summary(self) -> dict:
        n = self.n_traj
        return {
            "model": self.model,
            "n_traj": n,
            "dt": self.dt,
            "mean_W": float(np.mean(self.W)),
            "se_W": float(np.std(self.W) / math.sqrt(n)),
            "mean_Q": float(np.mean(self.Q)),
            "mean_dE": float(np.mean(self.dE)),
            "extracted_work_per_cycle": -float(np.mean(self.W)) / self.config.n_periods,
            "mean_abs_residual": float(np.mean(np.abs(self.residual))),
            "max_abs_residual": float(np.max(np.abs(self.residual))),
        }


# -- drive tables ----------------------------------------------------------------

def _step_tables(params, profile, n):
    """Per-step drive values over one period (left point, midpoint, right point)."""
    h = params.period / n
    t = np.arange(n) * h
    w = params.omega
    return {
        "q": control_at(profile, w, t),
        "q_next": control_at(profile, w, t + h),
        "q_mid": control_at(profile, w, t + 0.5 * h),
        "qdot": control_rate_at(profile, w, t),
        "T": temperature_at(params, t),
    }


class _Block:
    """State of one block of trajectories and their noise generators."""

    def __init__(self, seed, start, count):
        self.gens = [np.random.default_rng(np.random.SeedSequence([seed, j])) for j in range(start, start + count)]
        self.count = count
        # first two draws of every stream seed the initial (x, v)
        self.initial = np.array([gen.standard_normal(2) for gen in self.gens]).reshape(count, 2)
        self._buf = np.empty((count, CHUNK_STEPS))

    def noise(self, steps):
        buf = self._buf[:, :steps]
        for j, gen in enumerate(self.gens):
            gen.standard_normal(out=self._buf[j, :steps])
        return np.ascontiguousarray(buf.T)


def _guard(*arrays):
    for a in arrays:
        if not np.all(np.abs(a) < OVERFLOW_GUARD):
            raise Unstable("trajectory exceeded the overflow guard; the protocol is likely unstable")


@np.errstate(over="ignore", invalid="ignore")  # blow-ups are caught by _guard
def _run_block(params, profile, cfg, tables, n, block_index, underdamped):
    start = block_index * BLOCK_SIZE
    count = min(BLOCK_SIZE, cfg.n_traj - start)
    block = _Block(cfg.seed, start, count)
    g, kB, m = params.gamma, params.k_B, params.m
    h = params.period / n
    sqh = math.sqrt(h)
    stride = n // cfg.samples_per_period

    # static-bath stationary state
    x = block.initial[:, 0] * math.sqrt(kB * params.T0 / params.q0)
    v = block.initial[:, 1] * math.sqrt(kB * params.T0 / m) if underdamped else None

    q, qn, qm, qd, T = (tables[k] for k in ("q", "q_next", "q_mid", "qdot", "T"))
    noise_x = np.sqrt(2.0 * kB * T / g) * sqh
    if underdamped:
        noise_v = np.sqrt(2.0 * g * kB * T) / m * sqh
        noise_q = np.sqrt(2.0 * kB * T * g) * sqh

    names = ("x", "xx", "vv", "xv") if underdamped else ("x", "xx")
    n_samples = cfg.samples_per_period * cfg.n_periods
    sums = {k: np.zeros(n_samples) for k in names}
    sq_sums = {k: np.zeros(n_samples) for k in names}
    W = np.zeros(count)
    Q = np.zeros(count)

    def energy(i):
        e = 0.5 * q[i] * x * x
        if underdamped:
            e = e + 0.5 * m * v * v
        return e

    total = (cfg.burn_in_periods + cfg.n_periods) * n
    measure_from = cfg.burn_in_periods * n
    E0 = energy(0) if measure_from == 0 else None
    step = 0
    while step < total:
        steps = min(CHUNK_STEPS, total - step)
        xi = block.noise(steps)
        for k in range(steps):
            i = (step + k) % n
            z = xi[k]
            measuring = step + k >= measure_from
            if underdamped:
                x_new = x + v * h
                v_new = v + (-q[i] * x - g * v) * (h / m) + noise_v[i] * z
                if measuring:
                    W += 0.5 * qd[i] * x * x * h
                    # Ito form of the bath heat: -gamma v^2 dt + gamma k_B T/m dt + sqrt(2 k_B T gamma) v dB
                    Q += (g * kB * T[i] / m - g * v * v) * h + noise_q[i] * v * z
                x, v = x_new, v_new
            else:
                x_new = x - q[i] * x * (h / g) + noise_x[i] * z
                if measuring:
                    W += 0.5 * qd[i] * x * x * h
                    # Stratonovich heat q(t+h/2) * midpoint(x) * dx
                    Q += qm[i] * 0.5 * (x + x_new) * (x_new - x)
                x = x_new
            done = step + k + 1
            if done == measure_from:
                E0 = energy(0)
            if done > measure_from and (done - measure_from) % stride == 0:
                idx = (done - measure_from) // stride - 1
                j = done % n
                # sample at the end of this step (drive index j)
                vals = {"x": x, "xx": x * x}
                if underdamped:
                    vals["vv"] = v * v
                    vals["xv"] = x * v
                for key in names:
                    sums[key][idx] = np.sum(vals[key])
                    sq_sums[key][idx] = np.sum(vals[key] * vals[key])
        step += steps
        _guard(x, W, Q)
        if underdamped:
            _guard(v)
    dE = energy(0) - E0
    return {"sums": sums, "sq_sums": sq_sums, "W": W, "Q": Q, "dE": dE}


def _simulate(params, profile, cfg, underdamped):
    require_valid(params, underdamped=underdamped)
    n = cfg.steps_per_period(params.period)
    if underdamped and params.period / n > 0.1 * params.m / params.gamma:
        raise InvalidParameters("dt does not resolve the inertial time m/gamma (need dt <= 0.1 m/gamma)")
    tables = _step_tables(params, profile, n)
    n_blocks = -(-cfg.n_traj // BLOCK_SIZE)
    jobs = range(n_blocks)
    run = lambda b: _run_block(params, profile, cfg, tables, n, b, underdamped)  # noqa: E731
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(b) for b in jobs]

    N = cfg.n_traj
    moments = {}
    for key in parts[0]["sums"]:
        s = np.sum([p["sums"][key] for p in parts], axis=0)
        s2 = np.sum([p["sq_sums"][key] for p in parts], axis=0)
        mean = s / N
        var = np.maximum(s2 / N - mean * mean, 0.0)
        se = np.sqrt(var / max(N - 1, 1)) if N > 1 else np.full_like(mean, np.nan)
        moments[key] = (mean, se)
    n_samples = cfg.samples_per_period * cfg.n_periods
    t = (np.arange(n_samples) + 1) * (params.period / cfg.samples_per_period)
    return McEnsembleStats(
        model=params.model,
        t=t,
        moments=moments,
        W=np.concatenate([p["W"] for p in parts]),
        Q=np.concatenate([p["Q"] for p in parts]),
        dE=np.concatenate([p["dE"] for p in parts]),
        dt=params.period / n,
        config=cfg,
        params=params,
        profile=profile,
    )


def simulate_overdamped(params: EngineParams, profile: ControlProfile, cfg: McConfig | None = None) -> McEnsembleStats:
    """Overdamped ensemble ``dX = -(q X / gamma) dt + sqrt(2 k_B T / gamma) dB``."""
    return _simulate(params, profile, cfg or McConfig(), underdamped=False)


def simulate_underdamped(params: EngineParams, profile: ControlProfile, cfg: McConfig | None = None) -> McEnsembleStats:
    """Underdamped ensemble on (X, v) with Ito bath heat accounting."""
    return _simulate(params, profile, cfg or McConfig(), underdamped=True)


def simulate(params: EngineParams, profile: ControlProfile, cfg: McConfig | None = None) -> McEnsembleStats:
    if params.is_overdamped:
        return simulate_overdamped(params, profile, cfg)
    return simulate_underdamped(params, profile, cfg)


@dataclass(frozen=True)
class FirstLawAudit:
    mean: float
    mean_abs: float
    max_abs: float
    slope: float | None = None
    ratio: float | None = None

    def as_dict(self):
        return asdict(self)


def first_law_audit(stats: McEnsembleStats, coarse: McEnsembleStats | None = None) -> FirstLawAudit:
    """Summarise ``dE - (Q + W)`` per trajectory.

    With a second run ``coarse`` at a different ``dt`` the log-log slope of
    the mean absolute residual against ``dt`` is fitted from the two points.
    """
    r = stats.residual
    mean_abs = float(np.mean(np.abs(r)))
    slope = ratio = None
    if coarse is not None:
        other = float(np.mean(np.abs(coarse.residual)))
        ratio = mean_abs / other
        slope = math.log(ratio) / math.log(stats.dt / coarse.dt)
    return FirstLawAudit(float(np.mean(r)), mean_abs, float(np.max(np.abs(r))), slope, ratio)
