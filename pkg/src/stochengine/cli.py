"""Command-line entry point.

Exit status is 0 on success, 1 for invalid input and 2 when a numerical
procedure fails on valid input.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings

from . import analytic, io, sweep
from .errors import EngineError, InvalidRegime, NumericalFailure, TruncationWarning
from .model import OVERDAMPED, UNDERDAMPED, ControlProfile, load_config, parse_config
from .moments import IntegratorOptions, integrate_to_periodic_steady_state
from .montecarlo import McConfig, first_law_audit, simulate
from .spectral import DEFAULT_MODES, solve_spectral, spectral_power

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _global_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=default(None), help="JSON file of parameters (flat mapping)")
    g.add_argument("--model", choices=(OVERDAMPED, UNDERDAMPED), default=default(None))
    g.add_argument("--out", default=default(None), help="output path (default: stdout)")
    g.add_argument("--modes", type=int, default=default(DEFAULT_MODES), help="Fourier truncation N")
    g.add_argument("--seed", type=int, default=default(0), help="Monte Carlo root seed")
    g.add_argument("--timestamp", action="store_true", default=default(False), help="write a timestamp into headers")


def _control_flags(p):
    p.add_argument("--q1", type=float, help="control amplitude (default: analytic optimum)")
    p.add_argument("--phi", type=float, help="control phase (default: analytic optimum)")


def _solver_flag(p):
    p.add_argument("--solver", choices=sweep.SOLVERS, default=sweep.SPECTRAL)


def _integrator_flags(p):
    p.add_argument("--steps", type=int, default=10_000, help="RK4 steps per period")
    p.add_argument("--tol", type=float, default=1e-10, help="periodicity tolerance")
    p.add_argument("--max-cycles", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stochengine", description="Brownian heat engine solvers")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)

    sub.add_parser("analytic", parents=[common], help="closed-form optimum and efficiency (JSON)")

    p = sub.add_parser("steady", parents=[common], help="time-domain periodic covariance (CSV)")
    _control_flags(p)
    _integrator_flags(p)

    p = sub.add_parser("spectral", parents=[common], help="harmonic-balance coefficients and power (CSV)")
    _control_flags(p)

    p = sub.add_parser("sweep", parents=[common], help="power over a (q1, phi) grid (CSV)")
    p.add_argument("--q1-range", nargs=3, type=float, metavar=("MIN", "MAX", "N"))
    p.add_argument("--phi-range", nargs=3, type=float, metavar=("MIN", "MAX", "N"), default=[-math.pi, math.pi, 101])
    p.add_argument("--workers", type=int, default=1)
    _solver_flag(p)
    _integrator_flags(p)

    p = sub.add_parser("efficiency", parents=[common], help="efficiency against T1 at maximal power (CSV)")
    p.add_argument("--T1-range", nargs=3, type=float, metavar=("MIN", "MAX", "N"), default=[0.01, 0.1, 10])
    _solver_flag(p)
    _integrator_flags(p)

    p = sub.add_parser("compare", parents=[common], help="numeric vs analytic errors against eps (CSV)")
    p.add_argument("--eps", nargs="+", type=float, default=[0.2, 0.1, 0.05, 0.025])
    _solver_flag(p)
    _integrator_flags(p)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo ensemble moments (CSV)")
    _control_flags(p)
    p.add_argument("--n-traj", type=int, default=10_000)
    p.add_argument("--steps", type=int, default=2000, help="Euler-Maruyama steps per period")
    p.add_argument("--periods", type=int, default=1, help="sampled periods")
    p.add_argument("--burn-in", type=int, default=5, help="discarded periods")
    p.add_argument("--samples", type=int, default=100, help="samples per period")
    p.add_argument("--workers", type=int, default=1)
    return parser


# -- helpers -----------------------------------------------------------------------

def _run_config(args):
    if args.config:
        return load_config(args.config, model=args.model)
    return parse_config({}, model=args.model or OVERDAMPED)


def _profile(args, run):
    params = run.params
    q1 = getattr(args, "q1", None)
    phi = getattr(args, "phi", None)
    q1 = run.q1 if q1 is None else q1
    phi = run.phi if phi is None else phi
    if q1 is None or phi is None:
        opt = analytic.optimum(params)
        q1 = opt.q1_star if q1 is None else q1
        phi = opt.phi_star if phi is None else phi
    return ControlProfile.for_params(params, q1, phi)


def _integrator(args):
    return IntegratorOptions(steps_per_period=args.steps, max_cycles=args.max_cycles, steady_tol=args.tol)


def _range(values):
    lo, hi, n = values
    if n != int(n) or n < 1:
        raise _InputError("range point count must be a positive integer")
    return lo, hi, int(n)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(args, table, meta):
    cols, rows = table
    return io.render_csv(cols, rows, meta, timestamp=args.timestamp)


def _control_meta(profile):
    return {"control.q1": profile.q1, "control.phi": profile.phi}


# -- commands ------------------------------------------------------------------------

def cmd_analytic(args, run):
    report = analytic.analytic_report(run.params)
    report["version"] = f"stochengine {io.__version__}"
    report.update(run.metadata)
    return io.dumps_json(report)


def cmd_steady(args, run):
    profile = _profile(args, run)
    traj = integrate_to_periodic_steady_state(run.params, profile, _integrator(args))
    meta = io.params_meta(
        run.params, solver="time-domain", steps_per_period=traj.n_steps, cycles=traj.cycles, defect=traj.defect,
        **_control_meta(profile), **run.metadata,
    )
    return _csv(args, io.trajectory_table(traj), meta)


def cmd_spectral(args, run):
    profile = _profile(args, run)
    sol = solve_spectral(run.params, profile, args.modes)
    meta = io.params_meta(
        run.params, solver="spectral", modes=sol.N, power=spectral_power(sol), condition=sol.condition,
        tail_ratio=sol.meta["tail_ratio"], **_control_meta(profile), **run.metadata,
    )
    return _csv(args, io.spectral_table(sol), meta)


def _default_q1_range(params):
    try:
        q1 = analytic.optimum(params).q1_star
    except InvalidRegime:
        return (0.0, 1.0, 101)
    return (0.0, 2.0 * q1, 101)


def cmd_sweep(args, run):
    q1_range = _range(args.q1_range) if args.q1_range else _default_q1_range(run.params)
    grid = sweep.sweep_power(
        run.params, q1_range, _range(args.phi_range), args.solver, args.modes, _integrator(args), args.workers
    )
    meta = io.params_meta(run.params, modes=args.modes, **{f"summary.{k}": v for k, v in grid.summary().items()})
    meta.update(run.metadata)
    return _csv(args, io.sweep_table(grid), meta)


def cmd_efficiency(args, run):
    lo, hi, n = _range(args.T1_range)
    values = [lo + (hi - lo) * k / (n - 1) for k in range(n)] if n > 1 else [lo]
    points = sweep.efficiency_curve(run.params, values, args.solver, args.modes, _integrator(args))
    meta = io.params_meta(run.params, solver=args.solver, modes=args.modes, **run.metadata)
    meta["analytic_slope"] = sweep.analytic_efficiency_slope(run.params)
    try:
        meta["fitted_slope"] = sweep.fit_efficiency_slope(points)
    except ValueError:
        meta["fitted_slope"] = math.nan
    return _csv(args, io.efficiency_table(points), meta)


def cmd_compare(args, run):
    table = sweep.compare_report(run.params, args.eps, args.solver, args.modes, _integrator(args))
    meta = io.params_meta(run.params, solver=args.solver, modes=args.modes, **table.as_dict(), **run.metadata)
    return _csv(args, io.comparison_table(table), meta)


def cmd_mc(args, run):
    profile = _profile(args, run)
    cfg = McConfig(
        n_traj=args.n_traj,
        dt=run.params.period / args.steps,
        n_periods=args.periods,
        burn_in_periods=args.burn_in,
        seed=args.seed,
        samples_per_period=args.samples,
        workers=args.workers,
    )
    stats = simulate(run.params, profile, cfg)
    audit = first_law_audit(stats)
    meta = io.params_meta(run.params, seed=args.seed, steps_per_period=args.steps, burn_in_periods=args.burn_in,
                          **_control_meta(profile), **run.metadata)
    meta.update({f"summary.{k}": v for k, v in stats.summary().items()})
    meta["summary.mean_residual"] = audit.mean
    return _csv(args, io.mc_table(stats), meta)


COMMANDS = {
    "analytic": cmd_analytic,
    "steady": cmd_steady,
    "spectral": cmd_spectral,
    "sweep": cmd_sweep,
    "efficiency": cmd_efficiency,
    "compare": cmd_compare,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _run_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default", TruncationWarning)
            text = COMMANDS[args.command](args, run)
        _emit(args, text)
    except BrokenPipeError:
        sys.stderr.close()  # downstream closed the pipe; nothing left to report
        return EXIT_OK
    except NumericalFailure as exc:
        print(f"stochengine: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EngineError, ValueError, _InputError, OSError) as exc:
        print(f"stochengine: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
