"""CSV and JSON emission with a ``#`` metadata header.

Bodies are deterministic: floats use the shortest round-trip repr and no
timestamp is written unless asked for.
"""
from __future__ import annotations

import io
import json
import math
from datetime import datetime, timezone

import numpy as np

from . import __version__


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if value is None or isinstance(value, str):
        return value
    return str(value)


def dumps_json(doc: dict) -> str:
    """Stable JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def header_lines(meta: dict, timestamp: bool = False) -> list[str]:
    meta = {"version": f"stochengine {__version__}", **meta}
    if timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return [f"# {key}: {fmt(meta[key])}" for key in sorted(meta)]


def render_csv(columns, rows, meta: dict | None = None, timestamp: bool = False) -> str:
    buf = io.StringIO()
    for line in header_lines(meta or {}, timestamp):
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def csv_body(text: str) -> str:
    """Lines of a rendered CSV after the metadata header."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_csv(text: str):
    """Parse our own CSV back into ``(meta, columns, rows)`` with rows as strings."""
    meta, columns, rows = {}, None, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns, rows


# -- tables for each result type -----------------------------------------------------

def params_meta(params, **extra) -> dict:
    meta = {f"param.{k}": v for k, v in params.as_dict().items()}
    meta["model"] = params.model
    meta.update(extra)
    return meta


def trajectory_table(traj):
    if traj.model == "overdamped":
        return ["t", "Sigma"], zip(traj.t, traj.samples)
    return ["t", "S11", "S12", "S22"], ((t, *row) for t, row in zip(traj.t, traj.samples))


def spectral_table(solution):
    if solution.model == "overdamped":
        cols = ["n", "Sigma_re", "Sigma_im"]
        rows = ((n, c.real, c.imag) for n, c in zip(solution.modes, solution.coeffs))
    else:
        cols = ["n"] + [f"{name}_{part}" for name in ("S11", "S12", "S22") for part in ("re", "im")]
        rows = (
            (n, *[v for c in row for v in (c.real, c.imag)]) for n, row in zip(solution.modes, solution.coeffs)
        )
    return cols, rows


def sweep_table(grid):
    cols = ["i", "j", "q1", "phi", "power", "status", "condition"]
    ni, nj = grid.shape
    rows = (
        (i, j, grid.q1[i], grid.phi[j], grid.power[i, j], grid.status[i, j], grid.condition[i, j])
        for i in range(ni)
        for j in range(nj)
    )
    return cols, rows


def efficiency_table(points):
    cols = ["T1", "eta_numeric", "eta_analytic", "status"]
    return cols, ((p.T1, p.eta_numeric, p.eta_analytic, p.status) for p in points)


def comparison_table(table):
    cols = ["epsilon", "power_numeric", "power_analytic", "power_error", "eta_numeric", "eta_analytic", "eta_error"]
    rows = (
        (r.epsilon, r.power_numeric, r.power_analytic, r.power_error, r.eta_numeric, r.eta_analytic, r.eta_error)
        for r in table.rows
    )
    return cols, rows


def mc_table(stats):
    names = list(stats.moments)
    cols = ["t"] + [f"{prefix}_{name}" for name in names for prefix in ("mean", "se")]
    rows = (
        (t, *[v for name in names for v in (stats.moments[name][0][k], stats.moments[name][1][k])])
        for k, t in enumerate(stats.t)
    )
    return cols, rows
