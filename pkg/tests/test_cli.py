import json
import math
from pathlib import Path

import numpy as np
import pytest

import oracles
from stochengine.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from stochengine.io import csv_body, read_csv

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out.read_text() if out.exists() else None


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestCommands:
    def test_analytic(self, tmp_path):
        code, text = run(tmp_path, "analytic", name="a.json")
        assert code == EXIT_OK
        report = json.loads(text)
        assert report["q1_star"] == pytest.approx(math.sqrt(2) / 4)
        assert report["power"] == 0.03125

    def test_analytic_underdamped_flags_mass(self, tmp_path):
        code, text = run(tmp_path, "--model", "underdamped", "analytic", name="a.json")
        report = json.loads(text)
        assert report["m_defaulted"] is True and report["alpha"] == 28.0

    def test_steady(self, tmp_path):
        cfg = write_config(tmp_path, {"epsilon": 0.1, "m": 1.0, "q0": 10.0})
        code, text = run(tmp_path, "steady", "--config", cfg, "--steps", "1000", "--tol", "1e-9")
        meta, cols, rows = read_csv(text)
        assert code == EXIT_OK
        assert cols == ["t", "S11", "S12", "S22"] and len(rows) == 1001
        assert meta["param.epsilon"] == "0.1" and meta["model"] == "underdamped"

    def test_spectral_golden(self, tmp_path):
        code, text = run(tmp_path, "spectral", "--modes", "4")
        assert code == EXIT_OK
        golden = (GOLDEN / "spectral_overdamped_N4.csv").read_text()
        _, cols, rows = read_csv(text)
        _, gcols, grows = read_csv(golden)
        assert cols == gcols
        assert np.allclose(np.array(rows, float), np.array(grows, float), rtol=1e-12, atol=1e-15)
        # golden values are the dense Kronecker-form balance at the same truncation
        ref = oracles.dense_balance(0, 1, 1, 2, 1, 0.5, 1, 1.0, math.sqrt(2) / 4, -math.pi / 4, 4)[:, 0]
        g = np.array(grows, float)
        assert np.allclose(g[:, 1] + 1j * g[:, 2], ref, atol=1e-14)

    def test_efficiency_golden(self, tmp_path):
        code, text = run(tmp_path, "--model", "underdamped", "efficiency", "--T1-range", "0.01", "0.1", "4", "--modes", "40")
        assert code == EXIT_OK
        meta, cols, rows = read_csv(text)
        gmeta, gcols, grows = read_csv((GOLDEN / "efficiency_underdamped.csv").read_text())
        assert cols == gcols and [r[-1] for r in rows] == [r[-1] for r in grows]
        assert np.allclose(np.array(rows)[:, :3].astype(float), np.array(grows)[:, :3].astype(float), rtol=1e-10)
        assert float(meta["fitted_slope"]) == pytest.approx(float(meta["analytic_slope"]), rel=0.02)

    def test_sweep_rows(self, tmp_path):
        code, text = run(tmp_path, "sweep", "--q1-range", "0", "0.8", "5", "--phi-range", "-3", "3", "6")
        _, cols, rows = read_csv(text)
        assert code == EXIT_OK
        assert cols[:6] == ["i", "j", "q1", "phi", "power", "status"]
        assert len(rows) == 30 and {r[5] for r in rows} == {"ok"}

    def test_compare(self, tmp_path):
        code, text = run(tmp_path, "compare", "--eps", "0.2", "0.1", "0.05")
        meta, _, rows = read_csv(text)
        assert code == EXIT_OK and len(rows) == 3
        assert float(meta["power_slope"]) > 2.7

    def test_mc(self, tmp_path):
        code, text = run(tmp_path, "mc", "--n-traj", "200", "--steps", "1000", "--burn-in", "1", "--samples", "10", "--seed", "7")
        meta, cols, rows = read_csv(text)
        assert code == EXIT_OK
        assert cols == ["t", "mean_x", "se_x", "mean_xx", "se_xx"] and len(rows) == 10
        assert meta["seed"] == "7" and "summary.mean_W" in meta

    def test_global_flags_before_or_after(self, tmp_path):
        _, a = run(tmp_path, "--modes", "8", "spectral", name="a.csv")
        _, b = run(tmp_path, "spectral", "--modes", "8", name="b.csv")
        assert a == b and "# modes: 8" in a


class TestReproducibility:
    @pytest.mark.parametrize(
        "argv",
        [
            ["spectral", "--modes", "16"],
            ["steady", "--steps", "500", "--tol", "1e-8"],
            ["sweep", "--q1-range", "0", "1", "3", "--phi-range", "-1", "1", "3"],
            ["mc", "--n-traj", "50", "--steps", "1000", "--burn-in", "0", "--samples", "5"],
        ],
    )
    def test_byte_identical_reruns(self, tmp_path, argv):
        _, a = run(tmp_path, *argv, name="a.csv")
        _, b = run(tmp_path, *argv, name="b.csv")
        assert a == b

    def test_timestamp_only_in_header(self, tmp_path):
        _, a = run(tmp_path, "spectral", "--modes", "6", name="a.csv")
        _, b = run(tmp_path, "spectral", "--modes", "6", "--timestamp", name="b.csv")
        assert "timestamp" not in a and "# timestamp:" in b
        assert csv_body(a) == csv_body(b)

    def test_seed_changes_mc(self, tmp_path):
        argv = ["mc", "--n-traj", "50", "--steps", "1000", "--burn-in", "0", "--samples", "5"]
        _, a = run(tmp_path, *argv, "--seed", "1", name="a.csv")
        _, b = run(tmp_path, *argv, "--seed", "2", name="b.csv")
        assert csv_body(a) != csv_body(b)


class TestExitCodes:
    def test_unknown_config_key(self, tmp_path):
        cfg = write_config(tmp_path, {"mass": 1.0})
        assert run(tmp_path, "analytic", "--config", cfg)[0] == EXIT_INPUT

    def test_invalid_parameters(self, tmp_path):
        cfg = write_config(tmp_path, {"T1": 3.0})
        assert run(tmp_path, "spectral", "--config", cfg)[0] == EXIT_INPUT

    def test_bad_arguments(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["sweep", "--q1-range", "0", "1"])
        assert info.value.code == EXIT_INPUT

    def test_missing_config_file(self, tmp_path):
        assert run(tmp_path, "analytic", "--config", str(tmp_path / "nope.json"))[0] == EXIT_INPUT

    def test_numerical_failure(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"m": 1.0, "gamma": 0.2, "q0": 1.0, "q1": 1.0, "phi": 0.3})
        code, _ = run(tmp_path, "steady", "--config", cfg, "--steps", "1000", "--tol", "1e-8")
        assert code == EXIT_NUMERIC
        assert "numerical failure" in capsys.readouterr().err

    def test_singular_balance(self, tmp_path):
        cfg = write_config(tmp_path, {"m": 1.0, "gamma": 1e-16, "q0": 1.0, "q1": 0.0, "phi": 0.0})
        assert run(tmp_path, "spectral", "--config", cfg)[0] == EXIT_NUMERIC
