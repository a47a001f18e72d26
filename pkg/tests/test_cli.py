import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

import oracles
from nifeedback.cli import EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, main

MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
CHECKS = {
    "type": "object",
    "required": ["verdict", "checks"],
    "properties": {
        "verdict": {"enum": ["pass", "fail"]},
        "checks": {"type": "array", "items": {"type": "object", "required": ["name", "value", "threshold", "passed"]}},
    },
}
MODEL = {"type": "object", "required": ["A", "B", "C", "D"], "properties": {k: MATRIX for k in "ABCD"}}

ANALYZE_SCHEMA = {
    "type": "object",
    "required": ["command", "eligible", "reason", "relative_degree", "controllable", "zero_dynamics_eigenvalues"],
    "properties": {
        "command": {"const": "analyze"},
        "eligible": {"type": "boolean"},
        "reason": {"type": ["string", "null"]},
        "relative_degree": {"type": ["integer", "null"]},
        "zero_dynamics_eigenvalues": {"type": "array"},
    },
}
SYNTH_SCHEMA = {
    "type": "object",
    "required": ["command", "mode", "gains_normal_form", "scb_gain", "Kx", "certificate", "closed_loop",
                 "dc_gain", "transfer_function", "verification", "frequency_verification"],
    "properties": {
        "command": {"const": "synthesize"},
        "mode": {"enum": ["ni", "ssni"]},
        "gains_normal_form": {"type": "object", "additionalProperties": MATRIX},
        "scb_gain": MATRIX,
        "Kx": MATRIX,
        "certificate": MATRIX,
        "closed_loop": MODEL,
        "dc_gain": MATRIX,
        "verification": CHECKS,
        "frequency_verification": CHECKS,
    },
}
VERIFY_SCHEMA = {
    "type": "object",
    "required": ["command", "mode", "certificate", "frequency", "verdict"],
    "properties": {
        "certificate": {"anyOf": [{"type": "null"}, CHECKS]},
        "frequency": CHECKS,
        "verdict": {"enum": ["pass", "fail"]},
    },
}
ROBUST_SCHEMA = {
    "type": "object",
    "required": ["command", "gamma", "Y2", "R0", "lambda_max_R0", "bound", "scb_gain", "interconnection"],
    "properties": {
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "interconnection": {
            "anyOf": [
                {"type": "null"},
                {"type": "object", "required": ["loop_dc_gain", "eigenvalues", "hurwitz"],
                 "properties": {"hurwitz": {"type": "boolean"}}},
            ]
        },
    },
}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv)
    return code, json.loads(out) if out.strip() else None, err


@pytest.fixture
def example(systems_dir):
    return systems_dir / "three_chain.json"


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return path


class TestAnalyze:
    def test_example(self, example):
        code, rep, _ = run_json("analyze", example)
        jsonschema.validate(rep, ANALYZE_SCHEMA)
        assert code == EXIT_OK and rep["eligible"] and rep["relative_degree"] == 2
        assert rep["zero_dynamics_eigenvalues"][0]["re"] == pytest.approx(-1.0)

    def test_ineligible(self, tmp_path):
        path = write(tmp_path, "bad.json", {"A": [[1, 1], [1, -1]], "B": [[0], [1]], "C": [[0, 1]]})
        code, rep, _ = run_json("analyze", path)
        jsonschema.validate(rep, ANALYZE_SCHEMA)
        assert code == EXIT_NEGATIVE and rep["reason"] == "not-weakly-minimum-phase"

    def test_malformed_row(self, tmp_path):
        path = write(tmp_path, "bad.json", {"A": [[1, 0], [0]], "B": [[0], [1]], "C": [[0, 1]]})
        code, _, err = run("analyze", path)
        assert code == EXIT_INPUT and "error" in err

    def test_invalid_json(self, tmp_path):
        assert run("analyze", write(tmp_path, "x.json", "{nope"))[0] == EXIT_INPUT

    def test_missing_file(self, tmp_path):
        assert run("analyze", tmp_path / "missing.json")[0] == EXIT_INPUT


class TestSynthesize:
    def test_example(self, example):
        code, rep, _ = run_json("synthesize", example)
        jsonschema.validate(rep, SYNTH_SCHEMA)
        assert code == EXIT_OK
        assert rep["gains_normal_form"] == {"K1": [[1.0]], "K2": [[-3.0]], "K3": [[-1.0]]}
        assert np.allclose(rep["scb_gain"], [oracles.EXAMPLE_SCB_LAW])
        assert np.allclose(rep["transfer_function"]["numerator"], oracles.EXAMPLE_NUM, atol=1e-12)
        assert np.allclose(rep["transfer_function"]["denominator"], oracles.EXAMPLE_DEN, atol=1e-12)
        assert rep["dc_gain"] == [[pytest.approx(0.5)]]

    def test_ssni_refused(self, example):
        code, rep, _ = run_json("synthesize", example, "--ssni")
        assert code == EXIT_NEGATIVE and rep["refused"] is True
        assert rep["reason"] == "relative-degree-two-cannot-be-ssni"

    def test_ssni_rd1(self, tmp_path):
        path = write(tmp_path, "rd1.json", {"A": [[-1, 1], [1, -1]], "B": [[0], [1]], "C": [[0, 1]]})
        code, rep, _ = run_json("synthesize", path, "--ssni")
        jsonschema.validate(rep, SYNTH_SCHEMA)
        assert code == EXIT_OK and rep["mode"] == "ssni"

    def test_overrides(self, example):
        code, rep, _ = run_json("synthesize", example, "--y2", "0.25", "--k3", "-2")
        assert code == EXIT_OK
        assert rep["dc_gain"] == [[pytest.approx(0.25)]]
        assert rep["gains_normal_form"]["K3"] == [[-2.0]]

    def test_bad_override(self, example):
        assert run("synthesize", example, "--y2", "abc")[0] == EXIT_INPUT
        assert run("synthesize", example, "--y2", "-1")[0] == EXIT_INPUT

    def test_unknown_option_key(self, tmp_path):
        doc = {"A": [[-1, 1], [1, -1]], "B": [[0], [1]], "C": [[0, 1]], "options": {"colour": 1}}
        assert run("synthesize", write(tmp_path, "o.json", doc))[0] == EXIT_INPUT

    def test_round_trip(self, example, tmp_path):
        out = tmp_path / "report.json"
        assert run("synthesize", example, "--out", out)[0] == EXIT_OK
        code, rep, _ = run_json("verify", out)
        jsonschema.validate(rep, VERIFY_SCHEMA)
        assert code == EXIT_OK and rep["verdict"] == "pass"
        assert rep["certificate"]["verdict"] == "pass"


class TestVerify:
    def test_lead_fails(self, systems_dir):
        code, rep, _ = run_json("verify", systems_dir / "pr_lead.json")
        jsonschema.validate(rep, VERIFY_SCHEMA)
        assert code == EXIT_NEGATIVE and rep["certificate"] is None

    def test_lag_with_certificate(self, systems_dir, tmp_path):
        cert = write(tmp_path, "y.json", {"Y": [[1 / 0.9]]})
        code, rep, _ = run_json("verify", systems_dir / "delta_lag.json", cert, "--ssni")
        assert code == EXIT_OK and rep["certificate"]["verdict"] == "pass"

    def test_certificate_shape(self, systems_dir, tmp_path):
        cert = write(tmp_path, "y.json", {"Y": [[1, 0], [0, 1]]})
        assert run("verify", systems_dir / "delta_lag.json", cert)[0] == EXIT_INPUT

    def test_grid_flags(self, systems_dir):
        code, rep, _ = run_json("verify", systems_dir / "delta_lag.json", "--freq-lo", "1", "--freq-hi", "10", "--points", "3")
        assert code == EXIT_OK
        assert run("verify", systems_dir / "delta_lag.json", "--freq-lo", "0")[0] == EXIT_INPUT


class TestRobust:
    def test_example(self, example, systems_dir):
        code, rep, _ = run_json("robust", example, "--delta", systems_dir / "delta_lag.json", "--simulate")
        jsonschema.validate(rep, ROBUST_SCHEMA)
        assert code == EXIT_OK
        assert rep["interconnection"]["loop_dc_gain"] == pytest.approx(0.45)
        assert rep["interconnection"]["hurwitz"] is True
        assert not rep["simulation"]["diverged"]
        assert rep["simulation"]["final_norm"] < 1e-2

    def test_unstable_loop(self, example, tmp_path):
        delta = write(tmp_path, "d.json", {"A": [[-1]], "B": [[1]], "C": [[3]]})
        code, rep, _ = run_json("robust", example, "--delta", delta)
        assert code == EXIT_NEGATIVE and rep["interconnection"]["hurwitz"] is False

    def test_sampled_delta_is_seeded(self, example):
        _, a, _ = run_json("robust", example, "--delta", "sample:42")
        _, b, _ = run_json("robust", example, "--delta", "sample:42")
        assert a["delta"] == b["delta"]
        assert a["delta"]["seed"] == 42

    @pytest.mark.parametrize("gamma", ["0", "-1", "nan"])
    def test_bad_gamma(self, example, gamma):
        assert run("robust", example, "--gamma", gamma)[0] == EXIT_INPUT

    def test_y2_violating_bound(self, example):
        assert run("robust", example, "--gamma", "2", "--y2", "1")[0] == EXIT_INPUT

    def test_trajectory_csv(self, example, systems_dir, tmp_path):
        traj = tmp_path / "traj.csv"
        run("robust", example, "--delta", systems_dir / "delta_lag.json", "--simulate", "--horizon", "1",
            "--trajectory-out", traj)
        rows = list(csv.reader(traj.open()))
        assert rows[0] == ["t", "x0", "x1", "x2", "x3"]
        assert float(rows[1][1]) == 1.0


class TestBode:
    def test_static_gain(self, tmp_path):
        path = write(tmp_path, "d.json", {"A": [], "B": [], "C": [], "D": [[2]]})
        code, out, _ = run("bode", path, "--points", "5")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == EXIT_OK
        assert rows[0] == ["omega_rad_s", "magnitude_db_1_1", "phase_deg_1_1"]
        assert all(float(r[1]) == pytest.approx(6.0206, abs=1e-4) for r in rows[1:])

    def test_single_point(self, systems_dir):
        code, out, _ = run("bode", systems_dir / "delta_lag.json", "--points", "1", "--freq-lo", "1", "--freq-hi", "1")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == EXIT_OK and len(rows) == 2
        assert float(rows[1][2]) == pytest.approx(-45.0)

    def test_closed_loop_phase_band(self, example, tmp_path):
        out = tmp_path / "r.json"
        run("synthesize", example, "--out", out)
        code, text, _ = run("bode", out)
        rows = list(csv.reader(io.StringIO(text)))[1:]
        assert code == EXIT_OK and len(rows) == 400
        assert all(-180.0 - 1e-9 <= float(r[2]) <= 1e-9 for r in rows)


def test_module_entry_point(example):
    proc = subprocess.run([sys.executable, "-m", "nifeedback", "analyze", str(example)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["eligible"]


def test_no_command():
    assert run()[0] == EXIT_INPUT
