import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from jostscat import cli


def spec_file(tmp_path, family, params, grid=None, name="v.json"):
    body = {"family": family, "params": params}
    if grid:
        body["grid"] = grid
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.mark.parametrize("value, text", [
    (1.0, "1.0"), (0.1, "0.10000000000000001"), (3, "3"), (np.float64(-2.5), "-2.5"),
    (float("nan"), "nan"), (True, "true")])
def test_number_formatting(value, text):
    assert cli.fmt(value) == text


@pytest.mark.parametrize("value", [1e-20, np.pi, -7.25e300, 2.0 ** -1074])
def test_formatted_floats_round_trip(value):
    assert float(cli.fmt(value)) == value


def test_json_serializer_keeps_order_and_maps_complex():
    text = cli.to_json_text({"b": 1.0, "a": [1 + 2j, None, float("inf")], "c": "x"})
    assert list(json.loads(text)) == ["b", "a", "c"]
    assert json.loads(text)["a"] == [[1.0, 2.0], None, None]


def test_coeffs_for_reflectionless_well(tmp_path):
    spec = spec_file(tmp_path, "poschl_teller", {"s": 1})
    assert cli.run(["coeffs", "--potential", spec, "--out", str(tmp_path), "--nk", "16"]) == 0
    path = tmp_path / "coefficients.csv"
    assert b"\r\n" not in path.read_bytes()
    header, data = read_csv(path)
    assert header[0] == "k" and header[-1] == "unitarity_defect"
    assert data.shape == (16, 8)
    assert np.max(data[:, -1]) < 1e-8
    assert np.max(np.abs(data[:, 3:7])) < 1e-6


def test_outputs_are_deterministic(tmp_path):
    spec = spec_file(tmp_path, "gaussian", {"amplitude": 0.3, "width": 1.0})
    for sub in ("a", "b"):
        assert cli.run(["coeffs", "--potential", spec, "--out", str(tmp_path / sub),
                        "--nk", "8"]) == 0
    assert (tmp_path / "a" / "coefficients.csv").read_bytes() == \
        (tmp_path / "b" / "coefficients.csv").read_bytes()


def test_classify_free_line(tmp_path):
    spec = spec_file(tmp_path, "zero", {})
    assert cli.run(["classify", "--potential", spec, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "classification.json").read_text())
    assert report["classification"] == "exceptional" and report["a"] == 1.0


def test_bound_states_csv(tmp_path):
    spec = spec_file(tmp_path, "poschl_teller", {"s": 1})
    assert cli.run(["bound-states", "--potential", spec, "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "bound_states.csv")
    assert header == ["index", "beta", "energy", "norm_residual", "eigen_residual"]
    assert abs(data[0, 1] - 1.0) < 1e-6


def test_kernel_and_decay_on_free_line(tmp_path):
    spec = spec_file(tmp_path, "zero", {}, grid={"x_max": 20.0, "n": 256})
    assert cli.run(["kernel", "--potential", spec, "--out", str(tmp_path), "--t", "1"]) == 0
    summary = json.loads((tmp_path / "kernel_summary.json").read_text())
    assert abs(summary["scaled_sup"] - 1 / np.sqrt(4 * np.pi)) < 1e-6
    assert cli.run(["decay", "--potential", spec, "--out", str(tmp_path),
                    "--times", "0.5,1,2"]) == 0
    _, data = read_csv(tmp_path / "decay.csv")
    assert np.allclose(data[:, 2], 1 / np.sqrt(4 * np.pi), rtol=1e-6)


def test_evolution_commands(tmp_path):
    spec = spec_file(tmp_path, "poschl_teller", {"amplitude": 0.5}, grid={"x_max": 20.0, "n": 256})
    assert cli.run(["evolve-linear", "--potential", spec, "--out", str(tmp_path / "lin"),
                    "--times", "0,1,2", "--dump"]) == 0
    _, lin = read_csv(tmp_path / "lin" / "trajectory.csv")
    assert np.ptp(lin[:, 1]) < 1e-10
    assert (tmp_path / "lin" / "field_t1.0.csv").exists()
    assert cli.run(["evolve-nls", "--potential", spec, "--out", str(tmp_path / "nls"),
                    "--t", "0.5", "--dt", "0.01", "--record-every", "10", "--lambda", "0.1"]) == 0
    header, traj = read_csv(tmp_path / "nls" / "trajectory.csv")
    assert header == ["t", "mass", "energy", "sup_abs"]
    # the stored initial field still carries its zero-momentum cell
    assert traj.shape[0] == 6 and np.ptp(traj[1:, 1]) < 1e-10


def test_missing_potential_is_a_config_error(tmp_path, capsys):
    code = cli.run(["classify", "--potential", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    report = json.loads((tmp_path / "error.json").read_text())
    assert report["error"] == "config" and report["exit_code"] == 2
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["frobnicate"], ["kernel"], ["decay"], ["smatrix"]])
def test_bad_invocations_exit_with_config_code(tmp_path, argv):
    spec = spec_file(tmp_path, "zero", {})
    extra = [] if argv == ["frobnicate"] else ["--potential", spec]
    assert cli.run(argv + extra + ["--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_invalid_parameters_exit_with_config_code(tmp_path):
    spec = spec_file(tmp_path, "gaussian", {"amplitude": 0.3, "width": -1.0})
    assert cli.run(["coeffs", "--potential", spec, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_bound_states_block_scattering_commands(tmp_path):
    spec = spec_file(tmp_path, "poschl_teller", {"s": 1}, grid={"x_max": 20.0, "n": 256})
    code = cli.run(["recover-lambda", "--potential", spec, "--out", str(tmp_path),
                    "--true-lambda", "0.05", "--grid-n", "256", "--grid-xmax", "20"])
    assert code == cli.EXIT_HYPOTHESIS
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "hypothesis"


def test_unresolvable_time_is_a_numerical_error(tmp_path):
    spec = spec_file(tmp_path, "zero", {}, grid={"x_max": 20.0, "n": 256})
    assert cli.run(["kernel", "--potential", spec, "--out", str(tmp_path),
                    "--t", "0.01"]) == cli.EXIT_NUMERICAL


def test_help_exits_cleanly():
    assert cli.run(["--help"]) == 0


def test_verify_suite_as_a_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "jostscat.cli", "verify", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and len(report["checks"]) > 20
