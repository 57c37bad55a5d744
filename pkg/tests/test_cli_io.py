import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hsann import cli_io
from hsann.errors import CheckpointError, ConfigError
from hsann.harmonics import SurfaceCoeffs
from hsann.params import ProblemParams


def run(argv, capsys):
    code = cli_io.run_cli(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_config_defaults_and_derived_radius():
    cfg = cli_io.parse_config("")
    assert (cfg.n, cfg.gamma, cfg.mu, cfg.R, cfg.k_max, cfg.n_theta) == (2, 1.0, 0.5, 1.0, 32, 256)
    assert (cfg.newton_tol, cfg.stat_tol, cfg.step_tol, cfg.over_collocation) == (1e-10, 1e-9, 1e-8, 2.0)
    cfg = cli_io.parse_config("gamma = 1\nmu = 0.5\nR = 1")
    assert cfg.K == 0.5


def test_config_errors_name_key_and_line():
    with pytest.raises(ConfigError, match="mu must be < gamma"):
        cli_io.parse_config("mu = 2\ngamma = 1")
    with pytest.raises(ConfigError, match=r"line 2: unknown key 'colour'"):
        cli_io.parse_config("# comment\ncolour = red")
    with pytest.raises(ConfigError, match="line 1: bad value for 'k_max'"):
        cli_io.parse_config("k_max = lots")
    with pytest.raises(ConfigError, match="n_theta"):
        cli_io.parse_config("k_max = 64\nn_theta = 100")
    with pytest.raises(ConfigError, match="line 3: step_tol"):
        cli_io.parse_config("gamma = 2\n\nstep_tol = -1")


def test_initial_state_from_modes_and_seed():
    cfg = cli_io.parse_config("k_max = 8\nn_theta = 64\ninit = 2 1 1e-3; 3 2 -5e-4  # two modes")
    rho = cfg.initial_state()
    assert rho[(2, 1)] == 1e-3 and rho[(3, 2)] == -5e-4
    a = cli_io.parse_config("k_max = 8\nn_theta = 64\nseed = 4\nrandom_amplitude = 0.01").initial_state()
    b = cli_io.parse_config("k_max = 8\nn_theta = 64\nseed = 4\nrandom_amplitude = 0.01").initial_state()
    assert a == b
    assert not np.any(a.coeffs[:3]) and np.any(a.coeffs[3:])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=9, max_size=9))
def test_checkpoint_roundtrip_is_exact(values):
    rho = SurfaceCoeffs(4, values)
    p = ProblemParams(k_max=4, n_theta=32, gamma=1 / 3, mu=0.1)
    text = cli_io.format_checkpoint(rho, p)
    back, meta = cli_io.parse_checkpoint(text)
    assert np.array_equal(back.coeffs, rho.coeffs)
    assert cli_io.format_checkpoint(back, p) == text
    assert meta["gamma"] == 1 / 3 and meta["k_max"] == 4


def test_checkpoint_file_roundtrip(tmp_path):
    rho = SurfaceCoeffs(3, [math.pi, 1e-300, -0.1, 2 / 3, 0, 5e-17, -1])
    p = ProblemParams(k_max=3, n_theta=16)
    path = cli_io.write_checkpoint(tmp_path / "c.hsann", rho, p)
    text = path.read_text()
    assert text.splitlines()[0] == "HSANN v1"
    assert "3.1415926535897931e+00" in text
    back, _ = cli_io.read_checkpoint(path)
    assert back == rho


@pytest.mark.parametrize("text,line", [
    ("HSANN v0\n", 1),
    ("HSANN v1\nparams n=2 k_max=2\n0 1 1.0\n1 1 zz\n", 4),
    ("HSANN v1\nparams n=2 k_max=2\n3 1 1.0\n", 3),
    ("HSANN v1\nparams n=2 k_max=2\n1 1 1.0\n1 1 2.0\n", 4),
])
def test_malformed_checkpoint_reports_line(text, line):
    with pytest.raises(CheckpointError, match=f"line {line}:"):
        cli_io.parse_checkpoint(text)


def test_spectrum_command(capsys):
    code, out, _ = run(["spectrum", "--n", "2", "--gamma", "1", "--mu", "0.5", "--R", "1", "--kmax", "8"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 9
    assert_allclose(float(rows[2]["mu_k"]), -90 / 17, rtol=1e-15)
    assert_allclose(float(rows[2]["mu_assembled"]), -90 / 17, rtol=1e-14)


def test_toy_commands(capsys, tmp_path):
    code, out, _ = run(["toy", "planar", "--x0", "3", "--y0", "4", "--t", "0.6931471805599453"], capsys)
    assert code == 0 and out.strip() == "(3, 2)"
    code, out, _ = run(["toy", "heat", "--profile", "linear", "--M", "32", "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads((tmp_path / "heat_report.json").read_text())
    assert report["limit_error"] < 1e-8
    assert (tmp_path / "heat.csv").read_text().startswith("x,u0,uT\n")


def test_simulate_from_rest(capsys, tmp_path):
    code, out, _ = run(["simulate", "--kmax", "8", "--out", str(tmp_path)], capsys)
    assert code == 0
    with open(tmp_path / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ("t", "volume", "centroid_x", "centroid_y", "c_x", "c_y",
                              "field_residual", "E_k0", "E_k1", "E_high")
    assert len(rows) == 2
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["termination"] == "stationary"
    assert {"config", "versions", "wall_time_s"} <= set(manifest)
    assert cli_io.read_checkpoint(tmp_path / "final.hsann")[0].k_max == 8


def test_simulate_outputs_are_deterministic(capsys, tmp_path):
    args = ["simulate", "--kmax", "8", "--init", "2 1 1e-3; 3 1 5e-4", "--t-max", "0.3"]
    for name in ("a", "b"):
        assert run(args + ["--out", str(tmp_path / name)], capsys)[0] == 0
    for fname in ("trajectory.csv", "coefficients.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()
    with open(tmp_path / "a" / "coefficients.csv") as fh:
        coeff_rows = list(csv.reader(fh))
    with open(tmp_path / "a" / "trajectory.csv") as fh:
        traj_rows = list(csv.reader(fh))
    assert len(coeff_rows) == len(traj_rows) > 2
    assert coeff_rows[0][:4] == ["t", "k0_l1", "k1_l1", "k1_l2"]
    term = json.loads((tmp_path / "a" / "manifest.json").read_text())["termination"]
    assert term in ("stationary", "t_max") or term.startswith("error:")


def test_sweep_runs_each_config(capsys, tmp_path):
    paths = []
    for i, amp in enumerate((1e-3, 2e-3)):
        path = tmp_path / f"run{i}.cfg"
        path.write_text(f"k_max = 6\nn_theta = 64\ninit = 2 1 {amp}\nt_max = 0.2\n")
        paths.append(str(path))
    code, out, _ = run(["simulate", "--sweep", *paths, "--workers", "2", "--out", str(tmp_path / "sw")], capsys)
    assert code == 0
    for i in range(2):
        assert (tmp_path / "sw" / f"run{i}" / "trajectory.csv").exists()


def test_inner_limit_and_manifold_commands(capsys, tmp_path):
    code, out, _ = run(["inner", "--kmax", "6", "--init", "2 1 1e-3"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["residual_norm"] <= 1e-10 and len(data["c"]) == 2
    code, out, _ = run(["limit", "--kmax", "6"], capsys)
    assert code == 0 and json.loads(out)["outer"]["radius"] == 1.0
    target = tmp_path / "sm.hsann"
    code, _, _ = run(["stable-manifold", "--kmax", "6", "--radius", "1.1", "--out", str(target)], capsys)
    assert code == 0
    assert_allclose(cli_io.read_checkpoint(target)[0][(0, 1)], 0.1, rtol=1e-14)
    code, out, _ = run(["invariance", "--kmax", "6", "--z", "0", "0", "--lam", "1", "--T", "0.1"], capsys)
    assert code == 0 and json.loads(out)["passed"]


def test_exit_codes(capsys, tmp_path):
    assert run([], capsys)[0] == 1
    assert run(["bogus"], capsys)[0] == 1
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mu = 2\ngamma = 1\n")
    code, _, err = run(["spectrum", "--config", str(cfg)], capsys)
    assert code == 1 and "mu must be < gamma" in err
    code, _, err = run(["inner", "--kmax", "6", "--init", "0 1 -0.6"], capsys)
    assert code == 2 and "inner-solve-failed" in err
