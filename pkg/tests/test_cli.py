import json
import math

import pytest

from supercrit import cli
from supercrit.fowler import IntegrationError
from supercrit.persist import CACHE_ENV


@pytest.fixture
def run(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "cache"))

    def _run(*args):
        code = cli.main([str(a) for a in args])
        out = capsys.readouterr()
        return code, out.out, out.err

    return _run


def test_exponents(run):
    code, out, _ = run("exponents", "--n", 6, "--p", 3)
    assert code == 0
    assert "1.73205080757" in out and "mode1_ok" in out


def test_exponents_domain_error(run):
    code, _, err = run("exponents", "--n", 6, "--p", 1.5)
    assert code == 2
    assert "subcritical/critical regime unsupported" in err


def test_exponents_above_jl(run):
    code, out, _ = run("exponents", "--n", 11, "--p", 7)
    assert code == 0
    assert "4.33333333333" in out and "above_joseph_lundgren" in out


def test_ground_state_cache(run, tmp_path):
    code, out, _ = run("ground-state", "--n", 6, "--p", 3, "--out", tmp_path / "a")
    assert code == 0
    L = float(out.split("L_measured=")[1].split()[0])
    assert abs(L - math.sqrt(3)) <= 0.01 * math.sqrt(3)
    assert list((tmp_path / "cache").glob("gs-*.npz"))
    code, _, _ = run("ground-state", "--n", 6, "--p", 3, "--out", tmp_path / "b")
    first = (tmp_path / "a" / "ground_state.csv").read_bytes()
    assert first == (tmp_path / "b" / "ground_state.csv").read_bytes()
    assert first.startswith(b"s,r,value,derivative\n")


def test_cache_flag_beats_env(run, tmp_path):
    run("ground-state", "--n", 6, "--p", 3, "--points", 1201, "--out", tmp_path, "--cache-dir", tmp_path / "mine")
    assert list((tmp_path / "mine").glob("gs-*.npz"))
    assert not (tmp_path / "cache").exists()


def test_ground_state_other_case(run, tmp_path):
    code, out, _ = run("ground-state", "--n", 4, "--p", 6, "--out", tmp_path)
    assert code == 0 and "L_measured=" in out


def test_integration_failure_exit(run, tmp_path, monkeypatch):
    def boom(e, g):
        raise IntegrationError("forced")

    monkeypatch.setattr("supercrit.persist.ground_state", boom)
    code, _, err = run("ground-state", "--n", 6, "--p", 3, "--out", tmp_path)
    assert code == 3 and "forced" in err


def test_config_file_and_override(run, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# acceptance settings\nn = 6\np = 1.5\nmax_iter = 40\n")
    code, _, _ = run("exponents", "--config", conf)
    assert code == 2
    code, out, _ = run("exponents", "--config", conf, "--p", 3)
    assert code == 0 and "mode1_ok" in out


def test_config_errors_name_the_key(run, tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("colour = blue\n")
    code, _, err = run("exponents", "--config", conf)
    assert code == 2 and "colour" in err
    code, _, err = run("exponents", "--n", 6, "--p", 3, "--rho", 2)
    assert code == 2 and "'rho'" in err
    code, _, err = run("exponents", "--n", "six")
    assert code == 2 and "'n'" in err


def test_linsolve(run, tmp_path):
    code, _, _ = run("linsolve", "--n", 6, "--p", 3, "--source", "0:gauss-1", "--source", "2:wave", "--out", tmp_path)
    assert code == 0
    records = [json.loads(x) for x in (tmp_path / "linsolve.jsonl").read_text().splitlines()]
    assert [r["k"] for r in records] == [0, 2]
    assert set(records[0]) == {"k", "starstar_in", "star_out", "residual", "C_k"}
    assert all(r["residual"] <= 1e-6 for r in records)
    assert (tmp_path / "linsolve_mode2.csv").read_text().startswith("s,r,value,derivative\n")


def test_linsolve_unknown_profile(run, tmp_path):
    code, _, err = run("linsolve", "--n", 6, "--p", 3, "--source", "0:nope", "--out", tmp_path)
    assert code == 2 and "source" in err


def test_solve_and_verify(run, tmp_path):
    args = ("--n", 6, "--p", 3, "--mu", 4, "--r1", 20, "--lambda", 0.05)
    code, _, _ = run("solve", *args, "--out", tmp_path / "a")
    assert code == 0
    report = json.loads((tmp_path / "a" / "report.jsonl").read_text())
    assert report["converged"] and report["pde_residual_starstar"] <= 1e-6
    assert (tmp_path / "a" / "solution.csv").read_text().startswith("s,r,u,phi\n")
    code, _, _ = run("solve", *args, "--out", tmp_path / "b")
    for name in ("solution.csv", "report.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    code, out, _ = run("verify", *args, "--out", tmp_path / "a")
    assert code == 0 and "verified" in out


def test_verify_detects_tampering(run, tmp_path):
    args = ("--n", 6, "--p", 3, "--lambda", 0.05)
    run("solve", *args, "--out", tmp_path)
    path = tmp_path / "solution.csv"
    lines = path.read_text().splitlines()
    mid = len(lines) // 2
    s, r, u, phi = lines[mid].split(",")
    lines[mid] = ",".join([s, r, u, repr(float(phi) + 1e-3)])
    path.write_text("\n".join(lines) + "\n")
    code, _, _ = run("verify", *args, "--out", tmp_path)
    assert code == 6


def test_solve_ball_escape(run, tmp_path):
    code, _, _ = run("solve", "--n", 6, "--p", 3, "--rho", 1e-6, "--out", tmp_path)
    assert code == 5
    report = json.loads((tmp_path / "report.jsonl").read_text())
    assert report["status"] == "left contraction ball"
    assert (tmp_path / "solution.csv").exists()


def test_solve_symmetric(run, tmp_path):
    code, out, _ = run("solve", "--n", 6, "--p", 2.2, "--mu", 6, "--symmetric", "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "report.jsonl").read_text())
    assert report["skipped_modes"] == [1]


def test_solve_mode1_source_rejected(run, tmp_path):
    code, _, _ = run("solve", "--n", 6, "--p", 2.2, "--mu", 6, "--modes", "0:1,1:0.5", "--out", tmp_path)
    assert code == 2


def test_sweep(run, tmp_path, caplog):
    code, out, _ = run("sweep", "--n", 6, "--p", 3, "--lambda", "0.1,0.05,0.025", "--lambda", 0.05, "--out", tmp_path)
    assert code == 0
    assert "duplicate lambda" in caplog.text
    lines = (tmp_path / "sweep.jsonl").read_text().splitlines()
    assert len(lines) == 3
    sups = [json.loads(x)["u_sup_on_annulus"] for x in lines]
    assert sups[0] > sups[1] > sups[2]
    assert (tmp_path / "sweep.csv").read_text().startswith("lambda,u_sup_on_annulus,exit_code,status\n")


def test_sweep_empty(run, tmp_path):
    code, _, err = run("sweep", "--n", 6, "--p", 3, "--lambda", "", "--out", tmp_path)
    assert code == 2
