import csv
import json

import numpy as np
import pytest

from dul.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS, main
from dul.config import ConfigError, load_config
from dul.solver.io import read_snapshot

BASE = "[geometry]\nkind = interval\n\n[coefficient]\ngamma = 4\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(BASE)
    return str(p)


def _run(tmp_path, *args):
    return main(list(args) + ["--output", str(tmp_path / "out")])


def _dirs(tmp_path, prefix):
    return sorted(p for p in (tmp_path / "out").iterdir() if p.name.startswith(prefix))


def _report(path):
    return json.loads((path / "report.json").read_text())


def test_verify_barrier_default_passes(tmp_path, cfg):
    assert _run(tmp_path, "verify-barrier", "-c", cfg) == EXIT_PASS
    rep = _report(_dirs(tmp_path, "verify-barrier")[0])
    assert rep["schema_version"] == "1" and rep["pass"]
    assert {c["claim"] for c in rep["certificates"]} == {"invariants", "E1", "E2", "normal_derivative"}


def test_verify_barrier_alpha1_control_fails(tmp_path, cfg):
    assert _run(tmp_path, "verify-barrier", "-c", cfg, "--set", "barrier.alpha1=1") == EXIT_FAIL
    rep = _report(_dirs(tmp_path, "verify-barrier")[0])
    e1 = next(c for c in rep["certificates"] if c["claim"] == "E1")
    assert not e1["pass"] and e1["worst_value"] > 0


def test_verify_barrier_subcritical(tmp_path, cfg):
    assert _run(tmp_path, "verify-barrier", "-c", cfg, "--set", "coefficient.gamma=1.5",
                "--set", "barrier.n_space=2000", "--jobs", "2") == EXIT_PASS


def test_missing_geometry_is_config_error(tmp_path, capsys):
    assert _run(tmp_path, "verify-barrier", "--set", "coefficient.gamma=4") == EXIT_CONFIG
    assert "geometry" in capsys.readouterr().err


def test_bad_key_is_named(tmp_path, cfg, capsys):
    assert _run(tmp_path, "solve", "-c", cfg, "--set", "solver.n_nodes=abc") == EXIT_CONFIG
    assert "solver.n_nodes" in capsys.readouterr().err
    assert _run(tmp_path, "solve", "-c", cfg, "--set", "solver.bogus=1") == EXIT_CONFIG


def test_small_gamma_barrier_is_config_error(tmp_path, cfg):
    assert _run(tmp_path, "verify-barrier", "-c", cfg, "--set", "coefficient.gamma=0.5") == EXIT_CONFIG


def test_missing_config_file_is_io_error(tmp_path):
    assert _run(tmp_path, "solve", "-c", str(tmp_path / "none.ini")) == EXIT_IO


def test_solve_homogeneous_and_determinism(tmp_path, cfg):
    assert _run(tmp_path, "solve", "-c", cfg) == EXIT_PASS
    assert _run(tmp_path, "solve", "-c", cfg) == EXIT_PASS
    first, second = _dirs(tmp_path, "solve")
    assert second.name == first.name + "-1"
    assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
    snap = read_snapshot(first / "trajectory.dul")
    assert np.all(snap.values == 0.0)
    header = next(csv.reader((first / "trajectory.csv").open()))
    assert header == ["t", "x", "u"]
    assert "elapsed" in (first / "run.log").read_text()


def test_output_env_variable(tmp_path, cfg, monkeypatch):
    monkeypatch.setenv("DUL_OUTPUT_DIR", str(tmp_path / "envroot"))
    assert main(["schedule", "-c", cfg]) == EXIT_PASS
    assert any(p.name.startswith("schedule-") for p in (tmp_path / "envroot").iterdir())


def test_experiment_contrast(tmp_path, cfg):
    assert _run(tmp_path, "experiment", "-c", cfg, "--set", "experiment.name=form_threshold_contrast",
                "--jobs", "3") == EXIT_PASS
    run = _dirs(tmp_path, "experiment")[0]
    rows = list(csv.DictReader((run / "verdicts.csv").open()))
    assert len(rows) == 6 and {r["verdict"] for r in rows} == {"unique_trend", "nonunique_trend"}
    assert _report(run)["flips"] == {"divergence": [0.5, 1.5], "nondivergence": [1.5, 2.5]}


def test_unknown_experiment(tmp_path, cfg):
    assert _run(tmp_path, "experiment", "-c", cfg, "--set", "experiment.name=nope") == EXIT_CONFIG


@pytest.mark.parametrize("extra", [["--set", "norm.theta=0.5,3"],
                                   ["--set", "coefficient.gamma=1.5", "--set", "norm.mu=1.1"]])
def test_norm_check_zero_trajectory(tmp_path, cfg, extra):
    assert _run(tmp_path, "solve", "-c", cfg) == EXIT_PASS
    snap = _dirs(tmp_path, "solve")[0] / "trajectory.dul"
    assert _run(tmp_path, "norm-check", "-c", cfg, "--set", f"norm.snapshot={snap}", *extra) == EXIT_PASS


def test_norm_check_unreadable_snapshot(tmp_path, cfg):
    bad = tmp_path / "bad.dul"
    bad.write_bytes(b"garbage")
    assert _run(tmp_path, "norm-check", "-c", cfg, "--set", f"norm.snapshot={bad}",
                "--set", "norm.theta=1") == EXIT_IO


def test_schedule_prints_rows(tmp_path, cfg, capsys):
    assert _run(tmp_path, "schedule", "-c", cfg, "--set", "schedule.eps=0.1", "--set", "schedule.tau=0.05") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "k,eps_k,delta_k,tau_k" and out[1].startswith("1,0.1,0.05,")
    assert _run(tmp_path, "schedule", "-c", cfg, "--set", "schedule.mu2=0.5") == EXIT_CONFIG


def test_config_overrides_and_hash():
    a = load_config(BASE)
    b = load_config(BASE, ["solver.n_nodes=128"])
    assert a.get("solver.n_nodes") == 256 and b.get("solver.n_nodes") == 128
    assert a.digest("solve") != b.digest("solve") and a.digest("solve") == load_config(BASE).digest("solve")
    with pytest.raises(ConfigError):
        load_config(BASE, ["nodot=1"])
