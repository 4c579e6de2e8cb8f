import json
import subprocess
import sys

import pytest

from msfem_transport.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main

SMALL = dict(kind="single_run", media="sine10", n_coarse=8, ratio=4, velocity_order=2,
             eps=[0.1], dt=0.01, final_time=0.02)


def _cfg(tmp_path, name="c.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps(dict(SMALL, **kw)))
    return str(path)


def test_solve_and_assemble(tmp_path, capsys):
    cfg = _cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out), "--cache", str(tmp_path / "cache")]) == EXIT_OK
    assert (out / "report.json").exists() and (out / "snapshots").is_dir()
    assert main(["assemble", "--config", cfg, "--cache", str(tmp_path / "cache")]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out.split("report written")[-1].split("\n", 1)[1])
    assert summary["cache"]["hits"] == 1
    assert main(["solve", "--config", cfg, "--out", str(out), "--no-cache"]) == EXIT_OK


@pytest.mark.parametrize("args", [
    ["sweep"],  # wrong subcommand for single_run
    ["solve", "--threads", "0"],
])
def test_config_errors_exit_2(tmp_path, args):
    assert main(args[:1] + ["--config", _cfg(tmp_path), "--out", str(tmp_path / "o")] + args[1:]) == EXIT_CONFIG


def test_bad_config_files_exit_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["solve", "--config", _cfg(tmp_path, extra=1)]) == EXIT_CONFIG
    assert main(["solve", "--config", _cfg(tmp_path, media="sine20", dimension=2)]) == EXIT_CONFIG


def test_solver_error_exit_3(tmp_path, monkeypatch):
    from msfem_transport.errors import SolverError
    from msfem_transport.harness import cli

    def boom(*a, **k):
        raise SolverError("factorisation failed")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["solve", "--config", _cfg(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_SOLVER


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "msfem_transport", "solve", "--config", _cfg(tmp_path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "report written" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "msfem_transport", "compare", "--config", _cfg(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "config error" in bad.stderr
