import csv
import json
import subprocess
import sys

import pytest

from modscat.cli import main


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_verify_ops(tmp_path, capsys):
    code, out = run(["verify-ops", "--grid-n", "1024", "--grid-L", "40"], tmp_path)
    assert code == 0
    rows = list(csv.DictReader(open(out / "verify_ops.csv")))
    assert {"operator", "t", "n", "L", "measured", "bound", "pass"} <= set(rows[0])
    assert all(r["pass"] == "True" for r in rows)
    assert {"mdf_identity", "J_conjugation", "R_decay_L2"} <= {r["operator"] for r in rows}
    m = json.loads((out / "manifest.json").read_text())
    assert m["backend"] in ("cython", "python") and m["contract_ok"]
    assert "operator" in capsys.readouterr().out


def test_solve_writes_snapshots(tmp_path):
    code, out = run(["solve", "--profile", "reference", "--t1", "1", "--snapshots", "3",
                     "--grid-n", "512", "--grid-L", "30"], tmp_path)
    assert code == 0
    traj = list(csv.DictReader(open(out / "trajectory.csv")))
    assert len(traj) == 3
    assert max(float(r["l2_drift"]) for r in traj) < 1e-8
    assert (out / "snapshot_002.csv").exists()


def test_manifest_config_reruns(tmp_path):
    code, out = run(["solve", "--profile", "gaussian:1,0.8", "--t1", "0.5", "--lambda", "-1",
                     "--grid-n", "512", "--grid-L", "30"], tmp_path)
    assert code == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(json.loads((out / "manifest.json").read_text())["config"]))
    code2, out2 = run(["solve", "--config", str(cfg)], tmp_path, "again")
    assert code2 == 0
    assert (out / "trajectory.csv").read_text() == (out2 / "trajectory.csv").read_text()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"solve": {"profile": "reference", "t1": 5.0, "grid_n": 512,
                                         "grid_L": 30.0}}))
    code, out = run(["solve", "--config", str(cfg), "--t1", "0.2"], tmp_path)
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["t1"] == 0.2


def test_scatter_full(tmp_path):
    code, out = run(["scatter", "--profile", "reference", "--epsilon", "0.1",
                     "--grid-n", "512", "--grid-L", "30"], tmp_path)
    assert code == 0
    assert (out / "u0.csv").exists() and (out / "scattering_profile.csv").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["scattering"]["converged"]


@pytest.mark.parametrize("which", ["w2", "mu2", "nu2"])
def test_corrector(tmp_path, which):
    code, out = run(["corrector", "--which", which, "--profile", "reference",
                     "--grid-n", "512", "--grid-L", "30"], tmp_path)
    assert code == 0
    assert (out / f"{which}.csv").exists()


def test_corrector_tail_flag_exit_2(tmp_path):
    code, _ = run(["corrector", "--which", "w2", "--profile", "reference", "--tail-mode", "trunc",
                   "--tail-cut", "100", "--grid-n", "512", "--grid-L", "30"], tmp_path)
    assert code == 2


def test_sweep(tmp_path):
    code, out = run(["sweep", "--operator", "scattering", "--profile", "reference",
                     "--grid-n", "1024", "--grid-L", "40"], tmp_path)
    assert code == 0
    s = json.loads((out / "sweep.json").read_text())
    assert s["bands"] == {"leading": True, "corrected": True}


def test_linear_sweep_exits_zero(tmp_path):
    code, out = run(["sweep", "--profile", "reference", "--lambda", "0", "--grid-n", "512",
                     "--grid-L", "30"], tmp_path)
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["slope_leading"] is None


@pytest.mark.parametrize("args", [
    ["solve"],
    ["scatter"],
    ["corrector"],
    ["sweep"],
    ["solve", "--profile", "box:1"],
    ["solve", "--profile", "reference", "--grid-n", "100"],
    ["sweep", "--profile", "reference", "--epsilons", "0.2,0.1"],
    ["solve", "--profile", "reference", "--threads", "0"],
    ["frobnicate"],
])
def test_validation_errors_exit_1(tmp_path, args):
    code, _ = run(args, tmp_path)
    assert code == 1


def test_bad_config_and_unwritable_dir(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--profile", "reference", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 1
    bad.write_text(json.dumps({"solve": {"warp": 9}}))
    assert main(["solve", "--profile", "reference", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve", "--profile", "reference", "--out", str(blocker / "sub")]) == 1


def test_conservation_failure_exit_2(tmp_path, monkeypatch):
    import modscat.evolve as ev

    real = ev._step
    monkeypatch.setattr(ev, "_step", lambda g, u, dt, lam, o: real(g, u, dt, lam, o) * (1 + 1e-6))
    code, _ = run(["solve", "--profile", "reference", "--t1", "0.5", "--grid-n", "512",
                   "--grid-L", "30"], tmp_path)
    assert code == 2


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DS_THREADS", "3")
    code, out = run(["corrector", "--profile", "reference", "--grid-n", "512", "--grid-L", "30"],
                    tmp_path)
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["threads"] == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "modscat", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "modscat" in r.stdout
