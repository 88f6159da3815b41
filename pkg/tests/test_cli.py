import json
import subprocess
import sys

import numpy as np
import pytest

from gmtkit import kernels
from gmtkit.cli import main
from gmtkit.experiments import EXPERIMENTS


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.fixture(autouse=True)
def restore_threads():
    old = kernels.get_threads()
    yield
    kernels.set_threads(old)


@pytest.fixture
def cantor_cfg(tmp_path):
    return write_cfg(tmp_path, {"measure": {"kind": "corner_cantor", "params": {"g": 3}}})


def test_generate_and_stats(tmp_path, cantor_cfg):
    out = tmp_path / "o"
    assert main(["generate", "--config", cantor_cfg, "--out", str(out)]) == 0
    m = json.loads((out / "measure.json").read_text())
    assert len(m["points"]) == 64
    assert main(["stats", "--measure", str(out / "measure.json"), "--center", "0.5", "0.5",
                 "--radius", "0.7", "--out", str(out)]) == 0
    st = json.loads((out / "stats.json").read_text())
    assert st["mass"] == pytest.approx(1.0)


def test_riesz_csv(tmp_path, cantor_cfg):
    out = tmp_path / "o"
    assert main(["riesz", "--config", cantor_cfg, "--pv", "--out", str(out)]) == 0
    rows = (out / "riesz.csv").read_text().strip().splitlines()
    assert rows[0] == "target,R0,R1" and len(rows) == 65
    tgt = tmp_path / "t.csv"
    np.savetxt(tgt, [[0.5, 0.5], [2.0, 2.0]], delimiter=",")
    assert main(["riesz", "--config", cantor_cfg, "--targets", str(tgt), "--treecode", "0.3",
                 "--eps", "0.01", "--smooth", "--out", str(out)]) == 0
    assert len((out / "riesz.csv").read_text().strip().splitlines()) == 3


@pytest.mark.parametrize("argv", [
    ["beta", "--p", "1"],
    ["jw", "--center", "0.125", "0.125", "--rmin", "0.02", "--rmax", "0.5"],
    ["jw", "--square"],
    ["lattice", "--A0", "4", "--C0", "2", "--depth", "2"],
    ["corona", "--theta0", "0.5"],
    ["variational", "--N", "2", "--lam", "0.5"],
    ["capacity", "--smear", "0.01"],
    ["dimscan", "--m", "3"],
])
def test_subcommands_run(tmp_path, cantor_cfg, argv):
    out = tmp_path / "o"
    assert main(argv + ["--config", cantor_cfg, "--out", str(out)]) == 0
    assert any(out.iterdir())


def test_lattice_depth_flag(tmp_path, cantor_cfg):
    out = tmp_path / "o"
    main(["lattice", "--config", cantor_cfg, "--depth", "1", "--out", str(out)])
    d = json.loads((out / "lattice.json").read_text())
    assert d["params"]["depth"] == 1 and all(d["invariants"].values())


def test_variational_iterate_log(tmp_path, cantor_cfg):
    out = tmp_path / "o"
    main(["variational", "--config", cantor_cfg, "--out", str(out)])
    log = (out / "variational_iterates.csv").read_text().splitlines()
    assert log[0] == "iteration,F"
    F = [float(r.split(",")[1]) for r in log[1:]]
    assert all(b <= a for a, b in zip(F, F[1:]))


def test_seed_only_for_atom_cloud(tmp_path, cantor_cfg, capsys):
    assert main(["stats", "--config", cantor_cfg, "--seed", "3"]) == 2
    assert "atom_cloud" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, {"measure": {"kind": "atom_cloud", "params": {"N": 30}}}, "c.json")
    main(["generate", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "a")])
    main(["generate", "--config", cfg, "--seed", "4", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "measure.json").read_bytes() != (tmp_path / "b" / "measure.json").read_bytes()


def test_flags_override_config(tmp_path):
    cfg = write_cfg(tmp_path, {"measure": {"kind": "segment", "params": {"N": 100}},
                               "center": [0.5, 0.0], "radius": 0.25, "c": 1.5})
    main(["stats", "--config", cfg, "--radius", "0.1", "--out", str(tmp_path)])
    st = json.loads((tmp_path / "stats.json").read_text())
    assert st["ball"]["radius"] == 0.1 and st["constant"] == 1.5


def test_errors_exit_code(tmp_path, capsys):
    assert main(["stats"]) == 2
    assert main(["experiment", "--config", write_cfg(tmp_path, {"measure": {"kind": "segment"}})]) == 2


def test_experiment_stdout_and_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "capacity", "measure": {"kind": "circle", "params": {"N": 200}},
                               "options": {"radius": 1.0}})
    res = subprocess.run([sys.executable, "-m", "gmtkit.cli", "experiment", "--config", cfg],
                         capture_output=True, text=True, check=True)
    rep = json.loads(res.stdout)
    assert rep["experiment"] == "capacity" and rep["oracle"]["rel_err"] < 0.02
    assert set(EXPERIMENTS) >= {"thm_local", "capacity"}
