import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from netadapt import cli
from netadapt.cli import main, summary_schema

TWO_NODE = """
[scenario]
library = two_node

[run]
horizon = {horizon}
trials = 10
seed = 1

[algorithm noncoop]
kind = noncoop
step_size = {mu}

[algorithm diffusion]
kind = diffusion_atc
step_size = {mu}

[algorithm consensus]
kind = consensus
step_size = {mu}

[algorithm ah]
kind = primal_dual
step_size = {mu}
eta = 0

[algorithm al_eta20]
kind = primal_dual
step_size = {mu}
eta = 20
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_simulate_small_step_all_converge(tmp_path):
    cfg = write(tmp_path, TWO_NODE.format(mu=0.046875, horizon=1500))
    out = tmp_path / "out"
    assert main(["-q", "simulate", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, summary_schema())
    assert len(summary["algorithms"]) == 5
    for label, s in summary["algorithms"].items():
        assert s["diverged"] is False
        rows = read_rows(out / s["csv"])
        assert len(rows) == 1500
        assert list(rows[0]) == ["iteration", "msd", "msd_db", "theory_msd_db"]
        assert rows[-1]["iteration"] == "1500"
        assert float(rows[0]["theory_msd_db"]) == pytest.approx(s["theory_msd_db"])
        assert (out / f"stability_{label}.json").is_file()


def test_simulate_large_step_primal_dual_diverges(tmp_path):
    cfg = write(tmp_path, TWO_NODE.format(mu=1.1, horizon=1000))
    out = tmp_path / "out"
    assert main(["-q", "simulate", str(cfg), "--out", str(out)]) == 0
    algos = json.loads((out / "summary.json").read_text())["algorithms"]
    assert algos["ah"]["diverged"] and algos["al_eta20"]["diverged"]
    assert algos["ah"]["steady_state_msd"] is None
    assert not algos["noncoop"]["diverged"] and not algos["diffusion"]["diverged"]
    rows = read_rows(out / "ah.csv")
    assert rows[-1]["msd"] == "inf" and rows[-1]["theory_msd_db"] == ""


def test_missing_topology_file_writes_nothing(tmp_path):
    text = TWO_NODE.format(mu=0.1, horizon=10).replace("library = two_node", "library = two_node\n\n[topology]\nfile = gone.txt")
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["simulate", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert main(["stability", str(tmp_path / "nope.ini"), "--out", str(out)]) == 2
    assert not out.exists()


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def broken(spec):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "monte_carlo", broken)
    cfg = write(tmp_path, TWO_NODE.format(mu=0.1, horizon=10))
    assert main(["-q", "simulate", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_stability_command(tmp_path):
    cfg = write(tmp_path, TWO_NODE.format(mu=0.046875, horizon=10))
    out = tmp_path / "st"
    assert main(["-q", "stability", str(cfg), "--out", str(out)]) == 0
    al = json.loads((out / "stability_al_eta20.json").read_text())
    assert al["topo_bound_large_eta"] == 0.05
    assert al["verdict"] == "stable"
    diff = json.loads((out / "stability_diffusion.json").read_text())
    assert diff["diffusion_mu_bound"] == 2.0

    text = """
[scenario]
library = partial_obs_3node
[run]
horizon = 10
[algorithm ah]
kind = primal_dual
step_size = 0.02
"""
    assert main(["-q", "stability", str(write(tmp_path, text, "p.ini")), "--out", str(out)]) == 0
    ah = json.loads((out / "stability_ah.json").read_text())
    assert ah["hurwitz"] is False and ah["mu_bar"] is None


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = write(tmp_path, TWO_NODE.format(mu=0.046875, horizon=20))
    assert main(["-q", "simulate", str(cfg)]) == 0
    assert (tmp_path / "env" / "summary.json").is_file()


def test_reproduce_fig2_round_trip(tmp_path):
    out = tmp_path / "fig2"
    assert main(["-q", "reproduce", "fig2", "--trials", "3", "--horizon", "400", "--out", str(out),
                 "--emit-config"]) == 0
    subdirs = sorted(p.name for p in out.iterdir())
    assert subdirs == ["mu_0.046875", "mu_0.75", "mu_1.1"]
    for sub in subdirs:
        csvs = sorted(p.name for p in (out / sub).glob("*.csv"))
        assert len(csvs) == 5
        again = tmp_path / "again" / sub
        assert main(["-q", "simulate", str(out / sub / "config.ini"), "--out", str(again)]) == 0
        for name in csvs:
            assert (out / sub / name).read_bytes() == (again / name).read_bytes()


def test_reproduce_eta_sweep(tmp_path):
    out = tmp_path / "es"
    assert main(["-q", "reproduce", "eta_sweep", "--out", str(out)]) == 0
    rows = read_rows(out / "eta_sweep.csv")
    assert len(rows) == len(cli.ETA_GRID)
    al = [float(r["al_msd_db"]) for r in rows]
    assert np.all(np.diff(al) <= 1e-12)
    assert al[0] == pytest.approx(float(rows[0]["ah_msd_db"]), abs=1e-9)
    assert al[-1] > float(rows[-1]["diffusion_msd_db"])
    assert rows[0]["al_large_eta_msd_db"] == ""


def test_unknown_case_is_rejected():
    with pytest.raises(SystemExit):
        main(["reproduce", "fig9"])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "netadapt", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "reproduce" in res.stdout
