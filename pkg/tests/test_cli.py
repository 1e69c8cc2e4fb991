import csv
import json
import subprocess
import sys

import pytest

from phi4torus.cli import main
from phi4torus.renorm import renorm_constants
from phi4torus.torus import read_snapshot_with_meta


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def test_zero_horizon_simulation(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--set", "sim.T=0", "--set", "sim.chains=2", "--output", str(out)]) == 0
    data = rows(out / "samples.csv")
    assert {r["observable"] for r in data} == {"l2_norm_sq", "quartic_integral"}
    assert all(r["t"] == "0.0" for r in data)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["verb"] == "simulate" and manifest["all_passed"]
    f, meta = read_snapshot_with_meta(out / "final_chain0.phi4")
    assert meta.startswith(f"run_digest={manifest['run_digest']}") and f.cutoffs == (3, 3, 3)
    assert "outputs written to" in capsys.readouterr().out


def test_runs_are_reproducible_byte_for_byte(tmp_path):
    args = ["simulate", "--set", "sim.T=0.02", "--set", "sim.dt=0.01", "--set", "sim.chains=3", "--seed", "5"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["outputs"] == mb["outputs"] and len(ma["outputs"]) >= 3
    for name in ma["outputs"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    main(["simulate", "--set", "sim.T=0.02", "--set", "sim.dt=0.01", "--set", "sim.chains=3", "--seed", "6",
          "--output", str(c)])
    assert json.loads((c / "manifest.json").read_text())["outputs"]["samples.csv"] != ma["outputs"]["samples.csv"]


@pytest.mark.parametrize("args", [["simulate", "--set", "sim.nonsense=1"], ["simulate", "--set", "sim.N=x"],
                                  ["simulate", "--set", "sim.lambda=5"]])
def test_configuration_errors_exit_2(tmp_path, capsys, args):
    assert main(args + ["--output", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_config_file_and_run_verb(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("run.verb = renorm-constants\nsim.N = 1\nsim.m0 = 1.0\n")
    out = tmp_path / "rc"
    assert main(["run", str(cfgfile), "--output", str(out)]) == 0
    (row,) = rows(out / "constants.csv")
    assert float(row["C1"]) == renorm_constants(1, 1.0).c1
    bad = tmp_path / "bad.cfg"
    bad.write_text("run.verb = renorm-constants\nsim.whatever = 2\n")
    assert main(["run", str(bad), "--output", str(out)]) == 2


def test_renorm_constants_for_several_levels(tmp_path):
    out = tmp_path / "rc"
    assert main(["renorm-constants", "--N", "0", "1", "--m0", "1.0", "--output", str(out)]) == 0
    data = rows(out / "constants.csv")
    assert [int(r["N"]) for r in data] == [0, 1]
    assert float(data[1]["C2"]) == renorm_constants(1, 1.0).c2


def test_free_invariance_passes(tmp_path):
    out = tmp_path / "inv"
    code = main(["verify-invariance", "--set", "sim.lambda=0", "--set", "sim.chains=800", "--set", "sim.T=0.1",
                 "--set", "sim.dt=0.01", "--set", "invariance.dts=0.02,0.01", "--set", "gibbs.method=rejection",
                 "--output", str(out)])
    assert code == 0
    assert all(r["verdict"] == "pass" for r in rows(out / "reports.csv"))
    assert len(rows(out / "invariance.csv")) == 12


def test_free_gibbs_samples_match_exact_moments(tmp_path):
    out = tmp_path / "gibbs"
    code = main(["sample-gibbs", "--set", "sim.lambda=0", "--set", "gibbs.samples=600", "--set", "sim.chains=200",
                 "--set", "gibbs.n_steps=2", "--output", str(out)])
    assert code == 0
    reports = rows(out / "reports.csv")
    assert len(reports) == 12 and sum(r["verdict"] == "pass" for r in reports) == 11  # quartic has no target
    assert main(["report", str(out)]) == 0
    assert main(["report", str(out / "samples.csv")]) == 0


def test_trees_then_besov(tmp_path, capsys):
    out = tmp_path / "trees"
    assert main(["trees", "--set", "sim.T=0.04", "--set", "trees.dt=0.02", "--set", "sim.burn_in=10",
                 "--snapshot-every", "1", "--output", str(out)]) == 0
    snaps = sorted(p.name for p in out.glob("tree_z22_*.phi4"))
    assert snaps == ["tree_z22_step000000.phi4", "tree_z22_step000001.phi4", "tree_z22_step000002.phi4"]
    capsys.readouterr()
    assert main(["besov", str(out / "tree_z1_step000002.phi4"), "--output", str(tmp_path / "b")]) == 0
    printed = capsys.readouterr().out
    assert printed.splitlines()[1] == "j,norm" and "outputs written" in printed
    assert main(["besov", "--output", str(tmp_path / "b")]) == 2


def test_commutator_scan_verb(tmp_path):
    out = tmp_path / "scan"
    assert main(["commutator-scan", "--set", "commutator.points=5", "--output", str(out)]) == 0
    assert len(rows(out / "commutator.csv")) == 5


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PHI4_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["renorm-constants"]) == 0
    assert (tmp_path / "env" / "constants.csv").exists()


def test_report_of_missing_directory(tmp_path):
    assert main(["report", str(tmp_path)]) == 2


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "phi4torus.cli", "config-schema"], capture_output=True, text=True)
    assert res.returncode == 0 and "sim.lambda" in res.stdout
