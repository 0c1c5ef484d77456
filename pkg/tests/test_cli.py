import csv
import json
import subprocess
import sys

import pytest

from htsprecode import cli
from htsprecode.config import parse_config
from htsprecode.simulator import read_csv_points

FAST = ["--users-per-beam", "8", "--epochs", "30"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweeps")
    assert run("sweep", "--scenario", "benchmark", "--loads", "0.5,2,4", *FAST, "--out", d / "b") == 0
    assert run("sweep", "--scenario", "single-real", "--loads", "0.5,2,4", *FAST, "--out", d / "p") == 0
    return d


def test_run_zero_load(tmp_path):
    assert run("run", "--scenario", "multi-ideal", "--loads", "0", *FAST, "--out", tmp_path) == 0
    pts = read_csv_points(tmp_path / "report.csv")
    assert pts == [{"load_gbps": 0.0, "served_gbps": 0.0, "upper_bound_gbps": 0.0, "utilization": 0.0,
                    "outage": 0.0}]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert set(man) == {"command", "config_digest", "seed", "version", "started", "finished", "outputs"}
    assert parse_config(tmp_path / "config.yaml").digest() == man["config_digest"]
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["points"][0]["served_gbps"] == 0


def test_sweep_outputs(sweeps):
    rows = list(csv.DictReader(open(sweeps / "p" / "sweep.csv")))
    assert list(rows[0]) == ["load_gbps", "served_gbps", "upper_bound_gbps", "utilization", "outage"]
    assert [float(r["load_gbps"]) for r in rows] == [0.5, 2.0, 4.0]


def test_compare_self_is_zero(sweeps, tmp_path):
    f = sweeps / "b" / "sweep.csv"
    assert run("compare", f, f, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "gain.csv")))
    assert all(float(r["served_gain_pct"]) == 0 for r in rows)


def test_compare_matches_independent_recomputation(sweeps, tmp_path):
    p, b = sweeps / "p" / "sweep.csv", sweeps / "b" / "sweep.csv"
    assert run("compare", p, b, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "gain.csv")))
    pr = list(csv.DictReader(open(p)))
    br = list(csv.DictReader(open(b)))
    assert [r["row"] for r in rows] == ["load"] * len(pr) + ["summary"]
    for r, x, y in zip(rows, pr, br):
        expect = 100 * (float(x["served_gbps"]) / float(y["served_gbps"]) - 1)
        assert float(r["served_gain_pct"]) == pytest.approx(expect, rel=1e-5)
        expect_ub = 100 * (float(x["upper_bound_gbps"]) / float(y["upper_bound_gbps"]) - 1)
        assert float(r["upper_bound_gain_pct"]) == pytest.approx(expect_ub, rel=1e-5)
    top = max(pr, key=lambda x: float(x["load_gbps"]))
    assert float(rows[-1]["load_gbps"]) == float(top["load_gbps"])
    assert rows[-1]["served_gain_pct"] == rows[-2]["served_gain_pct"]


def test_compare_mismatched_grids_fails(sweeps, tmp_path):
    other = tmp_path / "o.csv"
    other.write_text("load_gbps,served_gbps,upper_bound_gbps,utilization,outage\n9,1,1,1,0\n")
    assert run("compare", sweeps / "p" / "sweep.csv", other, "--out", tmp_path / "g") == 1
    assert not (tmp_path / "g" / "gain.csv").exists()


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 3\nepochs: 99\nusers_per_beam: 4\n")
    args = cli.build_parser().parse_args(["run", "--config", str(cfg), "--seed", "8", "--scenario", "multi-real"])
    c = cli.load_config(args)
    assert (c.seed, c.epochs, c.users_per_beam, c.gw_count, c.mode) == (8, 99, 4, 9, "precoding1")


def test_env_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    assert run("run", "--loads", "1", *FAST) == 0
    assert (tmp_path / "envout" / "report.csv").exists()


def test_bad_config_nonzero(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("mode: precoding1\n")
    assert run("run", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "colours" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_failure_removes_partial_outputs(tmp_path, monkeypatch):
    def boom(text):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "dump_config", boom)
    assert run("run", "--loads", "1", *FAST, "--out", tmp_path) == 1
    assert list(tmp_path.iterdir()) == []


def test_trace_output(tmp_path):
    assert run("run", "--loads", "2", *FAST, "--trace", "--out", tmp_path) == 0
    head = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert head == "epoch,layer,beam,users,efficiency,served_bits,utilization"
    assert run("run", "--loads", "1,2", *FAST, "--trace", "--out", tmp_path / "x") == 1


def test_csv_bytes_reproducible(tmp_path):
    for d in ("a", "b"):
        assert run("run", "--scenario", "multi-real", "--loads", "3", *FAST, "--out", tmp_path / d) == 0
    assert (tmp_path / "a" / "report.csv").read_bytes() == (tmp_path / "b" / "report.csv").read_bytes()


def test_config_subcommand(capsys):
    assert run("config", "--scenario", "single-ideal") == 0
    assert "mode: precoding1" in capsys.readouterr().out


def test_console_module_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "htsprecode.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
