import json
import subprocess
import sys

import pytest

from achlab.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def test_run_is_deterministic_and_round_trips(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert run_cli("run", "--rule", "er", "--n", 100_000, "--steps", 30_000, "--seed", 7, "--out", a) == 0
    assert run_cli("run", "--rule", "er", "--n", 100_000, "--steps", 30_000, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run_cli("run", "--config", a, "--out", c) == 0
    assert a.read_bytes() == c.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("# achlab-series/1") and lines[1].startswith("# config: ")
    assert lines[2] == "step,t,S,L1,k,N_k"


def test_json_config_round_trip(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 500, "rule": "product", "t_max": 0.4, "t_grid": [0.1, 0.2], "seed": 3}))
    first, second = tmp_path / "1.json", tmp_path / "2.json"
    assert run_cli("run", "--config", cfg, "--out", first) == 0
    assert run_cli("run", "--config", first, "--out", second) == 0
    assert first.read_bytes() == second.read_bytes()
    data = json.loads(first.read_text())
    assert [s["step"] for s in data["snapshots"]] == [50, 100, 200]


def test_flags_override_config(tmp_path):
    out = tmp_path / "o.csv"
    src = tmp_path / "s.csv"
    run_cli("run", "--rule", "er", "--n", 1000, "--steps", 100, "--out", src)
    assert run_cli("run", "--config", src, "--seed", 5, "--out", out) == 0
    echoed = json.loads(out.read_text().splitlines()[1][len("# config: "):])
    assert echoed["seed"] == 5 and echoed["n"] == 1000


def test_poisson_records_count(tmp_path, capsys):
    assert run_cli("poisson", "--rule", "product", "--n", 5000, "--t", 0.3, "--seed", 2) == 0
    out = capsys.readouterr().out
    assert "# meta: " in out and '"poisson_t": 0.3' in out


def test_stitch_first_stage(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli("stitch", "--rule", "product", "--ell", 4, "--t", 0.05, "--samples", 20_000, "--out", out) == 0
    rows = [line for line in out.read_text().splitlines() if not line.startswith("#")]
    first = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert float(first["delta"]) == pytest.approx(1 / 36)


def test_stitch_abort_is_an_error(capsys):
    assert run_cli("stitch", "--rule", "er", "--t", 0.49, "--samples", 20_000, "--cap", 30) == 1
    assert "aborted" in capsys.readouterr().err


def test_ell_reparameterizes_rule(capsys):
    assert run_cli("rho", "--rule", "min_rule", "--ell", 3, "--t", 0.05, "--samples", 1000) == 0
    assert '"rule": "min_rule:ell=3"' in capsys.readouterr().out
    assert run_cli("rho", "--rule", "er", "--ell", 3, "--t", 0.05) == 1


def test_rho_json_with_seed_law(tmp_path, capsys):
    phi = tmp_path / "phi.json"
    phi.write_text(json.dumps({"pmf": {"1": 0.5, "2": 0.5}}))
    assert run_cli("rho", "--rule", "er", "--t-grid", "0,0.1", "--samples", 5000, "--phi", phi,
                   "--format", "json") == 0
    body = json.loads(capsys.readouterr().out)
    assert body["config"]["t"] == [0.0, 0.1]
    assert body["estimates"][0]["pmf"] == pytest.approx({"1": 0.5, "2": 0.5}, abs=0.03)


def test_compare_er_closed_form(capsys):
    assert run_cli("compare", "--rule", "er", "--t", 0.25, "--n", 100_000, "--reps", 5, "--reference",
                   "borel", "--format", "json") == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("VERDICT compare PASS")
    report = json.loads(out[: out.rindex("VERDICT")])
    assert report["fits"]["D"][0] < 0.01


def test_experiment_report_config_round_trip(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli("blowup", "--rule", "er", "--n", "1000,10000", "--reps", 2, "--out", a) == 0
    assert run_cli("blowup", "--config", a, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_failing_verdict_exit_code(capsys):
    code = run_cli("scan", "--rule", "er", "--n", 1000, "--reps", 1, "--t-grid", "0:0.1:0.05")
    assert code == 0 and "VERDICT scan OPEN" in capsys.readouterr().out
    assert run_cli("delayed", "--n", "1000,2000", "--reps", 2) == 2


def test_cycles_rejects_non_acyclic_rule(capsys):
    assert run_cli("cycles", "--rule", "join_all:ell=3", "--t", 0.05, "--n", 100, "--reps", 1) == 1
    assert "cycle" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["run", "--rule", "nosuch", "--n", "10", "--steps", "1"],
    ["run", "--rule", "er", "--n", "0", "--steps", "1"],
    ["run", "--rule", "er", "--n", "10"],
    ["run", "--rule", "er", "--n", "10", "--steps", "1", "--t", "0.5"],
    ["run", "--bogus"],
    ["frobnicate"],
    ["run", "--rule", "er", "--n", "10", "--steps", "1", "--out", "/nonexistent/dir/x.csv"],
    ["poisson", "--rule", "er", "--n", "10"],
    ["stitch", "--rule", "er"],
    ["compare", "--rule", "er", "--t", "0.1", "--n", "100", "--reference", "borel", "--reps", "1", "--ell", "4"],
])
def test_configuration_errors_exit_one(args):
    assert main(args) == 1


def test_malformed_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run_cli("run", "--config", bad) == 1
    assert run_cli("run", "--config", tmp_path / "missing.json") == 1
    unknown = tmp_path / "u.json"
    unknown.write_text(json.dumps({"n": 10, "rule": "er", "steps": 1, "flavour": 2}))
    assert run_cli("run", "--config", unknown) == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "achlab.cli", "run", "--rule", "er", "--n", "50", "--steps", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("# achlab-series/1")
