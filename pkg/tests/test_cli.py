import json
import os

import pytest

from drolimit.cli import main
from drolimit.config import load_config
from drolimit.errors import ConfigError


def run_cli(args):
    return main(args)


def test_config_defaults_load():
    cfg = load_config(None)
    assert cfg["grid"]["n"] == [513]
    assert cfg["ambiguity"]["m"] == 0.5


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="numerics.quod_order"):
        load_config(None, ["numerics.quod_order=8"])


def test_negative_m_rejected(tmp_path, capsys):
    code = run_cli(["properties", "--set", "ambiguity.m=-1", "--out", str(tmp_path)])
    assert code == 2
    assert "ambiguity.m" in capsys.readouterr().err


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run_cli(["limit", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_override_applies():
    cfg = load_config(None, ["ambiguity.m=0.25", "grid.n=[65]"])
    assert cfg["ambiguity"]["m"] == 0.25
    assert cfg["grid"]["n"] == [65]


SMALL = [
    "--set", "grid.n=[129]",
    "--set", "numerics.quad_order=8",
    "--set", "numerics.cand_per_side=6",
    "--set", "numerics.max_level=4",
    "--set", "numerics.stop_tol=5e-3",
]


def test_properties_subcommand(tmp_path):
    out = str(tmp_path / "props")
    code = run_cli(
        ["properties", "--out", out, "--seed", "0",
         "--set", "experiment.parameters.trials=4",
         "--set", "experiment.parameters.dual_trials=20"] + SMALL
    )
    assert code == 0
    report = json.loads((tmp_path / "props" / "report.json").read_text())
    names = {r["name"] for r in report}
    assert names == {"operator_properties", "dual_oracle_equivalence"}
    props = next(r for r in report if r["name"] == "operator_properties")
    worst = dict((k, v) for k, v in props["measured"])
    assert worst["contraction"] <= 1e-9
    assert all(r["passed"] for r in report)
    assert (tmp_path / "props" / "manifest.json").exists()
    assert (tmp_path / "props" / "summary.csv").exists()
    timings = json.loads((tmp_path / "props" / "timings.json").read_text())
    assert len(timings) == len(report)
    assert all(isinstance(t, float) for _, t in timings)


def test_crosscheck_heat_exit_zero(tmp_path):
    out = str(tmp_path / "xc")
    code = run_cli(
        ["crosscheck", "--out", out,
         "--set", "ambiguity.m=0.0",
         "--set", "experiment.parameters.function=\"cos\"",
         "--set", "experiment.parameters.horizon=0.5",
         "--set", "experiment.parameters.tol=5e-3"] + SMALL
    )
    assert code == 0
    report = json.loads((tmp_path / "xc" / "report.json").read_text())
    assert report[0]["measured"][0][1] <= 5e-3
    assert (tmp_path / "xc" / "crosscheck_limit.csv").exists()


def test_failing_check_exit_one(tmp_path):
    out = str(tmp_path / "fail")
    code = run_cli(
        ["crosscheck", "--out", out,
         "--set", "experiment.parameters.tol=1e-12"] + SMALL
    )
    assert code == 1


def test_limit_writes_gap_table(tmp_path):
    out = tmp_path / "lim"
    code = run_cli(
        ["limit", "--out", str(out), "--set", "experiment.parameters.t=0.5"]
        + SMALL + ["--set", "numerics.stop_tol=1e-2"]
    )
    assert code == 0
    lines = (out / "limit_gaps.csv").read_text().splitlines()
    assert lines[0] == "level,gap"
    assert len(lines) >= 2
    assert (out / "limit_field.csv").exists()


def test_pde_subcommand(tmp_path):
    out = tmp_path / "pde"
    code = run_cli(
        ["pde", "--out", str(out),
         "--set", "experiment.parameters.function=\"cos\"",
         "--set", "experiment.parameters.horizon=0.25"] + SMALL
    )
    assert code == 0
    summary = json.loads((out / "pde_summary.json").read_text())
    assert summary["horizon"] == 0.25
    assert (out / "pde_snapshots.csv").exists()


def test_sensitivity_subcommand(tmp_path):
    out = tmp_path / "sens"
    code = run_cli(
        ["sensitivity", "--out", str(out), "--set", "ambiguity.m=0.0"] + SMALL
    )
    assert code == 0
    lines = (out / "sensitivity.csv").read_text().splitlines()
    assert lines[0] == "t,error"
    assert len(lines) == 5


def test_generator_subcommand_default_grid(tmp_path):
    # the coarse test grid cannot resolve the small-t quotient, so this one
    # runs at the default resolution (m=0 keeps it cheap: no dual solves)
    out = tmp_path / "gen"
    code = run_cli(["generator", "--out", str(out), "--set", "ambiguity.m=0.0"])
    assert code == 0
    assert (out / "generator.csv").exists()


def test_semigroup_subcommand_default_grid(tmp_path):
    out = tmp_path / "semi"
    code = run_cli(
        ["semigroup", "--out", str(out),
         "--set", "experiment.parameters.pairs=[[0.25, 0.25]]"]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report[0]["passed"]


def test_certify_subcommand_heat_only(tmp_path):
    out = tmp_path / "cert"
    code = run_cli(
        ["certify", "--out", str(out),
         "--set", "experiment.parameters.experiments=[\"heat_anchor\"]"]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report[0]["name"] == "refinement_certificates"
    assert report[0]["passed"]


def test_outputs_deterministic(tmp_path):
    args = ["limit", "--set", "experiment.parameters.t=0.25"] + SMALL
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert run_cli(args + ["--out", out1]) == 0
    assert run_cli(args + ["--out", out2]) == 0
    for name in ("manifest.json", "report.json", "limit_gaps.csv", "limit_field.csv", "summary.csv"):
        b1 = open(os.path.join(out1, name), "rb").read()
        b2 = open(os.path.join(out2, name), "rb").read()
        assert b1 == b2, name
