import json
import re
from pathlib import Path

import jsonschema
import pytest
import yaml

from aoelab import cli
from aoelab.config import ConfigError, build_scenario, load_config, parse_config
from aoelab.models import RunBatch
from aoelab.report import REPORT_SCHEMA, make_report, to_markdown

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        cfg = load_config(path)
        for spec in cfg.scenario_specs():
            build_scenario(spec)


@pytest.mark.parametrize("command", ["predict", "feasibility"])
@pytest.mark.parametrize("preset", ["bong", "lawrence", "wigner", "ormrod-barrett"])
def test_reports_validate(command, preset, capsys):
    code, out, _ = run([command, "--scenario", preset], capsys)
    assert code == cli.EXIT_OK
    report = json.loads(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["command"] == command


def test_feasibility_verdicts(capsys):
    _, out, _ = run(["feasibility", "--scenario", "bong"], capsys)
    assert json.loads(out)["results"]["lp"]["verdict"] == "Infeasible"
    _, out, _ = run(["feasibility", "--scenario", "wigner"], capsys)
    assert json.loads(out)["results"]["verdict"] == "NotApplicable"
    _, out, _ = run(["feasibility", "--config", CONFIGS / "feasibility_targets.yaml"], capsys)
    assert json.loads(out)["results"]["lp"]["chsh_inequality"]["value"] == "4/1"


def test_marginal_mismatch_exit_code(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "bad.yaml", {"targets": {
        "AB": [0.5, 0, 0, 0.5], "AD": [1, 0, 0, 0], "CB": [0.5, 0, 0, 0.5], "CD": [0.5, 0, 0, 0.5]}})
    code, _, err = run(["feasibility", "--config", cfg], capsys)
    assert code == cli.EXIT_USAGE
    assert "marginal" in err


@pytest.mark.parametrize("data,needle", [
    ({"scenario": "bong", "colour": 1}, "unknown keys"),
    ({"scenario": "narnia"}, "unknown preset"),
    ({"samples": 0}, "samples"),
    ({"models": ["everett"]}, "unknown model"),
    ({"tolerances": {"analytic": 0.1}}, "analytic"),
    ({"scenario": {"kind": "bong", "state": "ghz"}}, "two-qubit"),
    ({"scenario": {"kind": "ormrod-barrett", "state": "singlet", "c": 0}}, "needs angles"),
    ({"targets": {"AB": [1, 0, 0, 0]}}, "missing pair"),
])
def test_invalid_config_exit_code(tmp_path, capsys, data, needle):
    cfg = write_yaml(tmp_path / "c.yaml", data)
    code, _, err = run(["predict", "--config", cfg], capsys)
    assert code == cli.EXIT_USAGE
    assert needle in err


def test_missing_config_names_the_path(tmp_path, capsys):
    missing = tmp_path / "nope.yaml"
    code, _, err = run(["predict", "--config", missing], capsys)
    assert code == cli.EXIT_USAGE
    assert str(missing) in err


def test_usage_errors(tmp_path, capsys):
    assert run(["simulate", "--out", tmp_path], capsys)[0] == cli.EXIT_USAGE
    assert run(["simulate", "--seed", 1], capsys)[0] == cli.EXIT_USAGE
    assert run(["verify"], capsys)[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["predict", "--format", "xml"])
    assert exc.value.code == 2
    cfg = write_yaml(tmp_path / "c.yaml", {"scenario": "bong", "contexts": ["Ask"]})
    assert run(["simulate", "--config", cfg, "--seed", 1, "--out", tmp_path / "o"], capsys)[0] == cli.EXIT_USAGE


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["predict", "--out", blocker / "report.json"], capsys)
    assert code == cli.EXIT_USAGE
    assert str(blocker) in err


def test_simulate_is_byte_identical(tmp_path, capsys):
    args = ["simulate", "--scenario", "bong", "--model", "kent", "--model", "naive-absolute",
            "--samples", 3000, "--seed", 5]
    assert run(args + ["--out", tmp_path / "a"], capsys)[0] == cli.EXIT_OK
    assert run(args + ["--out", tmp_path / "b"], capsys)[0] == cli.EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").glob("*.jsonl"))
    assert len(files) == 8
    assert "kent__bong__Super-Ask.jsonl" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a["results"] == b["results"]


def test_simulated_batches_round_trip(tmp_path, capsys):
    run(["simulate", "--scenario", "bong", "--model", "kent", "--samples", 500, "--seed", 5, "--out", tmp_path],
        capsys)
    summary = json.loads((tmp_path / "summary.json").read_text())["results"]
    for entry in summary["batches"]:
        text = (tmp_path / entry["file"]).read_text()
        batch = RunBatch.from_jsonl(text)
        assert batch.count == 500
        assert batch.to_jsonl() == text
        assert batch.model == "kent" and batch.context == entry["context"]


def test_naive_model_shows_fpu_gap(tmp_path, capsys):
    run(["simulate", "--scenario", "bong", "--model", "naive-absolute", "--samples", 20000, "--seed", 1,
         "--out", tmp_path], capsys)
    summary = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert max(b["max_fpu_delta"] for b in summary["batches"]) >= 0.2


def _numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield obj


def test_markdown_prints_the_json_numbers(capsys):
    _, out, _ = run(["predict", "--scenario", "bong"], capsys)
    report = json.loads(out)
    _, md, _ = run(["predict", "--scenario", "bong", "--format", "md"], capsys)
    tokens = set(re.findall(r"-?\d[\w.+-]*", md))
    report["config"]["format"] = "md"
    for x in _numbers({k: report[k] for k in ("config", "results")}):
        assert json.dumps(x) in tokens, x
    assert to_markdown(report).splitlines()[:3] == md.splitlines()[:3]


def test_config_echo_reruns_identically(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "c.yaml", {
        "scenario": {"kind": "bong", "state": [[0, 0], 0.6, "-0.8", 0], "c": 0.1, "d": 0.5, "a": 1, "b": 2},
        "models": ["kent", {"name": "naive-absolute", "params": {"strategy": "product"}}],
        "samples": 1000, "seed": 3, "format": "json"})
    _, out, _ = run(["predict", "--config", cfg], capsys)
    first = json.loads(out)
    echo = write_yaml(tmp_path / "echo.yaml", first["config"])
    _, out, _ = run(["predict", "--config", echo], capsys)
    second = json.loads(out)
    assert second["config"] == first["config"]
    assert second["results"] == first["results"]
    assert parse_config(first["config"]).echo() == first["config"]


def test_verify_against_committed_baseline(tmp_path, capsys):
    code, out, _ = run(["verify", "--config", CONFIGS / "verify.yaml"], capsys)
    assert code == cli.EXIT_OK
    results = json.loads(out)["results"]
    assert results["status"] == "match" and results["diff"] == []


def test_verify_detects_a_flipped_verdict(tmp_path, capsys):
    baseline = json.loads(cli.default_baseline_path().read_text())
    baseline["verdicts"]["bong"]["models"]["rqm-cpl"]["flags"]["No-SD"] = "Satisfied"
    path = tmp_path / "flipped.json"
    path.write_text(json.dumps(baseline))
    cfg = write_yaml(tmp_path / "v.yaml", {"scenario": "bong", "models": ["rqm-cpl"], "samples": 20000,
                                           "seed": 1, "baseline": str(path)})
    code, out, err = run(["verify", "--config", cfg], capsys)
    assert code == cli.EXIT_MISMATCH
    (diff,) = json.loads(out)["results"]["diff"]
    assert diff == {"scenario": "bong", "model": "rqm-cpl", "field": "No-SD",
                    "expected": "Satisfied", "actual": "Violated"}
    assert "differ" in err


def test_verify_missing_baseline(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "v.yaml", {"scenario": "bong", "seed": 1, "baseline": str(tmp_path / "none.json")})
    code, _, err = run(["verify", "--config", cfg], capsys)
    assert code == cli.EXIT_USAGE
    assert "none.json" in err


def test_write_baseline_round_trip(tmp_path, capsys):
    path = tmp_path / "b.json"
    cfg = write_yaml(tmp_path / "v.yaml", {"scenario": "wigner", "models": ["kent"], "samples": 5000, "seed": 2})
    assert run(["verify", "--config", cfg, "--write-baseline", path], capsys)[0] == cli.EXIT_OK
    cfg = write_yaml(tmp_path / "v2.yaml", {"scenario": "wigner", "models": ["kent"], "samples": 5000, "seed": 2,
                                            "baseline": str(path)})
    assert run(["verify", "--config", cfg], capsys)[0] == cli.EXIT_OK


def test_report_schema_rejects_bad_envelopes():
    with pytest.raises(jsonschema.ValidationError):
        make_report("explode", {}, {}, {})
    with pytest.raises(jsonschema.ValidationError):
        make_report("predict", {}, {}, {"total_seconds": -1.0})
    rep = make_report("predict", {}, {"x": float("nan")}, {"t": 0.1})
    assert rep["results"]["x"] == "nan"


def test_parse_config_rejects_non_mapping():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


@pytest.mark.parametrize("command", ["predict", "feasibility"])
def test_lawrence_reports_state_their_sign_convention(command, capsys):
    _, out, _ = run([command, "--scenario", "lawrence"], capsys)
    assert json.loads(out)["results"]["parity_convention"] == cli.LAWRENCE_CONVENTION
