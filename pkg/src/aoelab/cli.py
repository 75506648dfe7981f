"""Command line: predict | feasibility | simulate | verify."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import resources
from pathlib import Path

from aoelab import checkers, predictions
from aoelab.config import ConfigError, RunConfig, build_scenario, load_config, parse_config, target_distributions
from aoelab.feasibility import joint_feasibility_lp, parity_assignment_search, possibilistic_contradiction
from aoelab.feasibility.hardy import default_hardy_configuration
from aoelab.feasibility.lp import FeasibilityInputError
from aoelab.feasibility.possibilistic import SupportTable
from aoelab.models import MODELS, ModelError, build_model, empirical_distribution, sample_runs
from aoelab.report import make_report, render
from aoelab.scenarios import PRESETS, Scenario, ScenarioError

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
BASELINE_SCHEMA = "aoelab.baseline/1"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


LAWRENCE_CONVENTION = ("parity = product of the three accessed +/-1 outcomes; slot i pairs Alice's "
                       "record i with Bob's supermeasurement on qubit i and memory i; |0> reads +1")

def describe_scenario(s: Scenario) -> dict:
    return {
        "kind": s.kind,
        "name": s.name,
        "params": s.params,
        "parties": [{"name": p.name, "role": p.role} for p in s.parties],
        "wings": [
            {"friend": w.friend, "superobserver": w.superobserver, "friend_var": w.friend_var,
             "super_var": w.super_var, "friend_angle": w.friend_angle}
            for w in s.wings
        ],
        "menus": {m.superobserver: [o.label if o.angle is None else f"{o.label}({o.angle!r})" for o in m.options]
                  for m in s.menus},
        "contexts": [c.label for c in s.contexts()],
        "slices": {k: list(v) for k, v in s.slices.items()},
    }


def _contexts(s: Scenario, labels):
    if not labels:
        return s.contexts()
    try:
        return [s.context(label) for label in labels]
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None


def _observer_expectations(dist, keys) -> dict:
    """E[product] for every nonempty subset of ``keys`` (Null contributes zero)."""
    out = {}
    n = len(keys)
    for mask in range(1, 2 ** n):
        subset = tuple(k for i, k in enumerate(keys) if mask >> i & 1)
        out["*".join(subset)] = dist.expectation_of_product(subset)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_predict(cfg: RunConfig) -> dict:
    s = build_scenario(cfg.scenario)
    out = {"scenario": describe_scenario(s), "contexts": {}}
    for ctx in s.contexts():
        full = predictions.context_distribution(s, ctx, method="dilation")
        eff = predictions.context_distribution(s, ctx, method="effective")
        out["contexts"][ctx.label] = {
            "distribution": full.to_dict(),
            "path_gap": full.max_abs_difference(eff),
        }
    out["friend_records"] = predictions.friend_record_distribution(s).to_dict()
    if s.kind in ("bong", "ormrod-barrett"):
        corr = predictions.correlators(s)
        signs, value = predictions.best_chsh_pattern(corr)
        out["pairwise"] = {p: d.to_dict() for p, d in predictions.pairwise_targets(s).items()}
        out["correlators"] = corr.to_dict()
        out["chsh"] = {"value": predictions.chsh_value(corr), "signs": list(signs)}
    if s.kind == "lawrence":
        trios = ["".join(t) for t in predictions.MERMIN_TRIOS]
        out["parities"] = dict(zip(trios, predictions.mermin_parities(s)))
        out["parity_convention"] = LAWRENCE_CONVENTION
    if s.slices:
        out["slices"] = {name: predictions.fiqt_slice_distribution(s, name).to_dict() for name in s.slices}
    return out


def cmd_feasibility(cfg: RunConfig) -> dict:
    if cfg.targets is not None:
        try:
            result = joint_feasibility_lp(target_distributions(cfg.targets))
        except FeasibilityInputError as exc:
            raise UsageError(f"feasibility input error: {exc}") from None
        return {"source": "targets", "lp": result.to_dict()}
    s = build_scenario(cfg.scenario)
    out = {"scenario": describe_scenario(s)}
    if s.kind in ("bong", "ormrod-barrett"):
        targets = predictions.pairwise_targets(s)
        try:
            result = joint_feasibility_lp(targets)
        except FeasibilityInputError as exc:
            raise UsageError(f"feasibility input error: {exc}") from None
        out["lp"] = result.to_dict()
        if s.kind == "ormrod-barrett":
            table = SupportTable.from_distributions({p: targets[p] for p in ("CD", "AD", "CB")})
            out["possibilistic"] = possibilistic_contradiction(table, targets["AB"]).to_dict()
            if cfg.scenario.get("preset") == "ormrod-barrett" or cfg.scenario.get("state") == "hardy":
                out["hardy"] = default_hardy_configuration().to_dict()
    elif s.kind == "lawrence":
        parities = predictions.mermin_parities(s)
        signs = tuple(int(round(p)) for p in parities)
        found = parity_assignment_search(signs)
        out["parities"] = list(parities)
        out["parity_convention"] = LAWRENCE_CONVENTION
        out["assignments"] = [list(a) for a in found]
        out["verdict"] = "NoAssignment" if not found else "AssignmentsExist"
    else:
        out["verdict"] = "NotApplicable"
        out["note"] = "a single friend poses no joint-assignment question"
    return out


def batch_filename(model: str, scenario: str, context: str) -> str:
    return f"{model}__{scenario}__{context.replace(',', '-')}.jsonl"


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> dict:
    if cfg.seed is None:
        raise UsageError("simulate needs a seed (--seed or seed: in the config)")
    s = build_scenario(cfg.scenario)
    specs = cfg.model_specs() or [("rqm-cpl", {})]
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror or exc}") from None
    batches = []
    for name, params in specs:
        model = build_model(name, s, params)
        for ctx in _contexts(s, cfg.contexts):
            batch = sample_runs(model, s, ctx, cfg.samples, cfg.seed)
            text = batch.to_jsonl()
            path = out_dir / batch_filename(name, s.name, ctx.label)
            try:
                path.write_text(text)
            except OSError as exc:
                raise OSError(f"cannot write batch {path}: {exc.strerror or exc}") from None
            emp = empirical_distribution(batch)
            entry = {
                "model": name,
                "context": ctx.label,
                "file": path.name,
                "sha256": hashlib.sha256(text.encode()).hexdigest(),
                "count": batch.count,
                "null_fraction": {k: float((batch.column(k) == 0).mean()) for k in batch.keys},
            }
            if model.has_analytic:
                analytic = model.record_distribution(s, ctx)
                entry["model_delta"] = {
                    "total_variation": emp.total_variation(analytic),
                    "max_cell": emp.max_abs_difference(analytic),
                }
            fpu = {}
            for party in s.parties:
                pairs = checkers.observer_keys(s, ctx, party.name)
                if not pairs:
                    continue
                keys = tuple(k for _, k in pairs)
                quantum = checkers.quantum_observer_distribution(s, ctx, pairs)
                e_emp = _observer_expectations(emp.marginal(keys), keys)
                e_q = _observer_expectations(quantum, keys)
                fpu[party.name] = max(abs(e_emp[k] - e_q[k]) for k in e_q)
            entry["fpu_delta"] = fpu
            entry["max_fpu_delta"] = max(fpu.values()) if fpu else 0.0
            batches.append(entry)
    return {"scenario": describe_scenario(s), "samples": cfg.samples, "seed": cfg.seed, "batches": batches}


def default_baseline_path() -> Path:
    return Path(str(resources.files("aoelab") / "data" / "baseline.json"))


def verdict_table(cfg: RunConfig, mode: str = "both") -> dict:
    specs = cfg.model_specs() or [(name, {}) for name in MODELS]
    table = {}
    for spec in cfg.scenario_specs():
        s = build_scenario(spec)
        rep = checkers.theorem_report(
            s, models=specs, n=cfg.samples, seed=cfg.seed, mode=mode,
            analytic_tol=cfg.tolerances["analytic"], significance=cfg.tolerances["significance"],
        )
        table[s.name] = {
            "contradiction": rep["contradiction"],
            "models": {name: {"flags": row["flags"], "disaccord": row["disaccord"]}
                       for name, row in rep["models"].items()},
        }
    return table


def _agreement_problems(cfg: RunConfig) -> list[dict]:
    """Flags whose statistical verdict differs from the analytic one."""
    problems = []
    specs = cfg.model_specs() or [(name, {}) for name in MODELS]
    for spec in cfg.scenario_specs():
        s = build_scenario(spec)
        for name, params in specs:
            rep = checkers.flag_report(build_model(name, s, params), s, n=cfg.samples, seed=cfg.seed,
                                       analytic_tol=cfg.tolerances["analytic"],
                                       significance=cfg.tolerances["significance"])
            for flag, v in rep.flags.items():
                if v.evidence.get("agree") is False:
                    problems.append({"scenario": s.name, "model": name, "flag": flag,
                                     "analytic": v.evidence["analytic"]["verdict"],
                                     "statistical": v.evidence["statistical"]["verdict"]})
    return problems


def diff_tables(expected: dict, actual: dict) -> list[dict]:
    diffs = []
    for scen, got in actual.items():
        want = expected.get(scen)
        if want is None:
            diffs.append({"scenario": scen, "issue": "scenario missing from baseline"})
            continue
        if want.get("contradiction") != got["contradiction"]:
            diffs.append({"scenario": scen, "field": "contradiction", "expected": want.get("contradiction"),
                          "actual": got["contradiction"]})
        for model, row in got["models"].items():
            base = want.get("models", {}).get(model)
            if base is None:
                diffs.append({"scenario": scen, "model": model, "issue": "model missing from baseline"})
                continue
            for flag, verdict in row["flags"].items():
                if base["flags"].get(flag) != verdict:
                    diffs.append({"scenario": scen, "model": model, "field": flag,
                                  "expected": base["flags"].get(flag), "actual": verdict})
            if list(base.get("disaccord", [])) != list(row["disaccord"]):
                diffs.append({"scenario": scen, "model": model, "field": "disaccord",
                              "expected": base.get("disaccord"), "actual": row["disaccord"]})
    return diffs


def load_baseline(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"baseline not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read baseline {path}: {exc}") from None
    if data.get("schema") != BASELINE_SCHEMA or "verdicts" not in data:
        raise UsageError(f"{path} is not an aoelab baseline ({BASELINE_SCHEMA})")
    return data


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    if cfg.seed is None:
        raise UsageError("verify needs a seed (--seed or seed: in the config)")
    path = Path(cfg.baseline) if cfg.baseline else default_baseline_path()
    baseline = load_baseline(path)
    actual = verdict_table(cfg)
    diffs = diff_tables(baseline["verdicts"], actual)
    disagreements = _agreement_problems(cfg)
    status = "match" if not diffs and not disagreements else "mismatch"
    results = {
        "baseline": path.name,
        "status": status,
        "verdicts": actual,
        "diff": diffs,
        "statistical_disagreements": disagreements,
    }
    return results, EXIT_OK if status == "match" else EXIT_MISMATCH


def write_baseline(cfg: RunConfig, path: Path) -> None:
    """Regenerate the regression baseline from the analytic verdicts."""
    table = verdict_table(cfg, mode="analytic")
    data = {"schema": BASELINE_SCHEMA, "scenarios": cfg.scenario_specs(), "verdicts": table}
    path.write_text(json.dumps(data, indent=2) + "\n")


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    common.add_argument("--scenario", help=f"preset name ({', '.join(PRESETS)}); overrides the config")
    common.add_argument("--model", action="append", help="model name (repeatable); overrides the config")
    common.add_argument("--samples", type=int, help="records per context")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--format", choices=("json", "md"), help="report format")
    common.add_argument("--out", type=Path, help="report file (simulate: output directory)")
    parser = argparse.ArgumentParser(prog="aoelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("predict", parents=[common], help="quantum predictions for every context and slice")
    sub.add_parser("feasibility", parents=[common], help="joint-assignment verdicts with certificates")
    sub.add_parser("simulate", parents=[common], help="sample outcome records to JSON-lines batches")
    verify = sub.add_parser("verify", parents=[common], help="flag suite against the regression baseline")
    verify.add_argument("--write-baseline", type=Path, help="regenerate the baseline at PATH and exit")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.scenario:
        overrides["scenario"] = args.scenario
    if args.model:
        overrides["models"] = args.model
    if args.samples is not None:
        overrides["samples"] = args.samples
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format:
        overrides["format"] = args.format
    if overrides:
        merged = {**cfg.echo(), **overrides}
        if "scenario" in overrides:
            merged.pop("scenarios", None)
        cfg = parse_config(merged, source="command line")
    return cfg


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report {out}: {exc.strerror or exc}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        started = time.perf_counter()
        code = EXIT_OK
        if args.command == "predict":
            results = cmd_predict(cfg)
        elif args.command == "feasibility":
            results = cmd_feasibility(cfg)
        elif args.command == "simulate":
            if args.out is None:
                raise UsageError("simulate needs --out DIR for the batch files")
            results = cmd_simulate(cfg, args.out)
        else:
            if args.write_baseline:
                if cfg.seed is None:
                    raise UsageError("verify needs a seed (--seed or seed: in the config)")
                write_baseline(cfg, args.write_baseline)
                print(f"baseline written to {args.write_baseline}")
                return EXIT_OK
            results, code = cmd_verify(cfg)
        timings = {"total_seconds": time.perf_counter() - started}
        report = make_report(args.command, cfg.echo(), results, timings)
        text = render(report, cfg.format)
        if args.command == "simulate":
            _emit(text, args.out / f"summary.{cfg.format}")
            sys.stdout.write(text)
        else:
            _emit(text, args.out)
        if code == EXIT_MISMATCH:
            print(f"verify: {len(results['diff'])} verdict(s) differ from the baseline, "
                  f"{len(results['statistical_disagreements'])} statistical disagreement(s)", file=sys.stderr)
        return code
    except (ConfigError, UsageError, ModelError, ScenarioError) as exc:
        print(f"aoelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"aoelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
