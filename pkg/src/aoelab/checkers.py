"""Executable verdicts on extension models: AOE1, AOE2, first-person universality,
Locality, No-Superdeterminism, paradox freedom and disaccord detection.

Each flag is computed analytically from the model's record distributions when
the model has them, and statistically from sampled batches; both results are
kept in the evidence and the analytic one decides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import stats

from aoelab import quantum as q
from aoelab.distributions import JointDistribution
from aoelab.models import NULL_CODE, ExtensionModel, RunBatch, build_model, sample_runs, ZOO
from aoelab.predictions import context_distribution, fiqt_slice_distribution, friend_record_distribution
from aoelab.scenarios import ASK, SUPER, Context, Scenario

SATISFIED = "Satisfied"
SATISFIED_WITH_NULLS = "Satisfied-with-Nulls"
VIOLATED = "Violated"
NOT_APPLICABLE = "NotApplicable"

ANALYTIC_TOL = 1e-9
SIGNIFICANCE = 1e-6
STAT_SAMPLES = 100_000
DEFAULT_SEED = 20240917
ZERO_TOL = 1e-9

FLAGS = ("AOE1", "AOE2", "FPU", "Locality", "No-SD", "Paradox-freedom")
ASSUMPTIONS = ("AOE1", "AOE2", "FPU", "Locality", "No-SD")


@dataclass
class Verdict:
    flag: str
    verdict: str
    evidence: dict = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return self.verdict == VIOLATED

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "evidence": self.evidence}


@dataclass
class DisaccordWitness:
    type: str  # "I" | "II" | "III"
    context: str
    seed: int
    index: int
    record: dict
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "context": self.context,
            "seed": self.seed,
            "index": self.index,
            "record": {k: ("null" if v is None else v) for k, v in self.record.items()},
            "detail": self.detail,
        }


@dataclass
class FlagReport:
    model: str
    scenario: str
    flags: dict[str, Verdict]
    disaccord: list[DisaccordWitness]
    certificates: dict = field(default_factory=dict)

    def verdicts(self) -> dict[str, str]:
        return {k: v.verdict for k, v in self.flags.items()}

    def disaccord_types(self) -> list[str]:
        return sorted({w.type for w in self.disaccord}, key=["I", "II", "III"].index)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "scenario": self.scenario,
            "flags": {k: v.to_dict() for k, v in self.flags.items()},
            "disaccord": [w.to_dict() for w in self.disaccord],
            "certificates": self.certificates,
        }


class RunSet:
    """Lazily sampled batches, one per context, shared by all checks on one (model, scenario)."""

    def __init__(self, m: ExtensionModel, s: Scenario, n: int = STAT_SAMPLES, seed: int = DEFAULT_SEED,
                 analytic_tol: float = ANALYTIC_TOL, significance: float = SIGNIFICANCE):
        self.model, self.scenario, self.n, self.seed = m, s, int(n), int(seed)
        self.analytic_tol = float(analytic_tol)
        self.significance = float(significance)
        self._batches: dict = {}

    def batch(self, ctx: Context) -> RunBatch:
        if ctx.options not in self._batches:
            self._batches[ctx.options] = sample_runs(self.model, self.scenario, ctx, self.n, self.seed)
        return self._batches[ctx.options]


def _runs(m, s, runs, n, seed) -> RunSet:
    if runs is None:
        return RunSet(m, s, n, seed)
    if runs.model is not m or runs.scenario is not s:
        raise ValueError("run set belongs to another model or scenario")
    return runs


def _decide(flag: str, analytic: dict | None, statistical: dict | None) -> Verdict:
    evidence = {}
    if analytic is not None:
        evidence["analytic"] = analytic
    if statistical is not None:
        evidence["statistical"] = statistical
    if analytic is not None and statistical is not None:
        evidence["agree"] = analytic["verdict"] == statistical["verdict"]
    chosen = analytic if analytic is not None else statistical
    return Verdict(flag, chosen["verdict"], evidence)


def _homogeneity(tables: list[dict]) -> dict:
    """Chi-square homogeneity test of categorical counts across groups."""
    categories = sorted({c for t in tables for c in t}, key=lambda c: tuple(_sort_value(v) for v in c))
    matrix = np.array([[t.get(c, 0) for c in categories] for t in tables], dtype=float)
    matrix = matrix[:, matrix.sum(axis=0) > 0]
    if matrix.shape[1] < 2:
        return {"statistic": 0.0, "dof": 0, "p_value": 1.0}
    res = stats.chi2_contingency(matrix, correction=False)
    return {"statistic": float(res.statistic), "dof": int(res.dof), "p_value": float(res.pvalue)}


def _goodness_of_fit(counts: dict, target: JointDistribution) -> dict:
    """Multinomial chi-square of observed counts against a target distribution, plus 3-sigma cell bands."""
    n = sum(counts.values())
    cells = sorted(set(target.probs) | set(counts), key=lambda c: tuple(_sort_value(v) for v in c))
    impossible = [c for c in cells if counts.get(c, 0) > 0 and target[c] <= 0]
    exceed = 0
    for c in cells:
        p = target[c]
        if abs(counts.get(c, 0) / n - p) > 3 * math.sqrt(max(p * (1 - p), 0.0) / n) + 1e-6:
            exceed += 1
    if impossible:
        return {"n": n, "statistic": None, "p_value": 0.0, "impossible_cells": [_cell(c) for c in impossible],
                "cells_outside_3sigma": exceed}
    live = [c for c in cells if target[c] > 0]
    if len(live) < 2:
        return {"n": n, "statistic": 0.0, "p_value": 1.0, "cells_outside_3sigma": exceed}
    obs = np.array([counts.get(c, 0) for c in live], dtype=float)
    exp = np.array([target[c] for c in live]) * n
    exp *= obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return {"n": n, "statistic": float(res.statistic), "p_value": float(res.pvalue), "cells_outside_3sigma": exceed}


def _sort_value(v):
    return 2 if v is None else (0 if v == 1 else 1)


def _cell(c) -> list:
    return ["null" if v is None else v for v in c]


def _stat_verdict(p_value: float, significance: float) -> str:
    return VIOLATED if p_value < significance else SATISFIED


# ---------------------------------------------------------------------------
# AOE1


def check_aoe1(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *, n: int = STAT_SAMPLES,
               seed: int = DEFAULT_SEED) -> Verdict:
    """Exactly one outcome per performed measurement per observer; Nulls reported separately."""
    runs = _runs(m, s, runs, n, seed)
    problems = []
    null_sites = set()
    for ctx in s.contexts():
        expected = s.record_keys(ctx)
        batch = runs.batch(ctx)
        if tuple(batch.keys) != tuple(expected):
            problems.append({"context": ctx.label, "issue": "record keys differ", "keys": list(batch.keys),
                             "expected": list(expected)})
            continue
        for k in expected:
            col = np.asarray(batch.column(k))
            if col.ndim != 1 or len(col) != batch.count:
                problems.append({"context": ctx.label, "key": k, "issue": f"column of shape {list(col.shape)}: "
                                 "more than one value per record"})
                continue
            bad = ~np.isin(col, (1, -1, NULL_CODE))
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                problems.append({"context": ctx.label, "key": k, "index": i, "issue": f"value {int(col[i])}"})
            nulls = col == NULL_CODE
            if nulls.any():
                if not m.emits_nulls:
                    i = int(np.flatnonzero(nulls)[0])
                    problems.append({"context": ctx.label, "key": k, "index": i,
                                     "issue": "Null from a model that declares no Null events"})
                null_sites.add((k, ctx.label))
    if problems:
        return Verdict("AOE1", VIOLATED, {"structural": problems[:10], "n": runs.n, "seed": runs.seed})
    evidence = {"structural": "one value in {+1, -1} per record key", "n": runs.n, "seed": runs.seed}
    if null_sites:
        evidence["null_sites"] = [{"key": k, "context": c} for k, c in sorted(null_sites)]
        return Verdict("AOE1", SATISFIED_WITH_NULLS, evidence)
    return Verdict("AOE1", SATISFIED, evidence)


# ---------------------------------------------------------------------------
# AOE2 (tracking)


def _ask_pairs(s: Scenario, ctx: Context):
    return [(w.friend_key, w.super_key(o)) for w, o in zip(s.wings, ctx.options) if o.kind == ASK]


def check_aoe2_tracking(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *, n: int = STAT_SAMPLES,
                        seed: int = DEFAULT_SEED, mode: str = "both") -> Verdict:
    """In every Ask context the heard value equals the friend's (non-Null) record."""
    runs = _runs(m, s, runs, n, seed)
    contexts = [c for c in s.contexts() if _ask_pairs(s, c)]
    if not contexts:
        return Verdict("AOE2", NOT_APPLICABLE, {"reason": "scenario has no Ask option"})
    analytic = statistical = None
    if m.has_analytic and mode in ("analytic", "both"):
        worst = {"p_mismatch": 0.0}
        for ctx in contexts:
            dist = m.record_distribution(s, ctx)
            for fk, hk in _ask_pairs(s, ctx):
                pair = dist.marginal((fk, hk))
                p = sum(pr for (f, h), pr in pair.probs.items() if f is not None and f != h)
                if p > worst["p_mismatch"]:
                    worst = {"p_mismatch": p, "context": ctx.label, "friend": fk, "heard": hk}
        analytic = {"verdict": VIOLATED if worst["p_mismatch"] > runs.analytic_tol else SATISFIED, **worst}
    if mode in ("statistical", "both") or not m.has_analytic:
        total = mismatches = 0
        first = None
        for ctx in contexts:
            batch = runs.batch(ctx)
            for fk, hk in _ask_pairs(s, ctx):
                f, h = np.asarray(batch.column(fk)), np.asarray(batch.column(hk))
                bad = (f != NULL_CODE) & (f != h)
                total += int((f != NULL_CODE).sum())
                mismatches += int(bad.sum())
                if bad.any() and first is None:
                    first = {"context": ctx.label, "index": int(np.flatnonzero(bad)[0]), "friend": fk, "heard": hk}
        statistical = {"verdict": VIOLATED if mismatches else SATISFIED, "n": runs.n, "seed": runs.seed,
                       "asked_runs": total, "mismatches": mismatches}
        if first:
            statistical["first_mismatch"] = first
    return _decide("AOE2", analytic, statistical)


# ---------------------------------------------------------------------------
# first-person universality


def observer_keys(s: Scenario, ctx: Context, observer: str) -> list[tuple[str, str]]:
    """(variable, record key) pairs accessible to ``observer`` in ``ctx``, in wing order."""
    found = s.accessible(ctx, observer)
    out = []
    for w, o in zip(s.wings, ctx.options):
        if w.friend_var in found and observer == w.friend:
            out.append((w.friend_var, w.friend_key))
    for w, o in zip(s.wings, ctx.options):
        var = w.variable(o)
        if var in found and observer != w.friend:
            out.append((var, w.super_key(o)))
    return out


def quantum_observer_distribution(s: Scenario, ctx: Context, pairs) -> JointDistribution:
    variables = tuple(v for v, _ in pairs)
    keys = tuple(k for _, k in pairs)
    friend_keys = {w.friend_key for w in s.wings}
    if all(k in friend_keys for k in keys):
        base = friend_record_distribution(s)
    elif not any(k in friend_keys for k in keys):
        base = context_distribution(s, ctx)
    else:
        raise ValueError(f"observer mixes friend records and later results: {keys}")
    return base.marginal(variables).rename(dict(zip(variables, keys)))


def _non_null(d: JointDistribution) -> tuple[JointDistribution | None, float]:
    live = {c: p for c, p in d.probs.items() if None not in c and p > 0}
    total = sum(live.values())
    if total <= 0:
        return None, 0.0
    return JointDistribution(d.variables, {c: p / total for c, p in live.items()}), total


def check_first_person_universality(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *,
                                    n: int = STAT_SAMPLES, seed: int = DEFAULT_SEED, mode: str = "both") -> Verdict:
    """Per observer and context: the model's distribution of what that observer sees vs the Born rule.

    Null events are not observations; comparisons use the non-Null runs and
    record the caveat.
    """
    runs = _runs(m, s, runs, n, seed)
    tol = max(runs.analytic_tol, m.tolerance)
    do_analytic = m.has_analytic and mode in ("analytic", "both")
    do_stat = mode in ("statistical", "both") or not m.has_analytic
    observers = [p.name for p in s.parties]
    per_observer = {}
    analytic_worst = {"gap": 0.0}
    stat_worst = {"p_value": 1.0}
    caveats = []
    for obs in observers:
        a_ok = s_ok = True
        a_gap = 0.0
        s_min_p = 1.0
        for ctx in s.contexts():
            pairs = observer_keys(s, ctx, obs)
            if not pairs:
                continue
            keys = tuple(k for _, k in pairs)
            target = quantum_observer_distribution(s, ctx, pairs)
            if do_analytic:
                model_d, live = _non_null(m.record_distribution(s, ctx).marginal(keys))
                if model_d is None:
                    caveats.append({"observer": obs, "context": ctx.label, "note": "no events (all Null)"})
                else:
                    if live < 1.0 - ZERO_TOL:
                        caveats.append({"observer": obs, "context": ctx.label,
                                        "note": f"Null in {1 - live:.6g} of runs; compared on the rest"})
                    gap = model_d.total_variation(target)
                    cell_gap = model_d.max_abs_difference(target)
                    a_gap = max(a_gap, gap)
                    if cell_gap > tol:
                        a_ok = False
                    if gap > analytic_worst["gap"]:
                        analytic_worst = {"gap": gap, "max_cell_gap": cell_gap, "observer": obs,
                                          "context": ctx.label, "keys": list(keys),
                                          "model": model_d.to_dict(), "quantum": target.to_dict()}
            if do_stat:
                counts = {c: k for c, k in runs.batch(ctx).counts(keys).items() if None not in c}
                if not counts:
                    continue
                fit = _goodness_of_fit(counts, target)
                s_min_p = min(s_min_p, fit["p_value"])
                if fit["p_value"] < runs.significance:
                    s_ok = False
                if fit["p_value"] < stat_worst["p_value"]:
                    stat_worst = {"observer": obs, "context": ctx.label, **fit}
        entry = {}
        if do_analytic:
            entry["analytic"] = {"verdict": SATISFIED if a_ok else VIOLATED, "gap": a_gap}
        if do_stat:
            entry["statistical"] = {"verdict": SATISFIED if s_ok else VIOLATED, "min_p_value": s_min_p}
        per_observer[obs] = entry
    analytic = statistical = None
    if do_analytic:
        bad = [o for o, e in per_observer.items() if e["analytic"]["verdict"] == VIOLATED]
        analytic = {"verdict": VIOLATED if bad else SATISFIED, "tolerance": tol, "violating_observers": bad,
                    "worst": analytic_worst}
    if do_stat:
        bad = [o for o, e in per_observer.items() if e["statistical"]["verdict"] == VIOLATED]
        statistical = {"verdict": VIOLATED if bad else SATISFIED, "n": runs.n, "seed": runs.seed,
                       "significance": runs.significance, "violating_observers": bad, "worst": stat_worst}
    v = _decide("FPU", analytic, statistical)
    v.evidence["observers"] = per_observer
    if caveats:
        v.evidence["null_caveats"] = caveats
    return v


# ---------------------------------------------------------------------------
# No-Superdeterminism


def _correlator_spread(dists: dict[str, JointDistribution]) -> dict:
    first = next(iter(dists.values()))
    out = {}
    keys = first.variables
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            vals = {label: d.correlator(keys[i], keys[j]) for label, d in dists.items()}
            out[f"{keys[i]}*{keys[j]}"] = {"by_context": vals, "gap": max(vals.values()) - min(vals.values())}
    return out


def check_no_superdeterminism(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *, n: int = STAT_SAMPLES,
                              seed: int = DEFAULT_SEED, mode: str = "both") -> Verdict:
    """The joint distribution of all friend records (Null a category) is the same in every context."""
    runs = _runs(m, s, runs, n, seed)
    contexts = s.contexts()
    if len(contexts) < 2:
        return Verdict("No-SD", NOT_APPLICABLE, {"reason": "only one context"})
    keys = tuple(w.friend_key for w in s.wings)
    analytic = statistical = None
    if m.has_analytic and mode in ("analytic", "both"):
        dists = {c.label: m.record_distribution(s, c).marginal(keys) for c in contexts}
        ref_label = contexts[0].label
        gaps = {label: d.total_variation(dists[ref_label]) for label, d in dists.items()}
        worst = max(gaps, key=gaps.get)
        nulls = {label: {k: d.marginal((k,))[(None,)] for k in keys} for label, d in dists.items()}
        analytic = {
            "verdict": VIOLATED if gaps[worst] > runs.analytic_tol else SATISFIED,
            "reference": ref_label,
            "total_variation": gaps,
            "worst_context": worst,
            "null_probability": nulls,
            "correlators": _correlator_spread(dists) if len(keys) > 1 else {},
        }
        spread = [max(nulls[c][k] for c in nulls) - min(nulls[c][k] for c in nulls) for k in keys]
        if max(spread) > runs.analytic_tol:
            analytic["existence_dependence"] = True
    if mode in ("statistical", "both") or not m.has_analytic:
        test = _homogeneity([runs.batch(c).counts(keys) for c in contexts])
        statistical = {"verdict": _stat_verdict(test["p_value"], runs.significance), "n": runs.n, "seed": runs.seed,
                       "significance": runs.significance, **test}
    return _decide("No-SD", analytic, statistical)


# ---------------------------------------------------------------------------
# Locality (parameter independence)


def _locality_groups(s: Scenario):
    """(wing, own option, record key, contexts sharing that option)."""
    for i, (w, menu) in enumerate(zip(s.wings, s.menus)):
        for opt in menu.options:
            group = [c for c in s.contexts() if c.options[i] == opt]
            if len(group) < 2:
                continue
            for key in (w.friend_key, w.super_key(opt)):
                yield w, opt, key, group


def check_locality_parameter_independence(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *,
                                          n: int = STAT_SAMPLES, seed: int = DEFAULT_SEED,
                                          mode: str = "both") -> Verdict:
    """Each wing's single-outcome marginals do not depend on the other wings' options."""
    runs = _runs(m, s, runs, n, seed)
    if len(s.wings) < 2:
        return Verdict("Locality", NOT_APPLICABLE, {"reason": "single wing"})
    groups = list(_locality_groups(s))
    if not groups:
        return Verdict("Locality", NOT_APPLICABLE, {"reason": "no distant option varies"})
    analytic = statistical = None
    if m.has_analytic and mode in ("analytic", "both"):
        worst = {"total_variation": 0.0}
        for w, opt, key, group in groups:
            ds = [m.record_distribution(s, c).marginal((key,)) for c in group]
            gap = max(d.total_variation(ds[0]) for d in ds)
            if gap > worst["total_variation"]:
                worst = {"total_variation": gap, "key": key, "own_option": opt.label,
                         "contexts": [c.label for c in group]}
        analytic = {"verdict": VIOLATED if worst["total_variation"] > runs.analytic_tol else SATISFIED, "worst": worst,
                    "tests": len(groups)}
    if mode in ("statistical", "both") or not m.has_analytic:
        worst = {"p_value": 1.0}
        for w, opt, key, group in groups:
            test = _homogeneity([runs.batch(c).counts((key,)) for c in group])
            if test["p_value"] < worst["p_value"]:
                worst = {"key": key, "own_option": opt.label, **test}
        statistical = {"verdict": _stat_verdict(worst["p_value"], runs.significance), "n": runs.n, "seed": runs.seed,
                       "significance": runs.significance, "tests": len(groups), "worst": worst}
    return _decide("Locality", analytic, statistical)


# ---------------------------------------------------------------------------
# paradox freedom


def check_paradox_freedom(m: ExtensionModel, s: Scenario) -> Verdict:
    """No choice is informed by an outcome the model lets depend on that choice."""
    declared = m.context_dependence(s)
    loops = []
    for outcome, choice in declared:
        if outcome in s.graph and choice in s.graph and nx.has_path(s.graph, outcome, choice):
            loops.append({"outcome": outcome, "choice": choice, "path": nx.shortest_path(s.graph, outcome, choice)})
    evidence = {"declared_dependences": [list(p) for p in declared]}
    if loops:
        evidence["loops"] = loops
        return Verdict("Paradox-freedom", VIOLATED, evidence)
    return Verdict("Paradox-freedom", SATISFIED, evidence)


# ---------------------------------------------------------------------------
# disaccord


def replay(m: ExtensionModel, s: Scenario, w: DisaccordWitness) -> dict:
    """Re-sample the witnessed run from its seed and index."""
    batch = sample_runs(m, s, s.context(w.context), 1, w.seed, start=w.index)
    return batch.record(0)


def _type_iii(m, s, runs, aoe2: Verdict) -> list[DisaccordWitness]:
    if not aoe2.violated:
        return []
    for ctx in s.contexts():
        pairs = _ask_pairs(s, ctx)
        if not pairs:
            continue
        batch = runs.batch(ctx)
        for fk, hk in pairs:
            f, h = np.asarray(batch.column(fk)), np.asarray(batch.column(hk))
            bad = np.flatnonzero((f != NULL_CODE) & (f != h))
            if len(bad):
                i = int(bad[0])
                return [DisaccordWitness("III", ctx.label, runs.seed, i, {fk: int(f[i]), hk: int(h[i])},
                                         {"heard": hk, "witnessed": fk})]
    return []


def _type_ii(m, s, runs) -> list[DisaccordWitness]:
    for ctx in s.contexts():
        batch = None
        for wing, opt in zip(s.wings, ctx.options):
            if opt.kind != SUPER:
                continue
            batch = batch or runs.batch(ctx)
            record = batch.record(0)
            friends = tuple(record[w.friend_key] for w in s.wings)
            state = m.dynamical_state(s, ctx, friends)
            if state is None:
                return []
            probs = q.born_probabilities(state, wing.dilation.record_measurement())
            value = record[wing.friend_key]
            superposed = max(probs.values()) < 1 - runs.analytic_tol
            if value is None and superposed:
                form = "no-record"
            elif value is not None and probs.get(value, 0.0) < 1 - runs.analytic_tol:
                form = "definite-record"
            else:
                continue
            detail = {
                "form": form,
                "friend": wing.friend_key,
                "relative_to": wing.superobserver,
                "dynamical_state_record_probabilities": {f"{k:+d}": float(v) for k, v in sorted(probs.items())},
            }
            return [DisaccordWitness("II", ctx.label, runs.seed, 0, {wing.friend_key: value}, detail)]
    return []


def _type_i(m, s, runs) -> list[DisaccordWitness]:
    if s.kind != "ormrod-barrett":
        return []
    friend_of = {w.friend_var: w for w in s.wings}
    super_of = {w.super_var: w for w in s.wings}
    for name, events in s.slices.items():
        if not any(e.startswith("measure:") for e in events):
            continue
        slice_dist = fiqt_slice_distribution(s, name)
        for ctx in s.contexts():
            keys = []
            for var in slice_dist.variables:
                if var in friend_of:
                    keys.append(friend_of[var].friend_key)
                else:
                    w = super_of[var]
                    keys.append(w.super_key(ctx.options[w.index]))
            batch = runs.batch(ctx)
            cols = np.stack([np.asarray(batch.column(k)) for k in keys], axis=1)
            for cell in slice_dist.cells():
                if slice_dist[cell] > ZERO_TOL:
                    continue
                hit = np.flatnonzero((cols == np.array(cell)).all(axis=1))
                if len(hit):
                    i = int(hit[0])
                    return [DisaccordWitness(
                        "I", ctx.label, runs.seed, i, dict(zip(keys, (int(v) for v in cell))),
                        {"slice": name, "slice_probability": slice_dist[cell],
                         "inference": f"collapse on the {name} slice gives probability "
                                      f"{slice_dist[cell]:.3g} to this pair"},
                    )]
    return []


def detect_disaccord(m: ExtensionModel, s: Scenario, runs: RunSet | None = None, *, n: int = STAT_SAMPLES,
                     seed: int = DEFAULT_SEED, aoe2: Verdict | None = None) -> list[DisaccordWitness]:
    runs = _runs(m, s, runs, n, seed)
    if aoe2 is None:
        aoe2 = check_aoe2_tracking(m, s, runs)
    return _type_i(m, s, runs) + _type_ii(m, s, runs) + _type_iii(m, s, runs, aoe2)


# ---------------------------------------------------------------------------
# reports


def flag_report(m: ExtensionModel, s: Scenario, *, n: int = STAT_SAMPLES, seed: int = DEFAULT_SEED,
                mode: str = "both", analytic_tol: float = ANALYTIC_TOL,
                significance: float = SIGNIFICANCE) -> FlagReport:
    runs = RunSet(m, s, n, seed, analytic_tol, significance)
    aoe2 = check_aoe2_tracking(m, s, runs, mode=mode)
    flags = {
        "AOE1": check_aoe1(m, s, runs),
        "AOE2": aoe2,
        "FPU": check_first_person_universality(m, s, runs, mode=mode),
        "Locality": check_locality_parameter_independence(m, s, runs, mode=mode),
        "No-SD": check_no_superdeterminism(m, s, runs, mode=mode),
        "Paradox-freedom": check_paradox_freedom(m, s),
    }
    return FlagReport(m.name, s.name, flags, detect_disaccord(m, s, runs, aoe2=aoe2))


def given_up(report: FlagReport) -> list[str]:
    """Assumptions the model violates or only keeps with Null events."""
    return [k for k in ASSUMPTIONS if report.flags[k].verdict in (VIOLATED, SATISFIED_WITH_NULLS)]


def conditional_parameter_dependence(m: ExtensionModel, s: Scenario) -> float:
    """Largest change, across distant options, of a superobserver's result conditioned on all friend records.

    The Locality and No-SD flags look at marginals; this looks inside them.
    A model can keep every marginal fixed and still let a result given the
    friends' records depend on a distant choice.
    """
    friends = tuple(w.friend_key for w in s.wings)
    worst = 0.0
    for i, (w, menu) in enumerate(zip(s.wings, s.menus)):
        for opt in menu.options:
            group = [c for c in s.contexts() if c.options[i] == opt]
            if len(group) < 2:
                continue
            key = w.super_key(opt)
            tables = [m.record_distribution(s, c).marginal(friends + (key,)) for c in group]
            for f in {c[:-1] for t in tables for c in t.probs}:
                conds = []
                for t in tables:
                    pf = t[f + (1,)] + t[f + (-1,)] + t[f + (None,)]
                    if pf <= ZERO_TOL:
                        break
                    conds.append(t[f + (1,)] / pf)
                else:
                    worst = max(worst, max(conds) - min(conds))
    return worst


def _model_specs(models):
    for spec in models:
        if isinstance(spec, str):
            yield spec, {}
        else:
            name, params = spec
            yield name, dict(params or {})


def _flag_table(s: Scenario, models, n, seed, mode, analytic_tol, significance) -> dict:
    table = {}
    for name, params in _model_specs(models):
        model = build_model(name, s, params)
        rep = flag_report(model, s, n=n, seed=seed, mode=mode, analytic_tol=analytic_tol,
                          significance=significance)
        row = {
            "flags": rep.verdicts(),
            "disaccord": rep.disaccord_types(),
            "gives_up": given_up(rep),
        }
        escapes = list(row["gives_up"])
        if model.has_analytic and len(s.wings) > 1:
            dep = conditional_parameter_dependence(model, s)
            row["conditional_parameter_dependence"] = dep
            if dep > analytic_tol:
                escapes.append("conditional-dependence")
        if "I" in row["disaccord"]:
            escapes.append("FIQT-universality")
        row["escapes_via"] = escapes
        table[name] = row
    return table


def theorem_report(s: Scenario, *, models=ZOO, n: int = STAT_SAMPLES, seed: int = DEFAULT_SEED,
                   mode: str = "both", analytic_tol: float = ANALYTIC_TOL,
                   significance: float = SIGNIFICANCE) -> dict:
    """The no-go chain for the scenario plus the zoo's flag table."""
    from aoelab.feasibility import joint_feasibility_lp, parity_assignment_search, possibilistic_contradiction
    from aoelab.feasibility.possibilistic import SupportTable
    from aoelab.predictions import chsh_value, correlators, mermin_parities, pairwise_targets

    out: dict = {"scenario": s.name, "kind": s.kind}
    if s.kind in ("bong", "ormrod-barrett"):
        out["premise"] = ("AOE1, AOE2, Locality and No-SD together imply one context-independent joint "
                          "distribution over (A, B, C, D) reproducing every pairwise table")
        lp = joint_feasibility_lp(pairwise_targets(s))
        out["chsh_value"] = chsh_value(correlators(s))
        out["feasibility"] = lp.to_dict()
        out["contradiction"] = not lp.feasible
        if s.kind == "ormrod-barrett":
            targets = pairwise_targets(s)
            table = SupportTable.from_distributions({p: targets[p] for p in ("CD", "AD", "CB")})
            verdict = possibilistic_contradiction(table, targets["AB"])
            out["possibilistic"] = verdict.to_dict()
            out["contradiction"] = out["contradiction"] or verdict.contradiction
    elif s.kind == "lawrence":
        parities = mermin_parities(s)
        signs = tuple(int(round(p)) for p in parities)
        solutions = parity_assignment_search(signs)
        out["premise"] = ("AOE1, AOE2, Locality and No-SD together imply fixed values for "
                          "A1, A2, A3, B1, B2, B3 in every run")
        out["parities"] = list(parities)
        out["assignments"] = [list(a) for a in solutions]
        out["contradiction"] = not solutions
    else:
        out["premise"] = "single friend: no no-go chain, flags only"
        out["contradiction"] = False
    out["models"] = _flag_table(s, models, n, seed, mode, analytic_tol, significance)
    if out["contradiction"]:
        out["every_model_gives_up_something"] = all(row["escapes_via"] for row in out["models"].values())
    if s.kind == "ormrod-barrett" and "kent" in out["models"]:
        out["models"]["kent"]["fiqt_readings"] = {
            "first-person": "upheld: no observer sees anything unitary theory forbids",
            "frame-independent": "not upheld: FIQT assigns outcomes to friend events the model leaves Null",
        }
    return out


def bong_theorem_report(s: Scenario, **kwargs) -> dict:
    if s.kind != "bong":
        raise ValueError(f"bong_theorem_report needs a bong scenario, got {s.kind!r}")
    return theorem_report(s, **kwargs)
