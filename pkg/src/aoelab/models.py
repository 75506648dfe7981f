"""Extensions of quantum mechanics: per-run outcome assignments for every observer.

Every zoo model is defined by an analytic distribution over full outcome
records (friend records first, then the superobservers' results) and sampled
from it by inverse-CDF lookup on one uniform per record. Null (the event did
not happen) is ``None`` in distributions and ``0`` in sample columns.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from aoelab import quantum as q
from aoelab.distributions import JointDistribution, product
from aoelab.predictions import context_distribution, friend_marginal, pairwise_targets
from aoelab.scenarios import ASK, SUPER, Context, Scenario

NULL_CODE = 0
NULL_TOKEN = "null"
CHUNK = 8192  # records per RNG stream; batches split on chunk boundaries reproduce exactly
NEGLIGIBLE = 1e-15


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# batches


@dataclass
class RunBatch:
    """Columnar outcome records: one int8 column per record key, 0 for Null."""

    model: str
    scenario: str
    context: str
    seed: int
    start: int
    keys: tuple[str, ...]
    columns: dict[str, np.ndarray]

    @property
    def count(self) -> int:
        return len(self.columns[self.keys[0]]) if self.keys else 0

    def column(self, key: str) -> np.ndarray:
        try:
            return self.columns[key]
        except KeyError:
            raise KeyError(f"batch has no record key {key!r}; keys are {self.keys}") from None

    def record(self, i: int) -> dict:
        return {k: _decode(self.columns[k][i]) for k in self.keys}

    def records(self) -> list[dict]:
        return [self.record(i) for i in range(self.count)]

    def counts(self, keys) -> dict[tuple, int]:
        """Occurrences of each value tuple over ``keys`` (Null as None)."""
        keys = tuple(keys)
        # base-3 code of each row; values are -1, 0 (Null), +1
        code = np.zeros(self.count, dtype=np.int64)
        for k in keys:
            col = np.asarray(self.column(k), dtype=np.int64)
            if col.ndim != 1 or ((col < -1) | (col > 1)).any():
                raise ModelError(f"column {k!r} is not one value in {{-1, 0, +1}} per record")
            code = code * 3 + (col + 1)
        n = np.bincount(code, minlength=3 ** len(keys))
        out = {}
        for code_value in np.flatnonzero(n):
            rest, digits = int(code_value), []
            for _ in keys:
                rest, r = divmod(rest, 3)
                digits.append(_decode(r - 1))
            out[tuple(reversed(digits))] = int(n[code_value])
        return out

    def header(self) -> dict:
        return {
            "model": self.model,
            "scenario": self.scenario,
            "context": self.context,
            "seed": self.seed,
            "start": self.start,
            "count": self.count,
            "keys": list(self.keys),
        }

    def to_jsonl(self) -> str:
        """Header line, then one JSON object per record (keys in record order)."""
        buf = io.StringIO()
        buf.write(json.dumps({"batch": self.header()}) + "\n")
        tokens = {1: "1", -1: "-1", 0: json.dumps(NULL_TOKEN)}
        names = [json.dumps(k) for k in self.keys]
        cols = [self.columns[k].tolist() for k in self.keys]
        for row in zip(*cols):
            body = ", ".join(f"{n}: {tokens[v]}" for n, v in zip(names, row))
            buf.write("{" + body + "}\n")
        return buf.getvalue()

    @classmethod
    def from_jsonl(cls, text: str) -> "RunBatch":
        lines = text.splitlines()
        if not lines:
            raise ModelError("empty batch file")
        head = json.loads(lines[0])["batch"]
        keys = tuple(head["keys"])
        rows = [json.loads(line) for line in lines[1:] if line.strip()]
        if len(rows) != head["count"]:
            raise ModelError(f"batch header says {head['count']} records, found {len(rows)}")
        columns = {
            k: np.array([NULL_CODE if r[k] == NULL_TOKEN else int(r[k]) for r in rows], dtype=np.int8)
            for k in keys
        }
        return cls(head["model"], head["scenario"], head["context"], head["seed"], head["start"], keys, columns)


def _decode(v) -> int | None:
    v = int(v)
    return None if v == NULL_CODE else v


def _encode(v) -> int:
    return NULL_CODE if v is None else int(v)


# ---------------------------------------------------------------------------
# seeding


def stream_key(seed: int, model: str, scenario: str, context: str) -> np.ndarray:
    digest = hashlib.sha256(f"{int(seed)}|{model}|{scenario}|{context}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def uniforms(seed: int, model: str, scenario: str, context: str, start: int, n: int) -> np.ndarray:
    """Uniforms for record indices [start, start + n).

    Record i draws from chunk i // CHUNK, each chunk being its own Philox
    counter block, so any index range is reproducible on its own.
    """
    if start < 0 or n < 0:
        raise ValueError("start and n must be nonnegative")
    key = stream_key(seed, model, scenario, context)
    first, last = start // CHUNK, (start + n - 1) // CHUNK if n else start // CHUNK - 1
    parts = []
    for chunk in range(first, last + 1):
        gen = np.random.Generator(np.random.Philox(key=key, counter=np.array([0, 0, 0, chunk], dtype=np.uint64)))
        parts.append(gen.random(CHUNK))
    if not parts:
        return np.empty(0)
    flat = np.concatenate(parts)
    offset = start - first * CHUNK
    return flat[offset:offset + n]


# ---------------------------------------------------------------------------
# models


class ExtensionModel:
    """Base class. Subclasses provide ``record_distribution`` or override ``sample``."""

    name = "extension"
    has_analytic = True
    emits_nulls = False
    # precision to which the model's own probabilities are specified
    tolerance = 0.0

    def __init__(self):
        self._cache: dict = {}

    def record_distribution(self, s: Scenario, ctx: Context) -> JointDistribution:
        key = (id(s), ctx.options)
        if key not in self._cache:
            self._cache[key] = (s, self._record_distribution(s, ctx))
        return self._cache[key][1]

    def _record_distribution(self, s: Scenario, ctx: Context) -> JointDistribution:
        raise NotImplementedError

    def sample(self, s: Scenario, ctx: Context, u: np.ndarray) -> dict[str, np.ndarray]:
        dist = self.record_distribution(s, ctx)
        cells = [c for c in dist.cells() if dist[c] > NEGLIGIBLE]
        cum = np.cumsum([dist[c] for c in cells])
        idx = np.minimum(np.searchsorted(cum, u * cum[-1], side="right"), len(cells) - 1)
        table = np.array([[_encode(v) for v in c] for c in cells], dtype=np.int8)
        return {k: table[idx, j] for j, k in enumerate(dist.variables)}

    def dynamical_state(self, s: Scenario, ctx: Context, friend_values: tuple) -> q.PureState | None:
        """State of the labs relative to a superobserver, given the friends' records; None if undeclared."""
        return None

    def context_dependence(self, s: Scenario) -> list[tuple[str, str]]:
        """(outcome node, choice node) pairs: outcomes whose statistics the model lets that choice shape."""
        return []

    def describe(self) -> dict:
        return {"name": self.name, "has_analytic": self.has_analytic, "emits_nulls": self.emits_nulls}


def _ask_wings(s: Scenario, ctx: Context) -> list[bool]:
    return [o.kind == ASK for o in ctx.options]


def _friend_keys(s: Scenario) -> tuple[str, ...]:
    return tuple(w.friend_key for w in s.wings)


def _accessed(s: Scenario, ctx: Context) -> JointDistribution:
    return context_distribution(s, ctx).rename(dict(zip(s.context_variables(ctx), s.accessed_keys(ctx))))


def _assemble(s: Scenario, ctx: Context, accessed: JointDistribution, friend_rule) -> JointDistribution:
    """Full-record distribution from the accessed tuple and a per-wing friend-record rule.

    ``friend_rule(i, asked_value)`` returns {value: probability} for wing i's
    friend record given what (if anything) was asked.
    """
    asks = _ask_wings(s, ctx)
    cells: dict[tuple, float] = {}
    for t, pt in accessed.probs.items():
        if pt <= 0:
            continue
        partial = {(): pt}
        for i, asked in enumerate(asks):
            rule = friend_rule(i, t[i] if asked else None)
            partial = {f + (v,): pf * pv for f, pf in partial.items() for v, pv in rule.items() if pv > 0}
        for f, pf in partial.items():
            cells[f + t] = cells.get(f + t, 0.0) + pf
    return JointDistribution(_friend_keys(s) + accessed.variables, cells)


def _marginal_rule(s: Scenario, i: int) -> dict:
    m = friend_marginal(s, i)
    return {v[0]: m[v] for v in ((1,), (-1,))}


class CollapseAtFriend(ExtensionModel):
    """Physical collapse at each friend's measurement; later measurements act on the collapsed state."""

    name = "collapse-at-friend"

    def _record_distribution(self, s, ctx):
        state = s.dilated_state()
        records = q.product_measurement([w.dilation.record_measurement() for w in s.wings])
        later = q.product_measurement([s.wing_measurement(w, o) for w, o in zip(s.wings, ctx.options)])
        cells: dict[tuple, float] = {}
        for f, pf in q.born_probabilities(state, records).items():
            if pf <= NEGLIGIBLE:
                continue
            post, _ = q.collapse(state, records, f)
            for r, pr in q.born_probabilities(post, later).items():
                cells[f + r] = cells.get(f + r, 0.0) + pf * pr
        return JointDistribution(_friend_keys(s) + s.accessed_keys(ctx), cells)

    def dynamical_state(self, s, ctx, friend_values):
        records = q.product_measurement([w.dilation.record_measurement() for w in s.wings])
        post, _ = q.collapse(s.dilated_state(), records, tuple(friend_values))
        return post


class RqmCpl(ExtensionModel):
    """Accessed outcomes from the quantum context distribution; asked records agree with the answer.

    Records nobody accesses are drawn from their own Born marginals,
    independently across wings, and the whole context is an input.
    """

    name = "rqm-cpl"

    def _record_distribution(self, s, ctx):
        def rule(i, asked):
            return {asked: 1.0} if asked is not None else _marginal_rule(s, i)

        return _assemble(s, ctx, _accessed(s, ctx), rule)

    def dynamical_state(self, s, ctx, friend_values):
        return s.dilated_state()

    def context_dependence(self, s):
        return [(w.measure_node, v.choice_node) for w in s.wings for v in s.wings]


class RqmNoCpl(RqmCpl):
    """RqmCpl without cross-perspective links: every friend record is an independent fresh draw."""

    name = "rqm-no-cpl"

    def _record_distribution(self, s, ctx):
        return _assemble(s, ctx, _accessed(s, ctx), lambda i, asked: _marginal_rule(s, i))

    def context_dependence(self, s):
        return []


class KentFinalMeasurement(ExtensionModel):
    """Only records that survive to the final measurement are events; supermeasured friends see nothing."""

    name = "kent"
    emits_nulls = True

    def _record_distribution(self, s, ctx):
        def rule(i, asked):
            return {asked: 1.0} if asked is not None else {None: 1.0}

        return _assemble(s, ctx, _accessed(s, ctx), rule)

    def dynamical_state(self, s, ctx, friend_values):
        return s.dilated_state()

    def context_dependence(self, s):
        return [(w.measure_node, w.choice_node) for w in s.wings]


class NaiveAbsolute(ExtensionModel):
    """Every variable drawn once per run from one context-independent joint.

    ``strategy`` is a JointDistribution over the friend and superobserver
    variables (e.g. C, D, A, B); asking a friend returns the friend's value.
    """

    name = "naive-absolute"

    def __init__(self, strategy: JointDistribution, label: str = "explicit", tolerance: float = 0.0):
        super().__init__()
        self.strategy = strategy
        self.label = label
        self.tolerance = tolerance

    def _record_distribution(self, s, ctx):
        needed = [w.friend_var for w in s.wings] + [w.variable(o) for w, o in zip(s.wings, ctx.options)]
        missing = set(needed) - set(self.strategy.variables)
        if missing:
            raise ModelError(f"strategy does not cover {sorted(missing)}")
        cells: dict[tuple, float] = {}
        idx = [self.strategy.variables.index(v) for v in needed]
        for cell, p in self.strategy.probs.items():
            key = tuple(cell[i] for i in idx)
            cells[key] = cells.get(key, 0.0) + p
        return JointDistribution(_friend_keys(s) + s.accessed_keys(ctx), cells)

    def describe(self):
        return {**super().describe(), "strategy": self.label}


# ---------------------------------------------------------------------------
# strategies for NaiveAbsolute


def _variables(s: Scenario) -> tuple[str, ...]:
    out = [w.friend_var for w in s.wings]
    for w, menu in zip(s.wings, s.menus):
        if any(o.kind == SUPER for o in menu.options):
            out.append(w.super_var)
    return tuple(out)


def _single_marginals(s: Scenario) -> dict[str, float]:
    """Born mean of every variable in the context where it is measured."""
    means = {}
    for ctx in s.contexts():
        dist = context_distribution(s, ctx)
        for v in dist.variables:
            means.setdefault(v, dist.mean(v))
    for i, w in enumerate(s.wings):
        means.setdefault(w.friend_var, friend_marginal(s, i).mean(w.friend_var))
    return means


def product_strategy(s: Scenario) -> JointDistribution:
    means = _single_marginals(s)
    parts = [JointDistribution((v,), {(1,): (1 + means[v]) / 2, (-1,): (1 - means[v]) / 2}) for v in _variables(s)]
    return product(*parts)


def classical_optimal_strategy(s: Scenario) -> JointDistribution:
    """Joint over (A, B, C, D) with the quantum single-variable means that minimises the
    largest deviation of the four pairwise correlators from their quantum values."""
    from scipy.optimize import linprog

    from aoelab.feasibility.lp import PAIRS, VARIABLES, VERTICES

    targets = pairwise_targets(s)
    means = {}
    for p in PAIRS:
        for v in p:
            means.setdefault(v, targets[p].mean(v))
    corr = {p: targets[p].correlator(p[0], p[1]) for p in PAIRS}
    nv = len(VERTICES)
    # variables: 16 vertex weights, then t
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    a_eq = [np.append(np.ones(nv), 0.0)]
    b_eq = [1.0]
    for k, v in enumerate(VARIABLES):
        a_eq.append(np.append([vert[k] for vert in VERTICES], 0.0))
        b_eq.append(means[v])
    a_ub, b_ub = [], []
    for p in PAIRS:
        i, j = VARIABLES.index(p[0]), VARIABLES.index(p[1])
        row = np.array([vert[i] * vert[j] for vert in VERTICES], dtype=float)
        a_ub.append(np.append(row, -1.0))
        b_ub.append(corr[p])
        a_ub.append(np.append(-row, -1.0))
        b_ub.append(-corr[p])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (nv + 1), method="highs")
    if res.status != 0:
        raise ModelError(f"classical-optimal strategy LP failed: {res.message}")
    w = np.clip(res.x[:nv], 0.0, None)
    w = w / w.sum()
    cells = {(v[2], v[3], v[0], v[1]): float(p) for v, p in zip(VERTICES, w) if p > 0}
    return JointDistribution(("C", "D", "A", "B"), cells)


def lp_witness_strategy(s: Scenario) -> JointDistribution:
    from aoelab.feasibility.lp import joint_feasibility_lp

    result = joint_feasibility_lp(pairwise_targets(s))
    if not result.feasible:
        raise ModelError("no context-independent joint reproduces the quantum pairs here; "
                         "the LP witness strategy needs non-violating angles")
    cells = {(v[2], v[3], v[0], v[1]): float(p) for v, p in result.witness.items() if p > 0}
    return JointDistribution(("C", "D", "A", "B"), cells)


def uniform_strategy(s: Scenario) -> JointDistribution:
    variables = _variables(s)
    return product(*(JointDistribution((v,), {(1,): 0.5, (-1,): 0.5}) for v in variables))


# LP-based strategies are only specified to the solver / rounding precision
STRATEGY_TOLERANCE = 1e-6

STRATEGIES = {
    "classical-optimal": classical_optimal_strategy,
    "lp-witness": lp_witness_strategy,
    "product": product_strategy,
    "uniform": uniform_strategy,
}


def naive_absolute_model(s: Scenario, strategy: str | JointDistribution | None = None) -> NaiveAbsolute:
    """Default strategy: classical-optimal for two-wing scenarios, product of Born marginals otherwise."""
    if strategy is None:
        strategy = "classical-optimal" if len(s.wings) == 2 and s.kind != "wigner" else "product"
    if isinstance(strategy, JointDistribution):
        return NaiveAbsolute(strategy)
    try:
        build = STRATEGIES[strategy]
    except KeyError:
        raise ModelError(f"unknown strategy {strategy!r}; choose from {sorted(STRATEGIES)}") from None
    tol = STRATEGY_TOLERANCE if strategy in ("classical-optimal", "lp-witness") else 0.0
    return NaiveAbsolute(build(s), label=strategy, tolerance=tol)


def collapse_at_friend_model(s: Scenario | None = None) -> CollapseAtFriend:
    return CollapseAtFriend()


def rqm_cpl_model(s: Scenario | None = None) -> RqmCpl:
    return RqmCpl()


def rqm_no_cpl_model(s: Scenario | None = None) -> RqmNoCpl:
    return RqmNoCpl()


def kent_final_measurement_model(s: Scenario | None = None) -> KentFinalMeasurement:
    return KentFinalMeasurement()


MODELS = {
    "collapse-at-friend": collapse_at_friend_model,
    "rqm-cpl": rqm_cpl_model,
    "kent": kent_final_measurement_model,
    "naive-absolute": naive_absolute_model,
    "rqm-no-cpl": rqm_no_cpl_model,
}
ZOO = ("collapse-at-friend", "rqm-cpl", "kent", "naive-absolute")


def build_model(name: str, s: Scenario, params: Mapping | None = None) -> ExtensionModel:
    params = dict(params or {})
    try:
        factory = MODELS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    if name == "naive-absolute":
        strategy = params.pop("strategy", None)
        model = factory(s, strategy)
    else:
        model = factory(s)
    if params:
        raise ModelError(f"model {name!r} takes no parameters {sorted(params)}")
    return model


# ---------------------------------------------------------------------------
# sampling


def sample_runs(m: ExtensionModel, s: Scenario, ctx: Context, n: int, seed: int, start: int = 0) -> RunBatch:
    """Records ``start .. start + n - 1`` of the (model, scenario, context, seed) stream."""
    if n < 1:
        raise ValueError("sample_runs needs n >= 1")
    u = uniforms(seed, m.name, s.name, ctx.label, start, n)
    columns = m.sample(s, ctx, u)
    keys = tuple(columns)
    return RunBatch(m.name, s.name, ctx.label, int(seed), int(start), keys, columns)


def concat(batches: list[RunBatch]) -> RunBatch:
    """Join consecutive index ranges of one stream."""
    first = batches[0]
    pos = first.start
    for b in batches:
        if (b.model, b.scenario, b.context, b.seed, b.keys) != (first.model, first.scenario, first.context,
                                                                 first.seed, first.keys):
            raise ModelError("batches come from different streams")
        if b.start != pos:
            raise ModelError(f"batch starting at {b.start} does not follow index {pos}")
        pos += b.count
    columns = {k: np.concatenate([b.columns[k] for b in batches]) for k in first.keys}
    return RunBatch(first.model, first.scenario, first.context, first.seed, first.start, first.keys, columns)


def empirical_distribution(batch: RunBatch, keys=None) -> JointDistribution:
    keys = batch.keys if keys is None else tuple(keys)
    counts = batch.counts(keys)
    total = sum(counts.values())
    return JointDistribution(keys, {c: n / total for c, n in counts.items()})


def binomial_band(p: float, n: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(max(p * (1 - p), 0.0) / n) + 1e-6
