"""Unitary-quantum predictions per context and per spacelike slice."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from aoelab import quantum as q
from aoelab.distributions import JointDistribution
from aoelab.scenarios import ASK, SUPER, Context, Option, Scenario, ScenarioError

PATH_TOL = 1e-9


class PredictionError(ValueError):
    pass


def context_distribution(s: Scenario, ctx: Context, method: str = "dilation") -> JointDistribution:
    """Distribution over the accessible outcomes of ``ctx``.

    ``method="dilation"`` evolves every lab unitarily and measures jointly;
    ``"effective"`` measures the undisturbed systems with the equivalent
    single-qubit observables; ``"both"`` computes the two and checks them.
    """
    variables = s.context_variables(ctx)
    if method == "dilation":
        return _cached_dilation(s, ctx.options)
    if method == "effective":
        return _effective_distribution(s, ctx, variables)
    if method == "both":
        full = _cached_dilation(s, ctx.options)
        eff = _effective_distribution(s, ctx, variables)
        gap = full.max_abs_difference(eff)
        if gap > PATH_TOL:
            raise PredictionError(f"dilation and effective paths disagree by {gap:.3g} in {ctx}")
        return full
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=512)
def _cached_dilation(s: Scenario, options: tuple[Option, ...]) -> JointDistribution:
    ctx = Context(options)
    variables = s.context_variables(ctx)
    parts = [s.wing_measurement(w, o) for w, o in zip(s.wings, ctx.options)]
    joint = q.product_measurement(parts)
    return q.born_distribution(s.dilated_state(), joint, variables)


def _effective_distribution(s: Scenario, ctx: Context, variables) -> JointDistribution:
    parts = [
        s.effective_observable(w, o).measurement(w.dilation.system)
        for w, o in zip(s.wings, ctx.options)
    ]
    return q.born_distribution(s.initial_state, q.product_measurement(parts), variables)


@lru_cache(maxsize=64)
def friend_record_distribution(s: Scenario) -> JointDistribution:
    """Joint Born distribution of all friends' records (every memory read out)."""
    parts = [w.dilation.record_measurement() for w in s.wings]
    return q.born_distribution(s.dilated_state(), q.product_measurement(parts), [w.friend_var for w in s.wings])


def friend_marginal(s: Scenario, wing_index: int) -> JointDistribution:
    w = s.wings[wing_index]
    return friend_record_distribution(s).marginal((w.friend_var,))


def fiqt_slice_distribution(s: Scenario, slice_name: str) -> JointDistribution:
    """Evolve unitarily up to the slice, then apply the Born rule jointly on its events.

    Friend measurements are always dilated (they precede every slice); a
    friend event on the slice reads that friend's memory, a superobserver
    event applies the supermeasurement.
    """
    try:
        events = s.slices[slice_name]
    except KeyError:
        raise ScenarioError(f"scenario {s.name!r} has no slice {slice_name!r}; "
                            f"known slices: {sorted(s.slices)}") from None
    parts, variables = [], []
    for event in events:
        kind, _, who = event.partition(":")
        if kind == "measure":
            wing = next(w for w in s.wings if w.friend_var == who)
            parts.append(wing.dilation.record_measurement())
            variables.append(wing.friend_var)
        elif kind == SUPER:
            wing = s.wing_of_super(who)
            option = next(o for o in s.menus[wing.index].options if o.kind == SUPER)
            parts.append(wing.dilation.supermeasurement(option.angle))
            variables.append(wing.super_var)
        else:
            raise ScenarioError(f"event {event!r} is not a measurement event")
    return q.born_distribution(s.dilated_state(), q.product_measurement(parts), variables)


def slice_context(s: Scenario, slice_name: str) -> Context | None:
    """The context whose accessible outcomes are exactly the slice's events, if the scenario has one."""
    events = set(s.slices[slice_name])
    for ctx in s.contexts():
        nodes = set()
        for w, o in zip(s.wings, ctx.options):
            nodes.add(w.measure_node if o.kind == ASK else w.option_node(o))
        if nodes == events:
            return ctx
    return None


@dataclass(frozen=True)
class CorrelatorSet:
    AB: float
    AD: float
    CB: float
    CD: float

    def __post_init__(self):
        for name in ("AB", "AD", "CB", "CD"):
            v = getattr(self, name)
            if not -1 - 1e-12 <= v <= 1 + 1e-12:
                raise PredictionError(f"correlator E({name}) = {v} outside [-1, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.AB, self.AD, self.CB, self.CD)

    def to_dict(self) -> dict:
        return {"AB": self.AB, "AD": self.AD, "CB": self.CB, "CD": self.CD}


# Sign patterns (s_AB, s_AD, s_CB, s_CD) with an odd number of minus signs.
CHSH_PATTERNS = tuple(
    signs for signs in itertools.product((1, -1), repeat=4) if signs.count(-1) % 2 == 1
)


def chsh_value(c: CorrelatorSet) -> float:
    values = c.as_tuple()
    return max(abs(sum(s * e for s, e in zip(signs, values))) for signs in CHSH_PATTERNS)


def best_chsh_pattern(c: CorrelatorSet) -> tuple[tuple[int, ...], float]:
    """Sign pattern (with overall sign absorbed) giving the largest CHSH expression."""
    best = None
    for signs in CHSH_PATTERNS:
        val = sum(s * e for s, e in zip(signs, c.as_tuple()))
        if best is None or val > best[1] + 1e-15:
            best = (signs, val)
    return best


def bong_pair_contexts(s: Scenario) -> dict[str, Context]:
    """Context realising each accessible pair AB, AD, CB, CD."""
    if len(s.wings) != 2:
        raise PredictionError(f"pairwise contexts need a two-wing scenario, got {s.kind}")
    out = {}
    for ctx in s.contexts():
        out["".join(s.context_variables(ctx))] = ctx
    return out


def pairwise_targets(s: Scenario) -> dict[str, JointDistribution]:
    """The four pairwise distributions AB, AD, CB, CD.

    In a Bong scenario they come from the four contexts; in an Ormrod-Barrett
    scenario (Super-only menus) from the named slices.
    """
    if s.kind == "bong":
        contexts = bong_pair_contexts(s)
        return {pair: context_distribution(s, contexts[pair]) for pair in ("AB", "AD", "CB", "CD")}
    if s.kind == "ormrod-barrett":
        names = {"AB": "Alice+Bob", "AD": "Alice+Divya", "CB": "Bob+Chidi", "CD": "Chidi+Divya"}
        out = {}
        for pair, name in names.items():
            d = fiqt_slice_distribution(s, name)
            out[pair] = d.marginal(tuple(pair))
        return out
    raise PredictionError(f"no pairwise targets for scenario kind {s.kind!r}")


def correlators(s: Scenario) -> CorrelatorSet:
    t = pairwise_targets(s)
    return CorrelatorSet(*(t[p].correlator(p[0], p[1]) for p in ("AB", "AD", "CB", "CD")))


MERMIN_TRIOS = (
    ("B1", "B2", "B3"),
    ("B1", "A2", "A3"),
    ("A1", "B2", "A3"),
    ("A1", "A2", "B3"),
)


def mermin_contexts(s: Scenario) -> list[Context]:
    if s.kind != "lawrence":
        raise PredictionError(f"Mermin parities need a Lawrence scenario, got {s.kind!r}")
    out = []
    for trio in MERMIN_TRIOS:
        options = []
        for wing, var in zip(s.wings, trio):
            kind = SUPER if var.startswith("B") else ASK
            options.append(next(o for o in s.menus[wing.index].options if o.kind == kind))
        out.append(Context(tuple(options)))
    return out


def mermin_parities(s: Scenario) -> tuple[float, float, float, float]:
    values = []
    for ctx in mermin_contexts(s):
        values.append(context_distribution(s, ctx).expectation_of_product())
    return tuple(values)


def non_absoluteness_coefficient(samples, friend: str, asker: str) -> float:
    """1 - frequency with which the asker's heard value equals the friend's record.

    ``samples`` is a RunBatch or an iterable of record mappings; ``friend`` and
    ``asker`` are record keys such as ``"Chidi.C"`` and ``"Alice.C"``.
    """
    if hasattr(samples, "column"):
        f = np.asarray(samples.column(friend))
        a = np.asarray(samples.column(asker))
    else:
        records = list(samples)
        f = np.array([r[friend] if r[friend] is not None else 0 for r in records])
        a = np.array([r[asker] if r[asker] is not None else 0 for r in records])
    if f.size == 0:
        raise PredictionError("non-absoluteness coefficient needs at least one sample")
    if (f == 0).any() or (a == 0).any():
        raise PredictionError("non-absoluteness coefficient is undefined for Null outcomes")
    return float(1.0 - np.mean(f == a))
