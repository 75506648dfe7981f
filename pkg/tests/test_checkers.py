import math

import numpy as np
import pytest

from aoelab import checkers as ck
from aoelab import scenarios as sc
from aoelab.distributions import JointDistribution
from aoelab.models import MODELS, ExtensionModel, build_model, sample_runs


class DoubleOutcome(ExtensionModel):
    """Every friend record carries two values at once."""

    name = "double-outcome"

    def __init__(self, base):
        super().__init__()
        self.base = base

    def _record_distribution(self, s, ctx):
        return self.base.record_distribution(s, ctx)

    def sample(self, s, ctx, u):
        cols = self.base.sample(s, ctx, u)
        key = s.wings[0].friend_key
        cols[key] = np.stack([cols[key], -cols[key]], axis=1)
        return cols


class LeakyFriend(ExtensionModel):
    """Chidi's record is +1 whenever Bob supermeasures, a fair coin otherwise."""

    name = "leaky-friend"

    def _record_distribution(self, s, ctx):
        keys = s.record_keys(ctx)
        bob_super = ctx.options[1].kind == sc.SUPER
        cells = {}
        for c in (1, -1):
            pc = (1.0 if c == 1 else 0.0) if bob_super else 0.5
            if pc == 0:
                continue
            for rest in ((1, 1, 1), (-1, -1, -1)):
                cell = (c,) + rest
                if ctx.options[0].kind == sc.ASK:
                    cell = (c, rest[0], c, rest[2])
                cells[cell] = cells.get(cell, 0.0) + pc * 0.5
        return JointDistribution(keys, cells)


class StatisticalOnly(ExtensionModel):
    """Wraps a model and hides its analytic tables."""

    has_analytic = False

    def __init__(self, base):
        super().__init__()
        self.base = base
        self.name = base.name
        self.emits_nulls = base.emits_nulls

    def sample(self, s, ctx, u):
        return self.base.sample(s, ctx, u)

    def dynamical_state(self, s, ctx, friend_values):
        return self.base.dynamical_state(s, ctx, friend_values)

    def context_dependence(self, s):
        return self.base.context_dependence(s)


def test_two_valued_records_violate_aoe1():
    s = sc.preset("bong")
    m = DoubleOutcome(build_model("rqm-cpl", s, {}))
    v = ck.check_aoe1(m, s, n=100)
    assert v.verdict == ck.VIOLATED
    assert "more than one value" in v.evidence["structural"][0]["issue"]


def test_honest_models_keep_aoe1():
    s = sc.preset("bong")
    assert ck.check_aoe1(build_model("rqm-cpl", s, {}), s, n=1000).verdict == ck.SATISFIED
    assert ck.check_aoe1(build_model("kent", s, {}), s, n=1000).verdict == ck.SATISFIED_WITH_NULLS


def test_locality_leak_is_flagged_both_ways():
    s = sc.preset("bong")
    v = ck.check_locality_parameter_independence(LeakyFriend(), s, n=20_000)
    assert v.verdict == ck.VIOLATED
    assert v.evidence["agree"]
    assert v.evidence["analytic"]["worst"]["key"] == "Chidi.C"


def test_paradox_freedom_detects_loops():
    s = sc.preset("bong")
    m = build_model("rqm-cpl", s, {})
    assert ck.check_paradox_freedom(m, s).verdict == ck.SATISFIED
    leaky = sc.with_leak(s, "C", "Alice")
    v = ck.check_paradox_freedom(build_model("rqm-cpl", leaky, {}), leaky)
    assert v.verdict == ck.VIOLATED
    assert v.evidence["loops"][0]["path"][0] == "measure:C"
    # a model that declares no dependence is never in a loop
    assert ck.check_paradox_freedom(build_model("rqm-no-cpl", leaky, {}), leaky).verdict == ck.SATISFIED


def test_run_set_must_match():
    s = sc.preset("bong")
    a, b = build_model("kent", s, {}), build_model("rqm-cpl", s, {})
    runs = ck.RunSet(a, s, 100)
    with pytest.raises(ValueError):
        ck.check_aoe1(b, s, runs)


@pytest.mark.parametrize("preset", sorted(sc.PRESETS))
def test_statistical_verdicts_agree_with_analytic(preset):
    s = sc.preset(preset)
    for name in MODELS:
        m = build_model(name, s, {})
        rep = ck.flag_report(m, s, n=50_000, seed=3)
        blind = ck.flag_report(StatisticalOnly(m), s, n=50_000, seed=3)
        assert blind.verdicts() == rep.verdicts(), (preset, name)
        for v in rep.flags.values():
            assert v.evidence.get("agree", True), (preset, name, v.flag)


@pytest.mark.parametrize("preset", sorted(sc.PRESETS))
def test_witnesses_replay(preset):
    s = sc.preset(preset)
    for name in MODELS:
        m = build_model(name, s, {})
        for w in ck.detect_disaccord(m, s, n=5_000, seed=11):
            replayed = ck.replay(m, s, w)
            assert {k: replayed[k] for k in w.record} == w.record


def test_type_one_in_ob():
    s = sc.preset("ormrod-barrett")
    m = build_model("collapse-at-friend", s, {})
    (w,) = [x for x in ck.detect_disaccord(m, s, n=20_000) if x.type == "I"]
    assert w.detail["slice_probability"] <= ck.ZERO_TOL
    assert set(w.record) <= set(s.record_keys(s.contexts()[0]))


def test_type_two_forms():
    s = sc.preset("bong")
    kent = [w for w in ck.detect_disaccord(build_model("kent", s, {}), s, n=1000) if w.type == "II"]
    rqm = [w for w in ck.detect_disaccord(build_model("rqm-cpl", s, {}), s, n=1000) if w.type == "II"]
    assert kent[0].detail["form"] == "no-record"
    assert rqm[0].detail["form"] == "definite-record"
    assert ck.detect_disaccord(build_model("collapse-at-friend", s, {}), s, n=1000) == []


def test_lawrence_rqm_hides_dependence_in_conditionals():
    s = sc.preset("lawrence")
    m = build_model("rqm-cpl", s, {})
    rep = ck.flag_report(m, s, n=20_000)
    assert set(rep.verdicts().values()) == {ck.SATISFIED}
    assert ck.conditional_parameter_dependence(m, s) == pytest.approx(0.5)
    assert ck.conditional_parameter_dependence(build_model("collapse-at-friend", s, {}), s) < 1e-9


def test_bong_theorem_report_every_model_escapes():
    rep = ck.bong_theorem_report(sc.preset("bong"), n=20_000)
    assert rep["contradiction"]
    assert rep["chsh_value"] == pytest.approx(2 * math.sqrt(2))
    assert rep["every_model_gives_up_something"]
    assert rep["models"]["rqm-cpl"]["gives_up"] == ["No-SD"]
    with pytest.raises(ValueError):
        ck.bong_theorem_report(sc.preset("wigner"))


def test_theorem_reports_for_other_presets():
    law = ck.theorem_report(sc.preset("lawrence"), n=5_000)
    assert law["contradiction"] and law["assignments"] == []
    assert law["every_model_gives_up_something"]
    ob = ck.theorem_report(sc.preset("ormrod-barrett"), n=5_000)
    assert ob["possibilistic"]["verdict"] == "Contradiction"
    assert set(ob["models"]["kent"]["fiqt_readings"]) == {"first-person", "frame-independent"}
    wig = ck.theorem_report(sc.preset("wigner"), n=5_000)
    assert not wig["contradiction"] and "every_model_gives_up_something" not in wig


def test_report_serialises():
    s = sc.preset("bong")
    rep = ck.flag_report(build_model("kent", s, {}), s, n=2_000)
    d = rep.to_dict()
    assert set(d["flags"]) == set(ck.FLAGS)
    assert d["disaccord"][0]["type"] == "II"


def test_kent_existence_dependence_in_batches():
    s = sc.preset("bong")
    m = build_model("kent", s, {})
    nulls = {ctx.label: float((sample_runs(m, s, ctx, 1000, seed=1).column("Chidi.C") == 0).mean())
             for ctx in s.contexts()}
    assert nulls == {"Ask,Ask": 0.0, "Ask,Super": 0.0, "Super,Ask": 1.0, "Super,Super": 1.0}
