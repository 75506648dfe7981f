"""Acceptance gate: nine criteria, one summary line each (see the terminal summary)."""
import filecmp
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from aoelab import checkers, predictions
from aoelab import quantum as q
from aoelab import scenarios
from aoelab.cli import EXIT_OK, cmd_simulate, main
from aoelab.config import parse_config
from aoelab.distributions import pair_distribution
from aoelab.feasibility import (
    HARDY_MAXIMUM,
    SupportTable,
    hardy_search,
    joint_feasibility_lp,
    parity_assignment_search,
    possibilistic_contradiction,
)
from aoelab.feasibility.lp import CHSH_SIGNS, marginals_of
from aoelab.models import build_model

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_singlet_correlator(criterion):
    criterion("criterion 1 singlet correlator", 1.0)
    grid_a = np.linspace(0, 2 * math.pi, 4, endpoint=False)
    grid_b = np.linspace(0, 2 * math.pi, 8, endpoint=False) + 0.1
    pairs = [(a, b) for a in grid_a for b in grid_b]
    assert len(pairs) == 32
    psi = q.singlet()
    for a, b in pairs:
        m = q.product_measurement([q.QubitObservable(a).measurement("S_C"), q.QubitObservable(b).measurement("S_D")])
        e = q.born_distribution(psi, m, ("A", "B")).correlator("A", "B")
        assert abs(e + math.cos(a - b)) < 1e-9
    criterion.finish()


def test_dilation_matches_effective_observable(criterion):
    criterion("criterion 2 dilation/effective equivalence", 5.0)
    rng = np.random.default_rng(11)
    for _ in range(100):
        friend, sup = rng.uniform(-math.pi, math.pi, size=2)
        amps = rng.normal(size=2) + 1j * rng.normal(size=2)
        system = q.PureState.from_amplitudes(("S",), amps)
        s = scenarios.build_wigner_friend(system, friend, sup)
        for ctx in s.contexts():
            full = predictions.context_distribution(s, ctx, method="dilation")
            eff = predictions.context_distribution(s, ctx, method="effective")
            assert full.max_abs_difference(eff) < 1e-9
    criterion.finish()


def test_bong_verification(criterion):
    criterion("criterion 3 Bong verification", 2.0)
    s = scenarios.preset("bong")
    assert abs(predictions.chsh_value(predictions.correlators(s)) - 2 * math.sqrt(2)) < 1e-9

    result = joint_feasibility_lp(predictions.pairwise_targets(s))
    assert result.verdict == "Infeasible"
    cert = result.certificate
    assert isinstance(cert.value, Fraction) and isinstance(cert.bound, Fraction)
    assert cert.evaluate(result.targets.cells) == cert.value > cert.bound
    assert cert.chsh_signs() is not None
    assert result.chsh.bound == 2
    assert result.chsh.value - 2 >= Fraction(8, 10)
    assert result.targets.chsh(result.chsh.signs) == result.chsh.value

    flat = scenarios.build_bong(c_angle=0.4, d_angle=0.4, a_angle=0.4, b_angle=0.4)
    ok = joint_feasibility_lp(predictions.pairwise_targets(flat))
    assert ok.verdict == "Feasible"
    assert sum(ok.witness.values()) == 1 and min(ok.witness.values()) >= 0
    assert marginals_of(ok.witness) == ok.targets.cells
    criterion.finish()


def _random_targets(rng):
    """Consistent-marginal pairwise tables on a 1/1000 grid."""
    means = {v: rng.integers(-400, 401) / 1000 for v in "ABCD"}
    out = {}
    for pair in ("AB", "AD", "CB", "CD"):
        mx, my = means[pair[0]], means[pair[1]]
        lo, hi = -1000 + round(abs(mx + my) * 1000), 1000 - round(abs(mx - my) * 1000)
        corr = rng.integers(lo, hi + 1) / 1000
        out[pair] = pair_distribution(pair[0], pair[1], mx, my, corr)
    return out


def test_lp_chsh_duality(criterion):
    criterion("criterion 4 LP/CHSH duality", 30.0)
    rng = np.random.default_rng(4)
    seen = {True: 0, False: 0}
    for _ in range(200):
        result = joint_feasibility_lp(_random_targets(rng))
        chsh_ok = max(result.targets.chsh(signs) for signs in CHSH_SIGNS) <= 2
        assert result.feasible == chsh_ok
        seen[chsh_ok] += 1
    assert seen[True] and seen[False]
    criterion.finish()


def test_lawrence_verification(criterion):
    criterion("criterion 5 Lawrence verification", 1.0)
    s = scenarios.preset("lawrence")
    parities = predictions.mermin_parities(s)
    assert np.allclose(parities, (1, -1, -1, -1), atol=1e-9)
    assert all(abs(abs(p) - 1) < 1e-9 for p in parities)
    signs = tuple(int(round(p)) for p in parities)
    assert parity_assignment_search(signs) == []
    for i in range(4):
        flipped = list(signs)
        flipped[i] = -flipped[i]
        assert math.prod(flipped) == 1
        assert len(parity_assignment_search(tuple(flipped))) == 8
    criterion.finish()


def test_ormrod_barrett_verification(criterion):
    criterion("criterion 6 Ormrod-Barrett verification", 60.0)
    cfg = hardy_search()
    assert cfg.found
    assert len(cfg.zero_cells) == 3 and max(cfg.zero_cells.values()) <= 1e-9
    assert abs(cfg.forbidden_probability - 0.09017) < 1e-3
    assert abs(cfg.forbidden_probability - HARDY_MAXIMUM) < 1e-3

    s = scenarios.build_ormrod_barrett(cfg.state(), **cfg.angle_kwargs())
    targets = predictions.pairwise_targets(s)
    table = SupportTable.from_distributions({p: targets[p] for p in ("CD", "AD", "CB")})
    verdict = possibilistic_contradiction(table, targets["AB"])
    assert verdict.verdict == "Contradiction"
    assert verdict.blocked
    for blk in verdict.blocked:
        assert blk.target_probability > 1e-9
        assert {(t.c, t.d) for t in blk.completions} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        for t in blk.completions:
            assert not table.allows(t.killed_by, t.cell)

    (ctx,) = s.contexts()
    sliced = predictions.fiqt_slice_distribution(s, "Alice+Bob")
    direct = predictions.context_distribution(s, ctx).marginal(("A", "B"))
    assert sliced.max_abs_difference(direct) < 1e-12
    criterion.finish()


def test_bong_flag_matrix(criterion):
    criterion("criterion 7 Bong model flag matrix", 120.0)
    s = scenarios.preset("bong")
    n, seed = 100_000, checkers.DEFAULT_SEED
    reports = {name: checkers.flag_report(build_model(name, s, {}), s, n=n, seed=seed)
               for name in ("collapse-at-friend", "rqm-cpl", "kent", "naive-absolute")}

    collapse = reports["collapse-at-friend"].flags
    assert collapse["FPU"].verdict == checkers.VIOLATED
    assert collapse["FPU"].evidence["analytic"]["worst"]["gap"] >= 0.2
    assert collapse["AOE2"].verdict == checkers.SATISFIED

    rqm = reports["rqm-cpl"].flags
    for flag in ("AOE1", "AOE2", "FPU", "Locality"):
        assert rqm[flag].verdict == checkers.SATISFIED, flag
    assert rqm["No-SD"].verdict == checkers.VIOLATED
    spread = rqm["No-SD"].evidence["analytic"]["correlators"]["Chidi.C*Divya.D"]["by_context"]
    assert abs(abs(spread["Ask,Ask"] - spread["Super,Super"]) - math.sqrt(2) / 2) < 1e-9

    kent_model = build_model("kent", s, {})
    kent = reports["kent"].flags
    assert kent["FPU"].verdict == checkers.SATISFIED
    assert kent["AOE2"].verdict == checkers.SATISFIED
    assert kent["AOE1"].verdict == checkers.SATISFIED_WITH_NULLS
    for ctx in s.contexts():
        d = kent_model.record_distribution(s, ctx)
        for w, opt in zip(s.wings, ctx.options):
            p_null = d.marginal((w.friend_key,))[(None,)]
            assert abs(p_null - (1.0 if opt.kind == scenarios.SUPER else 0.0)) < 1e-12
    assert kent["No-SD"].verdict == checkers.VIOLATED
    assert kent["No-SD"].evidence["analytic"]["existence_dependence"] is True

    assert reports["naive-absolute"].flags["FPU"].verdict == checkers.VIOLATED

    for rep in reports.values():
        for v in rep.flags.values():
            if "agree" in v.evidence:
                assert v.evidence["agree"], (rep.model, v.flag)
                assert v.evidence["statistical"]["verdict"] == v.evidence["analytic"]["verdict"]
    criterion.finish()


def test_disaccord_taxonomy(criterion):
    criterion("criterion 8 disaccord taxonomy", 60.0)
    expected = {
        ("rqm-cpl", "bong"): {"II"},
        ("rqm-cpl", "lawrence"): {"II"},
        ("kent", "bong"): {"II"},
        ("rqm-no-cpl", "bong"): {"II", "III"},
    }
    for (name, preset), types in expected.items():
        s = scenarios.preset(preset)
        m = build_model(name, s, {})
        witnesses = checkers.detect_disaccord(m, s, n=20_000)
        assert {w.type for w in witnesses} == types, (name, preset)
        for w in witnesses:
            replayed = checkers.replay(m, s, w)
            assert {k: replayed[k] for k in w.record} == w.record
    criterion.finish()


def test_reproducibility(criterion, tmp_path):
    criterion("criterion 9 reproducibility", 120.0)
    cfg = parse_config({"scenario": "bong", "models": ["rqm-cpl", "kent"], "samples": 20_000, "seed": 99})
    first = cmd_simulate(cfg, tmp_path / "one")
    second = cmd_simulate(cfg, tmp_path / "two")
    assert [b["sha256"] for b in first["batches"]] == [b["sha256"] for b in second["batches"]]
    names = [b["file"] for b in first["batches"]]
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "one", tmp_path / "two", names, shallow=False)
    assert sorted(match) == sorted(names) and not mismatch and not errors
    assert main(["verify", "--config", str(CONFIGS / "verify.yaml"), "--out", str(tmp_path / "verify.json")]) == EXIT_OK
    criterion.finish()
