import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from aoelab import predictions as pr
from aoelab import quantum as q
from aoelab import scenarios as sc
from aoelab.distributions import JointDistribution, outcome_cells, pair_distribution
from aoelab.feasibility import (
    HARDY_MAXIMUM,
    MarginalMismatchError,
    SupportTable,
    hardy_search,
    joint_feasibility_lp,
    parity_assignment_search,
    possibilistic_contradiction,
)
from aoelab.feasibility.lp import PAIRS, VERTICES, FeasibilityInputError, chsh_classical_bound, vertex_value

CELLS = outcome_cells(2)


def joint_targets(weights):
    """Pairwise tables of a distribution over (A, B, C, D) given as 16 weights on VERTICES."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    out = {}
    for p in PAIRS:
        i, j = "ABCD".index(p[0]), "ABCD".index(p[1])
        cells = {c: 0.0 for c in CELLS}
        for v, x in zip(VERTICES, w):
            cells[(v[i], v[j])] += x
        out[p] = JointDistribution(tuple(p), cells)
    return out


def scipy_feasible(targets) -> bool:
    """Independent float LP on the same 16-vertex polytope."""
    rows, rhs = [], []
    for p in PAIRS:
        i, j = "ABCD".index(p[0]), "ABCD".index(p[1])
        for c in CELLS:
            rows.append([1.0 if (v[i], v[j]) == c else 0.0 for v in VERTICES])
            rhs.append(targets[p][c])
    res = linprog(np.zeros(16), A_eq=np.array(rows), b_eq=np.array(rhs), bounds=(0, None), method="highs")
    return res.status == 0


def test_pr_box_is_infeasible():
    box = {p: pair_distribution(p[0], p[1], 0, 0, 1.0) for p in ("AB", "AD", "CB")}
    box["CD"] = pair_distribution("C", "D", 0, 0, -1.0)
    result = joint_feasibility_lp(box)
    assert not result.feasible
    assert result.chsh.value == 4
    cert = result.certificate
    assert all(vertex_value(cert.coefficients, v) <= cert.bound for v in VERTICES)
    assert cert.evaluate(result.targets.cells) == cert.value > cert.bound


def test_marginal_mismatch_is_refused():
    t = {p: pair_distribution(p[0], p[1], 0, 0, 0) for p in PAIRS}
    t["AD"] = pair_distribution("A", "D", 0.5, 0, 0)
    with pytest.raises(MarginalMismatchError):
        joint_feasibility_lp(t)
    with pytest.raises(FeasibilityInputError):
        joint_feasibility_lp({p: t[p] for p in ("AB", "AD", "CB")})


def test_chsh_classical_bound_is_two():
    for signs in itertools.product((1, -1), repeat=4):
        if signs.count(-1) % 2 == 1:
            assert chsh_classical_bound(signs) == 2


@given(st.lists(st.floats(0.01, 1.0), min_size=16, max_size=16))
def test_targets_from_a_joint_are_feasible(weights):
    result = joint_feasibility_lp(joint_targets(weights))
    assert result.feasible
    assert result.chsh.value <= 2


def test_lp_agrees_with_float_oracle():
    rng = np.random.default_rng(5)
    verdicts = set()
    for _ in range(60):
        a, b, c, d = rng.uniform(-math.pi, math.pi, size=4)
        s = sc.build_bong(c_angle=c, d_angle=d, a_angle=a, b_angle=b)
        targets = pr.pairwise_targets(s)
        result = joint_feasibility_lp(targets)
        chsh = pr.chsh_value(pr.correlators(s))
        if abs(chsh - 2) > 1e-4:
            assert result.feasible == scipy_feasible(targets) == (chsh < 2)
            verdicts.add(result.feasible)
    assert verdicts == {True, False}


@pytest.mark.parametrize("signs", list(itertools.product((1, -1), repeat=4)))
def test_parity_patterns(signs):
    found = parity_assignment_search(signs)
    assert len(found) == (8 if math.prod(signs) == 1 else 0)
    brute = [v for v in itertools.product((1, -1), repeat=6)
             if (v[3] * v[4] * v[5], v[3] * v[1] * v[2], v[0] * v[4] * v[2], v[0] * v[1] * v[5]) == signs]
    assert found == brute


def test_parity_input_validation():
    with pytest.raises(ValueError):
        parity_assignment_search((1, 1, 1))
    with pytest.raises(ValueError):
        parity_assignment_search((1, 0, 1, 1))


def test_lhv_supports_give_no_contradiction():
    rng = np.random.default_rng(8)
    for _ in range(20):
        weights = rng.random(16) * (rng.random(16) < 0.5)
        if weights.sum() == 0:
            weights[0] = 1
        targets = joint_targets(weights)
        table = SupportTable.from_distributions({p: targets[p] for p in ("CD", "AD", "CB")})
        assert not possibilistic_contradiction(table, targets["AB"]).contradiction


def _brute_allowed(supports):
    allowed = set()
    for a, b, c, d in itertools.product((1, -1), repeat=4):
        if (c, d) in supports["CD"] and (a, d) in supports["AD"] and (c, b) in supports["CB"]:
            allowed.add((a, b))
    return allowed


def test_random_support_patterns():
    rng = np.random.default_rng(21)
    uniform_ab = JointDistribution(("A", "B"), {c: 0.25 for c in CELLS})
    for _ in range(50):
        supports = {}
        for p in ("CD", "AD", "CB"):
            mask = rng.random(4) < 0.6
            if not mask.any():
                mask[rng.integers(4)] = True
            supports[p] = frozenset(c for c, keep in zip(CELLS, mask) if keep)
        verdict = possibilistic_contradiction(SupportTable(supports), uniform_ab)
        allowed = _brute_allowed(supports)
        assert verdict.allowed_ab == allowed
        assert verdict.contradiction == (len(allowed) < 4)
        assert {(b.a, b.b) for b in verdict.blocked} == set(CELLS) - allowed


def test_support_table_rejects_empty_support():
    with pytest.raises(ValueError):
        SupportTable({"CD": frozenset()})
    with pytest.raises(ValueError):
        possibilistic_contradiction(SupportTable.full(("CD", "AD")),
                                    JointDistribution(("A", "B"), {c: 0.25 for c in CELLS}))


def test_hardy_family_maximum():
    cfg = hardy_search()
    assert cfg.found
    assert cfg.forbidden_probability == pytest.approx(HARDY_MAXIMUM, abs=1e-6)
    assert HARDY_MAXIMUM == pytest.approx(0.0901699437, abs=1e-10)
    assert max(cfg.zero_cells.values()) <= 1e-9


def test_hardy_on_maximally_entangled_state_fails():
    cfg = hardy_search(state=q.singlet())
    assert not cfg.found


def test_hardy_resolution_floor():
    with pytest.raises(ValueError):
        hardy_search(resolution=4)


def test_rationalization_is_exact():
    s = sc.preset("bong")
    result = joint_feasibility_lp(pr.pairwise_targets(s))
    for p in PAIRS:
        table = result.targets.cells[p]
        assert sum(table.values()) == 1
        assert all(isinstance(x, Fraction) and x >= 0 for x in table.values())
    assert result.targets.rounding_error < 1e-6
