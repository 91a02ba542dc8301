import io
import json

import numpy as np
import pytest

from teamsolve import games
from teamsolve.correlation import RelevantPairIndex, plan_from_product
from teamsolve.efg import (DefectKind, GameBuilder, IndexMismatch, InvalidGame, SeatAssignment,
                           build_sequence_index, dump_json, load_json, terminal_records, validate,
                           best_response_value)
from teamsolve import linsolve as ls

from helpers import opponent_min_brute, reduced_plans, uniform_value_by_traversal
from oracles import KUHN3_ALL_CHECK, KUHN3_REDUCED_PLANS


@pytest.fixture(scope="module")
def kuhn3():
    return games.build("kuhn3")


def _tiny(actions_b=("l", "r"), probs=(0.5, 0.5), payoff=(1.0, -0.5, -0.5)):
    """Chance, then seat 0 decides in one infoset spanning both chance outcomes."""
    b = GameBuilder("tiny")
    root = b.chance()
    for k, p in enumerate(probs):
        acts = ("l", "r") if k == 0 else actions_b
        v = b.decision(0, "x", acts)
        b.add_outcome(root, p, v)
        for _ in acts:
            b.add_child(v, b.terminal(payoff))
    return b


def test_kuhn_validates(kuhn3):
    assert validate(kuhn3).ok


def test_action_mismatch_detected():
    with pytest.raises(InvalidGame) as err:
        _tiny(actions_b=("l", "m", "r")).build()
    assert DefectKind.ACTION_MISMATCH in err.value.report.kinds()


def test_non_normalized_chance_detected():
    report = _tiny(probs=(0.5, 0.6)).build(validate=False).validate()
    assert report.kinds() == {DefectKind.NON_NORMALIZED_CHANCE}


def test_not_zero_sum_detected():
    report = _tiny(payoff=(1.0, 0.0, 0.0)).build(validate=False).validate()
    assert DefectKind.NOT_ZERO_SUM in report.kinds()


def test_bad_chance_reach_detected():
    b = GameBuilder("reach")
    root = b.chance()
    b.add_outcome(root, 0.25, b.terminal((0, 0, 0), chance_reach=0.5))
    b.add_outcome(root, 0.75, b.terminal((0, 0, 0), chance_reach=0.75))
    report = b.build(validate=False).validate()
    assert report.kinds() == {DefectKind.BAD_CHANCE_REACH}


def test_perfect_recall_violation_detected():
    # seat 0 acts, then acts again in an infoset that mixes both of its earlier actions
    b = GameBuilder("forgetful")
    v = b.decision(0, "first", ("a", "b"))
    for _ in range(2):
        w = b.decision(0, "second", ("c", "d"))
        b.add_child(v, w)
        b.add_child(w, b.terminal((0, 0, 0)))
        b.add_child(w, b.terminal((0, 0, 0)))
    report = b.build(validate=False).validate()
    assert DefectKind.PERFECT_RECALL_VIOLATION in report.kinds()


def test_single_decision_sequences():
    b = GameBuilder("one")
    v = b.decision(1, "only", ("a", "b", "c", "d"))
    for _ in range(4):
        b.add_child(v, b.terminal((0, 0, 0)))
    g = b.build()
    assert len(build_sequence_index(g, 1)) == 5
    assert len(build_sequence_index(g, 0)) == 1


def test_kuhn3_sequence_counts_and_parents(kuhn3):
    for s in range(3):
        idx = build_sequence_index(kuhn3, s)
        assert len(idx) == 25
        assert len(idx) == 1 + idx.num_actions.sum()
        assert np.all(idx.parent[1:] < np.arange(1, len(idx)))


def test_kuhn3_reduced_plan_counts(kuhn3):
    counts = tuple(len(reduced_plans(kuhn3.sequence_index(s))) for s in range(3))
    assert counts == KUHN3_REDUCED_PLANS


def test_terminal_record_all_check(kuhn3):
    a = SeatAssignment(3)
    rec = terminal_records(kuhn3, a)
    assert len(rec) == 78
    labels = [kuhn3.sequence_index(s) for s in range(3)]
    want = ("0|:check", "1|k:check", "2|kk:check")
    hits = [r for r in rec
            if (labels[0].label(r.seq_t1), labels[1].label(r.seq_t2), labels[2].label(r.seq_opp)) == want]
    assert len(hits) == 1
    z = hits[0]
    row = kuhn3.payoffs[list(kuhn3.leaves).index(z.leaf)]
    assert tuple(row) == KUHN3_ALL_CHECK["payoffs"]
    assert z.team_payoff == pytest.approx(KUHN3_ALL_CHECK["team_payoff"], abs=1e-15)


def test_zero_team_payoff_leaf(kuhn3):
    rec = terminal_records(kuhn3, SeatAssignment(1))
    for r in rec:
        row = kuhn3.payoffs[list(kuhn3.leaves).index(r.leaf)]
        if row[1] + row[2] == 0:
            assert r.team_payoff == 0.0


@pytest.mark.parametrize("name", ["kuhn3", "kuhn4", "goofspiel-limited"])
@pytest.mark.parametrize("opp", [1, 2, 3])
def test_uniform_play_value(name, opp):
    g = games.build(name)
    a = SeatAssignment(opp)
    rec = terminal_records(g, a)
    y = [g.sequence_index(s).uniform_strategy() for s in range(3)]
    via_records = float(np.sum(rec.team_payoff * y[a.t1][rec.seq_t1] * y[a.t2][rec.seq_t2]
                               * y[a.opp][rec.seq_opp]))
    assert via_records == pytest.approx(uniform_value_by_traversal(g, a), abs=1e-10)


def test_uniform_strategy_is_sequence_form(kuhn3):
    for s in range(3):
        idx = kuhn3.sequence_index(s)
        assert idx.flow_violation(idx.uniform_strategy()) <= 1e-12


@pytest.mark.parametrize("opp", [1, 2, 3])
def test_best_response_matches_enumeration(kuhn3, opp):
    a = SeatAssignment(opp)
    index = RelevantPairIndex(kuhn3, a)
    rng = np.random.default_rng(opp)
    X1 = reduced_plans(index.idx1)
    X2 = reduced_plans(index.idx2)
    for _ in range(5):
        y1 = X1[rng.integers(len(X1))]
        y2 = X2[rng.integers(len(X2))]
        plan = plan_from_product(y1, y2, index)
        rec = index.records
        weight = rec.team_payoff * plan.values[index.leaf_pair]
        brute = opponent_min_brute(kuhn3.sequence_index(a.opp), rec.seq_opp, weight)
        assert best_response_value(kuhn3, a, plan) == pytest.approx(brute, abs=1e-12)


def test_best_response_matches_dual_lp(kuhn3):
    """The DP value equals the LP min over the opponent's sequence-form polytope."""
    a = SeatAssignment(2)
    index = RelevantPairIndex(kuhn3, a)
    y1 = index.idx1.uniform_strategy()
    y2 = index.idx2.uniform_strategy()
    plan = plan_from_product(y1, y2, index)
    rec = index.records
    oi = kuhn3.sequence_index(a.opp)
    c = np.bincount(rec.seq_opp, weights=rec.team_payoff * plan.values[index.leaf_pair], minlength=len(oi))
    b = ls.ModelBuilder(maximize=False)
    y = b.add_vars(len(oi), lb=0.0, obj=c)
    b.add_row([y[0]], [1.0], ls.EQ, 1.0)
    for k in range(oi.num_infosets):
        lo, na = oi.first_seq[k], oi.num_actions[k]
        b.add_row(list(y[lo:lo + na]) + [y[oi.infoset_parent[k]]], [1.0] * na + [-1.0], ls.EQ, 0.0)
    sol = ls.solve_lp(b.build())
    assert sol.objective == pytest.approx(best_response_value(kuhn3, a, plan), abs=1e-7)


def test_best_response_zero_payoffs():
    b = GameBuilder("flat")
    v = b.decision(0, "a", ("x", "y"))
    for _ in range(2):
        w = b.decision(2, "o", ("p", "q"))
        b.add_child(v, w)
        b.add_child(w, b.terminal((0, 0, 0)))
        b.add_child(w, b.terminal((0, 0, 0)))
    g = b.build()
    a = SeatAssignment(3)
    index = RelevantPairIndex(g, a)
    plan = plan_from_product(index.idx1.uniform_strategy(), index.idx2.uniform_strategy(), index)
    assert best_response_value(g, a, plan) == 0.0


def test_best_response_index_mismatch(kuhn3):
    index = RelevantPairIndex(kuhn3, SeatAssignment(1))
    plan = plan_from_product(index.idx1.uniform_strategy(), index.idx2.uniform_strategy(), index)
    with pytest.raises(IndexMismatch):
        best_response_value(kuhn3, SeatAssignment(2), plan)


def test_json_roundtrip(kuhn3, tmp_path):
    path = tmp_path / "kuhn3.json"
    path.write_text(json.dumps(dump_json(kuhn3)))
    g = load_json(path)
    assert g.num_leaves == 78
    assert np.array_equal(g.payoffs, kuhn3.payoffs)
    assert np.allclose(g.chance_reach, kuhn3.chance_reach)
    assert [len(g.sequence_index(s)) for s in range(3)] == [25, 25, 25]


def test_json_node_order_irrelevant():
    nodes = [
        {"kind": "decision", "seat": 2, "infoset": "root", "actions": [
            {"label": "a", "child": 2}, {"label": "b", "child": 1}]},
        {"kind": "terminal", "payoffs": [-1, 2, -1]},
        {"kind": "terminal", "payoffs": [1, -2, 1]},
    ]
    g = load_json(io.StringIO(json.dumps({"seats": 3, "nodes": nodes})))
    assert g.num_leaves == 2
    assert g.payoffs[0].tolist() == [1, -2, 1]


def test_json_rejects_defective_game():
    nodes = [{"kind": "chance", "outcomes": [{"prob": 0.5, "child": 1}, {"prob": 0.6, "child": 2}]},
             {"kind": "terminal", "payoffs": [0, 0, 0]},
             {"kind": "terminal", "payoffs": [0, 0, 0]}]
    with pytest.raises(InvalidGame):
        load_json({"seats": 3, "nodes": nodes})
    with pytest.raises(ValueError):
        load_json({"seats": 3, "nodes": [{"kind": "chance", "outcomes": [{"prob": 1, "child": 7}]}]})
