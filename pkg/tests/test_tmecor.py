import numpy as np
import pytest

from teamsolve import games, tmecor
from teamsolve import linsolve as ls
from teamsolve.cfr import seed as cfr_seed
from teamsolve.correlation import is_semi_randomized, triangle_free
from teamsolve.efg import GameBuilder, Role, SeatAssignment, best_response_value

from helpers import normal_form_tmecor
from oracles import FIXED_SUPPORT, VALUES

TOL = 1e-6


@pytest.fixture(scope="module")
def kuhn3():
    return games.build("kuhn3")


@pytest.fixture(scope="module")
def kuhn4():
    return games.build("kuhn4")


@pytest.fixture(scope="module")
def kuhn4_cg(kuhn4):
    return {o: tmecor.column_generation(kuhn4, SeatAssignment(o), m=100) for o in (1, 2, 3)}


def signal_game():
    """Chance deals T1 a card in {0, 1, 2}; T1 signals, T2 acts blind, then the opponent guesses.

    T2 has a single infoset, so the connectivity graph is a star.
    """
    b = GameBuilder("signal")
    root = b.chance()
    rng = np.random.default_rng(5)
    for c in range(3):
        v = b.decision(0, f"t1-{c}", ("lo", "hi"))
        b.add_outcome(root, 1.0 / 3.0, v)
        for s in range(2):
            w = b.decision(1, "t2", ("x", "y"))
            b.add_child(v, w)
            for t in range(2):
                o = b.decision(2, f"opp-{s}", ("p", "q", "r"))
                b.add_child(w, o)
                for g in range(3):
                    team = float(rng.integers(-3, 4)) + (2.0 if g == c else 0.0)
                    b.add_child(o, b.terminal((team / 2, team / 2, -team)))
    return b.build()


@pytest.mark.parametrize("opp", [1, 2, 3])
def test_kuhn3_cg_matches_normal_form(kuhn3, opp):
    a = SeatAssignment(opp)
    sol = tmecor.column_generation(kuhn3, a, m=50)
    assert sol.value == pytest.approx(VALUES["kuhn3"][opp - 1], abs=TOL)
    assert sol.gap <= TOL


def test_kuhn3_normal_form_oracle_equivalence(kuhn3):
    # the normal-form LP over all pure team profiles is slow, so only one seating is checked
    value, _ = normal_form_tmecor(kuhn3, SeatAssignment(3))
    sol = tmecor.column_generation(kuhn3, SeatAssignment(3), m=50)
    assert sol.value == pytest.approx(value, abs=TOL)


@pytest.mark.parametrize("opp", [1, 2, 3])
def test_kuhn4_values_and_certificates(kuhn4_cg, opp):
    sol = kuhn4_cg[opp]
    assert sol.value == pytest.approx(VALUES["kuhn4"][opp - 1], abs=1e-5)
    assert sol.certificate == pytest.approx(sol.value, abs=TOL)
    assert sol.combined_plan.vsf_violation() <= 1e-9
    assert sum(l for l, _ in sol.support) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("opp", [1, 2, 3])
def test_master_values_monotone(kuhn4_cg, opp):
    hist = np.array(kuhn4_cg[opp].stats["master_values"])
    assert np.all(np.diff(hist) >= -1e-9)
    assert kuhn4_cg[opp].stats["last_reduced_cost"] <= tmecor.CG_TOL


@pytest.mark.parametrize("opp", [1, 2, 3])
def test_support_decomposes_into_products(kuhn4_cg, opp):
    sol = kuhn4_cg[opp]
    comps = tmecor.decompose_solution(sol)
    assert len(comps) == len(sol.support)
    for comp, (lam, plan) in zip(comps, sol.support):
        assert comp.weight == lam
        assert set(np.unique(comp.pure)) <= {0.0, 1.0}
        assert tmecor.product_roundtrip_error(comp, plan) <= 1e-9


def test_master_duals_give_opponent_strategy(kuhn4_cg):
    # the duals on opponent rows form a sequence-form strategy whose value is the master optimum
    sol = kuhn4_cg[2]
    g = sol.combined_plan.index.game
    a = SeatAssignment(2)
    oi = g.sequence_index(a.opp)
    y = sol.stats["_duals"][:len(oi)]
    assert y.min() >= -1e-9
    assert oi.flow_violation(y) <= 1e-8
    for lam, plan in sol.support:
        beta = tmecor.beta_coefficients(tmecor.team_problem(g, a).records, plan)
        assert beta @ y == pytest.approx(sol.value, abs=1e-7)


def test_warm_started_cg_is_deterministic(kuhn4):
    a = SeatAssignment(1)
    x = tmecor.column_generation(kuhn4, a, m=30)
    y = tmecor.column_generation(kuhn4, a, m=30)
    assert x.value == y.value
    assert x.stats["master_values"] == y.stats["master_values"]
    assert [p.key() for _, p in x.support] == [p.key() for _, p in y.support]


def test_alternating_pricing_same_value(kuhn4):
    a = SeatAssignment(2)
    alt = tmecor.column_generation(kuhn4, a, m=30, alternate=True)
    assert alt.value == pytest.approx(VALUES["kuhn4"][1], abs=1e-5)


def test_cg_from_single_seed_plan(kuhn4):
    a = SeatAssignment(3)
    one = cfr_seed(kuhn4, a, 1).plans
    sol = tmecor.column_generation(kuhn4, a, seeds=one)
    assert sol.stats["seed_plans"] == 1
    assert sol.value == pytest.approx(VALUES["kuhn4"][2], abs=1e-5)


def test_pricing_output_is_semi_randomized(kuhn4):
    a = SeatAssignment(1)
    problem = tmecor.team_problem(kuhn4, a)
    rng = np.random.default_rng(2)
    for member, det in ((Role.TEAM_ONE, Role.TEAM_TWO), (Role.TEAM_TWO, Role.TEAM_ONE)):
        gamma = rng.dirichlet(np.ones(problem.num_opp_seqs))
        res = tmecor.pricing(kuhn4, a, gamma, 0.0, member)
        assert is_semi_randomized(res.candidate, det)
        assert res.candidate.vsf_violation() <= 1e-9
        for p in res.extras:
            assert is_semi_randomized(p, det)


def test_master_from_plans(kuhn4):
    a = SeatAssignment(1)
    plans = cfr_seed(kuhn4, a, 20).plans
    model = tmecor.build_master(kuhn4, a, plans)
    sol = ls.solve_lp(model)
    assert sol.optimal
    # each plan alone is a lower bound on the master value
    for p in plans:
        assert best_response_value(kuhn4, a, p) <= sol.objective + 1e-9
    with pytest.raises(ValueError):
        tmecor.build_master(kuhn4, a, [])


def test_direct_lp_rejects_triangles(kuhn3):
    with pytest.raises(tmecor.NotTriangleFree):
        tmecor.direct_lp(kuhn3, SeatAssignment(3))


def test_direct_lp_complementary_slackness():
    g = signal_game()
    a = SeatAssignment(3)
    assert triangle_free(g, a)
    sol = tmecor.direct_lp(g, a)
    lp, model = sol.stats["_solution"], sol.stats["_model"]
    slack = model.rhs - model.A @ lp.x
    assert np.abs(slack * lp.duals).max() <= 1e-8
    assert ls.strong_duality_gap(model, lp) <= 1e-8
    assert sol.certificate == pytest.approx(sol.value, abs=1e-8)
    # exact on triangle-free games, so column generation lands on the same value
    cg = tmecor.column_generation(g, a, m=20)
    assert cg.value == pytest.approx(sol.value, abs=TOL)
    value, _ = normal_form_tmecor(g, a)
    assert sol.value == pytest.approx(value, abs=1e-8)


def test_fixed_support_kuhn3_reaches_cg_value(kuhn3):
    a = SeatAssignment(3)
    sol = tmecor.fixed_support_mip(kuhn3, a, 4)
    assert sol.value == pytest.approx(VALUES["kuhn3"][2], abs=TOL)
    assert sol.value <= sol.certificate + TOL


def test_fixed_support_kuhn4_single_plan(kuhn4):
    sol = tmecor.fixed_support_mip(kuhn4, SeatAssignment(1), 1)
    assert sol.value == pytest.approx(FIXED_SUPPORT[("kuhn4", 1)][1], abs=1e-8)
    assert len(sol.support) == 1
    (lam, plan), = sol.support
    assert lam == pytest.approx(1.0)
    assert is_semi_randomized(plan, Role.TEAM_TWO)
    assert sol.certificate == pytest.approx(sol.value, abs=TOL)


def test_fixed_support_bad_arguments(kuhn4):
    with pytest.raises(ValueError):
        tmecor.fixed_support_mip(kuhn4, SeatAssignment(1), 0)
    with pytest.raises(ValueError):
        tmecor.fixed_support_mip(kuhn4, SeatAssignment(1), 3, max_vars=100)


def test_solution_json(kuhn4_cg):
    out = kuhn4_cg[1].to_json()
    assert set(out) == {"value", "certificate", "support_size", "weights", "stats"}
    assert not any(k.startswith("_") for k in out["stats"])
