"""Team-maxmin equilibrium with correlation (TMECor) solvers.

Three routes share one opponent-side LP structure: for every opponent
sequence σ there is a row

    v[I(σ)] - Σ_{I' : σ(I') = σ} v[I'] - (team mass reaching σ) <= 0,

where I(∅) is the root value v_∅ that is maximized.  The team side is a
correlation plan (direct LP), a convex combination of fixed plans (master
LP) or a sum of scaled semi-randomized plans (fixed-support MIP).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linsolve as ls
from .cfr import DEFAULT_RNG_SEED, seed as cfr_seed
from .correlation import (INTEGRALITY_TOL, CorrelationPlan, RelevantPairIndex, is_semi_randomized,
                          plan_from_product, triangle_free)
from .efg import Game, IndexMismatch, Role, SeatAssignment, TerminalRecords, best_response_value

CG_TOL = 1e-6
CG_MAX_ITER = 10_000
SUPPORT_TOL = 1e-9
MAX_MIP_VARS = 200_000


class NotTriangleFree(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


class NotSemiRandomized(ValueError):
    pass


class SolveFailed(RuntimeError):
    def __init__(self, solution: ls.Solution, what: str):
        self.solution = solution
        super().__init__(f"{what}: solver returned {solution.status.value}")


class ResolvedBy(enum.Enum):
    RELAXATION = "Relaxation"
    MIP = "Mip"


# ---------------------------------------------------------------------------
# shared structure

class TeamProblem:
    """Relevant pairs plus the opponent-side matrices for one (game, seats)."""

    def __init__(self, game: Game, assignment: SeatAssignment,
                 index: RelevantPairIndex | None = None):
        self.game = game
        self.assignment = assignment
        self.index = index if index is not None else RelevantPairIndex(game, assignment)
        self.opp = game.sequence_index(assignment.opp)
        oi = self.opp
        n_seq, n_inf = len(oi), oi.num_infosets
        # v columns: 0 is v_∅, 1 + k is infoset k
        head = np.where(np.arange(n_seq) == 0, 0, 1 + oi.seq_infoset)
        rows = np.concatenate([np.arange(n_seq), oi.infoset_parent])
        cols = np.concatenate([head, 1 + np.arange(n_inf)])
        vals = np.concatenate([np.ones(n_seq), -np.ones(n_inf)])
        self.V = sp.csr_matrix((vals, (rows, cols)), shape=(n_seq, 1 + n_inf))
        rec = self.index.records
        self.B = sp.csr_matrix((rec.team_payoff, (rec.seq_opp, self.index.leaf_pair)),
                               shape=(n_seq, len(self.index)))

    @property
    def records(self) -> TerminalRecords:
        return self.index.records

    @property
    def num_opp_seqs(self) -> int:
        return len(self.opp)

    @property
    def num_v(self) -> int:
        return self.V.shape[1]

    def plan(self, values) -> CorrelationPlan:
        return CorrelationPlan(self.index, values)


_PROBLEMS: dict = {}


def team_problem(game: Game, assignment: SeatAssignment) -> TeamProblem:
    key = (id(game), assignment)
    hit = _PROBLEMS.get(key)
    if hit is None or hit.game is not game:
        hit = TeamProblem(game, assignment)
        _PROBLEMS[key] = hit
    return hit


def opponent_best_response_value(game: Game, assignment: SeatAssignment, plan: CorrelationPlan) -> float:
    return best_response_value(game, assignment, plan)


def beta_coefficients(records: TerminalRecords, plan: CorrelationPlan) -> np.ndarray:
    """Team mass reaching each opponent sequence: Σ_{z: σ_O(z)=σ} ûT(z)·ξ[pair(z)]."""
    index = plan.index
    if index.records is not records and (records.game is not index.game
                                         or records.assignment != index.assignment):
        raise IndexMismatch("plan and terminal records come from different games or seatings")
    n_seq = len(records.game.sequence_index(records.assignment.opp))
    return np.bincount(records.seq_opp, weights=records.team_payoff * plan.values[index.leaf_pair],
                       minlength=n_seq)


# ---------------------------------------------------------------------------
# results

@dataclass
class TmecorSolution:
    value: float
    support: list[tuple[float, CorrelationPlan]]
    combined_plan: CorrelationPlan
    certificate: float
    stats: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.value - self.certificate)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "certificate": self.certificate,
            "support_size": len(self.support),
            "weights": [lam for lam, _ in self.support],
            "stats": {k: v for k, v in self.stats.items() if not k.startswith("_")},
        }


@dataclass
class PricingResult:
    candidate: CorrelationPlan
    reduced_cost: float
    extras: list[CorrelationPlan]
    resolved_by: ResolvedBy
    basis: object = None  # relaxation basis, reusable as a warm start


def _finish(problem: TeamProblem, value: float, support, combined: np.ndarray, stats: dict) -> TmecorSolution:
    plan = problem.plan(combined)
    cert = best_response_value(problem.game, problem.assignment, plan)
    return TmecorSolution(float(value), support, plan, cert, stats)


def _check(sol: ls.Solution, what: str) -> ls.Solution:
    if not sol.optimal:
        raise SolveFailed(sol, what)
    return sol


# ---------------------------------------------------------------------------
# direct LP

def _value_vars(b: ls.ModelBuilder, nv: int) -> np.ndarray:
    """Free opponent-infoset values; the first one, v_∅, is the objective."""
    root = b.add_var(lb=-np.inf, obj=1.0, name="v_root")
    rest = b.add_vars(nv - 1, lb=-np.inf, name="v")
    return np.concatenate([[root], rest])


def direct_lp_model(problem: TeamProblem) -> ls.Model:
    nv, npair = problem.num_v, len(problem.index)
    vsf = problem.index.vsf()
    b = ls.ModelBuilder(maximize=True)
    _value_vars(b, nv)
    b.add_vars(npair, lb=0.0, name="xi")
    b.add_rows(sp.hstack([problem.V, -problem.B]), 0, ls.LE, 0.0, name="opp")
    b.add_rows(vsf.A, nv, ls.EQ, vsf.b, name="vsf")
    return b.build()


def direct_lp(game: Game, assignment: SeatAssignment, backend=None) -> TmecorSolution:
    """Exact TMECor on triangle-free games, where the VSF polytope is the plan polytope."""
    t0 = time.perf_counter()
    problem = team_problem(game, assignment)
    if not triangle_free(game, assignment, problem.index):
        raise NotTriangleFree(f"{game.name} is not triangle-free for opponent seat {assignment.opponent}")
    model = direct_lp_model(problem)
    sol = _check(ls.solve_lp(model, backend), "direct LP")
    xi = np.maximum(sol.x[problem.num_v:], 0.0)
    stats = {"algorithm": "direct-lp", "iterations": sol.iterations,
             "wall_time": time.perf_counter() - t0, "_solution": sol, "_model": model}
    return _finish(problem, sol.x[0], [(1.0, problem.plan(xi))], xi, stats)


# ---------------------------------------------------------------------------
# column generation

def build_master(game: Game, assignment: SeatAssignment, plans: list[CorrelationPlan],
                 problem: TeamProblem | None = None) -> ls.Model:
    """Master LP over fixed plans; rows are one per opponent sequence then Σλ = 1."""
    if not plans:
        raise ValueError("the master needs at least one plan")
    problem = problem or team_problem(game, assignment)
    betas = np.column_stack([beta_coefficients(problem.records, p) for p in plans])
    return _master_from_betas(problem, betas)


def _master_from_betas(problem: TeamProblem, betas: np.ndarray) -> ls.Model:
    nv, k = problem.num_v, betas.shape[1]
    b = ls.ModelBuilder(maximize=True)
    _value_vars(b, nv)
    b.add_vars(k, lb=0.0, name="lam")
    b.add_rows(sp.hstack([problem.V, sp.csr_matrix(-betas)]), 0, ls.LE, 0.0, name="opp")
    b.add_row(np.arange(nv, nv + k), 1.0, ls.EQ, 1.0, name="convexity")
    return b.build()


def _member_roles(member: Role) -> tuple[Role, Role]:
    """(member, deterministic teammate): plans in Ξ*_member fix the teammate's marginal."""
    if member is Role.TEAM_ONE:
        return member, Role.TEAM_TWO
    if member is Role.TEAM_TWO:
        return member, Role.TEAM_ONE
    raise ValueError("pricing member must be TEAM_ONE or TEAM_TWO")


def canonical_semi_randomized(plan: CorrelationPlan, deterministic: Role) -> CorrelationPlan:
    """Rebuild a semi-randomized plan as the exact product of its marginals,
    rounding the deterministic side."""
    index = plan.index
    y1 = np.maximum(plan.values[index.row_marginal], 0.0)
    y2 = np.maximum(plan.values[index.col_marginal], 0.0)
    if deterministic is Role.TEAM_TWO:
        y2 = np.round(y2)
    else:
        y1 = np.round(y1)
    return plan_from_product(y1, y2, index)


def pricing_model(problem: TeamProblem, gamma: np.ndarray, member: Role, integer: bool) -> ls.Model:
    rec = problem.records
    c = problem.index.leaf_objective(rec.team_payoff * gamma[rec.seq_opp])
    vsf = problem.index.vsf()
    npair = len(problem.index)
    _, det = _member_roles(member)
    ub = np.full(npair, np.inf)
    binary = np.zeros(npair, dtype=bool)
    if integer:
        flags = problem.index.marginal_index(det)[1:]
        binary[flags] = True
        ub[flags] = 1.0
    return ls.Model(vsf.A, np.zeros(vsf.num_rows, dtype=np.int8), vsf.b, c,
                    np.zeros(npair), ub, binary, maximize=True)


def pricing(game: Game, assignment: SeatAssignment, gamma: np.ndarray, gamma_prime: float,
            member: Role = Role.TEAM_ONE, backend=None, problem: TeamProblem | None = None,
            warm=None) -> PricingResult:
    """Most profitable semi-randomized plan for the current master duals.

    Only the objective changes between calls, so ``warm`` (the previous
    relaxation basis) stays primal feasible.
    """
    problem = problem or team_problem(game, assignment)
    _, det = _member_roles(member)
    gamma = np.asarray(gamma, dtype=float)

    relax = _check(ls.solve_lp(pricing_model(problem, gamma, member, False), backend, warm),
                   "pricing relaxation")
    raw = problem.plan(np.maximum(relax.x, 0.0))
    if is_semi_randomized(raw, det, INTEGRALITY_TOL):
        cand = canonical_semi_randomized(raw, det)
        rc = float(gamma @ beta_coefficients(problem.records, cand)) - gamma_prime
        return PricingResult(cand, rc, [], ResolvedBy.RELAXATION, relax.basis)

    model = pricing_model(problem, gamma, member, True)
    sol, pool = ls.solve_mip(model, backend)
    _check(sol, "pricing MIP")
    cand = canonical_semi_randomized(problem.plan(np.maximum(sol.x, 0.0)), det)
    rc = float(gamma @ beta_coefficients(problem.records, cand)) - gamma_prime
    extras = []
    for _, x in pool:
        p = canonical_semi_randomized(problem.plan(np.maximum(x, 0.0)), det)
        if p.key() != cand.key():
            extras.append(p)
    return PricingResult(cand, rc, extras, ResolvedBy.MIP, relax.basis)


def column_generation(game: Game, assignment: SeatAssignment, m: int = 1000, tol: float = CG_TOL,
                      rng_seed: int = DEFAULT_RNG_SEED, backend=None, max_iter: int = CG_MAX_ITER,
                      member: Role = Role.TEAM_ONE, alternate: bool = False,
                      seeds: list[CorrelationPlan] | None = None) -> TmecorSolution:
    t0 = time.perf_counter()
    problem = team_problem(game, assignment)
    if seeds is None:
        seeds = cfr_seed(game, assignment, m, rng_seed, index=problem.index).plans
    plans: list[CorrelationPlan] = []
    keys: set[bytes] = set()
    betas: list[np.ndarray] = []

    def add(plan: CorrelationPlan) -> bool:
        key = plan.key()
        if key in keys:
            return False
        keys.add(key)
        plans.append(plan)
        betas.append(beta_coefficients(problem.records, plan))
        return True

    for p in seeds:
        add(p)
    n_seq = problem.num_opp_seqs
    history: list[float] = []
    relax_count = mip_count = 0
    who = member
    master_basis = pricing_basis = None
    for it in range(max_iter):
        ncols = len(betas)
        master = _master_from_betas(problem, np.column_stack(betas))
        sol = _check(ls.solve_lp(master, backend, master_basis), "master LP")
        history.append(sol.objective)
        gamma, gamma_prime = sol.duals[:n_seq], float(sol.duals[n_seq])
        res = pricing(game, assignment, gamma, gamma_prime, who, backend, problem, pricing_basis)
        pricing_basis = res.basis
        if res.resolved_by is ResolvedBy.RELAXATION:
            relax_count += 1
        else:
            mip_count += 1
        if res.reduced_cost <= tol:
            break
        added = add(res.candidate)
        for extra in res.extras:
            add(extra)
        if not added:
            raise NonConvergence("pricing returned a plan already in the master with positive reduced cost")
        if isinstance(sol.basis, ls.Basis):
            # new lambda columns enter nonbasic at zero, right before the row activities
            at = problem.num_v + ncols
            master_basis = sol.basis.with_columns(at, len(betas) - ncols)
        if alternate:
            who = Role.TEAM_TWO if who is Role.TEAM_ONE else Role.TEAM_ONE
    else:
        raise NonConvergence(f"column generation did not converge in {max_iter} iterations")

    lam = sol.x[problem.num_v:]
    support = [(float(l), p) for l, p in zip(lam, plans) if l > SUPPORT_TOL]
    combined = np.zeros(len(problem.index))
    for l, p in zip(lam, plans):
        if l > 0:
            combined += l * p.values
    stats = {"algorithm": "cg", "iterations": len(history), "relaxation_pricings": relax_count,
             "mip_pricings": mip_count, "seed_plans": len(seeds), "plans": len(plans),
             "master_values": history, "last_reduced_cost": res.reduced_cost,
             "wall_time": time.perf_counter() - t0, "_duals": sol.duals, "_plans": plans, "_lambda": lam}
    return _finish(problem, sol.objective, support, combined, stats)


# ---------------------------------------------------------------------------
# fixed support

def _pure_flow_rows(idx) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sequence-form rows over non-empty sequences (the empty one is fixed to 1)."""
    rows, cols, vals = [], [], []
    rhs = np.zeros(idx.num_infosets)
    for k in range(idx.num_infosets):
        lo, na, par = int(idx.first_seq[k]), int(idx.num_actions[k]), int(idx.infoset_parent[k])
        rows.extend([k] * na)
        cols.extend(range(lo - 1, lo - 1 + na))
        vals.extend([1.0] * na)
        if par == 0:
            rhs[k] = 1.0
        else:
            rows.append(k); cols.append(par - 1); vals.append(-1.0)
    F = sp.csr_matrix((vals, (rows, cols)), shape=(idx.num_infosets, len(idx) - 1))
    return F, rhs


def fixed_support_model(problem: TeamProblem, n: int, max_vars: int = MAX_MIP_VARS) -> tuple[ls.Model, dict]:
    """MIP over n scaled semi-randomized plans; odd slots fix T2, even slots fix T1."""
    index = problem.index
    npair, nv = len(index), problem.num_v
    vsf = index.vsf()
    dets = [(index.col_marginal if i % 2 == 0 else index.row_marginal)[1:] for i in range(n)]
    total = nv + n + n * npair + sum(len(d) for d in dets)
    if total > max_vars:
        raise ValueError(f"fixed-support model would have {total} variables (limit {max_vars})")

    b = ls.ModelBuilder(maximize=True)
    v = _value_vars(b, nv)
    lam = b.add_vars(n, lb=0.0, ub=1.0, name="lam")
    w = [b.add_vars(npair, lb=0.0, ub=1.0, name=f"w{i + 1}_") for i in range(n)]
    flags = [b.add_vars(len(dets[i]), lb=0.0, ub=1.0, binary=True, name=f"b{i + 1}_") for i in range(n)]

    # opponent rows with ξ = Σ_i w_i
    cols = np.concatenate([v] + w)
    block = sp.hstack([problem.V] + [-problem.B] * n)
    b.add_rows(block, cols, ls.LE, 0.0, name="opp")
    b.add_row(lam, 1.0, ls.EQ, 1.0, name="convexity")
    # slots of equal parity are interchangeable: order their weights
    for i in range(n - 2):
        b.add_row([lam[i], lam[i + 2]], [1.0, -1.0], ls.GE, 0.0, name=f"order{i + 1}")
    A = vsf.A.tocsr()
    flow = {Role.TEAM_ONE: _pure_flow_rows(index.idx1), Role.TEAM_TWO: _pure_flow_rows(index.idx2)}
    for i in range(n):
        # scaled VSF: the normalization row becomes w[∅,∅] = λ_i, the rest are homogeneous
        b.add_rows(A[1:], w[i], ls.EQ, 0.0, name=f"vsf{i + 1}_")
        b.add_row([w[i][0], lam[i]], [1.0, -1.0], ls.EQ, 0.0, name=f"scale{i + 1}")
        k = len(dets[i])
        wi = w[i][dets[i]]
        eye = sp.identity(k, format="csr")
        # w ≤ b
        b.add_rows(sp.hstack([eye, -eye]), np.concatenate([wi, flags[i]]), ls.LE, 0.0, name=f"wb{i + 1}_")
        # w ≤ λ
        b.add_rows(sp.hstack([eye, -sp.csr_matrix(np.ones((k, 1)))]),
                   np.concatenate([wi, [lam[i]]]), ls.LE, 0.0, name=f"wl{i + 1}_")
        # w ≥ λ - (1 - b)
        b.add_rows(sp.hstack([eye, -sp.csr_matrix(np.ones((k, 1))), -eye]),
                   np.concatenate([wi, [lam[i]], flags[i]]), ls.GE, -1.0, name=f"wlb{i + 1}_")
        # the flags themselves form a pure strategy of the deterministic member
        F, rhs = flow[Role.TEAM_TWO if i % 2 == 0 else Role.TEAM_ONE]
        b.add_rows(F, flags[i], ls.EQ, rhs, name=f"flow{i + 1}_")
    model = b.build()
    layout = {"v": v, "lam": lam, "w": w, "flags": flags}
    return model, layout


def fixed_support_mip(game: Game, assignment: SeatAssignment, n: int, backend=None,
                      max_vars: int = MAX_MIP_VARS) -> TmecorSolution:
    if n < 1:
        raise ValueError("support cap n must be at least 1")
    t0 = time.perf_counter()
    problem = team_problem(game, assignment)
    model, layout = fixed_support_model(problem, n, max_vars)
    sol, pool = ls.solve_mip(model, backend)
    _check(sol, "fixed-support MIP")
    lam = sol.x[layout["lam"]]
    support = []
    combined = np.zeros(len(problem.index))
    for i in range(n):
        wi = np.maximum(sol.x[layout["w"][i]], 0.0)
        combined += wi
        if lam[i] > SUPPORT_TOL:
            det = Role.TEAM_TWO if i % 2 == 0 else Role.TEAM_ONE
            support.append((float(lam[i]), canonical_semi_randomized(problem.plan(wi / lam[i]), det)))
    stats = {"algorithm": "fixed-support", "n": n, "iterations": sol.iterations, "nodes": sol.nodes,
             "pool_size": len(pool), "wall_time": time.perf_counter() - t0}
    return _finish(problem, sol.objective, support, combined, stats)


# ---------------------------------------------------------------------------
# decomposition

@dataclass
class SupportComponent:
    weight: float
    deterministic: Role
    pure: np.ndarray
    randomized: np.ndarray


def decompose_plan(plan: CorrelationPlan, tol: float = INTEGRALITY_TOL) -> tuple[Role, np.ndarray, np.ndarray]:
    """(deterministic member, its pure strategy, teammate's randomized strategy)."""
    index = plan.index
    for det in (Role.TEAM_TWO, Role.TEAM_ONE):
        if is_semi_randomized(plan, det, tol):
            m1 = plan.values[index.row_marginal]
            m2 = plan.values[index.col_marginal]
            if det is Role.TEAM_TWO:
                return det, np.round(m2), np.maximum(m1, 0.0)
            return det, np.round(m1), np.maximum(m2, 0.0)
    raise NotSemiRandomized("neither team member's marginal is deterministic")


def decompose_solution(solution: TmecorSolution, tol: float = INTEGRALITY_TOL) -> list[SupportComponent]:
    out = []
    for lam, plan in solution.support:
        det, pure, rand = decompose_plan(plan, tol)
        out.append(SupportComponent(lam, det, pure, rand))
    return out


def product_roundtrip_error(component: SupportComponent, plan: CorrelationPlan) -> float:
    if component.deterministic is Role.TEAM_TWO:
        y1, y2 = component.randomized, component.pure
    else:
        y1, y2 = component.pure, component.randomized
    return float(np.abs(plan_from_product(y1, y2, plan.index).values - plan.values).max())
