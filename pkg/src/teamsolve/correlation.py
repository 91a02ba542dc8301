"""Extensive-form correlation plans over relevant sequence pairs of the team."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .efg import (FLOW_TOL, Game, IndexMismatch, Kind, Role, SeatAssignment,
                  SequenceIndex, TerminalRecords)

INTEGRALITY_TOL = 1e-6


class PlanIncomplete(ValueError):
    pass


def infoset_connectivity(game: Game, assignment: SeatAssignment) -> set[tuple[int, int]]:
    """Pairs (I, J) of local infoset indices, I of T1 and J of T2, such that a
    node of one lies on the root path of a node of the other."""
    s1, s2 = assignment.t1, assignment.t2
    idx1, idx2 = game.sequence_index(s1), game.sequence_index(s2)
    connected: set[tuple[int, int]] = set()
    anc: dict[int, tuple[frozenset, frozenset]] = {0: (frozenset(), frozenset())}
    for v, _ in game.preorder():
        a1, a2 = anc.pop(v)
        if game.kind[v] == Kind.DECISION:
            seat = int(game.seat[v])
            if seat == s1:
                k = idx1.local[int(game.infoset[v])]
                connected.update((k, j) for j in a2)
                a1 = a1 | {k}
            elif seat == s2:
                k = idx2.local[int(game.infoset[v])]
                connected.update((i, k) for i in a1)
                a2 = a2 | {k}
        for c in game.children[v]:
            anc[c] = (a1, a2)
    return connected


class RelevantPairIndex:
    """Dense indexing of Σ_T1 ⋈ Σ_T2, with (∅, ∅) at position 0."""

    def __init__(self, game: Game, assignment: SeatAssignment):
        self.game = game
        self.assignment = assignment
        self.idx1: SequenceIndex = game.sequence_index(assignment.t1)
        self.idx2: SequenceIndex = game.sequence_index(assignment.t2)
        self.connected = infoset_connectivity(game, assignment)
        n1, n2 = len(self.idx1), len(self.idx2)
        pairs = {(0, s2) for s2 in range(n2)} | {(s1, 0) for s1 in range(n1)}
        for i, j in self.connected:
            lo1, na1 = int(self.idx1.first_seq[i]), int(self.idx1.num_actions[i])
            lo2, na2 = int(self.idx2.first_seq[j]), int(self.idx2.num_actions[j])
            pairs.update((a, b) for a in range(lo1, lo1 + na1) for b in range(lo2, lo2 + na2))
        ordered = sorted(pairs)
        self.pairs = np.array(ordered, dtype=np.int64).reshape(-1, 2)
        self.lookup: dict[tuple[int, int], int] = {p: k for k, p in enumerate(ordered)}
        self.records = TerminalRecords(game, assignment)
        self.leaf_pair = np.array(
            [self.lookup[(a, b)] for a, b in zip(self.records.seq_t1, self.records.seq_t2)],
            dtype=np.int64)
        # coordinates (σ1, ∅) and (∅, σ2)
        self.row_marginal = np.array([self.lookup[(s, 0)] for s in range(n1)], dtype=np.int64)
        self.col_marginal = np.array([self.lookup[(0, s)] for s in range(n2)], dtype=np.int64)
        self._vsf: VsfSystem | None = None

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.lookup

    def key(self) -> tuple:
        return (id(self.game), self.assignment)

    def check(self, plan: "CorrelationPlan") -> None:
        if plan.index is not self and plan.index.key() != self.key():
            raise IndexMismatch("plan was built for a different game or seat assignment")

    def marginal_index(self, role: Role) -> np.ndarray:
        return self.row_marginal if role is Role.TEAM_ONE else self.col_marginal

    def vsf(self) -> "VsfSystem":
        if self._vsf is None:
            self._vsf = vsf_constraints(self)
        return self._vsf

    def leaf_objective(self, leaf_weight: np.ndarray) -> np.ndarray:
        """Coefficients c over pairs with c·ξ = Σ_z weight(z)·ξ[pair(z)]."""
        return np.bincount(self.leaf_pair, weights=leaf_weight, minlength=len(self))


def relevant_pairs(game: Game, assignment: SeatAssignment) -> RelevantPairIndex:
    return RelevantPairIndex(game, assignment)


@dataclass
class VsfSystem:
    """Equality rows ``A ξ = b`` plus ξ ≥ 0."""

    A: sp.csr_matrix
    b: np.ndarray
    num_t1_rows: int
    num_t2_rows: int

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def violation(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        eq = np.abs(self.A @ xi - self.b).max(initial=0.0)
        neg = max(0.0, float(-xi.min(initial=0.0)))
        return float(max(eq, neg))

    def feasible(self, xi: np.ndarray, tol: float = FLOW_TOL) -> bool:
        return self.violation(xi) <= tol


def vsf_constraints(index: RelevantPairIndex) -> VsfSystem:
    """Row 0 is ξ[∅,∅] = 1; then one row per (I1 ⋈ σ2) and one per (σ1 ⋈ I2)."""
    idx1, idx2 = index.idx1, index.idx2
    look = index.lookup
    rows, cols, vals = [0], [0], [1.0]
    r = 1

    # T2 sequences relevant to each T1 infoset: ∅ plus actions of connected infosets
    conn1: dict[int, list[int]] = {i: [0] for i in range(idx1.num_infosets)}
    conn2: dict[int, list[int]] = {j: [0] for j in range(idx2.num_infosets)}
    for i, j in sorted(index.connected):
        lo2 = int(idx2.first_seq[j])
        conn1[i].extend(range(lo2, lo2 + int(idx2.num_actions[j])))
        lo1 = int(idx1.first_seq[i])
        conn2[j].extend(range(lo1, lo1 + int(idx1.num_actions[i])))

    for i in range(idx1.num_infosets):
        lo, na, par = int(idx1.first_seq[i]), int(idx1.num_actions[i]), int(idx1.infoset_parent[i])
        for s2 in conn1[i]:
            for a in range(lo, lo + na):
                rows.append(r); cols.append(look[(a, s2)]); vals.append(1.0)
            rows.append(r); cols.append(look[(par, s2)]); vals.append(-1.0)
            r += 1
    n_t1 = r - 1
    for j in range(idx2.num_infosets):
        lo, na, par = int(idx2.first_seq[j]), int(idx2.num_actions[j]), int(idx2.infoset_parent[j])
        for s1 in conn2[j]:
            for b in range(lo, lo + na):
                rows.append(r); cols.append(look[(s1, b)]); vals.append(1.0)
            rows.append(r); cols.append(look[(s1, par)]); vals.append(-1.0)
            r += 1
    n_t2 = r - 1 - n_t1
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, len(index)))
    b = np.zeros(r)
    b[0] = 1.0
    return VsfSystem(A, b, n_t1, n_t2)


def triangle_free(game: Game, assignment: SeatAssignment,
                  index: RelevantPairIndex | None = None) -> bool:
    """No sibling infosets I1, I2 of T1 and J1, J2 of T2 with I1⇌J1, I2⇌J2, I1⇌J2.

    Restricted to one sibling group on each side, the connections form a
    bipartite graph; a triangle is an edge whose two endpoints both have
    degree at least two in that graph.
    """
    if index is None:
        index = RelevantPairIndex(game, assignment)
    par1, par2 = index.idx1.infoset_parent, index.idx2.infoset_parent
    deg1: dict[tuple[int, int], int] = {}
    deg2: dict[tuple[int, int], int] = {}
    for i, j in index.connected:
        deg1[i, par2[j]] = deg1.get((i, par2[j]), 0) + 1
        deg2[j, par1[i]] = deg2.get((j, par1[i]), 0) + 1
    return not any(deg1[i, par2[j]] >= 2 and deg2[j, par1[i]] >= 2 for i, j in index.connected)


class CorrelationPlan:
    """A vector over relevant pairs."""

    __slots__ = ("index", "values")

    def __init__(self, index: RelevantPairIndex, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(index),):
            raise IndexMismatch(f"plan has {values.shape} entries, index has {len(index)}")
        self.index = index
        self.values = values

    def __getitem__(self, pair) -> float:
        return float(self.values[self.index.lookup[tuple(pair)]])

    def marginal(self, role: Role) -> np.ndarray:
        return self.values[self.index.marginal_index(role)]

    def vsf_violation(self) -> float:
        return self.index.vsf().violation(self.values)

    def key(self) -> bytes:
        return np.round(self.values, 9).tobytes()

    def __repr__(self) -> str:
        nz = int(np.count_nonzero(np.abs(self.values) > 1e-12))
        return f"CorrelationPlan({len(self.values)} pairs, {nz} nonzero)"


def pure_sequence_vector(idx: SequenceIndex, plan: Mapping[int, int]) -> np.ndarray:
    """{0,1} sequence-form vector of a reduced plan given as {infoset id: action}.

    Infosets unreachable under the plan's own earlier choices may be omitted.
    """
    y = np.zeros(len(idx))
    y[0] = 1.0
    for k, iid in enumerate(idx.infosets):
        if y[idx.infoset_parent[k]] == 0.0:
            continue
        if iid not in plan:
            raise PlanIncomplete(f"reachable infoset {idx.game.infosets[iid].label!r} has no action")
        a = plan[iid]
        if not 0 <= a < idx.num_actions[k]:
            raise PlanIncomplete(f"action {a} out of range at {idx.game.infosets[iid].label!r}")
        y[idx.first_seq[k] + a] = 1.0
    return y


def plan_from_product(y1: np.ndarray, y2: np.ndarray, index: RelevantPairIndex) -> CorrelationPlan:
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if len(y1) != len(index.idx1) or len(y2) != len(index.idx2):
        raise IndexMismatch("strategy lengths do not match the team's sequence counts")
    return CorrelationPlan(index, y1[index.pairs[:, 0]] * y2[index.pairs[:, 1]])


def plan_from_pure_profile(plan1: Mapping[int, int], plan2: Mapping[int, int],
                           index: RelevantPairIndex) -> CorrelationPlan:
    y1 = pure_sequence_vector(index.idx1, plan1)
    y2 = pure_sequence_vector(index.idx2, plan2)
    return plan_from_product(y1, y2, index)


def is_product_plan(plan: CorrelationPlan, tol: float = 1e-9) -> bool:
    idx = plan.index
    m1 = plan.values[idx.row_marginal][idx.pairs[:, 0]]
    m2 = plan.values[idx.col_marginal][idx.pairs[:, 1]]
    return bool(np.abs(plan.values - m1 * m2).max() <= tol)


def is_semi_randomized(plan: CorrelationPlan, deterministic: Role,
                       tol: float = INTEGRALITY_TOL) -> bool:
    """True if ``deterministic``'s marginal coordinates are all within tol of {0, 1}."""
    if deterministic not in (Role.TEAM_ONE, Role.TEAM_TWO):
        raise ValueError("deterministic member must be TEAM_ONE or TEAM_TWO")
    m = plan.marginal(deterministic)
    return bool(np.all(np.minimum(np.abs(m), np.abs(m - 1.0)) <= tol))
