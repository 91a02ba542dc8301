"""Independent brute-force references used by the tests.

Nothing here goes through the correlation-plan machinery or the in-repo LP
engine: plans are enumerated directly from the sequence tree and LPs are
handed to HiGHS through scipy.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from teamsolve.efg import Game, Kind, SeatAssignment, SequenceIndex, TerminalRecords


def reduced_plans(idx: SequenceIndex) -> np.ndarray:
    """All reduced-normal-form pure plans as 0/1 sequence-form rows."""
    children: dict[int, list[int]] = {}
    for k in range(idx.num_infosets):
        children.setdefault(int(idx.infoset_parent[k]), []).append(k)

    def below(seq: int) -> list[np.ndarray]:
        # plans of the subtree hanging under an already chosen sequence
        options = []
        for k in children.get(seq, []):
            lo = int(idx.first_seq[k])
            per = []
            for a in range(int(idx.num_actions[k])):
                for rest in below(lo + a):
                    v = rest.copy()
                    v[lo + a] = 1.0
                    per.append(v)
            options.append(per)
        out = []
        for combo in itertools.product(*options):
            v = np.zeros(len(idx))
            for part in combo:
                v = np.maximum(v, part)
            out.append(v)
        return out

    plans = np.array(below(0))
    plans[:, 0] = 1.0
    return plans


def opponent_min_brute(idx: SequenceIndex, seq_opp: np.ndarray, weight: np.ndarray) -> float:
    """min over the opponent's reduced plans of Σ_z weight(z)·y[σ_O(z)]."""
    Y = reduced_plans(idx)
    return float((Y[:, seq_opp] @ weight).min())


def normal_form_tmecor(game: Game, assignment: SeatAssignment) -> tuple[float, int]:
    """TMECor value from the LP whose columns are all pure team profiles.

    Profiles with identical opponent-sequence payoff vectors are merged
    before the LP; returns (value, number of distinct columns).
    """
    rec = TerminalRecords(game, assignment)
    X1 = reduced_plans(game.sequence_index(assignment.t1))
    X2 = reduced_plans(game.sequence_index(assignment.t2))
    oi = game.sequence_index(assignment.opp)
    n_opp = len(oi)
    onehot = np.zeros((len(rec), n_opp))
    onehot[np.arange(len(rec)), rec.seq_opp] = 1.0
    A2 = X2[:, rec.seq_t2]
    cols = set()
    for x1 in X1:
        w = rec.team_payoff * x1[rec.seq_t1]
        beta = A2 @ (w[:, None] * onehot)
        cols.update(map(tuple, np.round(beta, 12)))
    betas = np.array(sorted(cols))
    k = len(betas)

    # variables: v_root, v_I (one per opponent infoset), λ (one per column)
    nv = 1 + oi.num_infosets
    A = np.zeros((n_opp, nv + k))
    for s in range(n_opp):
        A[s, 0 if s == 0 else 1 + oi.seq_infoset[s]] += 1.0
    for j in range(oi.num_infosets):
        A[oi.infoset_parent[j], 1 + j] -= 1.0
    A[:, nv:] = -betas.T
    A_eq = np.zeros((1, nv + k))
    A_eq[0, nv:] = 1.0
    c = np.zeros(nv + k)
    c[0] = -1.0
    bounds = [(None, None)] * nv + [(0, None)] * k
    res = linprog(c, A_ub=A, b_ub=np.zeros(n_opp), A_eq=A_eq, b_eq=[1.0], bounds=bounds,
                  method="highs")
    assert res.status == 0, res.message
    return -res.fun, k


def uniform_value_by_traversal(game: Game, assignment: SeatAssignment) -> float:
    """Expected team payoff when every seat plays uniformly, by walking the tree."""
    total = 0.0
    stack = [(0, 1.0)]
    leaf_row = {int(z): k for k, z in enumerate(game.leaves)}
    while stack:
        v, p = stack.pop()
        ch = game.children[v]
        if game.kind[v] == Kind.TERMINAL:
            row = game.payoffs[leaf_row[v]]
            total += p * (row[assignment.t1] + row[assignment.t2])
        elif game.kind[v] == Kind.CHANCE:
            stack.extend((c, p * q) for c, q in zip(ch, game.probs[v]))
        else:
            stack.extend((c, p / len(ch)) for c in ch)
    return total
