"""CFR+ self-play used to seed column generation with pure team profiles.

All three seats run regret-matching+ simultaneously on their current
strategies.  The two team seats share the team utility and the opponent
gets its negation; only current iterates are used (no averaging).

Sampling draws one uniform number per infoset from
``numpy.random.Generator(PCG64(seed))``: first all of T1's infosets in index
order, then all of T2's, once per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationPlan, RelevantPairIndex, plan_from_pure_profile
from .efg import Game, SeatAssignment, SequenceIndex

DEFAULT_RNG_SEED = 20200409


class _Layers:
    """Infosets of one seat grouped by depth, with their action sequences flattened."""

    def __init__(self, idx: SequenceIndex):
        depth_seq = np.zeros(len(idx), dtype=np.int64)
        depth_inf = np.zeros(idx.num_infosets, dtype=np.int64)
        for k in range(idx.num_infosets):  # parents precede children in index order
            depth_inf[k] = depth_seq[idx.infoset_parent[k]]
            lo = idx.first_seq[k]
            depth_seq[lo:lo + idx.num_actions[k]] = depth_inf[k] + 1
        self.layers = []
        for d in range(int(depth_inf.max(initial=-1)) + 1):
            ks = np.flatnonzero(depth_inf == d)
            seqs = np.concatenate([np.arange(idx.first_seq[k], idx.first_seq[k] + idx.num_actions[k])
                                   for k in ks]) if len(ks) else np.zeros(0, np.int64)
            owner = idx.seq_infoset[seqs]
            self.layers.append((ks, seqs, owner))
        self.idx = idx
        # sequences excluding ∅, grouped by infoset for normalization
        self.seq_owner = idx.seq_infoset[1:]


def _normalize(regret: np.ndarray, layers: _Layers) -> np.ndarray:
    idx = layers.idx
    owner = layers.seq_owner
    pos = np.maximum(regret[1:], 0.0)
    tot = np.bincount(owner, weights=pos, minlength=idx.num_infosets)
    na = idx.num_actions[owner]
    pi = np.empty(len(regret))
    pi[0] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        pi[1:] = np.where(tot[owner] > 0, pos / tot[owner], 1.0 / na)
    return pi


def _realization(pi: np.ndarray, layers: _Layers) -> np.ndarray:
    y = pi.copy()
    y[0] = 1.0
    parent = layers.idx.parent
    for _, seqs, _ in layers.layers:
        y[seqs] = pi[seqs] * y[parent[seqs]]
    return y


def _sequence_values(leaf_seq: np.ndarray, leaf_weight: np.ndarray, pi: np.ndarray,
                     layers: _Layers) -> np.ndarray:
    """Counterfactual value of every sequence given per-leaf weights."""
    idx = layers.idx
    value = np.bincount(leaf_seq, weights=leaf_weight, minlength=len(idx))
    for ks, seqs, owner in reversed(layers.layers):
        ev = np.bincount(owner, weights=pi[seqs] * value[seqs], minlength=idx.num_infosets)
        np.add.at(value, idx.infoset_parent[ks], ev[ks])
    return value


@dataclass
class RegretState:
    """Per-seat cumulative clamped regrets and current behavioral strategies
    (indexed by sequence; entry 0 is unused)."""

    regrets: list[np.ndarray]
    strategies: list[np.ndarray]
    iterations: int = 0
    _layers: list = field(default=None, repr=False)


def init_state(game: Game) -> RegretState:
    layers = [_Layers(game.sequence_index(s)) for s in range(3)]
    regrets = [np.zeros(len(L.idx)) for L in layers]
    strategies = [_normalize(r, L) for r, L in zip(regrets, layers)]
    return RegretState(regrets, strategies, 0, layers)


def cfr_plus_step(game: Game, assignment: SeatAssignment, state: RegretState) -> RegretState:
    """One simultaneous CFR+ iteration; returns a new state."""
    layers = state._layers or [_Layers(game.sequence_index(s)) for s in range(3)]
    seqs = game.leaf_sequences()
    team = (game.payoffs[:, assignment.t1] + game.payoffs[:, assignment.t2]) * game.chance_reach
    util = {assignment.t1: team, assignment.t2: team, assignment.opp: -team}
    reach = [_realization(state.strategies[s], layers[s])[seqs[:, s]] for s in range(3)]
    regrets, strategies = [], []
    for s in range(3):
        others = np.prod([reach[t] for t in range(3) if t != s], axis=0)
        pi = state.strategies[s]
        value = _sequence_values(seqs[:, s], util[s] * others, pi, layers[s])
        idx = layers[s].idx
        owner = layers[s].seq_owner
        ev = np.bincount(owner, weights=pi[1:] * value[1:], minlength=idx.num_infosets)
        r = state.regrets[s].copy()
        r[1:] = np.maximum(r[1:] + value[1:] - ev[owner], 0.0)
        regrets.append(r)
        strategies.append(_normalize(r, layers[s]))
    return RegretState(regrets, strategies, state.iterations + 1, layers)


def _sample_plan(pi: np.ndarray, idx: SequenceIndex, draws: np.ndarray) -> dict[int, int]:
    """Sample one action per infoset, then keep the infosets reachable under the sample."""
    chosen = np.zeros(len(idx), dtype=bool)
    chosen[0] = True
    plan: dict[int, int] = {}
    for k, iid in enumerate(idx.infosets):
        lo = int(idx.first_seq[k])
        na = int(idx.num_actions[k])
        cdf = np.cumsum(pi[lo:lo + na])
        a = int(np.searchsorted(cdf, draws[k] * cdf[-1], side="right"))
        a = min(a, na - 1)
        if chosen[idx.infoset_parent[k]]:
            plan[iid] = a
            chosen[lo + a] = True
    return plan


def sample_profile(game: Game, assignment: SeatAssignment, state: RegretState,
                   rng: np.random.Generator) -> tuple[dict[int, int], dict[int, int]]:
    """Reduced pure plans ``{infoset id: action}`` for T1 and T2."""
    idx1 = game.sequence_index(assignment.t1)
    idx2 = game.sequence_index(assignment.t2)
    d1 = rng.random(idx1.num_infosets)
    d2 = rng.random(idx2.num_infosets)
    return (_sample_plan(state.strategies[assignment.t1], idx1, d1),
            _sample_plan(state.strategies[assignment.t2], idx2, d2))


@dataclass
class SeedBatch:
    plans: list[CorrelationPlan]
    rng_seed: int
    samples: int = 0

    def __len__(self) -> int:
        return len(self.plans)


def seed(game: Game, assignment: SeatAssignment, m: int, rng_seed: int = DEFAULT_RNG_SEED,
         index: RelevantPairIndex | None = None) -> SeedBatch:
    """Run ``m`` CFR+ iterations, sampling one team profile after each."""
    if m < 1:
        raise ValueError("at least one seeding iteration is required")
    if index is None:
        index = RelevantPairIndex(game, assignment)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    state = init_state(game)
    plans: list[CorrelationPlan] = []
    seen: set[bytes] = set()
    for _ in range(m):
        state = cfr_plus_step(game, assignment, state)
        p1, p2 = sample_profile(game, assignment, state, rng)
        plan = plan_from_pure_profile(p1, p2, index)
        key = plan.key()
        if key not in seen:
            seen.add(key)
            plans.append(plan)
    return SeedBatch(plans, rng_seed, m)
