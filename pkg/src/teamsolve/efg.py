"""Three-seat extensive-form games with chance.

A :class:`Game` is an immutable arena of nodes in depth-first preorder (node 0
is the root). Seats are 0-based internally; :class:`SeatAssignment` takes the
1-based opponent seat used on the command line and in reports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

NUM_SEATS = 3
ZERO_SUM_TOL = 1e-9
CHANCE_TOL = 1e-12
FLOW_TOL = 1e-9


class Kind(enum.IntEnum):
    DECISION = 0
    CHANCE = 1
    TERMINAL = 2


class Role(enum.Enum):
    TEAM_ONE = "T1"
    TEAM_TWO = "T2"
    OPPONENT = "O"
    CHANCE = "C"


class DefectKind(enum.Enum):
    NON_NORMALIZED_CHANCE = "NonNormalizedChance"
    ACTION_MISMATCH = "ActionMismatch"
    PERFECT_RECALL_VIOLATION = "PerfectRecallViolation"
    NOT_ZERO_SUM = "NotZeroSum"
    BAD_CHANCE_REACH = "BadChanceReach"


@dataclass(frozen=True)
class Defect:
    kind: DefectKind
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind.value} at {self.where}: {self.message}"


@dataclass
class ValidationReport:
    defects: list[Defect] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.defects

    def kinds(self) -> set[DefectKind]:
        return {d.kind for d in self.defects}

    def __str__(self) -> str:
        if self.ok:
            return "no defects"
        return "\n".join(str(d) for d in self.defects)


class InvalidGame(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(f"game failed validation:\n{report}")


class IndexMismatch(ValueError):
    """A plan or strategy was indexed by a different game or seat assignment."""


@dataclass(frozen=True)
class SeatAssignment:
    """Which seat (1, 2 or 3) plays against the team.

    The remaining seats form the team; the lower-numbered one is T1.
    """

    opponent: int = 3

    def __post_init__(self):
        if self.opponent not in (1, 2, 3):
            raise ValueError(f"opponent seat must be 1, 2 or 3, got {self.opponent}")

    @property
    def opp(self) -> int:
        return self.opponent - 1

    @property
    def t1(self) -> int:
        return [s for s in range(NUM_SEATS) if s != self.opp][0]

    @property
    def t2(self) -> int:
        return [s for s in range(NUM_SEATS) if s != self.opp][1]

    def role(self, seat: int) -> Role:
        if seat == self.opp:
            return Role.OPPONENT
        return Role.TEAM_ONE if seat == self.t1 else Role.TEAM_TWO

    def seat(self, role: Role) -> int:
        if role is Role.OPPONENT:
            return self.opp
        if role is Role.TEAM_ONE:
            return self.t1
        if role is Role.TEAM_TWO:
            return self.t2
        raise ValueError("chance has no seat")


@dataclass(frozen=True)
class Infoset:
    id: int
    seat: int
    label: str
    actions: tuple[str, ...]
    members: tuple[int, ...]


class GameBuilder:
    """Accumulates nodes in preorder; call :meth:`build` once the tree is complete."""

    def __init__(self, name: str = "game"):
        self.name = name
        self._kind: list[int] = []
        self._seat: list[int] = []
        self._infoset: list[int] = []
        self._actions: list[tuple[str, ...]] = []
        self._children: list[list[int]] = []
        self._probs: list[list[float]] = []
        self._payoffs: dict[int, tuple[float, float, float]] = {}
        self._reach: dict[int, float] = {}
        self._infoset_ids: dict[tuple[int, str], int] = {}

    def _new(self, kind: Kind, seat: int = -1, infoset: int = -1,
             actions: tuple[str, ...] = ()) -> int:
        nid = len(self._kind)
        self._kind.append(int(kind))
        self._seat.append(seat)
        self._infoset.append(infoset)
        self._actions.append(actions)
        self._children.append([])
        self._probs.append([])
        return nid

    def decision(self, seat: int, label: str, actions: Sequence[str]) -> int:
        if not 0 <= seat < NUM_SEATS:
            raise ValueError(f"seat {seat} out of range")
        key = (seat, label)
        if key not in self._infoset_ids:
            self._infoset_ids[key] = len(self._infoset_ids)
        return self._new(Kind.DECISION, seat, self._infoset_ids[key], tuple(actions))

    def chance(self) -> int:
        return self._new(Kind.CHANCE)

    def terminal(self, payoffs: Sequence[float], chance_reach: float | None = None) -> int:
        nid = self._new(Kind.TERMINAL)
        self._payoffs[nid] = tuple(float(p) for p in payoffs)
        if chance_reach is not None:
            self._reach[nid] = float(chance_reach)
        return nid

    def add_child(self, parent: int, child: int) -> None:
        self._children[parent].append(child)

    def add_outcome(self, parent: int, prob: float, child: int) -> None:
        self._children[parent].append(child)
        self._probs[parent].append(float(prob))

    def build(self, validate: bool = True) -> "Game":
        labels = {v: k for k, v in self._infoset_ids.items()}
        members: list[list[int]] = [[] for _ in labels]
        for nid, iid in enumerate(self._infoset):
            if iid >= 0:
                members[iid].append(nid)
        infosets = [
            Infoset(i, labels[i][0], labels[i][1], self._actions[members[i][0]], tuple(members[i]))
            for i in range(len(labels))
        ]
        game = Game(
            name=self.name,
            kind=np.array(self._kind, dtype=np.int8),
            seat=np.array(self._seat, dtype=np.int8),
            infoset=np.array(self._infoset, dtype=np.int32),
            children=[tuple(c) for c in self._children],
            probs=[tuple(p) for p in self._probs],
            node_actions=self._actions,
            payoffs=self._payoffs,
            reach=self._reach,
            infosets=infosets,
        )
        if validate:
            report = game.validate()
            if not report.ok:
                raise InvalidGame(report)
        return game


class Game:
    """Immutable game tree. Build through :class:`GameBuilder` or :func:`load_json`."""

    def __init__(self, name, kind, seat, infoset, children, probs, node_actions,
                 payoffs, reach, infosets):
        self.name = name
        self.kind = kind
        self.seat = seat
        self.infoset = infoset
        self.children = children
        self.probs = probs
        self.node_actions = node_actions
        self.infosets: list[Infoset] = infosets
        self.leaves = np.flatnonzero(kind == Kind.TERMINAL)
        self.payoffs = np.array([payoffs[z] for z in self.leaves], dtype=float).reshape(-1, 3)
        computed = self._compute_reach()
        self.chance_reach = np.array(
            [reach.get(z, computed[z]) for z in self.leaves], dtype=float)
        self._computed_reach = np.array([computed[z] for z in self.leaves], dtype=float)
        self._seq_cache: dict[int, SequenceIndex] = {}
        self._path_seq: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.kind)

    @property
    def num_leaves(self) -> int:
        return len(self.leaves)

    def _compute_reach(self) -> dict[int, float]:
        reach = {0: 1.0}
        out = {}
        stack = [0]
        while stack:
            v = stack.pop()
            r = reach.pop(v)
            if self.kind[v] == Kind.TERMINAL:
                out[v] = r
                continue
            if self.kind[v] == Kind.CHANCE:
                for p, c in zip(self.probs[v], self.children[v]):
                    reach[c] = r * p
                    stack.append(c)
            else:
                for c in self.children[v]:
                    reach[c] = r
                    stack.append(c)
        return out

    def preorder(self) -> Iterator[tuple[int, int]]:
        """Yield (node, parent) pairs in depth-first preorder."""
        stack = [(0, -1)]
        while stack:
            v, p = stack.pop()
            yield v, p
            for c in reversed(self.children[v]):
                stack.append((c, v))

    # -- validation ---------------------------------------------------------

    def validate(self) -> ValidationReport:
        report = ValidationReport()
        add = report.defects.append
        for v in range(self.num_nodes):
            if self.kind[v] == Kind.CHANCE:
                ps = self.probs[v]
                if any(p < 0 for p in ps) or abs(math.fsum(ps) - 1.0) > CHANCE_TOL:
                    add(Defect(DefectKind.NON_NORMALIZED_CHANCE, f"node {v}",
                               f"probabilities {list(ps)}"))
            elif self.kind[v] == Kind.DECISION:
                if len(self.children[v]) != len(self.node_actions[v]):
                    add(Defect(DefectKind.ACTION_MISMATCH, f"node {v}",
                               "child count differs from action count"))
        for I in self.infosets:
            for m in I.members:
                if self.node_actions[m] != I.actions:
                    add(Defect(DefectKind.ACTION_MISMATCH, f"infoset {I.label!r}",
                               f"node {m} has actions {self.node_actions[m]}, expected {I.actions}"))
                    break
        for k, z in enumerate(self.leaves):
            total = float(self.payoffs[k].sum())
            if abs(total) > ZERO_SUM_TOL:
                add(Defect(DefectKind.NOT_ZERO_SUM, f"node {z}", f"payoffs sum to {total}"))
            if abs(self.chance_reach[k] - self._computed_reach[k]) > CHANCE_TOL:
                add(Defect(DefectKind.BAD_CHANCE_REACH, f"node {z}",
                           f"stored {self.chance_reach[k]}, path product {self._computed_reach[k]}"))
        if DefectKind.ACTION_MISMATCH not in report.kinds():
            self._check_recall(add)
        return report

    def _check_recall(self, add) -> None:
        # last (infoset, action) of each seat on the path; all members of an
        # infoset must agree on their owner's entry
        last: dict[int, tuple] = {0: (None, None, None)}
        on_path: dict[int, frozenset] = {0: frozenset()}
        seen: dict[int, tuple] = {}
        for v, _ in self.preorder():
            hist = last.pop(v)
            path = on_path.pop(v)
            if self.kind[v] == Kind.DECISION:
                s, iid = int(self.seat[v]), int(self.infoset[v])
                if iid in path:
                    add(Defect(DefectKind.PERFECT_RECALL_VIOLATION,
                               f"infoset {self.infosets[iid].label!r}",
                               f"node {v} has an ancestor in its own infoset"))
                if iid in seen and seen[iid] != hist[s]:
                    add(Defect(DefectKind.PERFECT_RECALL_VIOLATION,
                               f"infoset {self.infosets[iid].label!r}",
                               f"node {v} has parent sequence {hist[s]}, another member has {seen[iid]}"))
                seen.setdefault(iid, hist[s])
                for a, c in enumerate(self.children[v]):
                    h = list(hist)
                    h[s] = (iid, a)
                    last[c] = tuple(h)
                    on_path[c] = path | {iid}
            else:
                for c in self.children[v]:
                    last[c] = hist
                    on_path[c] = path

    # -- sequence form ------------------------------------------------------

    def sequence_index(self, seat: int) -> "SequenceIndex":
        if seat not in self._seq_cache:
            self._seq_cache[seat] = SequenceIndex(self, seat)
        return self._seq_cache[seat]

    def path_sequences(self) -> np.ndarray:
        """(num_nodes, 3) array: each seat's last sequence index on the root path to a node."""
        if self._path_seq is None:
            idx = [self.sequence_index(s) for s in range(NUM_SEATS)]
            out = np.zeros((self.num_nodes, NUM_SEATS), dtype=np.int32)
            for v, p in self.preorder():
                if p < 0:
                    continue
                out[v] = out[p]
                if self.kind[p] == Kind.DECISION:
                    s = int(self.seat[p])
                    a = self.children[p].index(v)
                    out[v, s] = idx[s].seq_of(int(self.infoset[p]), a)
            self._path_seq = out
        return self._path_seq

    def leaf_sequences(self) -> np.ndarray:
        """(num_leaves, 3) array of σ_i(z)."""
        return self.path_sequences()[self.leaves]


class SequenceIndex:
    """Sequences of one seat. Index 0 is the empty sequence; a sequence's
    parent always has a smaller index."""

    def __init__(self, game: Game, seat: int):
        self.game = game
        self.seat = seat
        order: list[int] = []
        seen = set()
        for v, _ in game.preorder():
            if game.kind[v] == Kind.DECISION and game.seat[v] == seat:
                iid = int(game.infoset[v])
                if iid not in seen:
                    seen.add(iid)
                    order.append(iid)
        self.infosets: list[int] = order
        self.local: dict[int, int] = {iid: k for k, iid in enumerate(order)}
        self.first_seq = np.zeros(len(order), dtype=np.int64)
        seqs: list[tuple[int, int] | None] = [None]
        for k, iid in enumerate(order):
            self.first_seq[k] = len(seqs)
            seqs.extend((iid, a) for a in range(len(game.infosets[iid].actions)))
        self.sequences = seqs
        self.num_actions = np.array([len(game.infosets[i].actions) for i in order], dtype=np.int64)
        # parent sequence of each infoset: read from any member's path
        self.infoset_parent = np.zeros(len(order), dtype=np.int64)
        self._fill_parents()
        self.parent = np.zeros(len(seqs), dtype=np.int64)
        self.seq_infoset = np.full(len(seqs), -1, dtype=np.int64)
        for k in range(len(order)):
            lo = self.first_seq[k]
            hi = lo + self.num_actions[k]
            self.parent[lo:hi] = self.infoset_parent[k]
            self.seq_infoset[lo:hi] = k
        self.children_infosets: list[list[int]] = [[] for _ in seqs]
        for k in range(len(order)):
            self.children_infosets[self.infoset_parent[k]].append(k)

    def _fill_parents(self) -> None:
        g = self.game
        last = {0: 0}
        done = set()
        for v, _ in g.preorder():
            cur = last.pop(v)
            if g.kind[v] == Kind.DECISION and g.seat[v] == self.seat:
                k = self.local[int(g.infoset[v])]
                if k not in done:
                    self.infoset_parent[k] = cur
                    done.add(k)
                for a, c in enumerate(g.children[v]):
                    last[c] = int(self.first_seq[k]) + a
            else:
                for c in g.children[v]:
                    last[c] = cur

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def num_infosets(self) -> int:
        return len(self.infosets)

    def seq_of(self, infoset_id: int, action: int) -> int:
        return int(self.first_seq[self.local[infoset_id]]) + action

    def label(self, seq: int) -> str:
        if seq == 0:
            return "∅"
        iid, a = self.sequences[seq]
        I = self.game.infosets[iid]
        return f"{I.label}:{I.actions[a]}"

    def flow_violation(self, y: np.ndarray) -> float:
        """Largest violation of the sequence-form constraints for ``y``."""
        y = np.asarray(y, dtype=float)
        worst = abs(y[0] - 1.0)
        if len(y) > 1:
            worst = max(worst, float(-y.min()))
        for k in range(self.num_infosets):
            lo = self.first_seq[k]
            s = y[lo:lo + self.num_actions[k]].sum()
            worst = max(worst, abs(s - y[self.infoset_parent[k]]))
        return float(worst)

    def uniform_strategy(self) -> np.ndarray:
        y = np.zeros(len(self.sequences))
        y[0] = 1.0
        for k in range(self.num_infosets):
            lo = self.first_seq[k]
            n = self.num_actions[k]
            y[lo:lo + n] = y[self.infoset_parent[k]] / n
        return y

    def behavioral_to_sequence(self, probs: np.ndarray) -> np.ndarray:
        """Sequence-form vector from per-sequence conditional action probabilities."""
        y = np.asarray(probs, dtype=float).copy()
        y[0] = 1.0
        for k in range(self.num_infosets):
            lo = self.first_seq[k]
            n = self.num_actions[k]
            y[lo:lo + n] *= y[self.infoset_parent[k]]
        return y


class TerminalRecord(NamedTuple):
    leaf: int
    seq_t1: int
    seq_t2: int
    seq_opp: int
    team_payoff: float


class TerminalRecords:
    """Columnar per-leaf data under one seat assignment."""

    def __init__(self, game: Game, assignment: SeatAssignment):
        self.game = game
        self.assignment = assignment
        seqs = game.leaf_sequences()
        self.leaf = game.leaves
        self.seq_t1 = seqs[:, assignment.t1].astype(np.int64)
        self.seq_t2 = seqs[:, assignment.t2].astype(np.int64)
        self.seq_opp = seqs[:, assignment.opp].astype(np.int64)
        team = game.payoffs[:, assignment.t1] + game.payoffs[:, assignment.t2]
        self.team_payoff = team * game.chance_reach

    def __len__(self) -> int:
        return len(self.leaf)

    def __iter__(self) -> Iterator[TerminalRecord]:
        for k in range(len(self.leaf)):
            yield TerminalRecord(int(self.leaf[k]), int(self.seq_t1[k]), int(self.seq_t2[k]),
                                 int(self.seq_opp[k]), float(self.team_payoff[k]))


def validate(game: Game) -> ValidationReport:
    return game.validate()


def build_sequence_index(game: Game, seat: int) -> SequenceIndex:
    return game.sequence_index(seat)


def terminal_records(game: Game, assignment: SeatAssignment) -> TerminalRecords:
    return TerminalRecords(game, assignment)


def opponent_min_value(opp_index: SequenceIndex, leaf_seq_opp: np.ndarray,
                       leaf_weight: np.ndarray) -> float:
    """min over opponent sequence-form strategies of Σ_z weight(z)·y[σ_O(z)].

    Bottom-up over the opponent's sequences: a sequence is worth its own leaf
    terms plus, for each child infoset, its cheapest action.
    """
    value = np.bincount(leaf_seq_opp, weights=leaf_weight, minlength=len(opp_index))
    for k in range(opp_index.num_infosets - 1, -1, -1):
        lo = opp_index.first_seq[k]
        best = value[lo:lo + opp_index.num_actions[k]].min()
        value[opp_index.infoset_parent[k]] += best
    return float(value[0])


def best_response_value(game: Game, assignment: SeatAssignment, plan) -> float:
    """Team utility of ``plan`` against an opponent best response.

    ``plan`` is a correlation plan over this game's relevant pairs.
    """
    index = plan.index
    if index.game is not game or index.assignment != assignment:
        raise IndexMismatch("plan was built for a different game or seat assignment")
    rec = index.records
    weight = rec.team_payoff * plan.values[index.leaf_pair]
    return opponent_min_value(game.sequence_index(assignment.opp), rec.seq_opp, weight)


def load_json(source, name: str | None = None) -> Game:
    """Read a game from the JSON node-list format (a path, file object or parsed dict).

    Node 0 is the root; decision seats are 1-based; infosets are grouped by
    (seat, label).  The file's node order does not matter: nodes are re-emitted
    in preorder.
    """
    import json
    import os

    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            data = json.load(fh)
        name = name or os.path.splitext(os.path.basename(os.fspath(source)))[0]
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        data = source
    if data.get("seats", NUM_SEATS) != NUM_SEATS:
        raise ValueError("only three-seat games are supported")
    nodes = data.get("nodes")
    if not nodes:
        raise ValueError("game file has no nodes")
    b = GameBuilder(name or data.get("name", "game"))
    seen: set[int] = set()

    def emit(i) -> int:
        if not isinstance(i, int) or not 0 <= i < len(nodes):
            raise ValueError(f"node reference {i!r} does not resolve")
        if i in seen:
            raise ValueError(f"node {i} is reachable twice; the file must describe a tree")
        seen.add(i)
        node = nodes[i]
        kind = node.get("kind")
        if kind == "terminal":
            return b.terminal(node["payoffs"], node.get("chance_reach"))
        if kind == "chance":
            nid = b.chance()
            for out in node["outcomes"]:
                b.add_outcome(nid, out["prob"], emit(out["child"]))
            return nid
        if kind == "decision":
            acts = node["actions"]
            nid = b.decision(int(node["seat"]) - 1, str(node["infoset"]), [str(a["label"]) for a in acts])
            for a in acts:
                b.add_child(nid, emit(a["child"]))
            return nid
        raise ValueError(f"node {i} has unknown kind {kind!r}")

    # children are emitted before later siblings are created, so recursion keeps preorder
    import sys
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(nodes) + 100))
    try:
        emit(0)
    finally:
        sys.setrecursionlimit(limit)
    return b.build(validate=True)


def dump_json(game: Game) -> dict:
    """Inverse of :func:`load_json` (node ids are the game's preorder ids)."""
    nodes = []
    leaf_row = {int(z): k for k, z in enumerate(game.leaves)}
    for nid in range(game.num_nodes):
        kind = game.kind[nid]
        if kind == Kind.TERMINAL:
            nodes.append({"kind": "terminal", "payoffs": game.payoffs[leaf_row[nid]].tolist()})
        elif kind == Kind.CHANCE:
            nodes.append({"kind": "chance", "outcomes": [
                {"prob": p, "child": int(c)} for p, c in zip(game.probs[nid], game.children[nid])]})
        else:
            iset = game.infosets[game.infoset[nid]]
            nodes.append({"kind": "decision", "seat": int(game.seat[nid]) + 1, "infoset": iset.label,
                          "actions": [{"label": a, "child": int(c)}
                                      for a, c in zip(game.node_actions[nid], game.children[nid])]})
    return {"seats": NUM_SEATS, "name": game.name, "nodes": nodes}
