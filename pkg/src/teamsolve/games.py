"""Generators for the benchmark game families.

All games are three-seat, zero-sum and built with seats 0, 1, 2 acting in
that order. Action order within an infoset is the emission order below and is
part of each game's identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .efg import Game, GameBuilder


class UnsupportedParameters(ValueError):
    pass


@dataclass(frozen=True)
class GameSpec:
    family: str  # kuhn | goofspiel | liars | leduc
    ranks: int = 3
    limited_info: bool = False
    faces: int = 3
    max_raises: int = 1

    def describe(self) -> str:
        if self.family == "kuhn":
            return f"Kuhn poker ({self.ranks} ranks)"
        if self.family == "goofspiel":
            return "Goofspiel (3 ranks, limited info)" if self.limited_info else "Goofspiel (3 ranks)"
        if self.family == "liars":
            return f"Liar's dice ({self.faces} faces)"
        return f"Leduc poker ({self.ranks} ranks, {self.max_raises} raise{'s' if self.max_raises > 1 else ''})"


# Table row order [A]..[J]
GAMES: dict[str, GameSpec] = {
    "kuhn3": GameSpec("kuhn", ranks=3),
    "kuhn4": GameSpec("kuhn", ranks=4),
    "kuhn12": GameSpec("kuhn", ranks=12),
    "goofspiel-limited": GameSpec("goofspiel", ranks=3, limited_info=True),
    "goofspiel": GameSpec("goofspiel", ranks=3),
    "liars3": GameSpec("liars", faces=3),
    "liars4": GameSpec("liars", faces=4),
    "leduc31": GameSpec("leduc", ranks=3, max_raises=1),
    "leduc41": GameSpec("leduc", ranks=4, max_raises=1),
    "leduc22": GameSpec("leduc", ranks=2, max_raises=2),
}

TABLE_LETTERS = dict(zip(GAMES, "ABCDEFGHIJ"))

_cache: dict[GameSpec, Game] = {}


def build(spec: GameSpec | str, cache: bool = True) -> Game:
    if isinstance(spec, str):
        if spec not in GAMES:
            raise UnsupportedParameters(f"unknown game {spec!r}; choose from {', '.join(GAMES)}")
        spec = GAMES[spec]
    if cache and spec in _cache:
        return _cache[spec]
    if spec.family == "kuhn":
        if spec.ranks < 3:
            raise UnsupportedParameters("Kuhn poker needs at least 3 ranks for 3 players")
        game = kuhn(spec.ranks)
    elif spec.family == "goofspiel":
        if spec.ranks != 3:
            raise UnsupportedParameters("only 3-rank Goofspiel is supported")
        game = goofspiel(limited_info=spec.limited_info)
    elif spec.family == "liars":
        if spec.faces < 1:
            raise UnsupportedParameters("dice need at least one face")
        game = liars_dice(spec.faces)
    elif spec.family == "leduc":
        if spec.ranks < 2 or spec.max_raises < 1:
            raise UnsupportedParameters("Leduc needs >= 2 ranks and >= 1 raise")
        game = leduc(spec.ranks, spec.max_raises)
    else:
        raise UnsupportedParameters(f"unknown family {spec.family!r}")
    if cache:
        _cache[spec] = game
    return game


# -- Kuhn poker --------------------------------------------------------------

def kuhn(ranks: int) -> Game:
    b = GameBuilder(f"kuhn{ranks}")
    deals = list(itertools.permutations(range(ranks), 3))
    p = 1.0 / len(deals)
    root = b.chance()
    for cards in deals:
        b.add_outcome(root, p, _kuhn_node(b, cards, "", [1, 1, 1], set(), None, 0, p))
    return b.build()


def _kuhn_node(b, cards, hist, contrib, folded, bettor, seat, reach):
    """``bettor`` is None before any bet; afterwards seats respond in order
    until play returns to the bettor."""
    if bettor is None and seat == 3:
        return b.terminal(_showdown(cards, contrib, folded), reach)
    if bettor is not None and seat % 3 == bettor:
        return b.terminal(_showdown(cards, contrib, folded), reach)
    s = seat % 3
    label = f"{cards[s]}|{hist}"
    if bettor is None:
        v = b.decision(s, label, ("check", "bet"))
        b.add_child(v, _kuhn_node(b, cards, hist + "k", contrib, folded, None, seat + 1, reach))
        c = list(contrib)
        c[s] += 1
        b.add_child(v, _kuhn_node(b, cards, hist + "b", c, folded, s, s + 1, reach))
    else:
        v = b.decision(s, label, ("fold", "call"))
        b.add_child(v, _kuhn_node(b, cards, hist + "f", contrib, folded | {s}, bettor, seat + 1, reach))
        c = list(contrib)
        c[s] += 1
        b.add_child(v, _kuhn_node(b, cards, hist + "c", c, folded, bettor, seat + 1, reach))
    return v


def _showdown(cards, contrib, folded):
    live = [s for s in range(3) if s not in folded]
    winner = max(live, key=lambda s: cards[s])
    pot = sum(contrib)
    return [(pot if s == winner else 0) - contrib[s] for s in range(3)]


# -- Goofspiel -----------------------------------------------------------------

# cards and prizes are ranked 1..3 and a prize is worth its rank
GOOF_VALUES = (1, 2, 3)


def goofspiel(limited_info: bool = False) -> Game:
    """Three turns of sealed bids for prizes worth 1, 2 and 3.

    Payoffs are scores minus the mean score, which makes the game zero-sum.

    Bids inside a turn are made in seat order with earlier bids hidden. With
    ``limited_info`` players only learn which seats won each turn.
    """
    b = GameBuilder("goofspiel-limited" if limited_info else "goofspiel")
    _goof_turn(b, limited_info, (), [set(GOOF_VALUES) for _ in range(3)], [(), (), ()], [], 1.0)
    return b.build()


def _goof_turn(b, limited, prizes_so_far, hands, own_bids, public, reach):
    remaining = [x for x in GOOF_VALUES if x not in prizes_so_far]
    if len(remaining) == 1:
        return _goof_bid(b, limited, prizes_so_far + (remaining[0],), hands, own_bids, public, (), reach)
    v = b.chance()
    p = 1.0 / len(remaining)
    for prize in remaining:
        b.add_outcome(v, p, _goof_bid(b, limited, prizes_so_far + (prize,), hands, own_bids, public,
                                      (), reach * p))
    return v


def _goof_bid(b, limited, prizes, hands, own_bids, public, bids, reach):
    seat = len(bids)
    if seat == 3:
        outcome = _goof_winners(bids)
        new_hands = [h - {bids[s]} for s, h in enumerate(hands)]
        new_own = [own_bids[s] + (bids[s],) for s in range(3)]
        if limited:
            new_public = public + [(prizes[-1], outcome)]
        else:
            new_public = public + [(prizes[-1], bids)]
        if len(prizes) == 3:
            return b.terminal(_goof_payoffs(new_public, limited), reach)
        return _goof_turn(b, limited, prizes, new_hands, new_own, new_public, reach)
    cards = sorted(hands[seat])
    label = f"{own_bids[seat]}|{public}|{prizes[-1]}"
    v = b.decision(seat, label, tuple(str(c) for c in cards))
    for c in cards:
        b.add_child(v, _goof_bid(b, limited, prizes, hands, own_bids, public, bids + (c,), reach))
    return v


def _goof_winners(bids):
    top = max(bids)
    return tuple(s for s in range(3) if bids[s] == top)


def _goof_payoffs(public, limited):
    score = [Fraction(0)] * 3
    for prize, info in public:
        winners = info if limited else _goof_winners(info)
        for s in winners:
            score[s] += Fraction(prize, len(winners))
    mean = sum(score) / 3
    return [float(x - mean) for x in score]


# -- Liar's dice ---------------------------------------------------------------

def liars_dice(faces: int) -> Game:
    """One die per seat; bids (count, face) ordered by (count-1)*faces + face."""
    b = GameBuilder(f"liars{faces}")
    nbids = 3 * faces
    labels = tuple(f"{(j - 1) // faces + 1}x{(j - 1) % faces + 1}" for j in range(1, nbids + 1))
    root = b.chance()
    p = 1.0 / faces ** 3
    for dice in itertools.product(range(1, faces + 1), repeat=3):
        b.add_outcome(root, p, _liars_node(b, dice, faces, labels, (), p))
    return b.build()


def _liars_node(b, dice, faces, labels, bids, reach):
    nbids = len(labels)
    seat = len(bids) % 3
    last = bids[-1] if bids else 0
    actions = (() if not bids else ("challenge",)) + labels[last:]
    v = b.decision(seat, f"{dice[seat]}|{','.join(map(str, bids))}", actions)
    if bids:
        b.add_child(v, b.terminal(_liars_payoff(dice, faces, bids, seat), reach))
    for j in range(last + 1, nbids + 1):
        b.add_child(v, _liars_node(b, dice, faces, labels, bids + (j,), reach))
    return v


def _liars_payoff(dice, faces, bids, challenger):
    j = bids[-1]
    count, face = (j - 1) // faces + 1, (j - 1) % faces + 1
    bidder = (challenger - 1) % 3
    out = [0, 0, 0]
    if sum(d == face for d in dice) >= count:
        out[bidder], out[challenger] = 1, -1
    else:
        out[bidder], out[challenger] = -1, 1
    return out


# -- Leduc poker -----------------------------------------------------------------

LEDUC_COPIES = 2
LEDUC_RAISE = (2, 4)


def leduc(ranks: int, max_raises: int) -> Game:
    """Limit Leduc hold'em for three seats.

    Each rank appears twice in the deck. The opening bet of a round counts
    toward ``max_raises``.
    """
    b = GameBuilder(f"leduc{ranks}{max_raises}")
    _leduc_deal(b, (ranks, max_raises), (), 1.0)
    return b.build()


def _leduc_deal(b, ctx, cards, reach):
    ranks, _ = ctx
    if len(cards) == 3:
        return _leduc_bet(b, ctx, cards, None, 0, "", [1, 1, 1], frozenset(), reach)
    left = [LEDUC_COPIES - cards.count(r) for r in range(ranks)]
    total = sum(left)
    v = b.chance()
    for r in range(ranks):
        if left[r]:
            p = left[r] / total
            b.add_outcome(v, p, _leduc_deal(b, ctx, cards + (r,), reach * p))
    return v


def _leduc_bet(b, ctx, cards, board, rnd, hist, contrib, folded, reach):
    """Run one betting round starting from seat 0; ``hist`` is the public
    history of both rounds."""
    return _leduc_act(b, ctx, cards, board, rnd, hist, contrib, folded, reach,
                      pending=frozenset(s for s in range(3) if s not in folded),
                      seat=0, raises=0, level=max(contrib))


def _leduc_act(b, ctx, cards, board, rnd, hist, contrib, folded, reach, pending, seat, raises, level):
    ranks, max_raises = ctx
    live = [s for s in range(3) if s not in folded]
    if len(live) == 1:
        pot = sum(contrib)
        return b.terminal([(pot if s == live[0] else 0) - contrib[s] for s in range(3)], reach)
    if not pending:
        if rnd == 0:
            return _leduc_board(b, ctx, cards, hist + "/", contrib, folded, reach)
        return b.terminal(_leduc_showdown(cards, board, contrib, folded), reach)
    while seat not in pending:
        seat = (seat + 1) % 3
    label = f"{cards[seat]}|{'' if board is None else board}|{hist}"
    size = LEDUC_RAISE[rnd]
    facing = contrib[seat] < level
    nxt = (seat + 1) % 3
    rest = pending - {seat}
    if not facing:
        actions = ("check", "bet") if raises < max_raises else ("check",)
    else:
        actions = ("fold", "call", "raise") if raises < max_raises else ("fold", "call")
    v = b.decision(seat, label, actions)
    for a in actions:
        c = list(contrib)
        if a == "check":
            child = _leduc_act(b, ctx, cards, board, rnd, hist + "k", c, folded, reach, rest, nxt, raises, level)
        elif a == "fold":
            child = _leduc_act(b, ctx, cards, board, rnd, hist + "f", c, folded | {seat}, reach,
                               rest, nxt, raises, level)
        elif a == "call":
            c[seat] = level
            child = _leduc_act(b, ctx, cards, board, rnd, hist + "c", c, folded, reach, rest, nxt, raises, level)
        else:
            c[seat] = level + size
            others = frozenset(s for s in range(3) if s not in folded and s != seat)
            child = _leduc_act(b, ctx, cards, board, rnd, hist + ("b" if a == "bet" else "r"), c, folded,
                               reach, others, nxt, raises + 1, level + size)
        b.add_child(v, child)
    return v


def _leduc_board(b, ctx, cards, hist, contrib, folded, reach):
    ranks, _ = ctx
    left = [LEDUC_COPIES - cards.count(r) for r in range(ranks)]
    total = sum(left)
    v = b.chance()
    for r in range(ranks):
        if left[r]:
            p = left[r] / total
            b.add_outcome(v, p, _leduc_bet(b, ctx, cards, r, 1, hist, contrib, folded, reach * p))
    return v


def _leduc_showdown(cards, board, contrib, folded):
    live = [s for s in range(3) if s not in folded]

    def strength(s):
        return (cards[s] == board, cards[s])

    best = max(strength(s) for s in live)
    winners = [s for s in live if strength(s) == best]
    pot = sum(contrib)
    return [(pot / len(winners) if s in winners else 0) - contrib[s] for s in range(3)]
