"""Riffle shuffles as walks on the (a, b) pile-size grid.

Decks are listed top to bottom.  A riffle cuts the top ``c`` cards into the
left pile and the rest into the right pile, then repeatedly drops the bottom
card of one pile onto the output pile.  The first card dropped ends up at
the bottom of the output deck, so the relative order inside each pile is
preserved.  The walk starts at (c, n - c) and removes one card per step
until it reaches (0, 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotARiffleError
from .rng import make_rng
from .sparse import SparseChain, word_log_probs


def binomial_pmf(n: int, p: float) -> np.ndarray:
    return np.array([math.comb(n, c) * p**c * (1.0 - p) ** (n - c) for c in range(n + 1)])


@dataclass(frozen=True)
class DropRule:
    """Pr[drop from the left pile] = beta a / (beta a + b)."""

    beta: float = 1.0

    def __call__(self, a: int, b: int) -> float:
        if a == 0 and b == 0:
            raise ValueError("both piles are empty")
        return self.beta * a / (self.beta * a + b)


@dataclass(frozen=True)
class ShuffleModel:
    n_cards: int
    cut_mass: np.ndarray = field(repr=False)
    drop_left: object = field(default_factory=DropRule)

    def __post_init__(self):
        n = int(self.n_cards)
        if n < 1:
            raise ConfigError("a deck needs at least one card")
        cm = np.array(self.cut_mass, dtype=float)
        if cm.shape != (n + 1,) or np.any(cm < 0) or abs(cm.sum() - 1.0) > 1e-9:
            raise ConfigError("cut_mass must be a distribution over cuts 0..n")
        cm.setflags(write=False)
        object.__setattr__(self, "cut_mass", cm)
        for a in range(n + 1):
            for b in range(n + 1 - a):
                if a + b == 0:
                    continue
                p = self.drop_left(a, b)
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"drop_left({a},{b}) = {p} is not a probability")
                if b == 0 and p != 1.0:
                    raise ConfigError(f"drop_left({a},0) must be 1")
                if a == 0 and p != 0.0:
                    raise ConfigError(f"drop_left(0,{b}) must be 0")

    def to_dict(self):
        d = {"n_cards": self.n_cards, "cut_mass": self.cut_mass.tolist()}
        if isinstance(self.drop_left, DropRule):
            d["drop_bias"] = self.drop_left.beta
        return d


def gsr_model(n: int) -> ShuffleModel:
    """Binomial(n, 1/2) cut, drop probability proportional to pile size."""
    return ShuffleModel(n, binomial_pmf(n, 0.5), DropRule(1.0))


def biased_gsr_model(n: int, cut_bias: float = 0.5, drop_bias: float = 1.0) -> ShuffleModel:
    """Binomial(n, cut_bias) cut and left-drop weight tilted by ``drop_bias``."""
    if not 0.0 < cut_bias < 1.0:
        raise ConfigError("cut_bias must lie in (0, 1)")
    if not (drop_bias > 0 and math.isfinite(drop_bias)):
        raise ConfigError("drop_bias must be positive")
    return ShuffleModel(n, binomial_pmf(n, cut_bias), DropRule(float(drop_bias)))


def grid_labels(n: int) -> tuple:
    """State labels per layer: layer 0 is {(0,0)}, layer t holds a+b = n-t+1."""
    labels = [((0, 0),)]
    for t in range(1, n + 2):
        s = n - t + 1
        labels.append(tuple((a, s - a) for a in range(s + 1)))
    return tuple(labels)


def build_grid_chain(model: ShuffleModel) -> SparseChain:
    """Layered chain with T = n + 1 steps; the state (a, b) of a layer is
    stored at index a."""
    n = model.n_cards
    layers = [np.asarray(model.cut_mass, dtype=float).reshape(1, n + 1)]
    for t in range(2, n + 2):
        s = n - t + 2
        L = np.zeros((s + 1, s))
        for a in range(s + 1):
            b = s - a
            p = model.drop_left(a, b)
            if a > 0:
                L[a, a - 1] += p
            if b > 0:
                L[a, a] += 1.0 - p
        layers.append(L)
    return SparseChain(tuple(layers), 0, float(n), grid_labels(n))


@dataclass(frozen=True)
class RiffleResult:
    deck: list
    path: tuple
    drops: list

    @property
    def cut(self) -> int:
        return self.path[0][0]


def riffle(model: ShuffleModel, deck, rng) -> RiffleResult:
    """One riffle of ``deck``; ``drops`` lists the cards in the order they fell."""
    n = model.n_cards
    deck = list(deck)
    if len(deck) != n:
        raise ValueError(f"deck has {len(deck)} cards, model expects {n}")
    rng = make_rng(rng)
    c = int(rng.choice(n + 1, p=model.cut_mass))
    left, right = deck[:c], deck[c:]
    a, b = c, n - c
    path = [(a, b)]
    drops = []
    for u in rng.random(n):
        if u < model.drop_left(a, b):
            a -= 1
            drops.append(left[a])
        else:
            b -= 1
            drops.append(right[b])
        path.append((a, b))
    return RiffleResult(drops[::-1], tuple(path), drops)


def shuffle_once(model: ShuffleModel, deck, seed=None) -> list:
    return riffle(model, deck, seed).deck


def void_path(n: int) -> tuple:
    """Canonical walk for the identity outcome: cut 0, all drops from the right."""
    return tuple((0, n - i) for i in range(n + 1))


def path_permutation(deck, path) -> list:
    """Deck produced by following ``path`` from ``deck``."""
    deck = list(deck)
    c = path[0][0]
    left, right = deck[:c], deck[c:]
    drops = []
    for (a0, b0), (a1, b1) in zip(path[:-1], path[1:]):
        drops.append(left[a1] if a1 < a0 else right[b1])
    return drops[::-1]


def canonical_path(path) -> tuple:
    """``path`` itself, or the void path if it leaves the deck unchanged."""
    n = sum(path[0])
    ident = list(range(n))
    return void_path(n) if path_permutation(ident, path) == ident else tuple(path)


def encode_shuffle(before, after) -> tuple:
    """Recover the grid walk that turns ``before`` into ``after``.

    The output positions of the cards of ``before`` must increase on a
    prefix and on the complementary suffix; the cut is the unique descent.
    """
    before, after = list(before), list(after)
    n = len(before)
    if sorted(map(str, before)) != sorted(map(str, after)) or len(set(map(str, before))) != n:
        raise NotARiffleError("decks are not permutations of the same cards")
    out_pos = {card: i for i, card in enumerate(after)}
    o = [out_pos[card] for card in before]
    descents = [v for v in range(n - 1) if o[v] > o[v + 1]]
    if len(descents) > 1:
        raise NotARiffleError(f"{len(descents) + 1} rising sequences; a riffle has at most 2")
    if not descents:
        return void_path(n)
    c = descents[0] + 1
    src = {card: i for i, card in enumerate(before)}
    a, b = c, n - c
    path = [(a, b)]
    for card in reversed(after):
        if src[card] < c:
            a -= 1
        else:
            b -= 1
        path.append((a, b))
    return tuple(path)


def identity_paths(n: int) -> list[tuple]:
    """The n + 1 walks that leave the deck unchanged: cut c, the whole
    right pile drops first, then the left pile."""
    out = []
    for c in range(n + 1):
        path = [(c, n - c)]
        path += [(c, b) for b in range(n - c - 1, -1, -1)]
        path += [(a, 0) for a in range(c - 1, -1, -1)]
        out.append(tuple(path))
    return out


def sample_identity_path(model: ShuffleModel, seed=None) -> tuple:
    """Walk drawn from ``model`` conditioned on the identity outcome.

    encode_shuffle cannot tell these walks apart; drawing one from the
    reference's conditional law restores the reference word distribution.
    """
    paths = identity_paths(model.n_cards)
    lp = word_log_probs(build_grid_chain(model), [path_to_word(p) for p in paths])
    w = np.exp(lp - lp.max())
    return paths[int(make_rng(seed).choice(len(paths), p=w / w.sum()))]


def path_to_word(path) -> np.ndarray:
    """Grid-chain word: the start state, then the left-pile size of each layer."""
    return np.array([0] + [a for a, _ in path], dtype=np.int64)


def word_to_path(word, n: int) -> tuple:
    return tuple((int(a), n - t - int(a)) for t, a in enumerate(np.asarray(word)[1:]))
