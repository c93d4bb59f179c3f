"""Coalition encodings, value oracles, and canonical game constructors.

Coalitions over up to 64 players are fixed-width bitmasks, which keeps set
operations O(1) and hashing exact. Games are a player count plus a pure
coalition -> value oracle, normalized so the empty coalition is worth 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .learner import LabeledDataset, LearnerConfig, accuracy, concat_datasets, majority_class, train

MAX_PLAYERS = 64


class EvaluationError(RuntimeError):
    """Value oracle failed; carries the offending coalition."""

    def __init__(self, message: str, coalition: "Coalition | None" = None):
        super().__init__(message)
        self.coalition = coalition


@dataclass(frozen=True)
class Coalition:
    """Immutable player subset encoded as a bitmask over [0, K)."""

    mask: int = 0

    @classmethod
    def from_members(cls, members: Iterable[int]) -> "Coalition":
        mask = 0
        for i in members:
            if i < 0 or i >= MAX_PLAYERS:
                raise ValueError(f"player index {i} outside [0, {MAX_PLAYERS})")
            mask |= 1 << i
        return cls(mask)

    @classmethod
    def empty(cls) -> "Coalition":
        return cls(0)

    @classmethod
    def full(cls, k: int) -> "Coalition":
        return cls((1 << k) - 1)

    def members(self) -> list[int]:
        return [i for i in range(self.mask.bit_length()) if self.mask >> i & 1]

    def __contains__(self, player: int) -> bool:
        return bool(self.mask >> player & 1)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def add(self, player: int) -> "Coalition":
        return Coalition(self.mask | 1 << player)

    def union(self, other: "Coalition") -> "Coalition":
        return Coalition(self.mask | other.mask)

    def issubset(self, other: "Coalition") -> bool:
        return self.mask & ~other.mask == 0

    def __bool__(self) -> bool:
        return self.mask != 0


@dataclass
class GameCache:
    """Memo for coalition values. A cached value is returned bit-for-bit."""

    memo: dict[int, float] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0


@dataclass
class CoalitionGame:
    """K players plus a value oracle with value(empty) == 0.

    `value_range` is the oracle's documented range V; `is_monotone_hint`
    is advisory (spot-checked by tests, never enforced at runtime).
    """

    player_count: int
    value_oracle: Callable[[Coalition], float]
    value_range: float = 1.0
    is_monotone_hint: bool = False
    cache: GameCache | None = None

    def __post_init__(self):
        if self.player_count < 1 or self.player_count > MAX_PLAYERS:
            raise ValueError(f"player_count must be in [1, {MAX_PLAYERS}]")

    def value(self, coalition: Coalition) -> float:
        if coalition.mask >> self.player_count:
            raise ValueError("coalition contains players outside the game")
        if self.cache is None:
            return float(self.value_oracle(coalition))
        cached = self.cache.memo.get(coalition.mask)
        if cached is not None:
            self.cache.hits += 1
            return cached
        self.cache.misses += 1
        v = float(self.value_oracle(coalition))
        self.cache.memo[coalition.mask] = v
        return v

    def grand_value(self) -> float:
        return self.value(Coalition.full(self.player_count))


def normalized_game(game: CoalitionGame) -> CoalitionGame:
    """Wrap a game so value(empty) is exactly 0 (subtract the baseline)."""
    base = game.value_oracle(Coalition.empty())
    if base == 0.0:
        return game
    inner = game.value_oracle
    return CoalitionGame(
        player_count=game.player_count,
        value_oracle=lambda c: 0.0 if c.mask == 0 else inner(c) - base,
        value_range=game.value_range,
        is_monotone_hint=game.is_monotone_hint,
        cache=GameCache() if game.cache is not None else None,
    )


def make_unanimity_game(k: int, required: Coalition) -> CoalitionGame:
    """Game worth 1 iff the coalition contains every required player."""
    if k <= 0:
        raise ValueError("player count must be positive")
    if not required:
        raise ValueError("required coalition must be nonempty")
    if required.mask >> k:
        raise ValueError("required players outside [0, K)")
    req = required.mask

    def oracle(c: Coalition) -> float:
        return 1.0 if c.mask & req == req else 0.0

    return CoalitionGame(k, oracle, value_range=1.0, is_monotone_hint=True)


def make_random_monotone_game(k: int, seed: int) -> CoalitionGame:
    """Monotone game from i.i.d. nonnegative increments on the subset lattice.

    Masks are visited level by level (a seeded linear extension of the
    inclusion order); each coalition's value is the max over one-player-
    removed subsets plus a fresh increment, then the table is rescaled so
    value(full) == 1. Deterministic per seed. This generator is one simple
    stand-in among many valid "random monotone" distributions.
    """
    if k < 1 or k > 16:
        raise ValueError("player count must be in [1, 16] for exact enumeration")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(11,)))
    n = 1 << k
    masks = sorted(range(n), key=lambda m: (m.bit_count(), rng.random()))
    table = np.zeros(n)
    for m in masks:
        if m == 0:
            continue
        best = 0.0
        mm = m
        while mm:
            low = mm & -mm
            best = max(best, table[m ^ low])
            mm ^= low
        table[m] = best + rng.exponential()
    table /= table[n - 1]

    def oracle(c: Coalition) -> float:
        return float(table[c.mask])

    return CoalitionGame(k, oracle, value_range=1.0, is_monotone_hint=True)


def make_data_value_game(
    training_sets: list[LabeledDataset],
    learner: LearnerConfig,
    valset: LabeledDataset,
) -> CoalitionGame:
    """Held-out-accuracy game over canonical training multisets.

    value(Q) is the accuracy of the learner trained on the multiset union of
    the selected sets, minus the accuracy of the empty-model baseline (the
    majority-class predictor over the whole training pool). Values are
    memoized in a GameCache.
    """
    if len(valset) == 0:
        raise ValueError("validation set must be nonempty")
    dims = {ts.n_features for ts in training_sets if len(ts) > 0}
    if len(dims) > 1:
        raise ValueError(f"training sets disagree on feature dimensionality: {sorted(dims)}")
    if dims and valset.n_features not in dims:
        raise ValueError("validation features do not match training dimensionality")

    pool_labels = np.concatenate(
        [ts.labels for ts in training_sets if len(ts) > 0] or [np.zeros(0, dtype=np.int64)]
    )
    cfg = LearnerConfig(
        n_classes=learner.n_classes,
        max_iter=learner.max_iter,
        l2_strength=learner.l2_strength,
        standardize=learner.standardize,
        gradient_tol=learner.gradient_tol,
        empty_model_class=majority_class(pool_labels),
    )
    baseline = accuracy(train(LabeledDataset(np.zeros((0, valset.n_features)), np.zeros(0, dtype=np.int64)), cfg), valset)

    k = len(training_sets)

    def oracle(c: Coalition) -> float:
        if c.mask == 0:
            return 0.0
        parts = [training_sets[i] for i in c.members()]
        try:
            model = train(concat_datasets(parts), cfg)
            return accuracy(model, valset) - baseline
        except Exception as exc:  # noqa: BLE001 - annotate with the coalition and re-raise
            raise EvaluationError(f"learner failed on coalition {c.members()}: {exc}", c) from exc

    return CoalitionGame(k, oracle, value_range=1.0, is_monotone_hint=False, cache=GameCache())
