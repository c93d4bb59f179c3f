import numpy as np
import pytest

from quotval import (
    Coalition,
    CoalitionGame,
    GameCache,
    LabeledDataset,
    LearnerConfig,
    make_data_value_game,
    make_random_monotone_game,
    make_unanimity_game,
    normalized_game,
)
from quotval.market import SyntheticDGPConfig, generate_synthetic_market


def members(c):
    return set(c.members())


class TestCoalition:
    def test_roundtrip(self):
        c = Coalition.from_members([0, 3, 5])
        assert members(c) == {0, 3, 5}
        assert len(c) == 3
        assert 3 in c and 1 not in c

    def test_empty_distinct_from_singleton(self):
        assert Coalition.empty() != Coalition.from_members([0])
        assert not Coalition.empty()
        assert len(Coalition.empty()) == 0

    def test_set_ops(self):
        a = Coalition.from_members([0, 1])
        assert a.add(2) == Coalition.from_members([0, 1, 2])
        assert Coalition.from_members([1]).issubset(a)
        assert not a.issubset(Coalition.from_members([1]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            Coalition.from_members([64])


class TestUnanimity:
    def test_two_player_example(self):
        g = make_unanimity_game(2, Coalition.from_members([0, 1]))
        assert g.value(Coalition.from_members([0])) == 0.0
        assert g.value(Coalition.from_members([0, 1])) == 1.0

    def test_single_player(self):
        g = make_unanimity_game(1, Coalition.from_members([0]))
        assert g.value(Coalition.from_members([0])) == 1.0
        assert g.value(Coalition.empty()) == 0.0

    def test_five_player_any_four_subset_zero(self):
        g = make_unanimity_game(5, Coalition.full(5))
        for drop in range(5):
            c = Coalition(Coalition.full(5).mask ^ (1 << drop))
            assert g.value(c) == 0.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            make_unanimity_game(0, Coalition.from_members([0]))
        with pytest.raises(ValueError):
            make_unanimity_game(3, Coalition.empty())

    def test_zero_one_valued_and_monotone_exhaustive(self):
        # exhaustively verifiable for small K
        for k in (2, 3, 5):
            g = make_unanimity_game(k, Coalition.from_members([0, k - 1]))
            for mask in range(1 << k):
                v = g.value(Coalition(mask))
                assert v in (0.0, 1.0)
                for p in range(k):
                    if not mask >> p & 1:
                        assert g.value(Coalition(mask | 1 << p)) >= v


class TestRandomMonotone:
    def test_normalization(self):
        g = make_random_monotone_game(3, seed=0)
        assert g.value(Coalition.empty()) == 0.0
        assert g.value(Coalition.full(3)) == 1.0

    def test_monotone_exhaustive_seed7(self):
        g = make_random_monotone_game(3, seed=7)
        for mask in range(8):
            for p in range(3):
                if not mask >> p & 1:
                    assert g.value(Coalition(mask | 1 << p)) >= g.value(Coalition(mask))

    def test_monotone_many_seeds(self):
        for seed in range(25):
            g = make_random_monotone_game(5, seed=seed)
            for mask in range(32):
                for p in range(5):
                    if not mask >> p & 1:
                        assert g.value(Coalition(mask | 1 << p)) >= g.value(Coalition(mask))

    def test_deterministic(self):
        t1 = [make_random_monotone_game(2, seed=0).value(Coalition(m)) for m in range(4)]
        t2 = [make_random_monotone_game(2, seed=0).value(Coalition(m)) for m in range(4)]
        assert t1 == t2

    def test_range_check(self):
        with pytest.raises(ValueError):
            make_random_monotone_game(0, seed=0)
        with pytest.raises(ValueError):
            make_random_monotone_game(17, seed=0)


class TestGameCache:
    def test_bit_for_bit_and_counters(self):
        calls = []

        def oracle(c):
            calls.append(c.mask)
            return 0.125 * len(c)

        g = CoalitionGame(3, oracle, cache=GameCache())
        c = Coalition.from_members([0, 2])
        v1 = g.value(c)
        v2 = g.value(c)
        assert v1 == v2
        assert g.cache.hits == 1 and g.cache.misses == 1
        assert calls == [c.mask]

    def test_cache_transparency(self):
        oracle = lambda c: float(len(c)) ** 1.5
        cached = CoalitionGame(4, oracle, cache=GameCache())
        plain = CoalitionGame(4, oracle)
        for mask in range(16):
            assert cached.value(Coalition(mask)) == plain.value(Coalition(mask))


def test_normalized_game_subtracts_baseline():
    g = CoalitionGame(2, lambda c: 1.0 + len(c))
    ng = normalized_game(g)
    assert ng.value(Coalition.empty()) == 0.0
    assert ng.value(Coalition.full(2)) == 2.0


class TestDataValueGame:
    def _market(self, seed=0, n=4):
        profile, valset = generate_synthetic_market(
            SyntheticDGPConfig(n_providers=n, examples_per_provider=20, n_features=8, seed=seed)
        )
        sets = [profile.identity_dataset(j) for j in range(n)]
        return make_data_value_game(sets, LearnerConfig(n_classes=4), valset)

    def test_empty_is_zero(self):
        g = self._market()
        assert g.value(Coalition.empty()) == 0.0

    def test_zero_unit_player_is_null(self):
        profile, valset = generate_synthetic_market(
            SyntheticDGPConfig(n_providers=2, examples_per_provider=20, n_features=8, seed=1)
        )
        sets = [profile.identity_dataset(0), profile.identity_dataset(1)]
        empty = LabeledDataset(np.zeros((0, 8)), np.zeros(0, dtype=np.int64))
        g = make_data_value_game(sets + [empty], LearnerConfig(n_classes=4), valset)
        both = g.value(Coalition.from_members([0, 1]))
        with_empty = g.value(Coalition.from_members([0, 1, 2]))
        assert both == with_empty

    def test_full_beats_singletons_across_seeds(self):
        # derived check: tabulate 20 seeds of the default synthetic generator
        wins = 0
        for seed in range(20):
            profile, valset = generate_synthetic_market(SyntheticDGPConfig(seed=seed))
            sets = [profile.identity_dataset(j) for j in range(8)]
            g = make_data_value_game(sets, LearnerConfig(n_classes=4), valset)
            full = g.value(Coalition.full(8))
            singles = max(g.value(Coalition.from_members([j])) for j in range(8))
            wins += full > singles
        assert wins >= 18

    def test_memoized(self):
        g = self._market()
        g.value(Coalition.full(4))
        misses = g.cache.misses
        g.value(Coalition.full(4))
        assert g.cache.misses == misses
