import math

import numpy as np
import pytest
from scipy.special import comb

from quotval import (
    BANZHAF_NORMALIZED,
    BANZHAF_RAW,
    SHAPLEY,
    BudgetExceededError,
    Coalition,
    CoalitionGame,
    DegenerateNormalizationError,
    Estimator,
    SemivalueSpec,
    beta_family,
    closed_form_split_gain,
    estimate_semivalue,
    exact_semivalue,
    make_random_monotone_game,
    make_unanimity_game,
    normalize_payments,
    permutation_shapley,
    random_subset_banzhaf,
    sample_budget,
    stratified_subset_semivalue,
    weight,
)
from quotval.semivalues import weights_for

FAMILIES = [SHAPLEY, BANZHAF_RAW, beta_family(2.0, 2.0), beta_family(0.5, 3.0)]


class TestWeights:
    def test_shapley_values(self):
        assert weight(SHAPLEY, 2, 1) == pytest.approx(0.5, abs=1e-15)
        assert weight(SHAPLEY, 4, 3) == pytest.approx(0.25, abs=1e-15)

    def test_banzhaf_flat(self):
        for s in range(4):
            assert weight(BANZHAF_RAW, 4, s) == pytest.approx(1 / 8, abs=1e-15)

    def test_beta11_equals_shapley(self):
        # Beta(1,1) tilts uniformly over orders, which is the Shapley family
        for k in range(1, 11):
            np.testing.assert_allclose(
                weights_for(beta_family(1.0, 1.0), k), weights_for(SHAPLEY, k), atol=1e-12
            )

    def test_normalization_constraint(self):
        for fam in FAMILIES + [beta_family(1.0, 1.0)]:
            for k in range(1, 21):
                w = weights_for(fam, k)
                assert w.min() >= 0
                total = float(np.sum(comb(k - 1, np.arange(k)) * w))
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            weight(SHAPLEY, 3, 3)


class TestExact:
    def test_two_player_unanimity(self):
        g = make_unanimity_game(2, Coalition.full(2))
        r = exact_semivalue(g, SemivalueSpec())
        np.testing.assert_allclose(r.per_player, [0.5, 0.5], atol=1e-12)
        assert r.eta_bound == 0.0

    def test_three_player_unanimity_shapley(self):
        g = make_unanimity_game(3, Coalition.full(3))
        r = exact_semivalue(g, SemivalueSpec())
        np.testing.assert_allclose(r.per_player, [1 / 3] * 3, atol=1e-12)

    def test_three_player_unanimity_banzhaf(self):
        # each player is pivotal only for the single coalition of size 2
        g = make_unanimity_game(3, Coalition.full(3))
        r = exact_semivalue(g, SemivalueSpec(family=BANZHAF_RAW))
        np.testing.assert_allclose(r.per_player, [0.25] * 3, atol=1e-12)

    def test_budget_error(self):
        g = CoalitionGame(17, lambda c: float(len(c)))
        with pytest.raises(BudgetExceededError):
            exact_semivalue(g, SemivalueSpec())

    def test_shapley_efficiency_random_monotone(self):
        for k, seed in [(4, 0), (7, 1), (10, 2)]:
            g = make_random_monotone_game(k, seed)
            r = exact_semivalue(g, SemivalueSpec())
            assert r.total() == pytest.approx(g.grand_value(), abs=1e-9)

    def test_null_player_all_families(self):
        base = make_random_monotone_game(3, seed=5)

        def oracle(c):  # player 3 contributes nothing
            return base.value(Coalition(c.mask & 0b111))

        g = CoalitionGame(4, oracle)
        for fam in FAMILIES:
            r = exact_semivalue(g, SemivalueSpec(family=fam))
            assert r.per_player[3] == 0.0

    def test_symmetry_under_player_swap(self):
        base = make_random_monotone_game(4, seed=9)

        def swapped(c):  # relabel players 0 <-> 1
            m = c.mask
            b0, b1 = m & 1, m >> 1 & 1
            m = (m & ~0b11) | (b0 << 1) | b1
            return base.value(Coalition(m))

        g = CoalitionGame(4, swapped)
        for fam in FAMILIES:
            r0 = exact_semivalue(base, SemivalueSpec(family=fam)).per_player
            r1 = exact_semivalue(g, SemivalueSpec(family=fam)).per_player
            np.testing.assert_allclose(r1, r0[[1, 0, 2, 3]], atol=1e-12)


class TestSampledEstimators:
    def test_permutation_close_to_exact(self):
        g = make_unanimity_game(3, Coalition.full(3))
        r = permutation_shapley(g, samples=4096, master_seed=0)
        np.testing.assert_allclose(r.per_player, [1 / 3] * 3, atol=0.03)

    def test_permutation_k1(self):
        g = make_unanimity_game(1, Coalition.from_members([0]))
        for samples in (1, 7):
            r = permutation_shapley(g, samples, master_seed=3)
            assert r.per_player[0] == 1.0

    def test_permutation_deterministic(self):
        g = make_random_monotone_game(5, seed=2)
        r1 = permutation_shapley(g, 64, master_seed=42)
        r2 = permutation_shapley(g, 64, master_seed=42)
        assert np.array_equal(r1.per_player, r2.per_player)

    def test_subset_two_player(self):
        g = make_unanimity_game(2, Coalition.full(2))
        r = random_subset_banzhaf(g, 4096, master_seed=0)
        np.testing.assert_allclose(r.per_player, [0.5, 0.5], atol=0.03)

    def test_subset_three_player(self):
        g = make_unanimity_game(3, Coalition.full(3))
        r = random_subset_banzhaf(g, 4096, master_seed=1)
        np.testing.assert_allclose(r.per_player, [0.25] * 3, atol=0.03)

    def test_subset_k1(self):
        g = make_unanimity_game(1, Coalition.from_members([0]))
        assert random_subset_banzhaf(g, 3, master_seed=0).per_player[0] == 1.0

    def test_stratified_matches_exact_beta(self):
        g = make_random_monotone_game(5, seed=4)
        fam = beta_family(2.0, 2.0)
        exact = exact_semivalue(g, SemivalueSpec(family=fam)).per_player
        est = stratified_subset_semivalue(g, fam, samples=6000, master_seed=0)
        np.testing.assert_allclose(est.per_player, exact, atol=0.04)

    def test_eta_bound_coverage(self):
        # sampled estimates should sit inside the reported Hoeffding
        # half-width in at least 95% of seeded trials
        hits = 0
        trials = 40
        for t in range(trials):
            g = make_random_monotone_game(6, seed=100 + t)
            exact = exact_semivalue(g, SemivalueSpec()).per_player
            est = permutation_shapley(g, 256, master_seed=t)
            if np.max(np.abs(est.per_player - exact)) <= est.eta_bound:
                hits += 1
        assert hits >= math.ceil(0.95 * trials)


class TestDispatch:
    def test_exact_limit_fallback(self):
        g = make_unanimity_game(3, Coalition.full(3))
        spec = SemivalueSpec(estimator=Estimator("permutation", 8), exact_n_limit=4)
        r = estimate_semivalue(g, spec)
        assert r.estimator_used == "exact"

    def test_family_estimator_mismatch(self):
        g = make_unanimity_game(6, Coalition.full(6))
        with pytest.raises(ValueError):
            estimate_semivalue(
                g, SemivalueSpec(family=BANZHAF_RAW, estimator=Estimator("permutation", 8), exact_n_limit=0)
            )
        with pytest.raises(ValueError):
            estimate_semivalue(
                g, SemivalueSpec(family=SHAPLEY, estimator=Estimator("random_subset", 8), exact_n_limit=0)
            )

    def test_beta_uses_stratified(self):
        g = make_unanimity_game(6, Coalition.full(6))
        spec = SemivalueSpec(
            family=beta_family(2.0, 2.0), estimator=Estimator("stratified_subset", 16), exact_n_limit=0
        )
        assert estimate_semivalue(g, spec).estimator_used == "stratified_subset"


class TestNormalization:
    def test_uniform_rescale(self):
        r = exact_semivalue(make_unanimity_game(3, Coalition.full(3)), SemivalueSpec(family=BANZHAF_RAW))
        scaled = normalize_payments(r, 1.0)
        np.testing.assert_allclose(scaled.per_player, [1 / 3] * 3, atol=1e-12)
        assert scaled.total() == pytest.approx(1.0, abs=1e-9)

    def test_plain_rescale(self):
        r = exact_semivalue(make_unanimity_game(2, Coalition.full(2)), SemivalueSpec())
        r.per_player = np.array([0.2, 0.3])
        scaled = normalize_payments(r, 1.0)
        np.testing.assert_allclose(scaled.per_player, [0.4, 0.6], atol=1e-12)

    def test_efficiency_fixed_point(self):
        g = make_random_monotone_game(5, seed=8)
        r = exact_semivalue(g, SemivalueSpec())
        scaled = normalize_payments(r, r.total())
        np.testing.assert_allclose(scaled.per_player, r.per_player, atol=1e-12)

    def test_degenerate_floor(self):
        r = exact_semivalue(make_unanimity_game(2, Coalition.full(2)), SemivalueSpec())
        r.per_player = np.array([1e-8, -1e-8])
        with pytest.raises(DegenerateNormalizationError):
            normalize_payments(r, 1.0)


class TestSampleBudget:
    def test_reference_case(self):
        assert sample_budget(1.0, 0.1, 4, 0.05) == 254

    def test_trivial_accuracy(self):
        assert 1 <= sample_budget(1.0, 1.0, 4, 0.05) <= 3

    def test_inverse_square_scaling(self):
        r1 = sample_budget(1.0, 0.05, 4, 0.05)
        r2 = sample_budget(1.0, 0.1, 4, 0.05)
        assert r1 == pytest.approx(4 * r2, rel=0.01)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            sample_budget(1.0, 0.0, 4, 0.05)
        with pytest.raises(ValueError):
            sample_budget(1.0, 0.1, 4, 1.5)


class TestClosedFormSplitGain:
    def test_shapley_reference(self):
        add, mult = closed_form_split_gain(SHAPLEY, 2, 3)
        assert mult == pytest.approx(1.5, abs=1e-12)
        assert add == pytest.approx(0.25, abs=1e-12)

    def test_shapley_n_averaged(self):
        mean = np.mean([closed_form_split_gain(SHAPLEY, n, 3)[1] for n in range(2, 7)])
        assert mean == pytest.approx(1.939, abs=5e-4)

    def test_banzhaf_boundary(self):
        add, mult = closed_form_split_gain(BANZHAF_RAW, 2, 2)
        assert mult == pytest.approx(1.0, abs=1e-12)
        assert add == pytest.approx(0.0, abs=1e-12)

    def test_banzhaf_independent_of_n(self):
        for k in range(2, 7):
            mults = {round(closed_form_split_gain(BANZHAF_RAW, n, k)[1], 12) for n in range(2, 7)}
            assert len(mults) == 1
            assert mults.pop() == pytest.approx(k / 2 ** (k - 1), abs=1e-12)

    def test_normalized_unsupported(self):
        with pytest.raises(ValueError):
            closed_form_split_gain(BANZHAF_NORMALIZED, 2, 3)
