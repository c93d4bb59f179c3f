import numpy as np
import pytest

from quotval import (
    AttackSpec,
    EvidenceConfig,
    RepresentativeConfig,
    SyntheticDGPConfig,
    apply_attack,
    apply_representative,
    build_clusters,
    generate_synthetic_market,
    mixed_component_fraction,
)
from quotval.evidence import CanonicalSet
from quotval.games import EvaluationError
from quotval.market import Unit


def small_market(seed=0, n=4, epp=20):
    return generate_synthetic_market(
        SyntheticDGPConfig(n_providers=n, examples_per_provider=epp, n_features=8, seed=seed)
    )


def make_unit(uid, feats, label=0, latent=0, identity=0, source=None, ts=None):
    return Unit(
        unit_id=uid,
        features=np.asarray(feats, dtype=np.float64),
        label=label,
        latent_owner=latent,
        submitted_identity=identity,
        source_id=uid if source is None else source,
        timestamp=uid if ts is None else ts,
    )


def payloads(units):
    return sorted(u.payload_key() for u in units)


class TestBuildClusters:
    def test_oracle_latent_honest_bijection(self):
        profile, _ = generate_synthetic_market(SyntheticDGPConfig(seed=0))
        cl = build_clusters(profile, EvidenceConfig(layer="oracle_latent"))
        assert cl.n_clusters == 8
        members = cl.members(profile)
        for k, units in enumerate(members):
            assert {u.latent_owner for u in units} == {k}

    def test_oracle_latent_remerges_sybils(self):
        profile, _ = generate_synthetic_market(SyntheticDGPConfig(seed=0))
        att = apply_attack(profile, AttackSpec("sybil_split_k", k=3), seed=1)
        cl = build_clusters(att, EvidenceConfig(layer="oracle_latent"))
        assert cl.n_clusters == 8

    def test_none_layer_keeps_identities(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("sybil_split_k", k=3), seed=1)
        cl = build_clusters(att, EvidenceConfig(layer="none"))
        assert cl.n_clusters == att.n_identities
        for u in att.all_units():
            assert cl.cluster_of[u.unit_id] == cl.cluster_of[att.identities[u.submitted_identity][0].unit_id]

    def test_source_links_copies_not_pure_splits(self):
        profile, _ = small_market()
        dup = apply_attack(profile, AttackSpec("exact_dup_2x_sybils"), seed=1)
        assert build_clusters(dup, EvidenceConfig(layer="oracle_source")).n_clusters == 4
        split = apply_attack(profile, AttackSpec("sybil_split_k", k=3), seed=1)
        assert build_clusters(split, EvidenceConfig(layer="oracle_source")).n_clusters == 6

    def test_exact_hash_links_copies(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("exact_dup_2x_sybils"), seed=1)
        cl = build_clusters(att, EvidenceConfig(layer="exact_hash"))
        assert cl.n_clusters == 4
        origin = att.identities[0][0]
        copy = next(u for u in att.identities[4] if u.source_id == origin.source_id)
        assert cl.cluster_of[origin.unit_id] == cl.cluster_of[copy.unit_id]

    def test_noisy_oracle_zero_noise_is_oracle(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("sybil_split_k", k=3), seed=1)
        base = build_clusters(att, EvidenceConfig(layer="oracle_latent"))
        for seed in (0, 1, 99):
            noisy = build_clusters(
                att, EvidenceConfig(layer="noisy_oracle_latent", p_fs=0.0, p_fm=0.0, noise_seed=seed)
            )
            assert noisy.cluster_of == base.cluster_of

    def test_noisy_oracle_monotone_in_p_fm(self):
        profile, _ = small_market(n=6)
        ks = []
        for p_fm in (0.0, 0.1, 0.3, 0.6, 1.0):
            cl = build_clusters(
                profile,
                EvidenceConfig(layer="noisy_oracle_latent", p_fs=0.0, p_fm=p_fm, noise_seed=5),
            )
            ks.append(cl.n_clusters)
        assert ks == sorted(ks, reverse=True)
        assert ks[-1] == 1

    def test_noisy_oracle_p_fs_splits_pseudonyms(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("exact_dup_2x_sybils"), seed=1)
        cl = build_clusters(
            att, EvidenceConfig(layer="noisy_oracle_latent", p_fs=1.0, p_fm=0.0, noise_seed=0)
        )
        assert cl.n_clusters == 5  # the copy pseudonym escapes

    def test_cosine_monotone_in_theta(self):
        profile, _ = small_market(n=6)
        ks = [
            build_clusters(profile, EvidenceConfig(layer="cosine", theta=t)).n_clusters
            for t in (0.2, 0.5, 0.8, 0.99)
        ]
        assert ks == sorted(ks)

    def test_cosine_links_near_duplicates(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("near_duplicate_2x_sybils", sigma=0.01), seed=1)
        cl = build_clusters(att, EvidenceConfig(layer="cosine", theta=0.99))
        origin = att.identities[0][0]
        copy = next(u for u in att.identities[4] if u.source_id == origin.source_id)
        assert cl.cluster_of[origin.unit_id] == cl.cluster_of[copy.unit_id]

    def test_cosine_zero_norm_rejected(self):
        profile, _ = small_market()
        units = profile.identities[0]
        units[0] = make_unit(units[0].unit_id, np.zeros(8), identity=0)
        with pytest.raises(EvaluationError):
            build_clusters(profile, EvidenceConfig(layer="cosine", theta=0.9))

    def test_partition_property(self):
        profile, _ = small_market()
        att = apply_attack(profile, AttackSpec("exact_dup_2x_sybils"), seed=1)
        cl = build_clusters(att, EvidenceConfig(layer="oracle_latent"))
        sizes = [len(m) for m in cl.members(att)]
        assert sum(sizes) == att.total_units()
        assert all(s > 0 for s in sizes)
        assert set(cl.cluster_of.values()) == set(range(cl.n_clusters))

    def test_csv_serialization(self, tmp_path):
        profile, _ = small_market()
        cl = build_clusters(profile, EvidenceConfig(layer="oracle_latent"))
        path = tmp_path / "clusters.csv"
        cl.write_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "unit_id,cluster_id"
        assert len(rows) == profile.total_units() + 1


class TestRepresentatives:
    def test_collapse_identical_payloads(self):
        units = [make_unit(i, [1.0, 2.0]) for i in range(3)]
        out = apply_representative(units, RepresentativeConfig(mode="exact_dup_collapse"))
        assert len(out.units) == 1
        assert out.units[0].unit_id == 0

    def test_identity_unchanged(self):
        units = [make_unit(i, [float(i), 0.0]) for i in range(4)]
        out = apply_representative(units, RepresentativeConfig(mode="identity"))
        assert payloads(out.units) == payloads(units)

    def test_capped_first_takes_lowest_timestamps(self):
        units = [make_unit(i, [float(i), 1.0], ts=10 - i) for i in range(5)]
        out = apply_representative(
            units, RepresentativeConfig(mode="capped", kappa=2, selector="first")
        )
        assert sorted(u.unit_id for u in out.units) == [3, 4]

    def test_capped_medoid_deterministic(self):
        rng = np.random.default_rng(0)
        units = [make_unit(i, rng.normal(0, 1, 4)) for i in range(8)]
        a = apply_representative(units, RepresentativeConfig(mode="capped", kappa=3, selector="medoid"))
        b = apply_representative(units, RepresentativeConfig(mode="capped", kappa=3, selector="medoid"))
        assert [u.unit_id for u in a.units] == [u.unit_id for u in b.units]
        assert len(a.units) == 3

    def test_capped_centroid_majority_label_tie(self):
        units = [
            make_unit(0, [0.0, 0.0], label=1),
            make_unit(1, [2.0, 0.0], label=1),
            make_unit(2, [0.0, 2.0], label=0),
            make_unit(3, [2.0, 2.0], label=0),
        ]
        out = apply_representative(
            units, RepresentativeConfig(mode="capped", kappa=1, selector="centroid")
        )
        assert len(out.units) == 1
        assert out.units[0].label == 0  # tie broken toward the lowest class

    def test_weight_normalized(self):
        units = [make_unit(i, [float(i)]) for i in range(4)]
        out = apply_representative(
            units, RepresentativeConfig(mode="weight_normalized", budget=2.0)
        )
        assert len(out.units) == 4
        np.testing.assert_allclose(out.weights, [0.5] * 4)

    def test_provenance_select(self):
        units = [make_unit(i, [float(i)], source=i % 2) for i in range(4)]
        out = apply_representative(units, RepresentativeConfig(mode="provenance_select"))
        assert all(u.source_id == 0 for u in out.units)
        assert len(out.units) == 2

    def test_idempotence(self):
        rng = np.random.default_rng(1)
        units = [make_unit(i, rng.normal(0, 1, 3), label=i % 2) for i in range(6)]
        units += [make_unit(6 + i, units[i].features.copy(), label=units[i].label) for i in range(2)]
        for cfg in [
            RepresentativeConfig(mode="identity"),
            RepresentativeConfig(mode="exact_dup_collapse"),
            RepresentativeConfig(mode="capped", kappa=3, selector="first"),
            RepresentativeConfig(mode="capped", kappa=3, selector="medoid"),
            RepresentativeConfig(mode="capped", kappa=2, selector="centroid"),
            RepresentativeConfig(mode="weight_normalized", budget=1.0),
            RepresentativeConfig(mode="provenance_select"),
        ]:
            once = apply_representative(units, cfg)
            twice = apply_representative(once.units, cfg)
            assert payloads(twice.units) == payloads(once.units), cfg.label()

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError):
            apply_representative([], RepresentativeConfig())


class TestQuotientStabilityWitness:
    def test_canonical_sets_match_honest_after_attacks(self):
        profile, _ = small_market()
        honest_cl = build_clusters(profile, EvidenceConfig(layer="oracle_latent"))
        honest_canon = [
            payloads(apply_representative(m, RepresentativeConfig()).units)
            for m in honest_cl.members(profile)
        ]
        for spec in [
            AttackSpec("sybil_split_k", k=3),
            AttackSpec("exact_dup_2x_sybils", dup_fraction=1.0),
            AttackSpec("near_duplicate_2x_sybils", sigma=0.0),
        ]:
            att = apply_attack(profile, spec, seed=4)
            cl = build_clusters(att, EvidenceConfig(layer="oracle_latent"))
            canon = [
                payloads(apply_representative(m, RepresentativeConfig()).units)
                for m in cl.members(att)
            ]
            assert canon == honest_canon, spec.label()


class TestMixedComponentFraction:
    def test_honest_oracle_is_zero(self):
        profile, _ = small_market()
        cl = build_clusters(profile, EvidenceConfig(layer="oracle_latent"))
        assert mixed_component_fraction(cl, profile) == 0.0

    def test_single_giant_cluster_is_one(self):
        profile, _ = small_market()
        cl = build_clusters(
            profile, EvidenceConfig(layer="noisy_oracle_latent", p_fs=0.0, p_fm=1.0, noise_seed=0)
        )
        assert cl.n_clusters == 1
        assert mixed_component_fraction(cl, profile) == 1.0

    def test_high_false_merge_rate_mixes_clusters(self):
        # derived: simulate 20 seeds; heavy p_fm collapses the graph
        vals = []
        for seed in range(20):
            profile, _ = generate_synthetic_market(SyntheticDGPConfig(seed=seed))
            cl = build_clusters(
                profile,
                EvidenceConfig(layer="noisy_oracle_latent", p_fs=0.0, p_fm=0.4, noise_seed=seed),
            )
            vals.append(mixed_component_fraction(cl, profile))
        assert np.mean(vals) > 0.5
