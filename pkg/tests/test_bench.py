import json

import numpy as np
import pytest

from quotval.bench import (
    ConfigError,
    MechanismConfig,
    RunRecord,
    aggregate,
    attack_from_dict,
    baseline_mechanism,
    default_config,
    derive_seed,
    emit_plot_data,
    family_from_name,
    market_from_pool,
    mechanism_from_dict,
    quotient_mechanism,
    run_cross_product,
    run_experiment,
    run_s1,
    validate_config,
    write_runs_csv,
)
from quotval.cli import main as cli_main
from quotval.evidence import EvidenceConfig
from quotval.market import SyntheticDGPConfig
from quotval.semivalues import SHAPLEY, closed_form_split_gain
from quotval.thetapredict import synthetic_embedding_pool
from quotval.embed_io import write_embed1

SMALL_DGP = SyntheticDGPConfig(n_providers=4, examples_per_provider=15, n_features=8)


def small_mechs():
    return [
        quotient_mechanism(EvidenceConfig(layer="oracle_latent"), exact_n_limit=16),
        baseline_mechanism("uniform_identity"),
    ]


def small_attacks():
    return [attack_from_dict({"family": "sybil_split_k", "k": 2})]


class TestConfigValidation:
    def test_defaults_validate(self):
        for exp in ("s1_split_gain", "s2_main_table", "s4_threshold_frontier", "s5_noise_grid"):
            validate_config(default_config(exp))

    def test_unknown_top_key(self):
        cfg = default_config("s2_main_table")
        cfg["walltime"] = 10
        with pytest.raises(ConfigError, match="walltime"):
            validate_config(cfg)

    def test_unknown_attack(self):
        cfg = default_config("s2_main_table")
        cfg["attacks"] = [{"family": "ddos"}]
        with pytest.raises(ConfigError, match="ddos"):
            validate_config(cfg)

    def test_attack_param_leakage(self):
        with pytest.raises(ConfigError, match="sigma"):
            attack_from_dict({"family": "sybil_split_k", "sigma": 0.1})

    def test_empty_attacks(self):
        cfg = default_config("s2_main_table")
        cfg["attacks"] = []
        with pytest.raises(ConfigError, match="empty"):
            validate_config(cfg)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            default_config("s99_mystery")

    def test_schema_version(self):
        cfg = default_config("s2_main_table")
        cfg["schema_version"] = 2
        with pytest.raises(ConfigError, match="schema_version"):
            validate_config(cfg)

    def test_mechanism_parsing(self):
        m = mechanism_from_dict(
            {"evidence": "cosine", "theta": 0.9, "allocation": "count_canonical", "family": "beta(2,2)"}
        )
        assert "cosine@0.9" in m.name
        with pytest.raises(ConfigError):
            mechanism_from_dict({"evidence": "cosine", "color": "red"})

    def test_family_names(self):
        assert family_from_name("shapley") is SHAPLEY
        assert family_from_name("beta(2,2)-norm").normalized
        with pytest.raises(ConfigError):
            family_from_name("owen")


class TestS1Runner:
    def test_measured_matches_closed_form(self):
        rows, summary = run_s1({"split_range": [2, 6]})
        for r in rows:
            assert abs(r["measured_mult"] - r["predicted_mult"]) < 1e-9
            assert abs(r["measured_add"] - r["predicted_add"]) < 1e-9
        assert summary["n_averaged_mult"]["shapley/k=3"] == pytest.approx(1.939, abs=5e-4)


class TestCrossProduct:
    def test_records_well_formed(self):
        records = run_cross_product(
            "t", SMALL_DGP, small_mechs(), small_attacks(), seeds=[0, 1]
        )
        assert len(records) == 4
        for r in records:
            assert r.G == pytest.approx(1.0, abs=1e-9) or r.mechanism.startswith("baseline")
            assert r.K >= 1

    def test_rerun_is_byte_identical_modulo_runtime(self, tmp_path):
        paths = []
        for i in (1, 2):
            records = run_cross_product(
                "t", SMALL_DGP, small_mechs(), small_attacks(), seeds=[0]
            )
            p = tmp_path / f"runs{i}.csv"
            write_runs_csv(p, records)
            paths.append(p)

        def strip_runtime(path):
            lines = path.read_text().splitlines()
            return ["," .join(line.split(",")[:-1]) for line in lines]

        assert strip_runtime(paths[0]) == strip_runtime(paths[1])

    def test_aggregate_recomputable_from_rows(self):
        records = run_cross_product(
            "t", SMALL_DGP, small_mechs(), small_attacks(), seeds=[0, 1, 2]
        )
        agg = aggregate(records)
        for row in agg:
            manual = [
                r.G
                for r in records
                if r.mechanism == row["mechanism"] and r.attack == row["attack"] and r.G is not None
            ]
            assert row["G_mean"] == pytest.approx(float(np.mean(manual)), abs=1e-12)

    def test_empty_lists_rejected(self):
        with pytest.raises(ConfigError):
            run_cross_product("t", SMALL_DGP, small_mechs(), [], seeds=[0])
        with pytest.raises(ConfigError):
            run_cross_product("t", SMALL_DGP, small_mechs(), small_attacks(), seeds=[])

    def test_derive_seed_stable(self):
        assert derive_seed(5, 1) == derive_seed(5, 1)
        assert derive_seed(5, 1) != derive_seed(5, 2)


class TestPlotData:
    def _records(self):
        return [
            RunRecord("s4", "quotient|cosine@0.85|collapse|equal|sh", "near_dup", s, g, 0, 0, 0, 0, 0, 4, 1)
            for s, g in [(0, 1.2), (1, 1.3)]
        ] + [
            RunRecord("s4", "quotient|cosine@0.95|collapse|equal|sh", "near_dup", 0, 1.0, 0, 0, 0, 0, 0, 4, 1)
        ]

    def test_frontier(self, tmp_path):
        path = tmp_path / "plot.csv"
        emit_plot_data(self._records(), "frontier", path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,series,mean,se"
        assert any(line.startswith("0.85") for line in lines[1:])

    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "plot.csv"
        emit_plot_data([], "grid", path)
        assert path.read_text().strip() == "x,series,mean,se"

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_plot_data([], "sankey", tmp_path / "x.csv")


class TestRunExperiment:
    def test_s1_end_to_end(self, tmp_path):
        code = run_experiment({"experiment": "s1_split_gain"}, tmp_path)
        assert code == 0
        assert (tmp_path / "s1_table.csv").exists()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["n_averaged_mult"]["banzhaf/k=2"] == pytest.approx(1.0, abs=1e-9)

    def test_custom_tiny_experiment(self, tmp_path):
        cfg = {
            "experiment": "s2_main_table",
            "dgp": {"n_providers": 4, "examples_per_provider": 15, "n_features": 8},
            "seeds": [0],
            "attacks": [{"family": "sybil_split_k", "k": 2}],
            "mechanisms": [{"evidence": "oracle_latent", "exact_n_limit": 16}],
        }
        code = run_experiment(cfg, tmp_path)
        assert code == 0
        runs = (tmp_path / "runs.csv").read_text().splitlines()
        assert len(runs) == 2
        assert (tmp_path / "aggregate.csv").exists()
        assert (tmp_path / "summary.json").exists()


class TestMarketFromPool:
    def test_shapes_and_determinism(self):
        pool = synthetic_embedding_pool(n_classes=4, per_class=120, dim=16, seed=0)
        p1, v1 = market_from_pool(pool, 4, 30, 100, seed=1)
        p2, v2 = market_from_pool(pool, 4, 30, 100, seed=1)
        assert p1.total_units() == 120
        assert len(v1) == 100
        assert np.array_equal(v1.features, v2.features)
        assert [u.unit_id for u in p1.all_units()] == [u.unit_id for u in p2.all_units()]

    def test_validation_disjoint_from_training(self):
        pool = synthetic_embedding_pool(n_classes=4, per_class=60, dim=16, seed=1)
        profile, valset = market_from_pool(pool, 4, 20, 80, seed=2)
        train_rows = {u.features.tobytes() for u in profile.all_units()}
        val_rows = {valset.features[i].tobytes() for i in range(len(valset))}
        assert not train_rows & val_rows

    def test_pool_too_small(self):
        pool = synthetic_embedding_pool(n_classes=2, per_class=20, dim=8, seed=2)
        with pytest.raises(ConfigError):
            market_from_pool(pool, 4, 50, 100, seed=0)


class TestCli:
    def test_version(self, capsys):
        assert cli_main(["version"]) == 0
        assert capsys.readouterr().out.strip() == "0.1.0"

    def test_validate_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "s1_split_gain"}))
        assert cli_main(["validate-config", str(cfg)]) == 0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "s1_split_gain", "nope": 1}))
        assert cli_main(["validate-config", str(bad)]) == 2

    def test_run_s1(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "s1_split_gain"}))
        assert cli_main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "s1_table.csv").exists()

    def test_predict_theta(self, tmp_path, capsys):
        pool = synthetic_embedding_pool(n_classes=4, per_class=60, dim=48, seed=3)
        path = tmp_path / "pool.embed1"
        write_embed1(path, pool.vectors.astype(np.float32), pool.class_labels.astype(np.int32))
        code = cli_main(
            [
                "predict-theta",
                "--embeddings",
                str(path),
                "--providers",
                "4",
                "--units-per",
                "30",
                "--trials",
                "4",
            ]
        )
        assert code == 0
        blob = json.loads(capsys.readouterr().out)
        assert "admissible_interval" in blob

    def test_missing_embeddings_file(self, capsys):
        assert cli_main(["predict-theta", "--embeddings", "/no/such.embed1", "--providers", "4", "--units-per", "10"]) == 2
