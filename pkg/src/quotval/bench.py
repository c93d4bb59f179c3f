"""Config-driven experiment runner: seeded sweeps over (mechanism, attack,
seed) cells with per-run CSV records, aggregate tables, a JSON summary, and
long-format plot-data emission.

A mechanism is either a quotient pipeline (evidence x representative x
allocation x semivalue) or one of the identity-level baselines. The
`none` evidence layer makes the quotient pipeline coincide with the
per-identity semivalue baseline, so baselines and quotient mechanisms run
through one code path wherever possible.
"""

from __future__ import annotations

import csv
import json
import math
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .evidence import EvidenceConfig, RepresentativeConfig, build_clusters, mixed_component_fraction
from .learner import LabeledDataset, LearnerConfig
from .market import (
    AttackSpec,
    SubmittedProfile,
    SyntheticDGPConfig,
    apply_attack,
    baseline_payments,
    generate_synthetic_market,
    per_latent_totals,
    reported_game,
)
from .mechanism import AllocationRule, MechanismRun, evaluate_mechanism, leakage_terms, oracle_l1, pay
from .semivalues import (
    BANZHAF_NORMALIZED,
    BANZHAF_RAW,
    SHAPLEY,
    Estimator,
    Family,
    SemivalueSpec,
    beta_family,
    closed_form_split_gain,
    exact_semivalue,
)
from .games import Coalition, make_unanimity_game
from .thetapredict import EmbeddingPool

EXPERIMENTS = (
    "s1_split_gain",
    "s2_main_table",
    "s3_sample_budget",
    "s4_threshold_frontier",
    "s5_noise_grid",
    "s6_delta_proxy",
    "s7_allocation_rules",
    "s8_dgp_robustness",
    "holdout_sweep",
)

RUN_COLUMNS = (
    "experiment",
    "mechanism",
    "attack",
    "seed",
    "G",
    "gamma",
    "L",
    "D",
    "oracle_L1",
    "mcf",
    "K",
    "runtime_ms",
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, tag: int) -> int:
    """Stable sub-seed for one stream (attack draws, evidence noise, ...)."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(tag,)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# mechanism and attack specs as config dictionaries


@dataclass(frozen=True)
class MechanismConfig:
    kind: str  # quotient | baseline
    name: str
    evidence: EvidenceConfig | None = None
    representative: RepresentativeConfig | None = None
    allocation: AllocationRule | None = None
    family: Family = SHAPLEY
    estimator: Estimator = Estimator("exact")
    exact_n_limit: int = 10
    baseline_rule: str | None = None


def quotient_mechanism(
    evidence: EvidenceConfig,
    representative: RepresentativeConfig | None = None,
    allocation: AllocationRule | None = None,
    family: Family = SHAPLEY,
    estimator: Estimator = Estimator("exact"),
    exact_n_limit: int = 10,
) -> MechanismConfig:
    representative = representative or RepresentativeConfig()
    allocation = allocation or AllocationRule("equal_submitted")
    name = "|".join(
        [
            "quotient",
            evidence.label(),
            representative.label(),
            allocation.mode,
            f"{family.label()}/{estimator.kind}"
            + (f"({estimator.samples})" if estimator.kind != "exact" else ""),
        ]
    )
    return MechanismConfig(
        kind="quotient",
        name=name,
        evidence=evidence,
        representative=representative,
        allocation=allocation,
        family=family,
        estimator=estimator,
        exact_n_limit=exact_n_limit,
    )


def baseline_mechanism(rule: str) -> MechanismConfig:
    return MechanismConfig(kind="baseline", name=f"baseline|{rule}", baseline_rule=rule)


_ATTACK_FIELDS = {
    "honest": set(),
    "exact_dup_2x_sybils": {"dup_fraction"},
    "near_duplicate_2x_sybils": {"sigma"},
    "sybil_split_k": {"k", "scheme"},
    "label_noise": {"flip_fraction"},
}


def attack_from_dict(d: dict) -> AttackSpec:
    if "family" not in d:
        raise ConfigError("attack entry missing 'family'")
    family = d["family"]
    if family not in _ATTACK_FIELDS:
        raise ConfigError(f"unknown attack family: {family!r}")
    allowed = _ATTACK_FIELDS[family] | {"family", "attacker"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown attack keys for {family}: {sorted(unknown)}")
    try:
        return AttackSpec(**d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


_FAMILY_NAMES = {
    "shapley": SHAPLEY,
    "banzhaf": BANZHAF_RAW,
    "banzhaf_normalized": BANZHAF_NORMALIZED,
}


def family_from_name(name: str) -> Family:
    if name in _FAMILY_NAMES:
        return _FAMILY_NAMES[name]
    m = re.fullmatch(r"beta\(([0-9.]+),([0-9.]+)\)(-norm)?", name)
    if m:
        return beta_family(float(m.group(1)), float(m.group(2)), normalized=bool(m.group(3)))
    raise ConfigError(f"unknown semivalue family: {name!r}")


def mechanism_from_dict(d: dict) -> MechanismConfig:
    allowed = {
        "kind",
        "rule",
        "evidence",
        "theta",
        "p_fs",
        "p_fm",
        "hash_precision",
        "representative",
        "kappa",
        "selector",
        "budget",
        "allocation",
        "family",
        "estimator",
        "samples",
        "exact_n_limit",
    }
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown mechanism keys: {sorted(unknown)}")
    kind = d.get("kind", "quotient")
    if kind == "baseline":
        rule = d.get("rule")
        if rule not in ("uniform_identity", "per_example_uniform", "leave_one_out"):
            raise ConfigError(f"unknown baseline rule: {rule!r}")
        return baseline_mechanism(rule)
    if kind != "quotient":
        raise ConfigError(f"unknown mechanism kind: {kind!r}")
    try:
        ev = EvidenceConfig(
            layer=d.get("evidence", "oracle_latent"),
            theta=d.get("theta", 0.95),
            hash_precision=d.get("hash_precision", 8),
            p_fs=d.get("p_fs", 0.0),
            p_fm=d.get("p_fm", 0.0),
        )
        rep = RepresentativeConfig(
            mode=d.get("representative", "exact_dup_collapse"),
            kappa=d.get("kappa", 1),
            selector=d.get("selector", "first"),
            budget=d.get("budget", 1.0),
        )
        alloc = AllocationRule(d.get("allocation", "equal_submitted"))
        family = family_from_name(d.get("family", "shapley"))
        estimator = Estimator(d.get("estimator", "exact"), d.get("samples", 256))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return quotient_mechanism(ev, rep, alloc, family, estimator, d.get("exact_n_limit", 10))


# ---------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    experiment: str
    mechanism: str
    attack: str
    seed: int
    G: float | None
    gamma: float
    L: float
    D: float
    oracle_L1: float
    mcf: float
    K: int
    runtime_ms: float

    def row(self) -> list:
        def fmt(x):
            if x is None:
                return "nan"
            if isinstance(x, float):
                return f"{x:.10g}"
            return x

        return [fmt(getattr(self, c)) for c in RUN_COLUMNS]


def write_runs_csv(path, records: list[RunRecord]):
    records = sorted(records, key=lambda r: (r.mechanism, r.attack, r.seed))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for r in records:
            w.writerow(r.row())


def aggregate(records: list[RunRecord]) -> list[dict]:
    cells: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.mechanism, r.attack), []).append(r)
    out = []
    for (mech, attack), rs in sorted(cells.items()):
        gs = np.array([r.G for r in rs if r.G is not None], dtype=float)
        row = {
            "mechanism": mech,
            "attack": attack,
            "n": len(rs),
            "G_mean": float(gs.mean()) if gs.size else math.nan,
            "G_se": float(gs.std(ddof=1) / math.sqrt(gs.size)) if gs.size > 1 else 0.0,
        }
        for col in ("gamma", "L", "D", "oracle_L1", "mcf"):
            vals = np.array([getattr(r, col) for r in rs], dtype=float)
            finite = vals[np.isfinite(vals)]
            row[f"{col}_mean"] = float(finite.mean()) if finite.size else math.nan
        out.append(row)
    return out


def write_aggregate_csv(path, rows: list[dict]):
    if not rows:
        cols = ["mechanism", "attack", "n", "G_mean", "G_se"]
    else:
        cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})


def emit_plot_data(records: list[RunRecord], kind: str, path):
    """Long-format (x, series, mean, se) CSV sufficient to redraw the
    frontier / noise-grid / allocation figures externally."""
    if kind not in ("frontier", "grid", "allocation"):
        raise ConfigError(f"unknown plot kind: {kind!r}")
    groups: dict[tuple[str, str], list[float]] = {}
    for r in records:
        if r.G is None:
            continue
        if kind == "frontier":
            m = re.search(r"@([0-9.]+)", r.mechanism)
            x = m.group(1) if m else "ref"
            series = re.sub(r"@[0-9.]+", "", r.mechanism)
        elif kind == "grid":
            m = re.search(r"noisy_oracle\(fs=([0-9.]+),fm=([0-9.]+)\)", r.mechanism)
            x = f"{m.group(1)}/{m.group(2)}" if m else "ref"
            series = re.sub(r"noisy_oracle\([^)]*\)", "noisy_oracle", r.mechanism)
        else:
            m = re.search(r"fm=([0-9.]+)", r.mechanism)
            x = m.group(1) if m else "ref"
            series = r.mechanism.split("|")[3] if r.mechanism.count("|") >= 3 else r.mechanism
        groups.setdefault((x, series), []).append(r.G)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "series", "mean", "se"])
        for (x, series), vals in sorted(groups.items()):
            arr = np.array(vals)
            se = arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else 0.0
            w.writerow([x, series, f"{arr.mean():.10g}", f"{se:.10g}"])


# ---------------------------------------------------------------------------
# core cross-product executor


ORACLE_REFERENCE = quotient_mechanism(
    EvidenceConfig(layer="oracle_latent"),
    RepresentativeConfig(),
    AllocationRule("equal_submitted"),
)


def _semivalue_spec(mech: MechanismConfig, seed: int) -> SemivalueSpec:
    return SemivalueSpec(
        family=mech.family,
        estimator=mech.estimator,
        exact_n_limit=mech.exact_n_limit,
        master_seed=derive_seed(seed, 3),
    )


def _noise_seeded(ev: EvidenceConfig, seed: int) -> EvidenceConfig:
    if ev.layer == "noisy_oracle_latent":
        return replace(ev, noise_seed=derive_seed(seed, 2))
    return ev


def run_cell(
    honest: SubmittedProfile,
    attacked: SubmittedProfile,
    mech: MechanismConfig,
    learner: LearnerConfig,
    valset: LabeledDataset,
    seed: int,
    experiment: str,
    attack_label: str,
    honest_cache: dict,
    attacked_cache: dict,
    oracle_runs: dict,
) -> RunRecord:
    t0 = time.perf_counter()
    attacker = 0
    if mech.kind == "baseline":
        hon_game = honest_cache.setdefault("reported_game", reported_game(honest, learner, valset))
        att_game = attacked_cache.setdefault("reported_game", reported_game(attacked, learner, valset))
        p_h = baseline_payments(honest, mech.baseline_rule, game=hon_game)
        p_a = baseline_payments(attacked, mech.baseline_rule, game=att_game)
        lat_h = per_latent_totals(honest, p_h)
        lat_a = per_latent_totals(attacked, p_a)
        g = lat_a[attacker] / lat_h[attacker] if lat_h[attacker] > 1e-9 else None
        gamma = lat_a[attacker] - lat_h[attacker]
        ell = d_drift = math.nan
        clustering = build_clusters(attacked, EvidenceConfig(layer="none"))
        mcf = mixed_component_fraction(clustering, attacked)
        k = clustering.n_clusters
        o_l1 = math.nan
    else:
        spec = _semivalue_spec(mech, seed)
        ev = _noise_seeded(mech.evidence, seed)
        report = pay(
            attacked,
            ev,
            mech.representative,
            mech.allocation,
            spec,
            learner,
            valset,
            pipeline_cache=attacked_cache.setdefault("pipelines", {}),
            honest_pipeline_cache=honest_cache.setdefault("pipelines", {}),
        )
        g = report.multiplicative_gain.get(attacker)
        gamma = report.additive_gain.get(attacker, 0.0)
        if report.leakage is not None:
            ell, d_drift = report.leakage.escaped_mass, report.leakage.matched_drift
        else:
            ell = d_drift = 0.0
        mcf = report.run.mcf
        k = report.run.n_clusters
        key = "oracle_run"
        if key not in oracle_runs:
            ospec = _semivalue_spec(ORACLE_REFERENCE, seed)
            oracle_runs[key] = evaluate_mechanism(
                attacked,
                ORACLE_REFERENCE.evidence,
                ORACLE_REFERENCE.representative,
                ORACLE_REFERENCE.allocation,
                ospec,
                learner,
                valset,
                attacked_cache.setdefault("pipelines", {}),
            )
        o_l1 = oracle_l1(report.run, oracle_runs[key])
    return RunRecord(
        experiment=experiment,
        mechanism=mech.name,
        attack=attack_label,
        seed=seed,
        G=g,
        gamma=gamma,
        L=ell,
        D=d_drift,
        oracle_L1=o_l1,
        mcf=mcf,
        K=k,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
    )


def run_cross_product(
    experiment: str,
    dgp: SyntheticDGPConfig,
    mechanisms: list[MechanismConfig],
    attacks: list[AttackSpec],
    seeds: list[int],
    market_builder=None,
) -> list[RunRecord]:
    """Execute every (mechanism, attack, seed) cell. Each cell owns seed
    streams derived from its base seed; output order is fixed by sorting."""
    if not attacks:
        raise ConfigError("attack list is empty")
    if not mechanisms:
        raise ConfigError("mechanism list is empty")
    if not seeds:
        raise ConfigError("seed list is empty")
    records: list[RunRecord] = []
    for seed in seeds:
        if market_builder is None:
            honest, valset = generate_synthetic_market(replace(dgp, seed=seed))
        else:
            honest, valset = market_builder(seed)
        learner = LearnerConfig(n_classes=int(valset.labels.max()) + 1)
        honest_cache: dict = {}
        for attack in attacks:
            attacked = apply_attack(honest, attack, derive_seed(seed, 1))
            attacked_cache: dict = {}
            oracle_runs: dict = {}
            for mech in mechanisms:
                records.append(
                    run_cell(
                        honest,
                        attacked,
                        mech,
                        learner,
                        valset,
                        seed,
                        experiment,
                        attack.label(),
                        honest_cache,
                        attacked_cache,
                        oracle_runs,
                    )
                )
    return records


def market_from_pool(
    pool: EmbeddingPool, n_providers: int, units_each: int, n_validation: int, seed: int
) -> tuple[SubmittedProfile, LabeledDataset]:
    """Build a provider market whose unit payloads are embedding rows.

    Validation examples are drawn from the pool disjointly from the
    providers' units; the partition protocol follows the pool."""
    from .market import Unit

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(31,)))
    need = n_providers * units_each
    if need + n_validation > len(pool):
        raise ConfigError("pool too small for the requested market + validation split")
    if pool.partition_protocol == "class_stratified":
        classes = np.unique(pool.class_labels)
        if n_providers > classes.size:
            raise ConfigError("class-stratified market needs n_providers <= n_classes")
        taken = []
        parts = []
        for p in range(n_providers):
            idx = np.where(pool.class_labels == classes[p])[0]
            pick = rng.choice(idx, size=units_each, replace=False)
            parts.append(pick)
            taken.append(pick)
        taken = np.concatenate(taken)
    else:
        order = rng.permutation(len(pool))
        taken = order[:need]
        parts = [taken[p * units_each : (p + 1) * units_each] for p in range(n_providers)]
    rest = np.setdiff1d(np.arange(len(pool)), taken, assume_unique=False)
    val_idx = rng.choice(rest, size=min(n_validation, rest.size), replace=False)

    identities = []
    t = 0
    for p, idx in enumerate(parts):
        units = []
        for i in idx:
            units.append(
                Unit(
                    unit_id=t,
                    features=pool.vectors[i].astype(np.float64),
                    label=int(pool.class_labels[i]),
                    latent_owner=p,
                    submitted_identity=p,
                    source_id=t,
                    timestamp=t,
                )
            )
            t += 1
        identities.append(units)
    # labels must be contiguous for the learner
    all_labels = sorted({u.label for units in identities for u in units} | {int(pool.class_labels[i]) for i in val_idx})
    relabel = {c: i for i, c in enumerate(all_labels)}
    identities = [
        [replace(u, label=relabel[u.label]) for u in units] for units in identities
    ]
    profile = SubmittedProfile(
        identities=identities,
        latent_of_identity={p: p for p in range(n_providers)},
        n_latent=n_providers,
        next_unit_id=t,
        next_timestamp=t,
    )
    valset = LabeledDataset(
        pool.vectors[val_idx].astype(np.float64),
        np.array([relabel[int(pool.class_labels[i])] for i in val_idx], dtype=np.int64),
    )
    return profile, valset


# ---------------------------------------------------------------------------
# experiment defaults


def default_estimator(family: Family, samples: int = 256) -> Estimator:
    if family.kind == "shapley":
        return Estimator("permutation", samples)
    if family.kind == "banzhaf":
        return Estimator("random_subset", samples)
    return Estimator("stratified_subset", samples)


def _s2_mechanisms() -> list[MechanismConfig]:
    none_ev = EvidenceConfig(layer="none")
    rep = RepresentativeConfig()
    equal = AllocationRule("equal_submitted")
    mechs = [
        baseline_mechanism("uniform_identity"),
        baseline_mechanism("per_example_uniform"),
        baseline_mechanism("leave_one_out"),
    ]
    for fam in (SHAPLEY, BANZHAF_RAW, beta_family(2.0, 2.0)):
        mechs.append(quotient_mechanism(none_ev, rep, equal, fam, default_estimator(fam)))
    oracle = EvidenceConfig(layer="oracle_latent")
    mechs.append(quotient_mechanism(oracle, rep, equal, SHAPLEY, default_estimator(SHAPLEY)))
    mechs.append(
        quotient_mechanism(oracle, rep, equal, BANZHAF_NORMALIZED, default_estimator(BANZHAF_NORMALIZED))
    )
    mechs.append(
        quotient_mechanism(EvidenceConfig(layer="oracle_source"), rep, equal, SHAPLEY, default_estimator(SHAPLEY))
    )
    mechs.append(
        quotient_mechanism(
            EvidenceConfig(layer="cosine", theta=0.99), rep, equal, SHAPLEY, default_estimator(SHAPLEY)
        )
    )
    return mechs


S4_DGP = dict(n_providers=6, examples_per_provider=40, n_classes=4, n_features=12, class_separation=1.2)
S4_THETA_GRID = (0.85, 0.90, 0.95, 0.99)


def _s4_mechanisms(theta_grid=S4_THETA_GRID, sampled=False) -> list[MechanismConfig]:
    mechs = []
    for theta in theta_grid:
        ev = EvidenceConfig(layer="cosine", theta=theta)
        est = Estimator("permutation", 1127) if sampled else Estimator("exact")
        limit = 0 if sampled else 16
        mechs.append(
            quotient_mechanism(ev, RepresentativeConfig(), AllocationRule("equal_submitted"), SHAPLEY, est, limit)
        )
        mechs.append(
            quotient_mechanism(
                ev,
                RepresentativeConfig(mode="capped", kappa=S4_DGP["examples_per_provider"], selector="first"),
                AllocationRule("count_canonical"),
                SHAPLEY,
                est,
                limit,
            )
        )
    mechs.append(quotient_mechanism(EvidenceConfig(layer="none"), exact_n_limit=16))
    mechs.append(quotient_mechanism(EvidenceConfig(layer="oracle_latent"), exact_n_limit=16))
    return mechs


def _s5_mechanisms(grid, rule="equal_submitted", rep_mode="identity", exact_limit=16) -> list[MechanismConfig]:
    mechs = []
    for p_fs, p_fm in grid:
        ev = EvidenceConfig(layer="noisy_oracle_latent", p_fs=p_fs, p_fm=p_fm)
        mechs.append(
            quotient_mechanism(
                ev,
                RepresentativeConfig(mode=rep_mode),
                AllocationRule(rule),
                SHAPLEY,
                Estimator("exact"),
                exact_limit,
            )
        )
    mechs.append(quotient_mechanism(EvidenceConfig(layer="none"), exact_n_limit=16))
    return mechs


NOISE_RATES = (0.0, 0.05, 0.10, 0.20, 0.40)


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment id: {experiment!r}")
    cfg: dict = {"schema_version": SCHEMA_VERSION, "experiment": experiment, "out_dir": "out"}
    if experiment == "s1_split_gain":
        cfg["split_range"] = [2, 6]
        return cfg
    if experiment == "s3_sample_budget":
        cfg.update(
            dgp={},
            seeds=list(range(5)),
            sample_counts=[64, 128, 256, 512, 1024],
            attacks=[{"family": "exact_dup_2x_sybils", "dup_fraction": 1.0}],
        )
        return cfg
    cfg["seeds"] = list(range(10))
    if experiment == "s2_main_table":
        cfg["dgp"] = {}
        cfg["attacks"] = [
            {"family": "honest"},
            {"family": "sybil_split_k", "k": 3},
            {"family": "exact_dup_2x_sybils", "dup_fraction": 1.0},
            {"family": "near_duplicate_2x_sybils", "sigma": 0.02},
            {"family": "label_noise", "flip_fraction": 0.3},
        ]
    elif experiment == "s4_threshold_frontier":
        cfg["dgp"] = dict(S4_DGP)
        cfg["theta_grid"] = list(S4_THETA_GRID)
        cfg["attacks"] = [
            {"family": "near_duplicate_2x_sybils", "sigma": 0.03},
            {"family": "sybil_split_k", "k": 3},
        ]
    elif experiment == "s5_noise_grid":
        cfg["dgp"] = {}
        cfg["noise_grid"] = [[fs, fm] for fs in NOISE_RATES for fm in NOISE_RATES]
        cfg["attacks"] = [{"family": "near_duplicate_2x_sybils", "sigma": 0.02}]
    elif experiment == "s6_delta_proxy":
        cfg["dgp"] = dict(S4_DGP)
        cfg["theta_grid"] = list(S4_THETA_GRID)
        cfg["noise_grid"] = [[0.0, fm] for fm in NOISE_RATES]
        cfg["attacks"] = [{"family": "near_duplicate_2x_sybils", "sigma": 0.03}]
    elif experiment == "s7_allocation_rules":
        cfg["dgp"] = {}
        cfg["noise_grid"] = [[0.0, fm] for fm in NOISE_RATES]
        cfg["rules"] = ["equal_submitted", "count_canonical", "latent_share"]
        cfg["attacks"] = [
            {"family": "near_duplicate_2x_sybils", "sigma": 0.0},
            {"family": "sybil_split_k", "k": 3},
        ]
    elif experiment == "s8_dgp_robustness":
        cfg["seeds"] = list(range(5))
        cfg["grid"] = {"n_providers": [6, 8], "class_separation": [0.6, 1.2, 1.8]}
        cfg["attacks"] = [
            {"family": "honest"},
            {"family": "sybil_split_k", "k": 3},
            {"family": "exact_dup_2x_sybils", "dup_fraction": 1.0},
            {"family": "near_duplicate_2x_sybils", "sigma": 0.02},
        ]
    elif experiment == "holdout_sweep":
        cfg["embeddings"] = None
        cfg["market"] = {"n_providers": 4, "units_each": 50, "n_validation": 500, "protocol": "random"}
        cfg["theta_grid"] = [0.85, 0.90, 0.95, 0.99]
        cfg["attacks"] = [
            {"family": "near_duplicate_2x_sybils", "sigma": 0.02},
            {"family": "sybil_split_k", "k": 3},
        ]
        cfg["samples"] = 64
    return cfg


_TOP_KEYS = {
    "schema_version",
    "experiment",
    "out_dir",
    "seeds",
    "dgp",
    "attacks",
    "mechanisms",
    "theta_grid",
    "noise_grid",
    "sample_counts",
    "rules",
    "grid",
    "embeddings",
    "market",
    "samples",
    "split_range",
}

_DGP_KEYS = {
    "n_providers",
    "examples_per_provider",
    "n_classes",
    "n_features",
    "class_separation",
    "seed",
    "n_validation",
}


def validate_config(cfg: dict) -> dict:
    """Schema check; returns the config merged over experiment defaults.
    Unknown keys are rejected (config-error naming the field)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.get('schema_version')!r}")
    if "experiment" not in cfg:
        raise ConfigError("config missing 'experiment'")
    merged = default_config(cfg["experiment"])
    merged.update(cfg)
    if "dgp" in merged and merged["dgp"] is not None:
        bad = set(merged["dgp"]) - _DGP_KEYS
        if bad:
            raise ConfigError(f"unknown dgp keys: {sorted(bad)}")
    if "attacks" in merged:
        if not merged["attacks"]:
            raise ConfigError("attack list is empty")
        for a in merged["attacks"]:
            attack_from_dict(a)
    if "mechanisms" in merged and merged["mechanisms"]:
        for m in merged["mechanisms"]:
            mechanism_from_dict(m)
    if "seeds" in merged and not merged["seeds"]:
        raise ConfigError("seed list is empty")
    return merged


# ---------------------------------------------------------------------------
# per-experiment runners


def _dgp_from(cfg: dict) -> SyntheticDGPConfig:
    return SyntheticDGPConfig(**(cfg.get("dgp") or {}))


def run_s1(cfg: dict) -> tuple[list[dict], dict]:
    lo, hi = cfg.get("split_range", [2, 6])
    rows = []
    for fam, fam_name in ((SHAPLEY, "shapley"), (BANZHAF_RAW, "banzhaf")):
        for n in range(lo, hi + 1):
            for k in range(lo, hi + 1):
                add_p, mult_p = closed_form_split_gain(fam, n, k)
                honest = make_unanimity_game(n, Coalition.full(n))
                phi_h = exact_semivalue(honest, SemivalueSpec(family=fam)).per_player[0]
                split = make_unanimity_game(n + k - 1, Coalition.full(n + k - 1))
                phi_s = exact_semivalue(split, SemivalueSpec(family=fam)).per_player
                total = float(phi_s[:k].sum())
                rows.append(
                    {
                        "family": fam_name,
                        "n": n,
                        "k": k,
                        "predicted_mult": mult_p,
                        "measured_mult": total / phi_h,
                        "predicted_add": add_p,
                        "measured_add": total - phi_h,
                    }
                )
    summary: dict = {"n_averaged_mult": {}}
    for fam_name in ("shapley", "banzhaf"):
        for k in range(lo, hi + 1):
            vals = [r["measured_mult"] for r in rows if r["family"] == fam_name and r["k"] == k]
            summary["n_averaged_mult"][f"{fam_name}/k={k}"] = float(np.mean(vals))
    return rows, summary


def run_s3(cfg: dict) -> tuple[list[dict], dict]:
    dgp = _dgp_from(cfg)
    seeds = cfg["seeds"]
    counts = cfg["sample_counts"]
    attack = attack_from_dict(cfg["attacks"][0])
    ref_samples = max(counts)
    rows = []
    for seed in seeds:
        honest, valset = generate_synthetic_market(replace(dgp, seed=seed))
        learner = LearnerConfig(n_classes=dgp.n_classes)
        attacked = apply_attack(honest, attack, derive_seed(seed, 1))
        cache_h: dict = {}
        cache_a: dict = {}
        runs = {}
        for s in counts:
            mech = quotient_mechanism(
                EvidenceConfig(layer="oracle_latent"),
                RepresentativeConfig(),
                AllocationRule("equal_submitted"),
                SHAPLEY,
                Estimator("permutation", s),
                exact_n_limit=0,
            )
            spec = _semivalue_spec(mech, seed)
            report = pay(
                attacked,
                mech.evidence,
                mech.representative,
                mech.allocation,
                spec,
                learner,
                valset,
                pipeline_cache=cache_a,
                honest_pipeline_cache=cache_h,
            )
            runs[s] = report
        ref = runs[ref_samples]
        for s in counts:
            l1 = sum(
                abs(runs[s].per_latent[l] - ref.per_latent[l]) for l in runs[s].per_latent
            )
            rows.append(
                {
                    "seed": seed,
                    "samples": s,
                    "l1_vs_reference": float(l1),
                    "gain": runs[s].multiplicative_gain[0],
                }
            )
    summary = {
        f"s={s}": {
            "l1_mean": float(np.mean([r["l1_vs_reference"] for r in rows if r["samples"] == s])),
            "gain_mean": float(np.mean([r["gain"] for r in rows if r["samples"] == s])),
        }
        for s in counts
    }
    return rows, summary


def run_experiment(cfg: dict, out_dir: Path) -> int:
    """Execute one experiment config; returns a process exit code."""
    cfg = validate_config(cfg)
    exp = cfg["experiment"]
    out_dir.mkdir(parents=True, exist_ok=True)

    if exp == "s1_split_gain":
        rows, summary = run_s1(cfg)
        with open(out_dir / "s1_table.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        return 0
    if exp == "s3_sample_budget":
        rows, summary = run_s3(cfg)
        with open(out_dir / "s3_table.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        return 0

    attacks = [attack_from_dict(a) for a in cfg["attacks"]]
    seeds = list(cfg["seeds"])
    plot_kind = None
    market_builder = None
    dgp = None

    if cfg.get("mechanisms"):
        mechanisms = [mechanism_from_dict(m) for m in cfg["mechanisms"]]
        dgp = _dgp_from(cfg)
    elif exp == "s2_main_table":
        mechanisms = _s2_mechanisms()
        dgp = _dgp_from(cfg)
    elif exp in ("s4_threshold_frontier", "s6_delta_proxy"):
        mechanisms = _s4_mechanisms(tuple(cfg["theta_grid"]))
        if exp == "s6_delta_proxy":
            mechanisms += _s5_mechanisms([tuple(g) for g in cfg["noise_grid"]])
        dgp = _dgp_from(cfg)
        plot_kind = "frontier" if exp == "s4_threshold_frontier" else None
    elif exp == "s5_noise_grid":
        mechanisms = _s5_mechanisms([tuple(g) for g in cfg["noise_grid"]])
        dgp = _dgp_from(cfg)
        plot_kind = "grid"
    elif exp == "s7_allocation_rules":
        mechanisms = []
        for rule in cfg["rules"]:
            mechanisms += _s5_mechanisms(
                [tuple(g) for g in cfg["noise_grid"]], rule=rule, rep_mode="exact_dup_collapse"
            )[:-1]
        mechanisms.append(quotient_mechanism(EvidenceConfig(layer="none"), exact_n_limit=16))
        dgp = _dgp_from(cfg)
        plot_kind = "allocation"
    elif exp == "s8_dgp_robustness":
        grid = cfg["grid"]
        records: list[RunRecord] = []
        for n in grid["n_providers"]:
            for sep in grid["class_separation"]:
                dgp_cell = SyntheticDGPConfig(n_providers=n, class_separation=sep)
                mechs = [
                    quotient_mechanism(EvidenceConfig(layer="none"), exact_n_limit=16),
                    quotient_mechanism(EvidenceConfig(layer="oracle_latent"), exact_n_limit=16),
                    quotient_mechanism(EvidenceConfig(layer="cosine", theta=0.99), exact_n_limit=16),
                ]
                cell_records = run_cross_product(
                    f"{exp}[n={n},sep={sep}]", dgp_cell, mechs, attacks, seeds
                )
                records.extend(cell_records)
        _write_outputs(out_dir, records, None)
        return 0
    elif exp == "holdout_sweep":
        if not cfg.get("embeddings"):
            raise ConfigError("holdout_sweep requires an 'embeddings' file path")
        pool = EmbeddingPool.from_embed1(cfg["embeddings"], cfg["market"].get("protocol", "random"))
        mk = cfg["market"]

        def market_builder(seed: int):
            return market_from_pool(
                pool, mk["n_providers"], mk["units_each"], mk.get("n_validation", 500), seed
            )

        samples = cfg.get("samples", 64)
        mechanisms = []
        for theta in cfg["theta_grid"]:
            mechanisms.append(
                quotient_mechanism(
                    EvidenceConfig(layer="cosine", theta=theta),
                    RepresentativeConfig(),
                    AllocationRule("equal_submitted"),
                    SHAPLEY,
                    Estimator("permutation", samples),
                    exact_n_limit=4,
                )
            )
        mechanisms.append(quotient_mechanism(EvidenceConfig(layer="oracle_latent"), exact_n_limit=10))
        mechanisms.append(quotient_mechanism(EvidenceConfig(layer="none"), exact_n_limit=4))
        dgp = SyntheticDGPConfig()
        plot_kind = "frontier"
    else:
        raise ConfigError(f"unhandled experiment: {exp}")

    records = run_cross_product(exp, dgp, mechanisms, attacks, seeds, market_builder)
    _write_outputs(out_dir, records, plot_kind)
    return 0


def _write_outputs(out_dir: Path, records: list[RunRecord], plot_kind: str | None):
    write_runs_csv(out_dir / "runs.csv", records)
    agg = aggregate(records)
    write_aggregate_csv(out_dir / "aggregate.csv", agg)
    summary = {
        "cells": {
            f"{row['mechanism']} :: {row['attack']}": {
                "G_mean": row["G_mean"],
                "G_se": row["G_se"],
                "n": row["n"],
            }
            for row in agg
        }
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    if plot_kind:
        emit_plot_data(records, plot_kind, out_dir / f"plot_{plot_kind}.csv")


def run(config_path, seeds: list[int] | None = None, out_dir=None) -> int:
    """CLI entry: load a JSON config, run it, write outputs. Partial
    failures keep completed rows and return a nonzero exit code."""
    path = Path(config_path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = validate_config(cfg)
    if seeds is not None:
        cfg["seeds"] = seeds
    out = Path(out_dir) if out_dir else Path(cfg.get("out_dir", "out"))
    return run_experiment(cfg, out)
