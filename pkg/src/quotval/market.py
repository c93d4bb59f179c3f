"""Units, providers, submitted profiles, the synthetic DGP, and attacks.

A market is a submitted profile: per-identity multisets of units, each unit
carrying a payload (feature vector, class label) plus latent ownership and
provenance metadata. Attacks rewrite the profile the way a strategic
provider would: splitting identities, duplicating or perturbing payloads,
or poisoning labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .games import CoalitionGame, Coalition, make_data_value_game
from .learner import LabeledDataset, LearnerConfig
from .semivalues import SemivalueSpec, estimate_semivalue, normalize_payments


@dataclass(frozen=True)
class Unit:
    """One submitted data item. `source_id` tracks the canonical origin:
    an honest unit's source is its own id; copies and variants inherit it."""

    unit_id: int
    features: np.ndarray
    label: int
    latent_owner: int
    submitted_identity: int
    source_id: int
    timestamp: int

    def payload_key(self, decimals: int | None = None) -> tuple:
        f = self.features if decimals is None else np.round(self.features, decimals)
        return (f.tobytes(), self.label)


@dataclass
class SubmittedProfile:
    """Identity -> unit multiset map plus latent bookkeeping."""

    identities: list[list[Unit]]
    latent_of_identity: dict[int, int]
    n_latent: int
    honest_reference: "SubmittedProfile | None" = None
    next_unit_id: int = 0
    next_timestamp: int = 0

    @property
    def n_identities(self) -> int:
        return len(self.identities)

    def all_units(self) -> list[Unit]:
        return [u for units in self.identities for u in units]

    def total_units(self) -> int:
        return sum(len(units) for units in self.identities)

    def units_of_latent(self, latent: int) -> list[Unit]:
        return [u for u in self.all_units() if u.latent_owner == latent]

    def identity_dataset(self, identity: int) -> LabeledDataset:
        units = self.identities[identity]
        if not units:
            return LabeledDataset(np.zeros((0, self.feature_dim())), np.zeros(0, dtype=np.int64))
        return LabeledDataset(
            np.stack([u.features for u in units]),
            np.array([u.label for u in units], dtype=np.int64),
        )

    def feature_dim(self) -> int:
        for units in self.identities:
            if units:
                return units[0].features.shape[0]
        raise ValueError("profile has no units")

    def check_integrity(self):
        seen: set[int] = set()
        for j, units in enumerate(self.identities):
            for u in units:
                if u.unit_id in seen:
                    raise ValueError(f"unit {u.unit_id} appears under more than one identity")
                seen.add(u.unit_id)
                if u.submitted_identity != j:
                    raise ValueError(f"unit {u.unit_id} mislabeled identity")

    def dump_jsonl(self, path):
        with open(path, "w") as fh:
            for units in self.identities:
                for u in units:
                    fh.write(
                        json.dumps(
                            {
                                "unit_id": u.unit_id,
                                "features": u.features.tolist(),
                                "label": int(u.label),
                                "latent_owner": u.latent_owner,
                                "submitted_identity": u.submitted_identity,
                                "source_id": u.source_id,
                                "timestamp": u.timestamp,
                            }
                        )
                        + "\n"
                    )


@dataclass(frozen=True)
class AttackSpec:
    """Named attack family plus parameters. The attacker is a latent
    provider index (provider 0 throughout the stock experiments)."""

    family: str
    attacker: int = 0
    dup_fraction: float = 1.0  # exact_dup_2x_sybils
    sigma: float = 0.0  # near_duplicate_2x_sybils
    k: int = 2  # sybil_split_k
    scheme: str = "round_robin"  # round_robin | block
    flip_fraction: float = 0.3  # label_noise
    inner: "AttackSpec | None" = None  # provider_zero_attack wrapper

    _FAMILIES = (
        "honest",
        "exact_dup_2x_sybils",
        "near_duplicate_2x_sybils",
        "sybil_split_k",
        "label_noise",
        "provider_zero_attack",
    )

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown attack family: {self.family}")
        if not 0.0 <= self.dup_fraction <= 1.0:
            raise ValueError("dup fraction must be in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.k < 2:
            raise ValueError("split count k must be >= 2")
        if self.scheme not in ("round_robin", "block"):
            raise ValueError(f"unknown split scheme: {self.scheme}")
        if not 0.0 <= self.flip_fraction <= 0.5:
            raise ValueError("flip fraction must be in [0, 0.5]")

    def label(self) -> str:
        if self.family == "honest":
            return "honest"
        if self.family == "exact_dup_2x_sybils":
            return f"exact_dup(f={self.dup_fraction:g})"
        if self.family == "near_duplicate_2x_sybils":
            return f"near_dup(sigma={self.sigma:g})"
        if self.family == "sybil_split_k":
            return f"sybil_split(k={self.k})"
        if self.family == "label_noise":
            return f"label_noise(p={self.flip_fraction:g})"
        return f"provider_zero[{self.inner.label() if self.inner else '?'}]"


@dataclass
class SyntheticDGPConfig:
    n_providers: int = 8
    examples_per_provider: int = 60
    n_classes: int = 4
    n_features: int = 24
    class_separation: float = 1.2
    seed: int = 0
    n_validation: int = 200

    def __post_init__(self):
        for name in ("n_providers", "examples_per_provider", "n_classes", "n_features", "n_validation"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.class_separation < 0:
            raise ValueError("class_separation must be >= 0")


def _class_means(cfg: SyntheticDGPConfig, rng: np.random.Generator) -> np.ndarray:
    # means sit class_separation * sqrt(2) along random orthonormal directions,
    # so any two class means are exactly 2 * class_separation apart
    if cfg.n_features < cfg.n_classes:
        raise ValueError("need n_features >= n_classes for orthonormal class directions")
    g = rng.standard_normal((cfg.n_features, cfg.n_classes))
    q, _ = np.linalg.qr(g)
    return cfg.class_separation * math.sqrt(2.0) * q[:, : cfg.n_classes].T


def _balanced_labels(n: int, n_classes: int) -> np.ndarray:
    reps = n // n_classes
    labels = np.repeat(np.arange(n_classes), reps)
    if labels.size < n:
        labels = np.concatenate([labels, np.arange(n - labels.size) % n_classes])
    return labels.astype(np.int64)


def generate_synthetic_market(cfg: SyntheticDGPConfig) -> tuple[SubmittedProfile, LabeledDataset]:
    """Gaussian class-mixture market plus a disjoint validation set.

    Class means sit `class_separation` along random orthonormal directions
    with unit within-class covariance. Providers receive sequential blocks
    of the seeded permutation of the pool, so each holds a label mixture.
    """
    ss = np.random.SeedSequence(entropy=cfg.seed)
    rng_means, rng_train, rng_val, rng_assign = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )
    means = _class_means(cfg, rng_means)

    r = cfg.n_providers * cfg.examples_per_provider
    labels = _balanced_labels(r, cfg.n_classes)
    feats = means[labels] + rng_train.standard_normal((r, cfg.n_features))

    order = rng_assign.permutation(r)
    identities: list[list[Unit]] = []
    latent_of_identity: dict[int, int] = {}
    t = 0
    for p in range(cfg.n_providers):
        block = order[p * cfg.examples_per_provider : (p + 1) * cfg.examples_per_provider]
        units = []
        for idx in block:
            units.append(
                Unit(
                    unit_id=t,
                    features=feats[idx].copy(),
                    label=int(labels[idx]),
                    latent_owner=p,
                    submitted_identity=p,
                    source_id=t,
                    timestamp=t,
                )
            )
            t += 1
        identities.append(units)
        latent_of_identity[p] = p

    val_labels = _balanced_labels(cfg.n_validation, cfg.n_classes)
    val_feats = means[val_labels] + rng_val.standard_normal((cfg.n_validation, cfg.n_features))
    valset = LabeledDataset(val_feats, val_labels)

    profile = SubmittedProfile(
        identities=identities,
        latent_of_identity=latent_of_identity,
        n_latent=cfg.n_providers,
        next_unit_id=t,
        next_timestamp=t,
    )
    return profile, valset


def _attacker_identity(profile: SubmittedProfile, attacker: int) -> int:
    for j, latent in profile.latent_of_identity.items():
        if latent == attacker:
            return j
    raise ValueError(f"no identity for latent provider {attacker}")


def apply_attack(profile: SubmittedProfile, spec: AttackSpec, seed: int) -> SubmittedProfile:
    """Rewrite an honest profile per the attack spec; deterministic per
    (profile, spec, seed). The result links back to the honest profile via
    `honest_reference`. Non-attacker identities are untouched."""
    if profile.honest_reference is not None:
        raise ValueError("attacks apply to honest profiles only")
    if spec.family == "provider_zero_attack":
        if spec.inner is None:
            raise ValueError("provider_zero_attack requires an inner attack spec")
        return apply_attack(profile, replace(spec.inner, attacker=0), seed)
    if spec.family == "honest":
        out = SubmittedProfile(
            identities=[list(units) for units in profile.identities],
            latent_of_identity=dict(profile.latent_of_identity),
            n_latent=profile.n_latent,
            honest_reference=profile,
            next_unit_id=profile.next_unit_id,
            next_timestamp=profile.next_timestamp,
        )
        return out

    attacker_id = _attacker_identity(profile, spec.attacker)
    own = profile.identities[attacker_id]
    if not own:
        raise ValueError(f"attacker identity {attacker_id} holds no units")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))

    identities = [list(units) for units in profile.identities]
    latent_of_identity = dict(profile.latent_of_identity)
    next_id = profile.next_unit_id
    next_ts = profile.next_timestamp

    def relabel(units: list[Unit], identity: int) -> list[Unit]:
        return [replace(u, submitted_identity=identity) for u in units]

    if spec.family in ("exact_dup_2x_sybils", "near_duplicate_2x_sybils"):
        frac = spec.dup_fraction if spec.family == "exact_dup_2x_sybils" else 1.0
        n_copy = round(frac * len(own))
        chosen = sorted(rng.choice(len(own), size=n_copy, replace=False)) if n_copy else []
        copies = []
        for i in chosen:
            src = own[i]
            feats = src.features.copy()
            if spec.family == "near_duplicate_2x_sybils" and spec.sigma > 0:
                feats = feats + spec.sigma * rng.standard_normal(feats.shape[0])
            copies.append(
                Unit(
                    unit_id=next_id,
                    features=feats,
                    label=src.label,
                    latent_owner=src.latent_owner,
                    submitted_identity=len(identities),  # fixed below
                    source_id=src.source_id,
                    timestamp=next_ts,
                )
            )
            next_id += 1
            next_ts += 1
        # pseudonym 1 keeps the originals in place; pseudonym 2 is appended
        identities[attacker_id] = relabel(own, attacker_id)
        pseudo2 = len(identities)
        identities.append([replace(u, submitted_identity=pseudo2) for u in copies])
        latent_of_identity[pseudo2] = spec.attacker

    elif spec.family == "sybil_split_k":
        k = spec.k
        if spec.scheme == "round_robin":
            parts = [own[i::k] for i in range(k)]
        else:
            size = math.ceil(len(own) / k)
            parts = [own[i * size : (i + 1) * size] for i in range(k)]
        identities[attacker_id] = relabel(parts[0], attacker_id)
        for part in parts[1:]:
            pseudo = len(identities)
            identities.append(relabel(part, pseudo))
            latent_of_identity[pseudo] = spec.attacker

    elif spec.family == "label_noise":
        n_flip = math.ceil(spec.flip_fraction * len(own))
        chosen = set(rng.choice(len(own), size=n_flip, replace=False)) if n_flip else set()
        n_classes = int(max(u.label for u in profile.all_units())) + 1
        flipped = []
        for i, u in enumerate(own):
            if i in chosen:
                shift = int(rng.integers(1, n_classes)) if n_classes > 1 else 0
                flipped.append(replace(u, label=(u.label + shift) % n_classes))
            else:
                flipped.append(u)
        identities[attacker_id] = flipped

    out = SubmittedProfile(
        identities=identities,
        latent_of_identity=latent_of_identity,
        n_latent=profile.n_latent,
        honest_reference=profile,
        next_unit_id=next_id,
        next_timestamp=next_ts,
    )
    out.check_integrity()
    return out


BASELINE_RULES = ("uniform_identity", "per_example_uniform", "leave_one_out", "semivalue")


def reported_game(
    profile: SubmittedProfile, learner: LearnerConfig, valset: LabeledDataset
) -> CoalitionGame:
    """Data-value game over submitted identities (multisets preserved)."""
    sets = [profile.identity_dataset(j) for j in range(profile.n_identities)]
    return make_data_value_game(sets, learner, valset)


def baseline_payments(
    profile: SubmittedProfile,
    rule: str,
    learner: LearnerConfig | None = None,
    valset: LabeledDataset | None = None,
    semivalue_spec: SemivalueSpec | None = None,
    game: CoalitionGame | None = None,
) -> np.ndarray:
    """Per-identity payments for the no-quotienting baselines.

    uniform: v(full)/m each. per-example: v(full) * |S_j| / r.
    leave-one-out: v(full) - v(full minus j). semivalue: the per-identity
    semivalue of the reported game. A prebuilt reported game can be passed
    to avoid retraining.
    """
    if rule not in BASELINE_RULES:
        raise ValueError(f"unknown baseline rule: {rule}")
    m = profile.n_identities
    if game is None:
        if learner is None or valset is None:
            raise ValueError("learner and valset required to build the reported game")
        game = reported_game(profile, learner, valset)
    full = Coalition.full(m)
    v_full = game.value(full)
    if rule == "uniform_identity":
        return np.full(m, v_full / m)
    if rule == "per_example_uniform":
        r = profile.total_units()
        sizes = np.array([len(units) for units in profile.identities], dtype=float)
        return v_full * sizes / r
    if rule == "leave_one_out":
        return np.array([v_full - game.value(Coalition(full.mask ^ (1 << j))) for j in range(m)])
    spec = semivalue_spec or SemivalueSpec()
    result = estimate_semivalue(game, spec)
    if spec.family.normalized:
        result = normalize_payments(result, v_full)
    return result.per_player


def per_latent_totals(profile: SubmittedProfile, payments: np.ndarray) -> dict[int, float]:
    totals: dict[int, float] = {lat: 0.0 for lat in range(profile.n_latent)}
    for j in range(profile.n_identities):
        totals[profile.latent_of_identity[j]] += float(payments[j])
    return totals
