"""Quotient game construction, within-cluster allocation, payments, and
the manipulation-gain / leakage / fairness diagnostics.

The payment pipeline is: evidence clusters -> cluster representatives ->
quotient data-value game -> semivalue over clusters (normalized for the
normalized families) -> within-cluster allocation -> per-identity payments.
Gains compare an attacked profile against a same-seed honest run of the
identical mechanism.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field

from .evidence import (
    CanonicalSet,
    Clustering,
    EvidenceConfig,
    RepresentativeConfig,
    apply_representative,
    build_clusters,
    mixed_component_fraction,
)
from .games import Coalition, CoalitionGame, GameCache, make_data_value_game
from .learner import LabeledDataset, LearnerConfig
from .market import SubmittedProfile, Unit, per_latent_totals
from .semivalues import (
    S_MIN_DEFAULT,
    SemivalueResult,
    SemivalueSpec,
    estimate_semivalue,
    exact_semivalue,
    normalize_payments,
)

PAYMENT_FLOOR = 1e-9

ALLOCATION_RULES = ("equal_submitted", "count_canonical", "count_raw", "latent_share")


@dataclass(frozen=True)
class AllocationRule:
    mode: str = "count_canonical"

    def __post_init__(self):
        if self.mode not in ALLOCATION_RULES:
            raise ValueError(f"unknown allocation rule: {self.mode}")


def build_quotient_game(
    profile: SubmittedProfile,
    clustering: Clustering,
    rep_cfg: RepresentativeConfig,
    learner: LearnerConfig,
    valset: LabeledDataset,
) -> tuple[CoalitionGame, list[CanonicalSet]]:
    """Players are clusters; a coalition's value is the learner utility on
    the union of its clusters' canonical multisets, minus the empty-model
    baseline."""
    members = clustering.members(profile)
    canonical = [apply_representative(m, rep_cfg) for m in members]
    sets = []
    for cs in canonical:
        feats = np.stack([u.features for u in cs.units])
        labels = np.array([u.label for u in cs.units], dtype=np.int64)
        sets.append(LabeledDataset(feats, labels, cs.weights))
    game = make_data_value_game(sets, learner, valset)
    return game, canonical


def allocate_within_cluster(
    cluster_units: list[Unit],
    rule: AllocationRule,
    canonical: CanonicalSet,
    profile: SubmittedProfile,
) -> dict[int, float]:
    """Share of one cluster per submitted identity; shares are >= 0 and sum
    to 1 over the identities present in the cluster."""
    if not cluster_units:
        raise ValueError("cluster must be nonempty")
    present = sorted({u.submitted_identity for u in cluster_units})
    if rule.mode == "equal_submitted":
        share = 1.0 / len(present)
        return {j: share for j in present}
    if rule.mode == "count_canonical":
        counts = {j: 0 for j in present}
        for u in canonical.units:
            counts[u.submitted_identity] = counts.get(u.submitted_identity, 0) + 1
        total = sum(counts.values())
        if total == 0:  # canonical emptied of attributable units; fall back to equal
            share = 1.0 / len(present)
            return {j: share for j in present}
        return {j: counts.get(j, 0) / total for j in present}
    if rule.mode == "count_raw":
        counts = {j: 0 for j in present}
        for u in cluster_units:
            counts[u.submitted_identity] += 1
        total = sum(counts.values())
        return {j: counts[j] / total for j in present}
    # latent_share: per-latent raw counts, split equally among that latent's
    # identities in the cluster
    latent_counts: dict[int, int] = {}
    ids_of_latent: dict[int, set[int]] = {}
    for u in cluster_units:
        lat = u.latent_owner
        latent_counts[lat] = latent_counts.get(lat, 0) + 1
        ids_of_latent.setdefault(lat, set())
    for j in present:
        ids_of_latent.setdefault(profile.latent_of_identity[j], set()).add(j)
    total = sum(latent_counts.values())
    shares = {j: 0.0 for j in present}
    for lat, cnt in latent_counts.items():
        ids = sorted(ids_of_latent.get(lat, set()))
        if not ids:
            continue
        for j in ids:
            shares[j] += cnt / total / len(ids)
    return shares


@dataclass
class MechanismRun:
    """One full pipeline evaluation of a mechanism on one profile."""

    profile: SubmittedProfile
    clustering: Clustering
    canonical: list[CanonicalSet]
    game: CoalitionGame
    semivalue: SemivalueResult
    cluster_values: np.ndarray  # payment scale (normalized when requested)
    cluster_values_raw: np.ndarray
    allocation: np.ndarray  # (K, m)
    payments: np.ndarray  # per identity
    per_latent: dict[int, float]
    mcf: float
    cluster_latents: list[set[int]]
    cluster_payload_keys: list[set]

    @property
    def n_clusters(self) -> int:
        return self.clustering.n_clusters


def evaluate_mechanism(
    profile: SubmittedProfile,
    evidence_cfg: EvidenceConfig,
    rep_cfg: RepresentativeConfig,
    rule: AllocationRule,
    spec: SemivalueSpec,
    learner: LearnerConfig,
    valset: LabeledDataset,
    pipeline_cache: dict | None = None,
) -> MechanismRun:
    # pipeline_cache (one dict per profile) lets sweeps over semivalue
    # families and allocation rules reuse the clustering and the trained
    # quotient game; memoized oracles make repeat estimation cheap
    key = (evidence_cfg, rep_cfg)
    if pipeline_cache is not None and key in pipeline_cache:
        clustering, game, canonical = pipeline_cache[key]
    else:
        clustering = build_clusters(profile, evidence_cfg)
        game, canonical = build_quotient_game(profile, clustering, rep_cfg, learner, valset)
        if pipeline_cache is not None:
            pipeline_cache[key] = (clustering, game, canonical)
    result = estimate_semivalue(game, spec)
    raw = result.per_player.copy()
    if spec.family.normalized:
        result = normalize_payments(result, game.grand_value())
    values = result.per_player

    members = clustering.members(profile)
    m = profile.n_identities
    k = clustering.n_clusters
    alloc = np.zeros((k, m))
    for c in range(k):
        for j, share in allocate_within_cluster(members[c], rule, canonical[c], profile).items():
            alloc[c, j] = share
    row_sums = alloc.sum(axis=1)
    if not np.allclose(row_sums, 1.0, atol=1e-12):
        raise AssertionError(f"allocation rows must sum to 1, got {row_sums}")

    payments = alloc.T @ values
    return MechanismRun(
        profile=profile,
        clustering=clustering,
        canonical=canonical,
        game=game,
        semivalue=result,
        cluster_values=values,
        cluster_values_raw=raw,
        allocation=alloc,
        payments=payments,
        per_latent=per_latent_totals(profile, payments),
        mcf=mixed_component_fraction(clustering, profile),
        cluster_latents=[{u.latent_owner for u in ms} for ms in members],
        cluster_payload_keys=[cs.payload_keys() for cs in canonical],
    )


@dataclass
class LeakageTerms:
    """Escaped-mass / matched-drift decomposition of an attack's effect."""

    escaped_mass: float  # L
    matched_drift: float  # D
    eta: float
    k_alpha: int
    escaped_clusters: list[int]
    matched_clusters: dict[int, int]  # attacked cluster -> honest counterpart
    ambiguous_matches: bool = False

    @property
    def bound(self) -> float:
        return self.escaped_mass + self.matched_drift + 2.0 * self.k_alpha * self.eta


def leakage_terms(honest: MechanismRun, attacked: MechanismRun, attacker: int) -> LeakageTerms:
    """Match attacker-containing clusters of the attacked run one-to-one to
    honest attacker clusters, greedily by shared canonical-payload count
    (ties to the lowest cluster ids, flagged). Attacker clusters left
    without an honest counterpart are escaped: a second cluster holding
    copies of already-matched honest data is manufactured attribution mass,
    not a matched cluster."""
    honest_attacker = [
        k for k in range(honest.n_clusters) if attacker in honest.cluster_latents[k]
    ]
    attacked_attacker = [
        k for k in range(attacked.n_clusters) if attacker in attacked.cluster_latents[k]
    ]
    pairs = []
    for ka in attacked_attacker:
        keys = attacked.cluster_payload_keys[ka]
        for kh in honest_attacker:
            n = len(keys & honest.cluster_payload_keys[kh])
            if n > 0:
                pairs.append((-n, ka, kh))
    pairs.sort()
    matched: dict[int, int] = {}
    taken_honest: set[int] = set()
    ambiguous = False
    for i, (negn, ka, kh) in enumerate(pairs):
        if ka in matched or kh in taken_honest:
            continue
        contested = any(
            n2 == negn and (ka2, kh2) != (ka, kh) and ka2 not in matched and kh2 not in taken_honest
            for n2, ka2, kh2 in pairs[i + 1 :]
        )
        ambiguous = ambiguous or contested
        matched[ka] = kh
        taken_honest.add(kh)
    escaped = [ka for ka in attacked_attacker if ka not in matched]

    l_mass = float(sum(abs(attacked.cluster_values_raw[k]) for k in escaped))
    d_drift = float(
        sum(
            abs(attacked.cluster_values_raw[ka] - honest.cluster_values_raw[kh])
            for ka, kh in matched.items()
        )
    )
    eta = max(honest.semivalue.eta_bound, attacked.semivalue.eta_bound)
    return LeakageTerms(
        escaped_mass=l_mass,
        matched_drift=d_drift,
        eta=eta,
        k_alpha=attacked.n_clusters,
        escaped_clusters=escaped,
        matched_clusters=matched,
        ambiguous_matches=ambiguous,
    )


@dataclass
class PaymentReport:
    """Payments plus attack diagnostics for one mechanism evaluation."""

    run: MechanismRun
    honest_run: "MechanismRun | None"
    per_identity: np.ndarray
    per_latent: dict[int, float]
    additive_gain: dict[int, float]
    multiplicative_gain: dict[int, float | None]
    attacker: int | None
    leakage: LeakageTerms | None

    def to_dict(self) -> dict:
        out = {
            "n_clusters": self.run.n_clusters,
            "mcf": self.run.mcf,
            "per_identity": [float(p) for p in self.per_identity],
            "per_latent": {str(k): float(v) for k, v in sorted(self.per_latent.items())},
            "additive_gain": {str(k): float(v) for k, v in sorted(self.additive_gain.items())},
            "multiplicative_gain": {
                str(k): (None if v is None else float(v))
                for k, v in sorted(self.multiplicative_gain.items())
            },
            "attacker": self.attacker,
            "cluster_values": [float(v) for v in self.run.cluster_values],
            "estimator": self.run.semivalue.estimator_used,
            "eta_bound": self.run.semivalue.eta_bound,
        }
        if self.leakage is not None:
            out["leakage"] = {
                "L": self.leakage.escaped_mass,
                "D": self.leakage.matched_drift,
                "eta": self.leakage.eta,
                "K_alpha": self.leakage.k_alpha,
                "bound": self.leakage.bound,
                "ambiguous": self.leakage.ambiguous_matches,
            }
        return out


def _infer_attacker(profile: SubmittedProfile) -> int | None:
    honest = profile.honest_reference
    if honest is None:
        return None

    def latent_fingerprint(p: SubmittedProfile, lat: int):
        return sorted((u.unit_id, u.payload_key()) for u in p.units_of_latent(lat))

    changed = [
        lat
        for lat in range(profile.n_latent)
        if latent_fingerprint(profile, lat) != latent_fingerprint(honest, lat)
    ]
    ids_of = {lat: 0 for lat in range(profile.n_latent)}
    for j in range(profile.n_identities):
        ids_of[profile.latent_of_identity[j]] += 1
    split = [lat for lat, n in ids_of.items() if n > 1]
    candidates = sorted(set(changed) | set(split))
    return candidates[0] if candidates else None


def pay(
    profile: SubmittedProfile,
    evidence_cfg: EvidenceConfig,
    rep_cfg: RepresentativeConfig,
    rule: AllocationRule,
    spec: SemivalueSpec,
    learner: LearnerConfig,
    valset: LabeledDataset,
    payment_floor: float = PAYMENT_FLOOR,
    honest_run: MechanismRun | None = None,
    pipeline_cache: dict | None = None,
    honest_pipeline_cache: dict | None = None,
) -> PaymentReport:
    """Full payment pipeline with honest-reference gains.

    If the profile carries an honest reference, the same mechanism (same
    seeds, same estimator streams) is run on it and per-latent additive and
    multiplicative gains are reported; a multiplicative gain over an honest
    payment at or below `payment_floor` is reported as None rather than
    +/-inf. For honest profiles the gains are identically 0 and 1.
    """
    run = evaluate_mechanism(
        profile, evidence_cfg, rep_cfg, rule, spec, learner, valset, pipeline_cache
    )
    honest_profile = profile.honest_reference
    if honest_profile is None:
        gains = {lat: 1.0 for lat in run.per_latent}
        return PaymentReport(
            run=run,
            honest_run=None,
            per_identity=run.payments,
            per_latent=run.per_latent,
            additive_gain={lat: 0.0 for lat in run.per_latent},
            multiplicative_gain=gains,
            attacker=None,
            leakage=None,
        )

    if honest_run is None:
        honest_run = evaluate_mechanism(
            honest_profile, evidence_cfg, rep_cfg, rule, spec, learner, valset,
            honest_pipeline_cache,
        )
    additive: dict[int, float] = {}
    multiplicative: dict[int, float | None] = {}
    for lat in run.per_latent:
        h = honest_run.per_latent.get(lat, 0.0)
        a = run.per_latent[lat]
        additive[lat] = a - h
        multiplicative[lat] = (a / h) if h > payment_floor else None
    attacker = _infer_attacker(profile)
    leak = leakage_terms(honest_run, run, attacker) if attacker is not None else None
    return PaymentReport(
        run=run,
        honest_run=honest_run,
        per_identity=run.payments,
        per_latent=run.per_latent,
        additive_gain=additive,
        multiplicative_gain=multiplicative,
        attacker=attacker,
        leakage=leak,
    )


@dataclass
class FairnessLoss:
    per_cluster: np.ndarray
    delta_theta: float
    exhaustive: bool  # False when delta_theta is a sampled lower bound


def fairness_loss(
    unit_game: CoalitionGame,
    grouping: list[int],
    quotient_game: CoalitionGame,
    spec: SemivalueSpec,
    max_exhaustive: int = 14,
    sample_coalitions: int = 2048,
) -> FairnessLoss:
    """Cluster-level fairness loss against the merged honest game.

    `grouping` maps each unit-game player to its cluster. The merged game
    v_merge(Q) evaluates the honest game on the union of the clusters in Q;
    delta_theta is max_Q |v_merge(Q) - v_quotient(Q)| (exhaustive for small
    K, otherwise a sampled lower bound, flagged), and the per-cluster loss
    is |phi(v_merge) - phi(v_quotient)| under the spec's weight family.
    """
    k = quotient_game.player_count
    if len(grouping) != unit_game.player_count:
        raise ValueError("grouping must map every unit-game player")
    if any(g < 0 or g >= k for g in grouping):
        raise ValueError("grouping refers to unknown clusters")

    cluster_masks = [0] * k
    for player, g in enumerate(grouping):
        cluster_masks[g] |= 1 << player

    def merge_oracle(c: Coalition) -> float:
        mask = 0
        for g in c.members():
            mask |= cluster_masks[g]
        return unit_game.value(Coalition(mask))

    merged = CoalitionGame(k, merge_oracle, unit_game.value_range, cache=GameCache())

    exhaustive = k <= max_exhaustive
    if exhaustive:
        coalition_masks = range(1 << k)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.master_seed, spawn_key=(7,)))
        coalition_masks = [int(x) for x in rng.integers(0, 1 << k, size=sample_coalitions)]
    delta = 0.0
    for mask in coalition_masks:
        c = Coalition(mask)
        delta = max(delta, abs(merged.value(c) - quotient_game.value(c)))

    phi_merge = exact_semivalue(merged, spec).per_player
    phi_quot = exact_semivalue(quotient_game, spec).per_player
    return FairnessLoss(np.abs(phi_merge - phi_quot), delta, exhaustive)


def normalized_bound_check(
    gamma: float,
    leakage: LeakageTerms,
    s_min: float = S_MIN_DEFAULT,
    v_range: float = 1.0,
) -> tuple[bool, float]:
    """Gain bound for normalized payments: the raw bound plus the
    denominator-perturbation term V * (L + D) / S_min. Returns (holds, slack)."""
    sigma = leakage.escaped_mass + leakage.matched_drift
    rhs = sigma + 2.0 * leakage.k_alpha * leakage.eta + v_range * sigma / s_min
    return gamma <= rhs + 1e-9, rhs - gamma


def oracle_l1(run: MechanismRun, oracle_run: MechanismRun) -> float:
    """L1 distance between per-latent payments of a mechanism and the
    latent-oracle reference on the same profile."""
    lats = set(run.per_latent) | set(oracle_run.per_latent)
    return float(
        sum(abs(run.per_latent.get(l, 0.0) - oracle_run.per_latent.get(l, 0.0)) for l in lats)
    )
