"""Evidence graphs, attribution clusters, and cluster representatives.

Attribution clusters are connected components of the evidence graph over
submitted units. Units submitted under one identity are connected a
priori (joint submission is itself provenance), so every layer refines or
merges identity blocks: `none` leaves identities as the clusters, oracle
layers merge blocks that share latent owner or source ids, hash/cosine
layers merge blocks containing (near-)duplicate payloads, and the noisy
oracle perturbs the latent block graph with seeded false splits and false
merges.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .games import EvaluationError
from .market import SubmittedProfile, Unit

LAYERS = (
    "none",
    "oracle_latent",
    "oracle_source",
    "exact_hash",
    "cosine",
    "hybrid_source_cosine",
    "hybrid_hash_cosine",
    "noisy_oracle_latent",
)


@dataclass(frozen=True)
class EvidenceConfig:
    layer: str = "oracle_latent"
    theta: float = 0.95
    hash_precision: int = 8
    p_fs: float = 0.0
    p_fm: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"unknown evidence layer: {self.layer}")
        if not -1.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (-1, 1]")
        if not (0.0 <= self.p_fs <= 1.0 and 0.0 <= self.p_fm <= 1.0):
            raise ValueError("noise rates must be in [0, 1]")

    def label(self) -> str:
        if self.layer in ("cosine", "hybrid_source_cosine", "hybrid_hash_cosine"):
            return f"{self.layer}@{self.theta:g}"
        if self.layer == "noisy_oracle_latent":
            return f"noisy_oracle(fs={self.p_fs:g},fm={self.p_fm:g})"
        return self.layer


@dataclass
class Clustering:
    """Partition of all submitted units into attribution clusters.

    Cluster ids are renumbered by the smallest contained unit_id, so the
    clustering is deterministic given profile and config.
    """

    cluster_of: dict[int, int]
    n_clusters: int

    def members(self, profile: SubmittedProfile) -> list[list[Unit]]:
        buckets: list[list[Unit]] = [[] for _ in range(self.n_clusters)]
        for u in profile.all_units():
            buckets[self.cluster_of[u.unit_id]].append(u)
        for b in buckets:
            b.sort(key=lambda u: u.unit_id)
        return buckets

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["unit_id", "cluster_id"])
            for uid in sorted(self.cluster_of):
                w.writerow([uid, self.cluster_of[uid]])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, u: int) -> int:
        root = u
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[u] != root:
            self.parent[u], u = root, self.parent[u]
        return root

    def union(self, u: int, v: int):
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        self.size[ru] += self.size[rv]


def _pair_uniform(seed: int, key_a: tuple[int, int], key_b: tuple[int, int], tag: int) -> float:
    # One persistent uniform per unordered block pair: raising a noise rate
    # only adds edges (monotone merging), and honest/attacked runs with the
    # same seed share the draw for block pairs that exist in both.
    a, b = sorted((key_a, key_b))
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag, a[0], a[1], b[0], b[1]))
    return float(np.random.default_rng(ss).random())


def _sub_indices(profile: SubmittedProfile) -> list[tuple[int, int]]:
    # (latent, ordinal-within-latent) per identity, in identity order
    counter: dict[int, int] = {}
    keys = []
    for j in range(profile.n_identities):
        lat = profile.latent_of_identity[j]
        keys.append((lat, counter.get(lat, 0)))
        counter[lat] = counter.get(lat, 0) + 1
    return keys


def _normalized_features(units: list[Unit]) -> np.ndarray:
    feats = np.stack([u.features for u in units])
    norms = np.linalg.norm(feats, axis=1)
    bad = np.where(norms == 0.0)[0]
    if bad.size:
        raise EvaluationError(f"zero-norm feature vector on unit {units[bad[0]].unit_id}")
    return feats / norms[:, None]


def build_clusters(profile: SubmittedProfile, cfg: EvidenceConfig) -> Clustering:
    """Connected-component clustering of the evidence graph (union-find)."""
    units = profile.all_units()
    units.sort(key=lambda u: u.unit_id)
    index_of = {u.unit_id: i for i, u in enumerate(units)}
    uf = _UnionFind(len(units))

    # joint submission: all units of one identity start in one block
    first_of_identity: dict[int, int] = {}
    for u in units:
        j = u.submitted_identity
        if j in first_of_identity:
            uf.union(first_of_identity[j], index_of[u.unit_id])
        else:
            first_of_identity[j] = index_of[u.unit_id]

    layer = cfg.layer
    if layer in ("oracle_latent",):
        _union_by(uf, units, index_of, key=lambda u: u.latent_owner)
    elif layer in ("oracle_source", "hybrid_source_cosine"):
        _union_by(uf, units, index_of, key=lambda u: u.source_id)
    elif layer in ("exact_hash", "hybrid_hash_cosine"):
        _union_by(uf, units, index_of, key=lambda u: u.payload_key(cfg.hash_precision))
    elif layer == "noisy_oracle_latent":
        keys = _sub_indices(profile)
        for a in range(profile.n_identities):
            for b in range(a + 1, profile.n_identities):
                same_latent = keys[a][0] == keys[b][0]
                if same_latent:
                    drop = _pair_uniform(cfg.noise_seed, keys[a], keys[b], tag=1) < cfg.p_fs
                    if not drop:
                        uf.union(first_of_identity[a], first_of_identity[b])
                else:
                    add = _pair_uniform(cfg.noise_seed, keys[a], keys[b], tag=2) < cfg.p_fm
                    if add:
                        uf.union(first_of_identity[a], first_of_identity[b])

    if layer in ("cosine", "hybrid_source_cosine", "hybrid_hash_cosine"):
        normed = _normalized_features(units)
        sims = normed @ normed.T
        ids = np.array([u.submitted_identity for u in units])
        ii, jj = np.nonzero(np.triu(sims >= cfg.theta, k=1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            if ids[i] != ids[j]:
                uf.union(i, j)

    roots: dict[int, int] = {}
    cluster_of: dict[int, int] = {}
    for u in units:  # ascending unit_id: components numbered by smallest member
        r = uf.find(index_of[u.unit_id])
        if r not in roots:
            roots[r] = len(roots)
        cluster_of[u.unit_id] = roots[r]
    return Clustering(cluster_of=cluster_of, n_clusters=len(roots))


def _union_by(uf: _UnionFind, units: list[Unit], index_of: dict[int, int], key) -> None:
    groups: dict = {}
    for u in units:
        k = key(u)
        if k in groups:
            uf.union(groups[k], index_of[u.unit_id])
        else:
            groups[k] = index_of[u.unit_id]


@dataclass(frozen=True)
class RepresentativeConfig:
    """Canonicalization applied per cluster before utility evaluation."""

    mode: str = "exact_dup_collapse"
    kappa: int = 1
    selector: str = "first"  # first | medoid | centroid
    budget: float = 1.0

    _MODES = ("identity", "exact_dup_collapse", "capped", "weight_normalized", "provenance_select")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise ValueError(f"unknown representative mode: {self.mode}")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.selector not in ("first", "medoid", "centroid"):
            raise ValueError(f"unknown capped selector: {self.selector}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")

    def label(self) -> str:
        if self.mode == "capped":
            return f"capped({self.kappa},{self.selector})"
        if self.mode == "weight_normalized":
            return f"weightnorm({self.budget:g})"
        return self.mode


@dataclass
class CanonicalSet:
    """Canonical training multiset for one cluster. `weights` is set only by
    the weight-normalized representative."""

    units: list[Unit]
    weights: np.ndarray | None = None

    def payload_keys(self) -> set:
        return {u.payload_key() for u in self.units}


def apply_representative(cluster_units: list[Unit], cfg: RepresentativeConfig) -> CanonicalSet:
    """Canonicalize one cluster's unit multiset."""
    if not cluster_units:
        raise ValueError("cluster must be nonempty")
    units = sorted(cluster_units, key=lambda u: u.unit_id)

    if cfg.mode == "identity":
        return CanonicalSet(units)

    if cfg.mode == "exact_dup_collapse":
        seen: dict = {}
        for u in units:
            seen.setdefault(u.payload_key(), u)
        return CanonicalSet(list(seen.values()))

    if cfg.mode == "weight_normalized":
        w = np.full(len(units), cfg.budget / len(units))
        return CanonicalSet(units, w)

    if cfg.mode == "provenance_select":
        origin = min(u.source_id for u in units)
        return CanonicalSet([u for u in units if u.source_id == origin])

    # capped
    if cfg.selector == "first":
        keep = sorted(units, key=lambda u: (u.timestamp, u.unit_id))[: cfg.kappa]
        return CanonicalSet(sorted(keep, key=lambda u: u.unit_id))
    if cfg.selector == "medoid":
        return CanonicalSet(_greedy_medoids(units, cfg.kappa))
    return CanonicalSet(_centroids(units, cfg.kappa))


def _greedy_medoids(units: list[Unit], kappa: int) -> list[Unit]:
    if len(units) <= kappa:
        return units
    normed = _normalized_features(units)
    dist = 1.0 - normed @ normed.T
    total = dist.sum(axis=1)
    first = int(np.lexsort((np.arange(len(units)), total))[0])
    chosen = [first]
    covered = dist[first].copy()
    while len(chosen) < kappa:
        gains = np.maximum(covered[None, :] - dist, 0.0).sum(axis=1)
        gains[chosen] = -1.0
        best = int(np.lexsort((np.arange(len(units)), -gains))[0])
        chosen.append(best)
        covered = np.minimum(covered, dist[best])
    return [units[i] for i in sorted(chosen)]


def _centroids(units: list[Unit], kappa: int) -> list[Unit]:
    # one synthesized mean-feature unit per label group, largest groups
    # first (kappa=1 keeps only the majority label; ties -> lowest class)
    by_label: dict[int, list[Unit]] = {}
    for u in units:
        by_label.setdefault(u.label, []).append(u)
    groups = sorted(by_label.items(), key=lambda kv: (-len(kv[1]), kv[0]))[:kappa]
    out = []
    for label, members in groups:
        anchor = min(members, key=lambda u: u.unit_id)
        feats = np.mean(np.stack([u.features for u in members]), axis=0)
        out.append(
            Unit(
                unit_id=anchor.unit_id,
                features=feats,
                label=label,
                latent_owner=anchor.latent_owner,
                submitted_identity=anchor.submitted_identity,
                source_id=anchor.source_id,
                timestamp=anchor.timestamp,
            )
        )
    return sorted(out, key=lambda u: u.unit_id)


def mixed_component_fraction(clustering: Clustering, profile: SubmittedProfile) -> float:
    """Share of clusters whose units span two or more latent owners."""
    owners: dict[int, set[int]] = {}
    for u in profile.all_units():
        owners.setdefault(clustering.cluster_of[u.unit_id], set()).add(u.latent_owner)
    mixed = sum(1 for s in owners.values() if len(s) >= 2)
    return mixed / clustering.n_clusters
