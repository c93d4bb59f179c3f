"""Embedding-geometry analysis of the admissible cosine-threshold interval.

Three statistics bound the usable threshold from below and above:

* pairwise floor: the 90th percentile of intra-class cosines (a threshold
  below it glues typical honest same-class pairs together);
* chaining floor: the smallest threshold at which a simulated provider
  partition keeps its mixed-component fraction (MCF) under a cutoff, i.e.
  cross-provider edges stop collapsing the provider-level evidence graph;
* near-duplicate ceiling: the 10th percentile of cos(x, x + noise), above
  which even a mild variant escapes its origin.

The binding lower bound is the larger floor; the admissible interval is
[binding floor, min(ceiling, 1)].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .embed_io import read_embed1

DEFAULT_THETA_GRID = [round(0.50 + 0.05 * i, 2) for i in range(10)]  # 0.50 .. 0.95


@dataclass
class EmbeddingPool:
    vectors: np.ndarray
    class_labels: np.ndarray
    partition_protocol: str = "random"  # random | class_stratified
    name: str = "pool"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.class_labels = np.asarray(self.class_labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.class_labels.shape[0]:
            raise ValueError("vectors and labels disagree")
        if self.partition_protocol not in ("random", "class_stratified"):
            raise ValueError(f"unknown partition protocol: {self.partition_protocol}")
        self.norms = np.linalg.norm(self.vectors, axis=1)
        bad = np.where(self.norms == 0.0)[0]
        if bad.size:
            raise ValueError(f"zero-norm embedding row {int(bad[0])} rejected at load")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def unit_vectors(self) -> np.ndarray:
        return self.vectors / self.norms[:, None]

    @classmethod
    def from_embed1(cls, path, partition_protocol: str = "random", name: str | None = None):
        vectors, labels, meta = read_embed1(path)
        return cls(
            vectors.astype(np.float64),
            labels.astype(np.int64),
            partition_protocol,
            name or (meta or {}).get("dataset", "pool"),
        )


def pairwise_floor(pool: EmbeddingPool, n_pairs: int = 100_000, seed: int = 0) -> float:
    """p90 of intra-class cosine similarity over sampled same-class pairs
    (exhaustive when fewer pairs exist). Percentiles interpolate linearly."""
    unit = pool.unit_vectors()
    by_class: dict[int, np.ndarray] = {
        int(c): np.where(pool.class_labels == c)[0] for c in np.unique(pool.class_labels)
    }
    pair_counts = {c: len(idx) * (len(idx) - 1) // 2 for c, idx in by_class.items()}
    total = sum(pair_counts.values())
    if total == 0:
        raise ValueError("no same-class pair exists in the pool")
    sims: list[np.ndarray] = []
    if total <= n_pairs:
        for c, idx in by_class.items():
            if len(idx) < 2:
                continue
            block = unit[idx] @ unit[idx].T
            iu = np.triu_indices(len(idx), k=1)
            sims.append(block[iu])
    else:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(21,)))
        classes = sorted(pair_counts)
        probs = np.array([pair_counts[c] for c in classes], dtype=float)
        probs /= probs.sum()
        picks = rng.choice(len(classes), size=n_pairs, p=probs)
        for ci in range(len(classes)):
            cnt = int(np.sum(picks == ci))
            if cnt == 0:
                continue
            idx = by_class[classes[ci]]
            a = rng.integers(0, len(idx), size=cnt)
            b = rng.integers(0, len(idx) - 1, size=cnt)
            b = np.where(b >= a, b + 1, b)  # uniform pair without replacement
            sims.append(np.sum(unit[idx[a]] * unit[idx[b]], axis=1))
    return float(np.percentile(np.concatenate(sims), 90, method="linear"))


def neardup_ceiling(
    pool: EmbeddingPool, sigma: float = 0.02, n_samples: int = 5000, seed: int = 0
) -> float:
    """p10 of cos(x, x + eta) with eta ~ N(0, sigma^2 I) over sampled rows."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(22,)))
    n = len(pool)
    idx = rng.choice(n, size=min(n_samples, n), replace=n < n_samples)
    x = pool.vectors[idx]
    if sigma == 0.0:
        return 1.0
    noisy = x + sigma * rng.standard_normal(x.shape)
    num = np.sum(x * noisy, axis=1)
    den = np.linalg.norm(x, axis=1) * np.linalg.norm(noisy, axis=1)
    return float(np.percentile(num / den, 10, method="linear"))


def _draw_partition(
    pool: EmbeddingPool, n_providers: int, units_each: int, rng: np.random.Generator
) -> list[np.ndarray]:
    if pool.partition_protocol == "class_stratified":
        classes = np.unique(pool.class_labels)
        if n_providers > classes.size:
            raise ValueError("class-stratified partition needs n_providers <= n_classes")
        parts = []
        for p in range(n_providers):
            idx = np.where(pool.class_labels == classes[p])[0]
            if len(idx) < units_each:
                raise ValueError(f"class {int(classes[p])} too small for {units_each} units")
            parts.append(rng.choice(idx, size=units_each, replace=False))
        return parts
    need = n_providers * units_each
    if need > len(pool):
        raise ValueError(f"pool of {len(pool)} rows cannot host {need} units")
    order = rng.permutation(len(pool))[:need]
    return [order[p * units_each : (p + 1) * units_each] for p in range(n_providers)]


def _provider_pair_max_cos(unit: np.ndarray, parts: list[np.ndarray]) -> np.ndarray:
    n = len(parts)
    maxcos = np.full((n, n), -1.0)
    for a in range(n):
        va = unit[parts[a]]
        for b in range(a + 1, n):
            m = float(np.max(va @ unit[parts[b]].T))
            maxcos[a, b] = maxcos[b, a] = m
    return maxcos


def _mcf_from_pair_max(maxcos: np.ndarray, theta: float) -> float:
    n = maxcos.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in range(n):
        for b in range(a + 1, n):
            if maxcos[a, b] >= theta:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
    sizes: dict[int, int] = {}
    for a in range(n):
        r = find(a)
        sizes[r] = sizes.get(r, 0) + 1
    mixed = sum(1 for s in sizes.values() if s >= 2)
    return mixed / len(sizes)


@dataclass
class ChainingCurve:
    thetas: list[float]
    mean_mcf: list[float]
    floor: float  # nan when no grid theta reaches the cutoff
    cutoff: float
    flagged: bool

    def as_dict(self) -> dict:
        return {
            "thetas": self.thetas,
            "mean_mcf": self.mean_mcf,
            "floor": None if math.isnan(self.floor) else self.floor,
            "cutoff": self.cutoff,
            "no_admissible_floor": self.flagged,
        }


def chaining_curve(
    pool: EmbeddingPool,
    market_shape: tuple[int, int],
    cutoff: float = 0.10,
    trials: int = 30,
    theta_grid: list[float] | None = None,
    refine_step: float = 0.02,
    seed: int = 0,
) -> ChainingCurve:
    """Simulated provider-level MCF across the threshold grid.

    Per trial a provider partition is drawn by the pool's protocol; provider
    blocks merge whenever any cross-provider pair reaches the threshold. The
    floor is the smallest grid theta whose mean MCF over the trials drops
    below the cutoff, refined to `refine_step` granularity around the
    transition.
    """
    n_providers, units_each = market_shape
    grid = sorted(theta_grid or DEFAULT_THETA_GRID)
    unit = pool.unit_vectors()
    pair_maxes = []
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(23, t)))
        parts = _draw_partition(pool, n_providers, units_each, rng)
        pair_maxes.append(_provider_pair_max_cos(unit, parts))

    def mean_mcf(theta: float) -> float:
        return float(np.mean([_mcf_from_pair_max(pm, theta) for pm in pair_maxes]))

    means = [mean_mcf(t) for t in grid]
    below = [i for i, m in enumerate(means) if m < cutoff]
    if not below:
        return ChainingCurve(grid, means, math.nan, cutoff, flagged=True)
    i0 = below[0]
    floor = grid[i0]
    thetas, curve = list(grid), list(means)
    if i0 > 0:
        lo = grid[i0 - 1]
        t = lo + refine_step
        while t < floor - 1e-9:
            t_r = round(t, 4)
            m = mean_mcf(t_r)
            thetas.append(t_r)
            curve.append(m)
            if m < cutoff:
                floor = t_r
                break
            t += refine_step
    order = np.argsort(thetas)
    return ChainingCurve(
        [thetas[i] for i in order], [curve[i] for i in order], floor, cutoff, flagged=False
    )


def chaining_floor(
    pool: EmbeddingPool,
    market_shape: tuple[int, int],
    cutoff: float = 0.10,
    trials: int = 30,
    theta_grid: list[float] | None = None,
    seed: int = 0,
) -> float:
    """Smallest threshold with simulated MCF below the cutoff (nan if none)."""
    return chaining_curve(pool, market_shape, cutoff, trials, theta_grid, seed=seed).floor


@dataclass
class ThetaPredictConfig:
    sigma: float = 0.02
    cutoff: float = 0.10
    trials: int = 30
    pairwise_pairs: int = 100_000
    neardup_samples: int = 5000
    theta_grid: list[float] | None = None
    refine_step: float = 0.02
    seed: int = 0


@dataclass
class ThetaPrediction:
    pairwise_floor: float
    chaining_floor: float
    neardup_ceiling: float
    binding_floor: float
    binding_regime: str  # pairwise | chaining | tie
    interval: tuple[float, float]
    interval_empty: bool
    cutoff: float
    norm_median: float
    curve: ChainingCurve = field(repr=False, default=None)

    def to_json(self) -> str:
        return json.dumps(
            {
                "norm_median": self.norm_median,
                "pairwise_floor": self.pairwise_floor,
                "chaining_floor": None if math.isnan(self.chaining_floor) else self.chaining_floor,
                "neardup_ceiling": self.neardup_ceiling,
                "binding_floor": self.binding_floor,
                "binding_regime": self.binding_regime,
                "admissible_interval": list(self.interval),
                "interval_empty": self.interval_empty,
                "mcf_cutoff": self.cutoff,
                "chaining_curve": self.curve.as_dict() if self.curve else None,
            },
            indent=2,
        )


def predict(
    pool: EmbeddingPool, market_shape: tuple[int, int], cfg: ThetaPredictConfig | None = None
) -> ThetaPrediction:
    """Assemble floors, ceiling, binding regime, and the admissible interval.

    The raw near-duplicate ceiling is reported as computed; the interval's
    upper end is clamped to 1.0. An empty interval is flagged, never
    silently clamped away.
    """
    cfg = cfg or ThetaPredictConfig()
    pw = pairwise_floor(pool, cfg.pairwise_pairs, cfg.seed)
    curve = chaining_curve(
        pool,
        market_shape,
        cutoff=cfg.cutoff,
        trials=cfg.trials,
        theta_grid=cfg.theta_grid,
        refine_step=cfg.refine_step,
        seed=cfg.seed,
    )
    ch = curve.floor
    ceiling = neardup_ceiling(pool, cfg.sigma, cfg.neardup_samples, cfg.seed)
    if math.isnan(ch):
        binding, regime = pw, "pairwise"
    elif abs(pw - ch) <= cfg.refine_step + 1e-12:
        binding, regime = max(pw, ch), "tie"
    elif pw > ch:
        binding, regime = pw, "pairwise"
    else:
        binding, regime = ch, "chaining"
    hi = min(ceiling, 1.0)
    interval = (binding, hi)
    return ThetaPrediction(
        pairwise_floor=pw,
        chaining_floor=ch,
        neardup_ceiling=ceiling,
        binding_floor=binding,
        binding_regime=regime,
        interval=interval,
        interval_empty=binding > hi,
        cutoff=cfg.cutoff,
        norm_median=float(np.median(pool.norms)),
        curve=curve,
    )


def synthetic_embedding_pool(
    n_classes: int = 4,
    per_class: int = 250,
    dim: int = 384,
    concentration: float = 1.0,
    seed: int = 0,
    unit_norm: bool = True,
    scale: float = 1.0,
) -> EmbeddingPool:
    """Class-mixture pool for geometry tests: orthonormal class directions
    plus isotropic noise of unit expected norm, optionally projected to the
    sphere. `concentration` trades intra-class tightness against spread."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(24,)))
    if dim < n_classes:
        raise ValueError("need dim >= n_classes")
    q, _ = np.linalg.qr(rng.standard_normal((dim, n_classes)))
    labels = np.repeat(np.arange(n_classes), per_class)
    noise = rng.standard_normal((labels.size, dim)) / math.sqrt(dim)
    vectors = concentration * q[:, labels].T + noise
    if unit_norm:
        vectors = vectors / np.linalg.norm(vectors, axis=1)[:, None]
    vectors = scale * vectors
    return EmbeddingPool(vectors, labels, partition_protocol="random", name="synthetic")
