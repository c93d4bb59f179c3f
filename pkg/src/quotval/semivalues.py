"""Semivalue weights, exact enumeration, and seeded Monte Carlo estimators.

A semivalue assigns player k the weighted average of its marginal
contributions, with coalition-size weights w[K, s] >= 0 satisfying
sum_s C(K-1, s) * w[K, s] == 1. Shapley, raw/normalized Banzhaf, and the
Beta family are implemented; payments for the normalized variants are
rescaled to the grand-coalition value after estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import betaln, comb

from .games import Coalition, CoalitionGame

DELTA_DEFAULT = 0.05
S_MIN_DEFAULT = 1e-6

_ESTIMATOR_STREAM_ID = {"permutation": 1, "random_subset": 2, "stratified_subset": 3}


class DegenerateNormalizationError(ValueError):
    """Raw semivalue scores sum below the normalization floor."""


class BudgetExceededError(ValueError):
    """Exact enumeration infeasible at this player count."""


@dataclass(frozen=True)
class Family:
    """Semivalue weight family. `kind` is one of shapley, banzhaf, beta;
    `normalized` asks for payment rescaling to the grand value."""

    kind: str
    alpha: float = 1.0
    beta: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in ("shapley", "banzhaf", "beta"):
            raise ValueError(f"unknown semivalue family: {self.kind}")
        if self.kind == "beta" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("beta family requires alpha, beta > 0")

    def label(self) -> str:
        if self.kind == "beta":
            base = f"beta({self.alpha:g},{self.beta:g})"
        else:
            base = self.kind
        return base + ("-norm" if self.normalized else "")


SHAPLEY = Family("shapley")
BANZHAF_RAW = Family("banzhaf")
BANZHAF_NORMALIZED = Family("banzhaf", normalized=True)


def beta_family(alpha: float, beta: float, normalized: bool = False) -> Family:
    return Family("beta", alpha=alpha, beta=beta, normalized=normalized)


@dataclass(frozen=True)
class Estimator:
    """Estimation policy: exact | permutation | random_subset | stratified_subset."""

    kind: str = "exact"
    samples: int = 256

    def __post_init__(self):
        if self.kind not in ("exact", "permutation", "random_subset", "stratified_subset"):
            raise ValueError(f"unknown estimator: {self.kind}")
        if self.kind != "exact" and self.samples < 1:
            raise ValueError("sample count must be >= 1")


@dataclass(frozen=True)
class SemivalueSpec:
    family: Family = SHAPLEY
    estimator: Estimator = Estimator("exact")
    exact_n_limit: int = 4
    master_seed: int = 0


@dataclass
class SemivalueResult:
    per_player: np.ndarray
    estimator_used: str
    samples_used: int
    eta_bound: float
    family: Family

    def total(self) -> float:
        return float(self.per_player.sum())


def weights_for(family: Family, k: int) -> np.ndarray:
    """Vector w[s] for s = 0..K-1 satisfying the semivalue constraint."""
    if k < 1:
        raise ValueError("K must be >= 1")
    s = np.arange(k)
    if family.kind == "shapley":
        return 1.0 / (k * comb(k - 1, s))
    if family.kind == "banzhaf":
        return np.full(k, 2.0 ** (-(k - 1)))
    # Beta tilt: B(s + beta, K - s - 1 + alpha) / B(alpha, beta), rescaled so
    # that sum_s C(K-1, s) w[s] == 1.
    tilt = np.exp(betaln(s + family.beta, k - s - 1 + family.alpha) - betaln(family.alpha, family.beta))
    return tilt / float(np.sum(comb(k - 1, s) * tilt))


def weight(family: Family, k: int, s: int) -> float:
    """Single coalition-size weight w[K, s]."""
    if s < 0 or s > k - 1:
        raise ValueError(f"coalition size {s} outside [0, {k - 1}]")
    return float(weights_for(family, k)[s])


def _popcounts(n: int) -> np.ndarray:
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(1, 1 << n):
        pc[i] = pc[i >> 1] + (i & 1)
    return pc


def exact_semivalue(game: CoalitionGame, spec: SemivalueSpec) -> SemivalueResult:
    """Exact weighted sum over all 2^K coalitions. Requires K <= 16."""
    k = game.player_count
    if k > 16:
        raise BudgetExceededError(
            f"exact enumeration needs 2^{k} oracle calls; use a sampled estimator"
        )
    values = np.empty(1 << k)
    for mask in range(1 << k):
        values[mask] = game.value(Coalition(mask))
    pc = _popcounts(k)
    w = weights_for(spec.family, k)
    phi = np.zeros(k)
    idx = np.arange(1 << k)
    for p in range(k):
        without = idx[(idx >> p) & 1 == 0]
        withp = without | (1 << p)
        phi[p] = float(np.sum(w[pc[without]] * (values[withp] - values[without])))
    return SemivalueResult(phi, "exact", 1 << k, 0.0, spec.family)


def _stream(master_seed: int, estimator: str, r: int) -> np.random.Generator:
    # Counter-style stream per sample: parallel fan-out over r reproduces the
    # serial result bit for bit.
    key = (_ESTIMATOR_STREAM_ID[estimator], r)
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=key))


def _eta_bound(v_range: float, k: int, samples: int, delta: float = DELTA_DEFAULT) -> float:
    return v_range * math.sqrt(math.log(2.0 * k / delta) / (2.0 * samples))


def permutation_shapley(game: CoalitionGame, samples: int, master_seed: int) -> SemivalueResult:
    """Unbiased Shapley estimate: one full value chain per random permutation,
    reusing the running prefix value (K+1 oracle calls per permutation)."""
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    k = game.player_count
    phi = np.zeros(k)
    for r in range(samples):
        rng = _stream(master_seed, "permutation", r)
        perm = rng.permutation(k)
        prefix = Coalition.empty()
        u_prev = game.value(prefix)
        for p in perm:
            prefix = prefix.add(int(p))
            u_next = game.value(prefix)
            phi[p] += u_next - u_prev
            u_prev = u_next
    phi /= samples
    return SemivalueResult(phi, "permutation", samples, _eta_bound(game.value_range, k, samples), SHAPLEY)


def random_subset_banzhaf(game: CoalitionGame, samples: int, master_seed: int) -> SemivalueResult:
    """Raw Banzhaf estimate: per player, R subsets of the other players drawn
    with inclusion probability 1/2."""
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    k = game.player_count
    phi = np.zeros(k)
    for r in range(samples):
        rng = _stream(master_seed, "random_subset", r)
        draws = rng.random((k, k)) < 0.5
        for p in range(k):
            mask = 0
            for q in range(k):
                if q != p and draws[p, q]:
                    mask |= 1 << q
            phi[p] += game.value(Coalition(mask | 1 << p)) - game.value(Coalition(mask))
    phi /= samples
    return SemivalueResult(phi, "random_subset", samples, _eta_bound(game.value_range, k, samples), BANZHAF_RAW)


def stratified_subset_semivalue(
    game: CoalitionGame, family: Family, samples: int, master_seed: int
) -> SemivalueResult:
    """Unbiased estimator for any weight family: sample the coalition size s
    from the induced distribution C(K-1, s) * w[s], then a uniform subset of
    that size."""
    if samples < 1:
        raise ValueError("sample count must be >= 1")
    k = game.player_count
    size_probs = comb(k - 1, np.arange(k)) * weights_for(family, k)
    size_probs = size_probs / size_probs.sum()
    phi = np.zeros(k)
    others = [[q for q in range(k) if q != p] for p in range(k)]
    for r in range(samples):
        rng = _stream(master_seed, "stratified_subset", r)
        for p in range(k):
            s = int(rng.choice(k, p=size_probs))
            mask = 0
            if s:
                for q in rng.choice(others[p], size=s, replace=False):
                    mask |= 1 << int(q)
            phi[p] += game.value(Coalition(mask | 1 << p)) - game.value(Coalition(mask))
    phi /= samples
    return SemivalueResult(phi, "stratified_subset", samples, _eta_bound(game.value_range, k, samples), family)


def estimate_semivalue(game: CoalitionGame, spec: SemivalueSpec) -> SemivalueResult:
    """Dispatch on the estimator policy; small games fall back to exact.

    Permutation sampling is only valid for Shapley weights and random-subset
    sampling only for Banzhaf weights; the Beta family estimates through
    stratified size sampling.
    """
    est = spec.estimator
    if est.kind == "exact" or game.player_count <= spec.exact_n_limit:
        return exact_semivalue(game, spec)
    if est.kind == "permutation":
        if spec.family.kind != "shapley":
            raise ValueError("permutation sampling is only unbiased for Shapley weights")
        res = permutation_shapley(game, est.samples, spec.master_seed)
    elif est.kind == "random_subset":
        if spec.family.kind != "banzhaf":
            raise ValueError("random-subset sampling estimates Banzhaf weights only")
        res = random_subset_banzhaf(game, est.samples, spec.master_seed)
    else:
        res = stratified_subset_semivalue(game, spec.family, est.samples, spec.master_seed)
    return replace(res, family=spec.family)


def normalize_payments(
    result: SemivalueResult, grand_value: float, s_min: float = S_MIN_DEFAULT
) -> SemivalueResult:
    """Rescale scores to sum to the grand-coalition value."""
    total = result.total()
    if abs(total) < s_min:
        raise DegenerateNormalizationError(
            f"raw score sum {total:.3e} below normalization floor {s_min:.1e}"
        )
    scaled = result.per_player * (grand_value / total)
    return replace(result, per_player=scaled)


def sample_budget(v_range: float, eta: float, k_alpha: int, delta: float) -> int:
    """Permutation samples per cluster for deterministic-regime accuracy eta
    at confidence 1 - delta (explicit Hoeffding constant)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    return math.ceil(v_range * v_range * math.log(2.0 * k_alpha / delta) / (2.0 * eta * eta))


def closed_form_split_gain(family: Family, n: int, k: int) -> tuple[float, float]:
    """Predicted (additive, multiplicative) gain when one of n unanimity
    players splits into k pseudonyms: additive k*w[n+k-1, n+k-2] - w[n, n-1],
    multiplicative the corresponding ratio."""
    if n < 2 or k < 2:
        raise ValueError("closed form requires n >= 2 and k >= 2")
    if family.normalized:
        raise ValueError(f"no closed form for normalized family {family.label()}")
    w_split = weight(family, n + k - 1, n + k - 2)
    w_honest = weight(family, n, n - 1)
    return k * w_split - w_honest, k * w_split / w_honest
