"""A synthetic provider market and the attack library.

Eight providers each submit sixty labeled examples. The attacker (latent
provider 0) can split across pseudonyms, duplicate its data exactly or
with noise, or poison labels. Identity-level baselines react differently:
uniform pays per identity (split-friendly), per-example pays per unit
(duplicate-friendly), and reported-game Shapley rewards complementary
splits.
"""

from quotval import (
    AttackSpec,
    LearnerConfig,
    SyntheticDGPConfig,
    apply_attack,
    baseline_payments,
    generate_synthetic_market,
)
from quotval.market import per_latent_totals

profile, valset = generate_synthetic_market(SyntheticDGPConfig(seed=0))
learner = LearnerConfig(n_classes=4)
print(f"honest market: {profile.n_identities} identities, {profile.total_units()} units")

attacks = [
    AttackSpec("sybil_split_k", k=3),
    AttackSpec("exact_dup_2x_sybils", dup_fraction=1.0),
    AttackSpec("near_duplicate_2x_sybils", sigma=0.02),
    AttackSpec("label_noise", flip_fraction=0.3),
]

print(f"\n{'attack':<24}{'uniform':>9}{'per-ex':>9}{'shapley':>9}")
for spec in attacks:
    attacked = apply_attack(profile, spec, seed=1)
    row = [spec.label()]
    for rule in ("uniform_identity", "per_example_uniform", "semivalue"):
        honest_p = per_latent_totals(profile, baseline_payments(profile, rule, learner, valset))
        attacked_p = per_latent_totals(attacked, baseline_payments(attacked, rule, learner, valset))
        row.append(attacked_p[0] / honest_p[0])
    print(f"{row[0]:<24}{row[1]:>9.3f}{row[2]:>9.3f}{row[3]:>9.3f}")

print("\nA gain above 1 means the attack increased the attacker's total payment.")
