"""Quotient semivalue payment mechanisms for training-data markets with
strategic providers: coalition games, semivalue estimators, a synthetic
market and attack library, evidence-graph clustering, payment mechanisms
with manipulation diagnostics, and cosine-threshold prediction."""

from .games import (
    Coalition,
    CoalitionGame,
    EvaluationError,
    GameCache,
    make_data_value_game,
    make_random_monotone_game,
    make_unanimity_game,
    normalized_game,
)
from .learner import LabeledDataset, LearnerConfig, Model, accuracy, train
from .market import (
    AttackSpec,
    SubmittedProfile,
    SyntheticDGPConfig,
    Unit,
    apply_attack,
    baseline_payments,
    generate_synthetic_market,
)
from .evidence import (
    CanonicalSet,
    Clustering,
    EvidenceConfig,
    RepresentativeConfig,
    apply_representative,
    build_clusters,
    mixed_component_fraction,
)
from .mechanism import (
    AllocationRule,
    FairnessLoss,
    LeakageTerms,
    MechanismRun,
    PaymentReport,
    allocate_within_cluster,
    build_quotient_game,
    evaluate_mechanism,
    fairness_loss,
    leakage_terms,
    normalized_bound_check,
    oracle_l1,
    pay,
)
from .semivalues import (
    BANZHAF_NORMALIZED,
    BANZHAF_RAW,
    SHAPLEY,
    BudgetExceededError,
    DegenerateNormalizationError,
    Estimator,
    Family,
    SemivalueResult,
    SemivalueSpec,
    beta_family,
    closed_form_split_gain,
    estimate_semivalue,
    exact_semivalue,
    normalize_payments,
    permutation_shapley,
    random_subset_banzhaf,
    sample_budget,
    stratified_subset_semivalue,
    weight,
)
from .thetapredict import (
    EmbeddingPool,
    ThetaPrediction,
    ThetaPredictConfig,
    chaining_floor,
    neardup_ceiling,
    pairwise_floor,
    predict,
    synthetic_embedding_pool,
)
from .embed_io import EmbedLoadError, read_embed1, write_embed1

__version__ = "0.1.0"
