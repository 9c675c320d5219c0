"""Entropy-guided claim resolution.

A library for selecting which atomic evidence claim to verify next by
expected entropy reduction over a space of competing answer hypotheses,
stopping once the posterior is concentrated and free of contradictions,
plus a deterministic offline harness that measures the behavior.
"""

from .claims import (
    Claim,
    ClaimError,
    ClaimFileError,
    ClaimStore,
    ClaimStoreSnapshot,
    dynamic_confidence,
    truth_estimate,
)
from .dataset import (
    Dataset,
    EvalCase,
    SourceTable,
    generate_dataset,
    inject_contradictions,
)
from .engine import (
    ECRConfig,
    ECROutcome,
    EvaluationRecord,
    Hypothesis,
    HypothesisSpace,
    bayes_update,
    conflict_potential,
    eer_proxy,
    effective_hypotheses,
    entropy,
    epistemic_sufficiency,
    exact_eer_oracle,
    has_conflict,
    observe_truth,
    partition_mass,
    resolve,
    select_next,
    selection_score,
    uniform_prior,
)
from .harness import (
    AblationCell,
    CaseResult,
    MetricsReport,
    MultiseedReport,
    compute_metrics,
    conflict_sanity_test,
    evaluate_policies,
    run_contradiction_ablation,
    run_lambda_sweep,
    run_multiseed,
    run_policy,
)
from .retrieval import (
    EmbeddingVector,
    RankedList,
    StrategyScore,
    TriggerDecision,
    VectorIndex,
    cosine_similarity,
    embed_text,
    rrf_fuse,
    score_strategy,
    should_trigger_ecr,
)

__version__ = "0.1.0"
