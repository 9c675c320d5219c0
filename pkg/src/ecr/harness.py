"""Frozen claims-only evaluation harness.

Runs the three selection policies over generated cases with one shared
posterior model, computes the entropy-aligned and diversity metrics, and
drives the contradiction-injection ablation, the conflict-weight sweep, the
minimal conflict sanity check, and multi-seed aggregation.

Cases are independent; the harness may fan them out over worker threads and
the results are byte-identical regardless of the degree of parallelism
(each case owns its claim store and, for the random policy, its own seeded
generator).
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .claims import Claim, ClaimStore
from .dataset import EvalCase, inject_contradictions, _case_salt
from .engine import (
    ECRConfig,
    ECROutcome,
    Hypothesis,
    HypothesisSpace,
    bayes_update,
    entropy,
    observe_truth,
    resolve,
    uniform_prior,
)
from .retrieval import embed_text, cosine_similarity, should_trigger_ecr

POLICY_RETRIEVAL = "retrieval_only"
POLICY_ECR = "ecr"
POLICY_RANDOM = "random"
ALL_POLICIES = (POLICY_RETRIEVAL, POLICY_ECR, POLICY_RANDOM)

RETRIEVAL_BUDGET = 15
RANDOM_BUDGET = 5
STOP_FIXED_BUDGET = "fixed_budget"

METRIC_NAMES = (
    "claims", "h_final", "dh_per_claim", "collapse", "eff_hyp",
    "trace_var", "redundancy", "hyp_cond_red", "src_ent", "coverage",
)


@dataclass
class CaseResult:
    policy: str
    query_id: str
    claims_evaluated: int
    entropy_trace: list[float]
    final_entropy: float
    collapse_step: int
    dominant: Optional[str]
    stop_reason: str
    selected_claim_ids: list[str]
    budget: int


def collapse_step(entropy_trace: Sequence[float], epsilon: float, budget: int) -> int:
    """First trace index at or below epsilon (index 0 is the prior entropy);
    budget+1 when the trace never collapses."""
    for i, h in enumerate(entropy_trace):
        if h <= epsilon:
            return i
    return budget + 1


def _case_store(case: EvalCase) -> ClaimStore:
    store = ClaimStore()
    store.load_claims(case.candidates)
    return store


def _fixed_order_run(
    case: EvalCase,
    ordered_ids: list[str],
    policy: str,
    budget: int,
    config: ECRConfig,
) -> CaseResult:
    """Evaluate a fixed claim sequence under the shared posterior model and
    force a dominant hypothesis at the end (relevance-style behavior)."""
    store = _case_store(case)
    space = case.space()
    probs = uniform_prior(len(case.hypotheses))
    trace = [entropy(probs)]
    for cid in ordered_ids:
        _, x = observe_truth(store.get(cid))
        probs = bayes_update(probs, cid, x, space, config.beta_support, config.beta_nonsupport)
        trace.append(entropy(probs))
    dominant = space.hypotheses[int(np.argmax(probs))].id
    return CaseResult(
        policy=policy,
        query_id=case.query_id,
        claims_evaluated=len(ordered_ids),
        entropy_trace=trace,
        final_entropy=trace[-1],
        collapse_step=collapse_step(trace, config.epsilon, budget),
        dominant=dominant,
        stop_reason=STOP_FIXED_BUDGET,
        selected_claim_ids=list(ordered_ids),
        budget=budget,
    )


def _ecr_run(case: EvalCase, config: ECRConfig, budget: Optional[int] = None) -> CaseResult:
    store = _case_store(case)
    space = case.space()
    prior = uniform_prior(len(case.hypotheses))
    cfg = config if budget is None else ECRConfig(
        epsilon=config.epsilon,
        max_iterations=budget,
        conflict_weight=config.conflict_weight,
        beta_support=config.beta_support,
        beta_nonsupport=config.beta_nonsupport,
        observation_mode=config.observation_mode,
    )
    outcome = resolve(case.query_text, case.candidate_ids(), space, prior, cfg, store)
    trace = [entropy(prior)] + [rec.entropy_after for rec in outcome.trace]
    return CaseResult(
        policy=POLICY_ECR,
        query_id=case.query_id,
        claims_evaluated=outcome.claims_evaluated,
        entropy_trace=trace,
        final_entropy=trace[-1],
        collapse_step=collapse_step(trace, cfg.epsilon, cfg.max_iterations),
        dominant=outcome.dominant,
        stop_reason=outcome.stop_reason,
        selected_claim_ids=[rec.claim_id for rec in outcome.trace],
        budget=cfg.max_iterations,
    )


def run_policy(
    case: EvalCase,
    policy: str,
    seed: int,
    config: Optional[ECRConfig] = None,
) -> CaseResult:
    """Run one selection policy on one case.

    All three policies observe and update through the same Bayesian model;
    only the claim-selection rule differs. The random policy draws from a
    generator seeded per (case, seed) pair, so each case is independently
    reproducible.
    """
    config = config or ECRConfig()
    if policy == POLICY_RETRIEVAL:
        ordered = sorted(case.candidates, key=lambda c: (-c.retrieval_score, c.id))
        ids = [c.id for c in ordered[:RETRIEVAL_BUDGET]]
        return _fixed_order_run(case, ids, policy, RETRIEVAL_BUDGET, config)
    if policy == POLICY_RANDOM:
        rng = np.random.default_rng([seed, _case_salt(case.query_id)])
        pool = sorted(case.candidate_ids())
        picked = [pool[int(i)] for i in rng.choice(len(pool), size=min(RANDOM_BUDGET, len(pool)), replace=False)]
        return _fixed_order_run(case, picked, policy, RANDOM_BUDGET, config)
    if policy == POLICY_ECR:
        return _ecr_run(case, config)
    raise ValueError(f"unknown policy: {policy!r}")


def run_cases(
    cases: Sequence[EvalCase],
    policy: str,
    seed: int,
    config: Optional[ECRConfig] = None,
    workers: int = 1,
) -> list[CaseResult]:
    """Run a policy over many cases, optionally fanning out over threads.
    Output order always follows input order."""
    if workers <= 1:
        return [run_policy(case, policy, seed, config) for case in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_policy, case, policy, seed, config) for case in cases]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Metrics


def _mean_pairwise_cosine(texts: Sequence[str], dim: int) -> float:
    if len(texts) < 2:
        return 0.0
    vectors = [embed_text(t, dim) for t in texts]
    sims = [
        cosine_similarity(vectors[i], vectors[j])
        for i in range(len(vectors))
        for j in range(i + 1, len(vectors))
    ]
    return float(np.mean(sims))


def _source_entropy(sources: Sequence[str]) -> float:
    if not sources:
        return 0.0
    counts = np.array(list(Counter(sources).values()), dtype=np.float64)
    return entropy(counts / counts.sum())


def per_case_metrics(result: CaseResult, case: EvalCase, dim: int = 256) -> dict[str, float]:
    """Entropy-aligned metrics plus diversity diagnostics for one run."""
    by_id = {c.id: c for c in case.candidates}
    selected = [by_id[cid] for cid in result.selected_claim_ids]
    h0 = result.entropy_trace[0]
    n = result.claims_evaluated
    dh_per_claim = (h0 - result.final_entropy) / n if n else 0.0

    redundancy = _mean_pairwise_cosine([c.text for c in selected], dim)

    groups: dict[str, list[Claim]] = {}
    for c in selected:
        if len(c.support_set) == 1:
            groups.setdefault(next(iter(c.support_set)), []).append(c)
    group_values = [
        _mean_pairwise_cosine([c.text for c in members], dim)
        for members in groups.values()
        if len(members) >= 2
    ]
    hyp_cond_red = float(np.mean(group_values)) if group_values else 0.0

    expected = set(case.expected_snippets)
    coverage = len(expected.intersection(result.selected_claim_ids)) / len(expected) if expected else 0.0

    return {
        "claims": float(n),
        "h_final": result.final_entropy,
        "dh_per_claim": dh_per_claim,
        "collapse": float(result.collapse_step),
        "eff_hyp": float(2.0 ** result.final_entropy),
        "trace_var": float(np.var(result.entropy_trace)),
        "redundancy": redundancy,
        "hyp_cond_red": hyp_cond_red,
        "src_ent": _source_entropy([c.source for c in selected]),
        "coverage": coverage,
    }


def pool_coverage(case: EvalCase) -> float:
    """Coverage of the expected snippets by the full candidate pool; identical
    for every policy on a given case by construction."""
    expected = set(case.expected_snippets)
    if not expected:
        return 0.0
    return len(expected.intersection(case.candidate_ids())) / len(expected)


@dataclass
class PolicyAggregate:
    policy: str
    n_cases: int
    stats: dict[str, tuple[float, float]]  # metric -> (mean, population std)


@dataclass
class MetricsReport:
    aggregates: list[PolicyAggregate]
    ablation: list["AblationCell"] = field(default_factory=list)

    def policy(self, name: str) -> PolicyAggregate:
        for agg in self.aggregates:
            if agg.policy == name:
                return agg
        raise KeyError(f"no aggregate for policy {name!r}")


def aggregate_metrics(policy: str, rows: Sequence[dict[str, float]]) -> PolicyAggregate:
    if not rows:
        raise ValueError("need at least one result to aggregate")
    stats = {}
    for name in METRIC_NAMES:
        values = np.array([row[name] for row in rows])
        stats[name] = (float(values.mean()), float(values.std()))
    return PolicyAggregate(policy=policy, n_cases=len(rows), stats=stats)


def compute_metrics(
    results: Sequence[CaseResult],
    cases: Sequence[EvalCase],
    dim: int = 256,
) -> MetricsReport:
    """Aggregate per-case metrics into per-policy means and stds."""
    by_id = {case.query_id: case for case in cases}
    per_policy: dict[str, list[dict[str, float]]] = {}
    for result in results:
        row = per_case_metrics(result, by_id[result.query_id], dim)
        per_policy.setdefault(result.policy, []).append(row)
    aggregates = [aggregate_metrics(p, rows) for p, rows in per_policy.items()]
    return MetricsReport(aggregates=aggregates)


def evaluate_policies(
    cases: Sequence[EvalCase],
    policies: Sequence[str],
    seed: int,
    config: Optional[ECRConfig] = None,
    workers: int = 1,
    dim: int = 256,
) -> tuple[list[CaseResult], MetricsReport]:
    results: list[CaseResult] = []
    for policy in policies:
        results.extend(run_cases(cases, policy, seed, config, workers))
    return results, compute_metrics(results, cases, dim)


# ---------------------------------------------------------------------------
# Contradiction ablation and conflict-weight sweep


@dataclass
class AblationCell:
    method: str
    alpha: float
    conflict_weight: float
    n_cases: int
    mean_claims: float
    mean_h: float
    ambiguity_exposure: float
    overconfident_error: float
    stop_reason_counts: dict[str, int]


def _ablation_cell(
    cases: Sequence[EvalCase],
    results: Sequence[CaseResult],
    method: str,
    alpha: float,
    conflict_weight: float,
) -> AblationCell:
    truth = {case.query_id: case.ground_truth for case in cases}
    exposed = [r.dominant is None for r in results]
    overconf = [r.dominant is not None and r.dominant != truth[r.query_id] for r in results]
    return AblationCell(
        method=method,
        alpha=alpha,
        conflict_weight=conflict_weight,
        n_cases=len(results),
        mean_claims=float(np.mean([r.claims_evaluated for r in results])),
        mean_h=float(np.mean([r.final_entropy for r in results])),
        ambiguity_exposure=float(np.mean(exposed)),
        overconfident_error=float(np.mean(overconf)),
        stop_reason_counts=dict(sorted(Counter(r.stop_reason for r in results).items())),
    )


def run_contradiction_ablation(
    cases: Sequence[EvalCase],
    alphas: Sequence[float],
    conflict_weight: float,
    seed: int,
    config: Optional[ECRConfig] = None,
    methods: Sequence[str] = ("baseline", "ecr"),
    workers: int = 1,
) -> list[AblationCell]:
    """Inject contradiction twins at each rate and compare the fixed-budget
    baseline (always answers) against resolution with the budget opened to
    the full pool size.

    Ambiguity exposure is the fraction of runs that decline to emit a
    dominant hypothesis; overconfident error is the fraction whose emitted
    dominant hypothesis is wrong.
    """
    config = config or ECRConfig()
    base = ECRConfig(
        epsilon=config.epsilon,
        max_iterations=config.max_iterations,
        conflict_weight=conflict_weight,
        beta_support=config.beta_support,
        beta_nonsupport=config.beta_nonsupport,
        observation_mode=config.observation_mode,
    )
    cells: list[AblationCell] = []
    for method in methods:
        for alpha in alphas:
            injected = [inject_contradictions(case, alpha, seed) for case in cases]
            if method == "baseline":
                results = run_cases(injected, POLICY_RETRIEVAL, seed, base, workers)
            elif method == "ecr":
                def ecr_one(case: EvalCase) -> CaseResult:
                    return _ecr_run(case, base, budget=len(case.candidates))

                if workers <= 1:
                    results = [ecr_one(c) for c in injected]
                else:
                    with ThreadPoolExecutor(max_workers=workers) as pool:
                        results = list(pool.map(ecr_one, injected))
            else:
                raise ValueError(f"unknown ablation method: {method!r}")
            cells.append(_ablation_cell(injected, results, method, alpha, conflict_weight))
    return cells


def run_lambda_sweep(
    cases: Sequence[EvalCase],
    conflict_weights: Sequence[float],
    alphas: Sequence[float],
    seed: int,
    config: Optional[ECRConfig] = None,
    workers: int = 1,
) -> list[AblationCell]:
    """Rerun the injection ablation for every conflict-weight value; only the
    resolution policy depends on the weight, so baseline rows are skipped."""
    cells: list[AblationCell] = []
    for weight in conflict_weights:
        cells.extend(run_contradiction_ablation(
            cases, alphas, weight, seed, config, methods=("ecr",), workers=workers,
        ))
    return cells


# ---------------------------------------------------------------------------
# Minimal conflict sanity check


def minimal_conflict_case(linked: bool = True) -> tuple[list[Claim], HypothesisSpace]:
    """One well-supported claim plus its explicit synthetic negation, over a
    three-way hypothesis space.

    The claim verifies true and its negation verifies false, so the two
    observations agree; only the structural negation link stands between the
    run and an answer. With linked=False the same two claims carry no link
    (control), in which case nothing blocks convergence."""
    hypotheses = [
        Hypothesis("h0", "the flagged figure is correct"),
        Hypothesis("h1", "the flagged figure is overstated"),
        Hypothesis("h2", "the flagged figure is understated"),
    ]
    claim = Claim(
        id="sanity-claim",
        text="The reported figure matches the source ledger.",
        base_confidence=0.9,
        source="ledger",
        support_count=3,
        support_set=frozenset({"h0"}),
    )
    twin = Claim(
        id="sanity-claim-neg",
        text="It is not the case that the reported figure matches the source ledger.",
        base_confidence=0.9,
        source="ledger",
        contradiction_count=3,
        negation_of=claim.id if linked else None,
        support_set=frozenset({"h1", "h2"}),
    )
    space = HypothesisSpace(
        hypotheses=hypotheses,
        support={claim.id: claim.support_set, twin.id: twin.support_set},
    )
    return [claim, twin], space


def conflict_sanity_outcome(config: Optional[ECRConfig] = None, linked: bool = True) -> ECROutcome:
    claims, space = minimal_conflict_case(linked)
    store = ClaimStore()
    store.load_claims(claims)
    cfg = config or ECRConfig()
    prior = uniform_prior(len(space))
    return resolve("sanity: single claim and its negation", [c.id for c in claims], space, prior, cfg, store)


def conflict_sanity_test(config: Optional[ECRConfig] = None) -> bool:
    """Both members of the pair get evaluated, the conflict is flagged, and no
    dominant hypothesis is emitted."""
    outcome = conflict_sanity_outcome(config)
    return (
        outcome.claims_evaluated == 2
        and outcome.has_unresolved_conflict
        and outcome.dominant is None
    )


# ---------------------------------------------------------------------------
# Multi-seed aggregation


@dataclass
class MultiseedReport:
    seeds: list[int]
    # policy -> metric -> (mean over seeds, population std over seeds)
    stats: dict[str, dict[str, tuple[float, float]]]
    seed_means: dict[str, dict[int, dict[str, float]]]


def run_multiseed(
    cases: Sequence[EvalCase],
    seeds: Sequence[int],
    policies: Sequence[str] = ALL_POLICIES,
    config: Optional[ECRConfig] = None,
    workers: int = 1,
    dim: int = 256,
) -> MultiseedReport:
    """Rerun the frozen dataset under several seeds and aggregate seed-level
    means. Raises if the deterministic policies (everything except the random
    control) show any cross-seed variation."""
    if not seeds:
        raise ValueError("need at least one seed")
    seed_means: dict[str, dict[int, dict[str, float]]] = {p: {} for p in policies}
    for seed in seeds:
        _, report = evaluate_policies(cases, policies, seed, config, workers, dim)
        for agg in report.aggregates:
            seed_means[agg.policy][seed] = {m: agg.stats[m][0] for m in METRIC_NAMES}

    stats: dict[str, dict[str, tuple[float, float]]] = {}
    for policy in policies:
        stats[policy] = {}
        for metric in METRIC_NAMES:
            values = np.array([seed_means[policy][s][metric] for s in seeds])
            stats[policy][metric] = (float(values.mean()), float(values.std()))
        if policy in (POLICY_RETRIEVAL, POLICY_ECR):
            drifting = [m for m, (_, std) in stats[policy].items() if std != 0.0]
            if drifting:
                raise RuntimeError(
                    f"policy {policy!r} should be seed-invariant but varies on {drifting}"
                )
    return MultiseedReport(seeds=list(seeds), stats=stats, seed_means=seed_means)


def trigger_decision(case: EvalCase):
    """Retrieval-layer heuristic decision for one case, recorded in reports."""
    return should_trigger_ecr(case.candidates, case.query_text)
