"""Entropy-guided claim resolution engine.

Maintains a posterior over mutually exclusive answer hypotheses, scores
unevaluated claims by how much posterior entropy their verification is
expected to remove, folds verified truth values in with Bayes updates, and
stops either at epistemic sufficiency (entropy at or below the threshold
with no contradiction among evaluated evidence) or by exposing the competing
hypotheses when the evidence cannot support a single answer.

A resolution is strictly sequential; all inputs are treated as immutable
snapshots, so independent resolutions can run concurrently as long as each
owns its claim store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .claims import Claim, ClaimStore, truth_estimate

PROB_FLOOR = 1e-12

STOP_EPISTEMIC_SUFFICIENCY = "epistemic_sufficiency"
STOP_UNRESOLVED_CONFLICT = "unresolved_conflict"
STOP_CANDIDATES_EXHAUSTED = "candidates_exhausted"
STOP_MAX_ITERATIONS = "max_iterations"

OBSERVE_HARD_THRESHOLD = "hard_threshold"
OBSERVE_SOFT = "soft"


@dataclass(frozen=True)
class Hypothesis:
    id: str
    text: str


@dataclass
class HypothesisSpace:
    """Ordered hypotheses plus, per claim id, the subset each claim supports."""

    hypotheses: list[Hypothesis]
    support: dict[str, frozenset[str]]

    def __post_init__(self) -> None:
        ids = [h.id for h in self.hypotheses]
        if len(ids) != len(set(ids)):
            raise ValueError("hypothesis ids must be unique")
        if len(ids) < 2:
            raise ValueError("need at least 2 hypotheses")
        known = set(ids)
        for claim_id, supported in self.support.items():
            unknown = set(supported) - known
            if unknown:
                raise ValueError(f"claim {claim_id!r} supports unknown hypotheses {sorted(unknown)}")
        self._index = {hid: i for i, hid in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.hypotheses)

    def hypothesis_ids(self) -> list[str]:
        return [h.id for h in self.hypotheses]

    def support_for(self, claim_id: str) -> frozenset[str]:
        try:
            return self.support[claim_id]
        except KeyError:
            raise KeyError(f"no support entry for claim {claim_id!r}") from None

    def support_indices(self, claim_id: str) -> np.ndarray:
        supported = self.support_for(claim_id)
        return np.array([self._index[h] for h in sorted(supported)], dtype=int)

    def is_partition_trivial(self, claim_id: str) -> bool:
        """True when the claim supports every hypothesis or none: its Bayes
        update is the identity and it carries no discriminative signal."""
        supported = self.support_for(claim_id)
        return len(supported) == 0 or len(supported) == len(self.hypotheses)


def uniform_prior(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least 2 hypotheses")
    return np.full(n, 1.0 / n)


def validate_posterior(probs: np.ndarray) -> None:
    if np.any(probs < 0):
        raise ValueError("posterior has negative mass")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise ValueError(f"posterior not normalized: sum={probs.sum()!r}")


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in bits, with the 0*log(0) = 0 convention."""
    p = np.asarray(probs, dtype=np.float64)
    nonzero = p > 0
    return float(-(p[nonzero] * np.log2(p[nonzero])).sum())


def effective_hypotheses(probs: np.ndarray) -> float:
    """2^H: the uniform-equivalent number of live hypotheses."""
    return float(2.0 ** entropy(probs))


def partition_mass(claim_id: str, space: HypothesisSpace, probs: np.ndarray) -> tuple[float, float]:
    """Posterior mass on the hypotheses the claim supports, and its complement."""
    idx = space.support_indices(claim_id)
    p_plus = float(probs[idx].sum()) if idx.size else 0.0
    return p_plus, 1.0 - p_plus


def eer_proxy(claim_id: str, space: HypothesisSpace, probs: np.ndarray, conf: float) -> float:
    """Tractable expected-entropy-reduction surrogate.

    Mass imbalance between supported and unsupported hypotheses, scaled by
    current entropy and claim confidence. Partition-trivial claims score 0
    outright: their verification cannot move the posterior.
    """
    if not 0.0 <= conf <= 1.0:
        raise ValueError(f"confidence out of range: {conf}")
    if space.is_partition_trivial(claim_id):
        return 0.0
    p_plus, p_minus = partition_mass(claim_id, space, probs)
    return abs(p_plus - p_minus) / (p_plus + p_minus) * entropy(probs) * conf


@dataclass(frozen=True)
class ECRConfig:
    """Resolution parameters. Defaults: stop below 0.3 bits, at most 10
    evaluations, conflict bonus 0.05, verification likelihoods 0.7/0.3."""

    epsilon: float = 0.3
    max_iterations: int = 10
    conflict_weight: float = 0.05
    beta_support: float = 0.7
    beta_nonsupport: float = 0.3
    observation_mode: str = OBSERVE_HARD_THRESHOLD

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations <= 0:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations}")
        if self.conflict_weight < 0:
            raise ValueError(f"conflict_weight must be non-negative, got {self.conflict_weight}")
        if not 0.0 < self.beta_nonsupport < self.beta_support < 1.0:
            raise ValueError(
                f"need 0 < beta_nonsupport < beta_support < 1, got "
                f"{self.beta_nonsupport}/{self.beta_support}"
            )
        if self.observation_mode not in (OBSERVE_HARD_THRESHOLD, OBSERVE_SOFT):
            raise ValueError(f"unknown observation mode: {self.observation_mode!r}")


def likelihood_vector(
    claim_id: str,
    space: HypothesisSpace,
    x: int,
    beta_support: float,
    beta_nonsupport: float,
) -> np.ndarray:
    """P(X_c = x | a) for each hypothesis a under the two-level likelihood table."""
    supported = space.support_for(claim_id)
    like = np.empty(len(space))
    for i, h in enumerate(space.hypotheses):
        beta = beta_support if h.id in supported else beta_nonsupport
        like[i] = beta if x == 1 else 1.0 - beta
    return like


def bayes_update(
    probs: np.ndarray,
    claim_id: str,
    x: int,
    space: HypothesisSpace,
    beta_support: float = 0.7,
    beta_nonsupport: float = 0.3,
) -> np.ndarray:
    """Posterior after observing the claim's truth value.

    Partition-trivial claims return the posterior unchanged (the likelihood
    is constant across hypotheses). Mass is floored at 1e-12 before
    renormalizing so no hypothesis becomes irrecoverable.
    """
    if x not in (0, 1):
        raise ValueError(f"observation must be 0 or 1, got {x}")
    if space.is_partition_trivial(claim_id):
        return probs.copy()
    post = probs * likelihood_vector(claim_id, space, x, beta_support, beta_nonsupport)
    post = np.maximum(post, PROB_FLOOR)
    return post / post.sum()


def exact_eer_oracle(
    claim_id: str,
    space: HypothesisSpace,
    probs: np.ndarray,
    beta_support: float = 0.7,
    beta_nonsupport: float = 0.3,
) -> float:
    """Reference expected entropy reduction by full marginalization over the
    claim's truth value. Quadratic-ish and exact; used to check the proxy,
    never inside the selection loop.
    """
    h_prior = entropy(probs)
    expected = 0.0
    for x in (0, 1):
        like = likelihood_vector(claim_id, space, x, beta_support, beta_nonsupport)
        p_x = float((like * probs).sum())
        if p_x <= 0.0:
            continue
        post = like * probs
        post = np.maximum(post, PROB_FLOOR)
        post = post / post.sum()
        expected += p_x * entropy(post)
    value = h_prior - expected
    # expected posterior entropy never exceeds prior entropy; absorb float dust
    if abs(value) < 1e-12:
        return 0.0
    return value


def conflict_potential(claim_id: str, evaluated: Iterable[str], store: ClaimStore) -> int:
    """1 when evaluating this claim would complete an explicit contradiction
    pair with already-evaluated evidence, else 0."""
    partner = store.get(claim_id).negation_of
    if partner is None:
        return 0
    return 1 if partner in set(evaluated) else 0


def selection_score(
    claim_id: str,
    space: HypothesisSpace,
    probs: np.ndarray,
    evaluated: Iterable[str],
    store: ClaimStore,
    conflict_weight: float,
) -> tuple[float, bool]:
    """Coherence-weighted selection objective; returns (score, bonus_applied)."""
    conf = store.get(claim_id).dynamic_confidence
    bonus = conflict_potential(claim_id, evaluated, store)
    score = eer_proxy(claim_id, space, probs, conf) + conflict_weight * bonus
    return score, bool(bonus and conflict_weight > 0)


def argmax_by_score(scores: dict[str, float]) -> str:
    """Highest score wins; ties break by ascending id for determinism."""
    if not scores:
        raise ValueError("empty candidate set")
    return min(scores, key=lambda cid: (-scores[cid], cid))


def select_next(
    candidates: Sequence[str],
    space: HypothesisSpace,
    probs: np.ndarray,
    evaluated: Iterable[str],
    store: ClaimStore,
    conflict_weight: float,
) -> str:
    evaluated = set(evaluated)
    scores = {
        cid: selection_score(cid, space, probs, evaluated, store, conflict_weight)[0]
        for cid in candidates
    }
    return argmax_by_score(scores)


def observe_truth(claim: Claim, mode: str = OBSERVE_HARD_THRESHOLD) -> tuple[float, int]:
    """Verification probability from provenance, thresholded to a binary
    observation (ties go to 1). Soft mode keeps the same binary record but
    signals the caller to mix likelihoods by the probability instead."""
    prob = truth_estimate(claim)
    x = 1 if prob >= 0.5 else 0
    return prob, x


def has_conflict(evaluated: Iterable[str], store: ClaimStore) -> bool:
    """True when both members of any negation pair have been evaluated."""
    evaluated = set(evaluated)
    for cid in evaluated:
        partner = store.get(cid).negation_of
        if partner is not None and partner in evaluated:
            return True
    return False


def epistemic_sufficiency(
    probs: np.ndarray,
    evaluated: Iterable[str],
    store: ClaimStore,
    epsilon: float,
) -> bool:
    """Entropy at or below epsilon AND no contradiction pair among evaluated
    evidence. Both conjuncts are required: low entropy with an unresolved
    contradiction is not a state worth answering from."""
    return entropy(probs) <= epsilon and not has_conflict(evaluated, store)


@dataclass(frozen=True)
class EvaluationRecord:
    step: int
    claim_id: str
    verification_prob: float
    observed: int
    entropy_after: float
    score: float
    conflict_bonus_applied: bool


@dataclass(frozen=True)
class ECROutcome:
    stop_reason: str
    dominant: Optional[str]
    posterior: np.ndarray
    trace: tuple[EvaluationRecord, ...]
    has_unresolved_conflict: bool

    @property
    def claims_evaluated(self) -> int:
        return len(self.trace)


def resolve(
    query: str,
    candidates: Sequence[str],
    space: HypothesisSpace,
    prior: np.ndarray,
    config: ECRConfig,
    store: ClaimStore,
) -> ECROutcome:
    """Run the sequential resolution loop over a candidate claim pool.

    Each iteration checks for epistemic sufficiency, then evaluates the
    highest-scoring remaining claim and folds it into the posterior. Never
    evaluates more than min(max_iterations, |candidates|) claims. A dominant
    hypothesis is emitted only when sufficiency holds; otherwise the outcome
    exposes the competing hypotheses via the final posterior.
    """
    if len(space) < 2:
        raise ValueError("need at least 2 hypotheses")
    if config.epsilon >= math.log2(len(space)):
        raise ValueError(
            f"epsilon {config.epsilon} must be below the initial entropy "
            f"log2({len(space)})"
        )
    validate_posterior(prior)
    probs = np.asarray(prior, dtype=np.float64).copy()
    pool = sorted(candidates)
    evaluated: list[str] = []
    trace: list[EvaluationRecord] = []

    sufficient = False
    while True:
        if epistemic_sufficiency(probs, evaluated, store, config.epsilon):
            sufficient = True
            break
        if len(trace) >= config.max_iterations or not pool:
            break

        chosen = select_next(pool, space, probs, evaluated, store, config.conflict_weight)
        score, bonus_applied = selection_score(
            chosen, space, probs, evaluated, store, config.conflict_weight
        )
        claim = store.get(chosen)
        prob, x = observe_truth(claim, config.observation_mode)
        if config.observation_mode == OBSERVE_SOFT and not space.is_partition_trivial(chosen):
            like = prob * likelihood_vector(chosen, space, 1, config.beta_support, config.beta_nonsupport) \
                + (1.0 - prob) * likelihood_vector(chosen, space, 0, config.beta_support, config.beta_nonsupport)
            post = np.maximum(probs * like, PROB_FLOOR)
            probs = post / post.sum()
        else:
            probs = bayes_update(
                probs, chosen, x, space, config.beta_support, config.beta_nonsupport
            )
        pool.remove(chosen)
        evaluated.append(chosen)
        trace.append(EvaluationRecord(
            step=len(trace) + 1,
            claim_id=chosen,
            verification_prob=prob,
            observed=x,
            entropy_after=entropy(probs),
            score=score,
            conflict_bonus_applied=bonus_applied,
        ))

    conflicted = has_conflict(evaluated, store)
    if sufficient:
        reason = STOP_EPISTEMIC_SUFFICIENCY
        dominant = space.hypotheses[int(np.argmax(probs))].id
    elif conflicted:
        reason = STOP_UNRESOLVED_CONFLICT
        dominant = None
    elif not pool:
        reason = STOP_CANDIDATES_EXHAUSTED
        dominant = None
    else:
        reason = STOP_MAX_ITERATIONS
        dominant = None

    return ECROutcome(
        stop_reason=reason,
        dominant=dominant,
        posterior=probs,
        trace=tuple(trace),
        has_unresolved_conflict=conflicted,
    )
