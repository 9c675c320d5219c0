"""Deterministic offline retrieval substrate.

Hashed-token embeddings (FNV-1a 64-bit, seedless, platform-independent), an
in-memory cosine index with id filtering, reciprocal rank fusion, competitive
strategy scoring, and the heuristics that decide when resolution should run.
Everything here is a pure function of its inputs: identical inputs give
bitwise-identical outputs across runs and machines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .claims import Claim

DEFAULT_DIM = 256
RRF_K = 60
DEFAULT_STRATEGY_WEIGHTS = (0.5, 0.25, 0.25)
CLAIM_VOLUME_THRESHOLD = 15
CONFIDENCE_VARIANCE_THRESHOLD = 0.15
AMBIGUITY_KEYWORDS = ("uncertain", "conflicting", "disagree", "multiple", "various")

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    is_zero: bool

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def embed_text(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Hash tokens into a signed bag-of-words vector, then L2-normalize.

    Tokens are lowercase alphanumeric runs; each token lands in bucket
    hash % dim with sign taken from the hash's top bit. Empty or
    non-alphanumeric text maps to the zero vector, flagged.
    """
    if dim < 8:
        raise ValueError(f"embedding dimension too small: {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        h = _fnv1a64(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return EmbeddingVector(values=vec, is_zero=True)
    return EmbeddingVector(values=vec / norm, is_zero=False)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Standard cosine; zero vectors compare as 0 by convention."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_zero or b.is_zero:
        return 0.0
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (na * nb))


@dataclass
class RankedList:
    """Ordered (id, score) pairs for one retrieval strategy, score descending."""

    strategy: str
    entries: list[tuple[str, float]]

    def __post_init__(self) -> None:
        ids = [i for i, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate ids in ranked list {self.strategy!r}")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"scores not non-increasing in {self.strategy!r}")


class VectorIndex:
    """In-memory cosine index. Immutable after build; queries are read-only."""

    def __init__(self, dim: int = DEFAULT_DIM) -> None:
        self.dim = dim
        self._ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._matrix: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, item_id: str, vector: EmbeddingVector) -> None:
        if vector.dim != self.dim:
            raise ValueError(f"dimension mismatch: {vector.dim} vs index {self.dim}")
        if self._matrix is not None:
            raise RuntimeError("index is frozen after first search")
        self._ids.append(item_id)
        self._rows.append(vector.values)

    def add_text(self, item_id: str, text: str) -> None:
        self.add(item_id, embed_text(text, self.dim))

    def search(
        self,
        query: EmbeddingVector,
        k: int,
        id_filter: Optional[set[str]] = None,
    ) -> RankedList:
        """Top-k by cosine among ids passing the filter; ties break by id."""
        if not self._ids:
            raise ValueError("index is empty")
        if k < 1:
            raise ValueError("k must be >= 1")
        if self._matrix is None:
            self._matrix = np.vstack(self._rows)
        if query.is_zero:
            sims = np.zeros(len(self._ids))
        else:
            sims = self._matrix @ query.values
            norms = np.linalg.norm(self._matrix, axis=1)
            nonzero = norms > 0
            sims = np.where(nonzero, sims / np.where(nonzero, norms, 1.0), 0.0)
        candidates = [
            (item_id, float(sims[i]))
            for i, item_id in enumerate(self._ids)
            if id_filter is None or item_id in id_filter
        ]
        candidates.sort(key=lambda pair: (-pair[1], pair[0]))
        return RankedList(strategy="cosine", entries=candidates[:k])


def rrf_fuse(lists: Sequence[RankedList], k_damp: int = RRF_K) -> RankedList:
    """Reciprocal rank fusion: score(d) = sum over lists of 1/(k + rank(d)).

    Items absent from a list contribute nothing for it. Output sorts by fused
    score descending, ties by ascending id, so fusion is invariant to the
    order the input lists arrive in.
    """
    if not lists:
        raise ValueError("need at least one ranked list")
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, (item_id, _) in enumerate(ranked.entries, start=1):
            scores[item_id] = scores.get(item_id, 0.0) + 1.0 / (k_damp + rank)
    fused = sorted(scores.items(), key=lambda pair: (-pair[1], pair[0]))
    return RankedList(strategy="rrf", entries=fused)


@dataclass(frozen=True)
class StrategyScore:
    strategy: str
    avg_similarity: float
    diversity: float
    avg_confidence: float
    combined: float


def score_strategy(
    ranked: RankedList,
    claims: Mapping[str, Claim],
    weights: tuple[float, float, float] = DEFAULT_STRATEGY_WEIGHTS,
) -> StrategyScore:
    """Weighted blend of mean score, unique-source ratio, and claim confidence.

    Diversity is the fraction of distinct sources among the entries that are
    claims (1.0 when nothing overlaps). avg_confidence averages dynamic
    confidence over entries present in the claim map.
    """
    if not ranked.entries:
        raise ValueError("cannot score an empty ranked list")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"strategy weights must sum to 1, got {weights}")
    avg_similarity = float(np.mean([score for _, score in ranked.entries]))
    matched = [claims[item_id] for item_id, _ in ranked.entries if item_id in claims]
    diversity = len({c.source for c in matched}) / len(ranked.entries) if matched else 1.0
    avg_confidence = float(np.mean([c.dynamic_confidence for c in matched])) if matched else 0.0
    combined = (
        weights[0] * avg_similarity + weights[1] * diversity + weights[2] * avg_confidence
    )
    return StrategyScore(
        strategy=ranked.strategy,
        avg_similarity=avg_similarity,
        diversity=diversity,
        avg_confidence=avg_confidence,
        combined=combined,
    )


@dataclass(frozen=True)
class TriggerDecision:
    trigger: bool
    reasons: tuple[str, ...]


def should_trigger_ecr(
    candidates: Sequence[Claim],
    query: str,
    volume_threshold: int = CLAIM_VOLUME_THRESHOLD,
    variance_threshold: float = CONFIDENCE_VARIANCE_THRESHOLD,
    keywords: Iterable[str] = AMBIGUITY_KEYWORDS,
) -> TriggerDecision:
    """Decide whether the candidate pool warrants entropy-guided resolution.

    Fires on any of: pool larger than the volume threshold, an ambiguity
    keyword appearing in the query (case-insensitive substring), or the
    population variance of candidate dynamic confidences exceeding the
    variance threshold. Reasons list every heuristic that fired.
    """
    reasons: list[str] = []
    if len(candidates) > volume_threshold:
        reasons.append("claim_volume")
    lowered = query.lower()
    if any(kw.lower() in lowered for kw in keywords):
        reasons.append("ambiguity_keywords")
    if candidates:
        confs = np.array([c.dynamic_confidence for c in candidates])
        if float(np.var(confs)) > variance_threshold:
            reasons.append("confidence_variance")
    return TriggerDecision(trigger=bool(reasons), reasons=tuple(reasons))
