"""Claim store: atomic evidence units with provenance counters and negation links.

A claim carries an extraction-time confidence, support/contradiction counters
accumulated during verification, an optional link to its explicit negation,
and the set of answer hypotheses it supports. The store keeps negation links
symmetric and is the single place counters get mutated, so derived confidence
stays consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

SUPPORT_GAIN = 0.15
CONTRADICTION_PENALTY = 0.25


class ClaimError(ValueError):
    """Invalid claim data or unknown claim id."""


class ClaimFileError(ValueError):
    """Malformed claim file; message carries the offending line number."""


def dynamic_confidence(base: float, support_count: int, contradiction_count: int) -> float:
    """Bounded asymmetric confidence update from provenance counters.

    clip_[0,1](base + 0.15*ln(1+S) - 0.25*C); natural log.
    """
    if not 0.0 <= base <= 1.0:
        raise ClaimError(f"base confidence out of range: {base}")
    if support_count < 0 or contradiction_count < 0:
        raise ClaimError("counters must be non-negative")
    value = base + SUPPORT_GAIN * math.log(1 + support_count) - CONTRADICTION_PENALTY * contradiction_count
    return min(1.0, max(0.0, value))


@dataclass
class Claim:
    """One atomic evidence unit.

    support_set names the hypothesis ids this claim supports; empty means it
    discriminates nothing. negation_of links to the claim's explicit negation
    (kept symmetric by the store).
    """

    id: str
    text: str
    base_confidence: float
    source: str = ""
    support_count: int = 0
    contradiction_count: int = 0
    negation_of: Optional[str] = None
    retrieval_score: float = 0.0
    support_set: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.id:
            raise ClaimError("claim id must be non-empty")
        if not 0.0 <= self.base_confidence <= 1.0:
            raise ClaimError(f"base_confidence out of range for {self.id!r}")
        if self.support_count < 0 or self.contradiction_count < 0:
            raise ClaimError(f"negative counter for {self.id!r}")
        if self.negation_of == self.id:
            raise ClaimError(f"claim {self.id!r} cannot negate itself")
        self.support_set = frozenset(self.support_set)

    @property
    def dynamic_confidence(self) -> float:
        return dynamic_confidence(self.base_confidence, self.support_count, self.contradiction_count)


def truth_estimate(claim: Claim) -> float:
    """Laplace-smoothed truth probability from provenance counters.

    (S+1)/(S+C+2) whenever any counter is set; otherwise the extraction-time
    prior confidence. Strictly inside (0,1) on the smoothed branch.
    """
    s, c = claim.support_count, claim.contradiction_count
    if s + c > 0:
        return (s + 1) / (s + c + 2)
    return claim.base_confidence


@dataclass(frozen=True)
class ClaimStoreSnapshot:
    claims: dict[str, Claim]
    version: int


# Serialized field order, one claim per line.
_FIELDS = ("id", "text", "base_confidence", "source", "support_count",
           "contradiction_count", "negation_of", "retrieval_score", "support_set")


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("|", "\\|").replace("\n", "\\n")


def _unescape(value: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "|":
                out.append("|")
            elif nxt == "n":
                out.append("\n")
            else:
                raise ValueError(f"bad escape sequence \\{nxt}")
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


class ClaimStore:
    """Single-writer claim collection with symmetric negation links.

    Readers take immutable snapshots; all mutation goes through upsert_claim
    and the record_* counters.
    """

    def __init__(self) -> None:
        self._claims: dict[str, Claim] = {}
        self._version = 0

    def __len__(self) -> int:
        return len(self._claims)

    def __contains__(self, claim_id: str) -> bool:
        return claim_id in self._claims

    def ids(self) -> list[str]:
        return sorted(self._claims)

    def get(self, claim_id: str) -> Claim:
        try:
            return self._claims[claim_id]
        except KeyError:
            raise ClaimError(f"unknown claim id: {claim_id!r}") from None

    def upsert_claim(self, claim: Claim) -> int:
        """Insert or replace a claim; returns the new store version.

        A negation_of target must already exist; the reverse link on the
        target is materialized so negation stays symmetric.
        """
        if claim.negation_of is not None and claim.negation_of not in self._claims:
            raise ClaimError(f"unknown negation target: {claim.negation_of!r}")
        self._claims[claim.id] = claim
        if claim.negation_of is not None:
            partner = self._claims[claim.negation_of]
            if partner.negation_of != claim.id:
                self._claims[partner.id] = replace(partner, negation_of=claim.id)
        self._version += 1
        return self._version

    def load_claims(self, claims: Iterable[Claim]) -> int:
        """Bulk insert with deferred link validation (order-independent)."""
        staged = {c.id: c for c in claims}
        for c in staged.values():
            if c.negation_of is not None and c.negation_of not in staged and c.negation_of not in self._claims:
                raise ClaimError(f"unknown negation target: {c.negation_of!r}")
        self._claims.update(staged)
        for c in staged.values():
            if c.negation_of is not None:
                partner = self._claims[c.negation_of]
                if partner.negation_of != c.id:
                    self._claims[partner.id] = replace(partner, negation_of=c.id)
        self._version += 1
        return self._version

    def record_support(self, claim_id: str) -> Claim:
        claim = self.get(claim_id)
        updated = replace(claim, support_count=claim.support_count + 1)
        self._claims[claim_id] = updated
        self._version += 1
        return updated

    def record_contradiction(self, claim_id: str) -> Claim:
        claim = self.get(claim_id)
        updated = replace(claim, contradiction_count=claim.contradiction_count + 1)
        self._claims[claim_id] = updated
        self._version += 1
        return updated

    def snapshot(self) -> ClaimStoreSnapshot:
        return ClaimStoreSnapshot(claims=dict(self._claims), version=self._version)

    def save(self, path) -> None:
        """Write one pipe-delimited record per claim, sorted by id."""
        lines = []
        for cid in sorted(self._claims):
            c = self._claims[cid]
            record = [
                _escape(c.id),
                _escape(c.text),
                repr(c.base_confidence),
                _escape(c.source),
                str(c.support_count),
                str(c.contradiction_count),
                _escape(c.negation_of) if c.negation_of is not None else "",
                repr(c.retrieval_score),
                ",".join(_escape(h) for h in sorted(c.support_set)),
            ]
            lines.append("|".join(record))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines))
            if lines:
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "ClaimStore":
        store = cls()
        claims: list[Claim] = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                parts = _split_record(line, lineno)
                if len(parts) != len(_FIELDS):
                    raise ClaimFileError(
                        f"line {lineno}: expected {len(_FIELDS)} fields, got {len(parts)}"
                    )
                try:
                    claims.append(Claim(
                        id=_unescape(parts[0]),
                        text=_unescape(parts[1]),
                        base_confidence=float(parts[2]),
                        source=_unescape(parts[3]),
                        support_count=int(parts[4]),
                        contradiction_count=int(parts[5]),
                        negation_of=_unescape(parts[6]) if parts[6] else None,
                        retrieval_score=float(parts[7]),
                        support_set=frozenset(
                            _unescape(h) for h in parts[8].split(",") if h
                        ),
                    ))
                except (ValueError, ClaimError) as exc:
                    raise ClaimFileError(f"line {lineno}: {exc}") from exc
        if claims:
            store.load_claims(claims)
        return store


def _split_record(line: str, lineno: int) -> list[str]:
    # Split on unescaped pipes only; '|' inside fields is stored as '\p'.
    parts: list[str] = []
    buf: list[str] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\":
            if i + 1 >= len(line):
                raise ClaimFileError(f"line {lineno}: dangling escape at end of line")
            buf.append(ch)
            buf.append(line[i + 1])
            i += 2
            continue
        if ch == "|":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts
