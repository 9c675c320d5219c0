"""Deterministic synthesis of the claims-only evaluation dataset.

Builds six small tabular sources and 80 templated queries over them. Each
case carries three mutually exclusive answer hypotheses, a 20-claim candidate
pool, and an expected-snippet list for the coverage diagnostic. Pools are
shaped so the highest retrieval scores all go to generic context claims that
support every hypothesis (relevance alone cannot move the posterior), while
five well-provenanced claims discriminate in favor of the true hypothesis.

Contradiction injection adds explicit negation twins on top of a pool; it
never replaces existing claims.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .claims import Claim
from .engine import Hypothesis, HypothesisSpace, eer_proxy, uniform_prior

N_CASES = 80
POOL_SIZE = 20
N_GENERIC = 15
N_DISCRIMINATIVE = 5
N_HYPOTHESES = 3

TABLE_NAMES = ("sales", "customers", "expenses", "inventory", "hr", "marketing")

_REGIONS = ("North", "South", "East", "West")
_QUARTERS = ("2024Q1", "2024Q2", "2024Q3", "2024Q4")
_SEGMENTS = ("Enterprise", "Midmarket", "Consumer")
_DEPARTMENTS = ("R&D", "Operations", "Marketing", "Admin", "Sales")
_PRODUCTS = ("Widget", "Gadget", "Module", "Sensor")
_WAREHOUSES = ("Aurora", "Brook", "Cedar")
_CHANNELS = ("Email", "Social", "Search", "Events")

# Calibration of the synthetic pools. Discriminative claims carry enough
# provenance that their dynamic confidence always exceeds an injected twin's,
# while the margin stays small enough that the smallest tested conflict
# weight (0.01) can still promote a pair-completing twin.
_GENERIC_CONF = (0.50, 0.70)
_GENERIC_SCORE = (0.72, 0.95)
_DISCRIM_CONF = (0.82, 0.90)
_DISCRIM_SUPPORT = (2, 4)
_DISCRIM_SCORE = (0.40, 0.65)
_TWIN_CONF = (0.95, 0.97)


@dataclass(frozen=True)
class SourceTable:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def lookup(self, **filters) -> list[tuple]:
        idx = {c: i for i, c in enumerate(self.columns)}
        out = []
        for row in self.rows:
            if all(row[idx[k]] == v for k, v in filters.items()):
                out.append(row)
        return out

    def value(self, column: str, **filters) -> float:
        rows = self.lookup(**filters)
        if len(rows) != 1:
            raise KeyError(f"{self.name}: filter {filters} matched {len(rows)} rows")
        return rows[0][self.columns.index(column)]


@dataclass
class EvalCase:
    query_id: str
    query_text: str
    hypotheses: list[Hypothesis]
    ground_truth: str
    candidates: list[Claim]
    expected_snippets: list[str]

    def space(self) -> HypothesisSpace:
        return HypothesisSpace(
            hypotheses=list(self.hypotheses),
            support={c.id: c.support_set for c in self.candidates},
        )

    def candidate_ids(self) -> list[str]:
        return [c.id for c in self.candidates]


@dataclass
class Dataset:
    seed: int
    tables: dict[str, SourceTable]
    cases: list[EvalCase]


def _distinct_ints(rng: np.random.Generator, low: int, high: int, n: int) -> list[int]:
    return [int(v) for v in rng.choice(np.arange(low, high), size=n, replace=False)]


def _build_tables(rng: np.random.Generator) -> dict[str, SourceTable]:
    sales_rows = []
    for quarter in _QUARTERS:
        revenue = _distinct_ints(rng, 40_000, 90_000, len(_REGIONS))
        units = _distinct_ints(rng, 2_000, 9_000, len(_REGIONS))
        for region, rev, unit in zip(_REGIONS, revenue, units):
            sales_rows.append((region, quarter, rev, unit))

    customers_rows = []
    for region in _REGIONS:
        counts = _distinct_ints(rng, 120, 4_000, len(_SEGMENTS))
        churn = _distinct_ints(rng, 2, 30, len(_SEGMENTS))
        for segment, count, ch in zip(_SEGMENTS, counts, churn):
            customers_rows.append((segment, region, count, round(ch / 100, 2)))

    expenses_rows = []
    for quarter in _QUARTERS:
        amounts = _distinct_ints(rng, 15_000, 60_000, 4)
        for dept, amount in zip(_DEPARTMENTS[:4], amounts):
            expenses_rows.append((dept, quarter, amount))

    inventory_rows = []
    for product in _PRODUCTS:
        stock = _distinct_ints(rng, 200, 5_000, len(_WAREHOUSES))
        reorder = _distinct_ints(rng, 50, 200, len(_WAREHOUSES))
        for wh, st, re in zip(_WAREHOUSES, stock, reorder):
            inventory_rows.append((wh, product, st, re))

    hr_rows = []
    heads = _distinct_ints(rng, 12, 400, len(_DEPARTMENTS))
    attrition = _distinct_ints(rng, 3, 25, len(_DEPARTMENTS))
    roles = _distinct_ints(rng, 0, 40, len(_DEPARTMENTS))
    for dept, head, attr, role in zip(_DEPARTMENTS, heads, attrition, roles):
        hr_rows.append((dept, head, round(attr / 100, 2), role))

    marketing_rows = []
    for quarter in _QUARTERS:
        spend = _distinct_ints(rng, 5_000, 40_000, len(_CHANNELS))
        leads = _distinct_ints(rng, 100, 3_000, len(_CHANNELS))
        for channel, sp, ld in zip(_CHANNELS, spend, leads):
            marketing_rows.append((channel, quarter, sp, ld))

    return {
        "sales": SourceTable("sales", ("region", "quarter", "revenue", "units"), tuple(sales_rows)),
        "customers": SourceTable("customers", ("segment", "region", "count", "churn_rate"), tuple(customers_rows)),
        "expenses": SourceTable("expenses", ("department", "quarter", "amount"), tuple(expenses_rows)),
        "inventory": SourceTable("inventory", ("warehouse", "product", "stock", "reorder_level"), tuple(inventory_rows)),
        "hr": SourceTable("hr", ("department", "headcount", "attrition_rate", "open_roles"), tuple(hr_rows)),
        "marketing": SourceTable("marketing", ("channel", "quarter", "spend", "leads"), tuple(marketing_rows)),
    }


@dataclass(frozen=True)
class _QuerySpec:
    query_text: str
    metric: str
    period: str
    table: str
    entities: tuple[str, ...]
    values: dict[str, float]
    entity_sources: dict[str, str]
    hypothesis_texts: dict[str, str]


def _pick(rng: np.random.Generator, options: Sequence[str], n: int) -> list[str]:
    return [options[int(i)] for i in rng.choice(len(options), size=n, replace=False)]


def _make_query(rng: np.random.Generator, tables: dict[str, SourceTable], kind: int) -> _QuerySpec:
    if kind == 0:
        quarter = _pick(rng, _QUARTERS, 1)[0]
        entities = _pick(rng, _REGIONS, 3)
        values = {r: tables["sales"].value("revenue", region=r, quarter=quarter) for r in entities}
        return _QuerySpec(
            query_text=f"Which region recorded the highest sales revenue in {quarter}?",
            metric="sales revenue", period=quarter, table="sales",
            entities=tuple(entities), values=values,
            entity_sources={r: "sales" for r in entities},
            hypothesis_texts={r: f"{r} leads sales revenue in {quarter}" for r in entities},
        )
    if kind == 1:
        quarter = _pick(rng, _QUARTERS, 1)[0]
        entities = _pick(rng, _REGIONS, 3)
        values = {r: tables["sales"].value("units", region=r, quarter=quarter) for r in entities}
        return _QuerySpec(
            query_text=f"Which region moved the most units in {quarter}?",
            metric="units sold", period=quarter, table="sales",
            entities=tuple(entities), values=values,
            entity_sources={r: "sales" for r in entities},
            hypothesis_texts={r: f"{r} moved the most units in {quarter}" for r in entities},
        )
    if kind == 2:
        quarter = _pick(rng, _QUARTERS, 1)[0]
        entities = _pick(rng, _DEPARTMENTS[:4], 3)
        values = {d: tables["expenses"].value("amount", department=d, quarter=quarter) for d in entities}
        return _QuerySpec(
            query_text=f"Which department reported the highest expenses in {quarter}?",
            metric="expenses", period=quarter, table="expenses",
            entities=tuple(entities), values=values,
            entity_sources={d: "expenses" for d in entities},
            hypothesis_texts={d: f"{d} has the highest expenses in {quarter}" for d in entities},
        )
    if kind == 3:
        quarter = _pick(rng, _QUARTERS, 1)[0]
        entities = _pick(rng, _CHANNELS, 3)
        values = {c: tables["marketing"].value("leads", channel=c, quarter=quarter) for c in entities}
        return _QuerySpec(
            query_text=f"Which channel produced the most leads in {quarter}?",
            metric="leads", period=quarter, table="marketing",
            entities=tuple(entities), values=values,
            entity_sources={c: "marketing" for c in entities},
            hypothesis_texts={c: f"{c} produced the most leads in {quarter}" for c in entities},
        )
    if kind == 4:
        quarter = _pick(rng, _QUARTERS, 1)[0]
        entities = _pick(rng, _CHANNELS, 3)
        values = {c: tables["marketing"].value("spend", channel=c, quarter=quarter) for c in entities}
        return _QuerySpec(
            query_text=f"Which marketing channel had the highest spend in {quarter}?",
            metric="marketing spend", period=quarter, table="marketing",
            entities=tuple(entities), values=values,
            entity_sources={c: "marketing" for c in entities},
            hypothesis_texts={c: f"{c} has the highest marketing spend in {quarter}" for c in entities},
        )
    if kind == 5:
        product = _pick(rng, _PRODUCTS, 1)[0]
        entities = list(_WAREHOUSES)
        values = {w: tables["inventory"].value("stock", warehouse=w, product=product) for w in entities}
        return _QuerySpec(
            query_text=f"Which warehouse holds the most {product} stock?",
            metric=f"{product} stock", period="2024", table="inventory",
            entities=tuple(entities), values=values,
            entity_sources={w: "inventory" for w in entities},
            hypothesis_texts={w: f"{w} holds the most {product} stock" for w in entities},
        )
    if kind == 6:
        region = _pick(rng, _REGIONS, 1)[0]
        entities = list(_SEGMENTS)
        values = {s: tables["customers"].value("churn_rate", segment=s, region=region) for s in entities}
        return _QuerySpec(
            query_text=f"Which customer segment shows the highest churn rate in the {region} region?",
            metric="churn rate", period=region, table="customers",
            entities=tuple(entities), values=values,
            entity_sources={s: "customers" for s in entities},
            hypothesis_texts={s: f"{s} churns fastest in {region}" for s in entities},
        )
    if kind == 7:
        entities = _pick(rng, _DEPARTMENTS, 3)
        values = {d: tables["hr"].value("attrition_rate", department=d) for d in entities}
        return _QuerySpec(
            query_text="Which department has the highest attrition rate?",
            metric="attrition rate", period="2024", table="hr",
            entities=tuple(entities), values=values,
            entity_sources={d: "hr" for d in entities},
            hypothesis_texts={d: f"{d} has the highest attrition" for d in entities},
        )
    # Cross-table comparison: totals from three different tables.
    quarter = _pick(rng, _QUARTERS, 1)[0]
    totals = {
        "sales revenue": sum(r[2] for r in tables["sales"].lookup(quarter=quarter)),
        "operating expenses": sum(r[2] for r in tables["expenses"].lookup(quarter=quarter)),
        "marketing spend": sum(r[2] for r in tables["marketing"].lookup(quarter=quarter)),
    }
    sources = {"sales revenue": "sales", "operating expenses": "expenses", "marketing spend": "marketing"}
    entities = tuple(totals)
    return _QuerySpec(
        query_text=f"Which total was largest in {quarter}: sales revenue, operating expenses, or marketing spend?",
        metric="quarterly total", period=quarter, table="sales",
        entities=entities, values=dict(totals),
        entity_sources=sources,
        hypothesis_texts={e: f"Total {e} is largest in {quarter}" for e in entities},
    )


_GENERIC_STEMS = (
    "The {table} table reports {metric} figures for fiscal 2024",
    "All four 2024 quarters are covered by the {table} records",
    "Analysts follow {metric} trends through the {table} table",
    "The {metric} ledger spans {e0}, {e1}, and {e2}",
    "Quarter-close snapshots refresh the {table} table",
)
_GENERIC_QUALIFIERS = (
    "per the reporting handbook.",
    "with audited row-level provenance.",
    "under the shared 2024 schema.",
)


def _generic_text(spec: _QuerySpec, i: int) -> str:
    stem = _GENERIC_STEMS[i % len(_GENERIC_STEMS)].format(
        table=spec.table, metric=spec.metric,
        e0=spec.entities[0], e1=spec.entities[1], e2=spec.entities[2],
    )
    return f"{stem} {_GENERIC_QUALIFIERS[(i // len(_GENERIC_STEMS)) % len(_GENERIC_QUALIFIERS)]}"


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


def _discriminative_texts(spec: _QuerySpec, truth: str) -> list[str]:
    others = [e for e in spec.entities if e != truth]
    v = _fmt(spec.values[truth])
    v0 = _fmt(spec.values[others[0]])
    v1 = _fmt(spec.values[others[1]])
    return [
        f"{spec.entity_sources[truth]}: {truth} {spec.metric} for {spec.period} is {v}, the top figure among {', '.join(spec.entities)}.",
        f"{truth} ranks first on {spec.metric} in {spec.period} at {v}.",
        f"Compared with {others[0]} at {v0}, {truth} leads {spec.period} {spec.metric} with {v}.",
        f"Row-level audit confirms {truth} holds the {spec.period} maximum for {spec.metric}.",
        f"{truth} {spec.metric} of {v} exceeds {others[1]} at {v1} for {spec.period}.",
    ]


def _build_case(rng: np.random.Generator, tables: dict[str, SourceTable], index: int) -> EvalCase:
    spec = _make_query(rng, tables, index % 9)
    query_id = f"q{index:02d}"

    order = [int(i) for i in rng.permutation(len(spec.entities))]
    hypotheses = [
        Hypothesis(id=f"{query_id}-h{j}", text=spec.hypothesis_texts[spec.entities[k]])
        for j, k in enumerate(order)
    ]
    entity_to_hyp = {spec.entities[k]: f"{query_id}-h{j}" for j, k in enumerate(order)}
    truth_entity = max(spec.entities, key=lambda e: (spec.values[e], e))
    ground_truth = entity_to_hyp[truth_entity]
    all_hyp_ids = frozenset(h.id for h in hypotheses)

    # Off-table context source keeps retrieval-only source entropy non-trivial.
    other_tables = [t for t in TABLE_NAMES if t not in set(spec.entity_sources.values())]
    off_table = other_tables[index % len(other_tables)]

    candidates: list[Claim] = []
    generic_scores = sorted(
        (float(v) for v in rng.uniform(*_GENERIC_SCORE, size=N_GENERIC)), reverse=True
    )
    for i in range(N_GENERIC):
        source = spec.table if i < N_GENERIC - 1 else off_table
        if len(set(spec.entity_sources.values())) > 1:
            source = sorted(set(spec.entity_sources.values()))[i % 3]
        candidates.append(Claim(
            id=f"{query_id}-g{i:02d}",
            text=_generic_text(spec, i),
            base_confidence=float(rng.uniform(*_GENERIC_CONF)),
            source=source,
            retrieval_score=generic_scores[i],
            support_set=all_hyp_ids,
        ))

    for i, text in enumerate(_discriminative_texts(spec, truth_entity)):
        candidates.append(Claim(
            id=f"{query_id}-d{i}",
            text=text,
            base_confidence=float(rng.uniform(*_DISCRIM_CONF)),
            source=spec.entity_sources[truth_entity],
            support_count=int(rng.integers(_DISCRIM_SUPPORT[0], _DISCRIM_SUPPORT[1] + 1)),
            contradiction_count=0,
            retrieval_score=float(rng.uniform(*_DISCRIM_SCORE)),
            support_set=frozenset({ground_truth}),
        ))

    expected = [f"{query_id}-d{i}" for i in range(N_DISCRIMINATIVE)]
    expected += [f"{query_id}-g{i:02d}" for i in range(3)]

    return EvalCase(
        query_id=query_id,
        query_text=spec.query_text,
        hypotheses=hypotheses,
        ground_truth=ground_truth,
        candidates=candidates,
        expected_snippets=expected,
    )


def generate_dataset(seed: int) -> Dataset:
    """Synthesize the six source tables and all evaluation cases.

    Fully determined by the seed: the same seed yields byte-identical tables,
    queries, and claim pools.
    """
    rng = np.random.default_rng(seed)
    tables = _build_tables(rng)
    cases = [_build_case(rng, tables, i) for i in range(N_CASES)]
    return Dataset(seed=seed, tables=tables, cases=cases)


def twin_count(alpha: float, pool_size: int = POOL_SIZE) -> int:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha out of range: {alpha}")
    return math.ceil(round(alpha * pool_size, 9))


def inject_contradictions(case: EvalCase, alpha: float, seed: int) -> EvalCase:
    """Add ceil(alpha * 20) explicit negation twins to a case's pool.

    Twin targets are the highest-proxy candidates at the uniform prior (ties
    by id). Each twin negates its target, supports the complementary
    hypothesis subset, and gets a confidence comparable to, but strictly
    below, the discriminative claims' dynamic confidence. alpha = 0 is an
    exact identity.
    """
    k = twin_count(alpha, POOL_SIZE)
    if k == 0:
        return case
    if k > len(case.candidates):
        raise ValueError(f"cannot inject {k} twins into a pool of {len(case.candidates)}")

    rng = np.random.default_rng([seed, _case_salt(case.query_id)])
    space = case.space()
    prior = uniform_prior(len(case.hypotheses))
    proxies = {
        c.id: eer_proxy(c.id, space, prior, c.dynamic_confidence) for c in case.candidates
    }
    targets = sorted(case.candidates, key=lambda c: (-proxies[c.id], c.id))[:k]
    target_ids = {c.id for c in targets}
    all_hyp_ids = frozenset(h.id for h in case.hypotheses)

    patched: list[Claim] = []
    twins: list[Claim] = []
    for claim in case.candidates:
        if claim.id in target_ids:
            twin_id = f"{claim.id}-neg"
            patched.append(replace(claim, negation_of=twin_id))
            twins.append(Claim(
                id=twin_id,
                text=f"It is not the case that {claim.text[:1].lower()}{claim.text[1:]}",
                base_confidence=float(rng.uniform(*_TWIN_CONF)),
                source=claim.source,
                support_count=0,
                contradiction_count=0,
                negation_of=claim.id,
                retrieval_score=claim.retrieval_score,
                support_set=all_hyp_ids - claim.support_set,
            ))
        else:
            patched.append(claim)

    return EvalCase(
        query_id=case.query_id,
        query_text=case.query_text,
        hypotheses=list(case.hypotheses),
        ground_truth=case.ground_truth,
        candidates=patched + twins,
        expected_snippets=list(case.expected_snippets),
    )


def _case_salt(query_id: str) -> int:
    return zlib.crc32(query_id.encode("utf-8"))
