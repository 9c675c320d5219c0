"""Dataset persistence and report emission.

Everything written here is deterministic: fixed file ordering, sorted JSON
keys, repr-precision floats, no timestamps. Two runs with the same config
produce byte-identical files, which the acceptance suite checks.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

from .claims import ClaimStore
from .dataset import Dataset, EvalCase, SourceTable
from .engine import Hypothesis
from .harness import (
    AblationCell,
    CaseResult,
    MetricsReport,
    MultiseedReport,
    METRIC_NAMES,
    per_case_metrics,
    trigger_decision,
)

DATASET_DIRNAME = "dataset"
REPORTS_DIRNAME = "reports"
CASES_FILENAME = "cases.json"
CLAIMS_FILENAME = "claims.txt"


# ---------------------------------------------------------------------------
# Dataset files


def write_dataset(dataset: Dataset, out_dir: Path) -> Path:
    """Write six table CSVs, the cases file, and the claims file."""
    dataset_dir = Path(out_dir) / DATASET_DIRNAME
    dataset_dir.mkdir(parents=True, exist_ok=True)

    for name in sorted(dataset.tables):
        table = dataset.tables[name]
        with open(dataset_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            writer.writerows(table.rows)

    store = ClaimStore()
    for case in dataset.cases:
        store.load_claims(case.candidates)
    store.save(dataset_dir / CLAIMS_FILENAME)

    payload = {
        "seed": dataset.seed,
        "cases": [
            {
                "query_id": case.query_id,
                "query_text": case.query_text,
                "hypotheses": [{"id": h.id, "text": h.text} for h in case.hypotheses],
                "ground_truth": case.ground_truth,
                "candidate_ids": case.candidate_ids(),
                "expected_snippets": list(case.expected_snippets),
            }
            for case in dataset.cases
        ],
    }
    _write_json(dataset_dir / CASES_FILENAME, payload)
    return dataset_dir


def load_dataset(out_dir: Path) -> Dataset:
    dataset_dir = Path(out_dir) / DATASET_DIRNAME
    cases_path = dataset_dir / CASES_FILENAME
    claims_path = dataset_dir / CLAIMS_FILENAME
    if not cases_path.exists() or not claims_path.exists():
        raise FileNotFoundError(f"no dataset found under {dataset_dir}")

    store = ClaimStore.load(claims_path)
    with open(cases_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)

    tables = {}
    for csv_path in sorted(dataset_dir.glob("*.csv")):
        with open(csv_path, "r", newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        tables[csv_path.stem] = SourceTable(
            name=csv_path.stem,
            columns=tuple(rows[0]),
            rows=tuple(tuple(_coerce(v) for v in row) for row in rows[1:]),
        )

    cases = []
    for entry in payload["cases"]:
        cases.append(EvalCase(
            query_id=entry["query_id"],
            query_text=entry["query_text"],
            hypotheses=[Hypothesis(h["id"], h["text"]) for h in entry["hypotheses"]],
            ground_truth=entry["ground_truth"],
            candidates=[store.get(cid) for cid in entry["candidate_ids"]],
            expected_snippets=list(entry["expected_snippets"]),
        ))
    return Dataset(seed=payload["seed"], tables=tables, cases=cases)


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def dataset_digest(out_dir: Path) -> str:
    """Stable content hash over every dataset file, for reproducibility checks."""
    dataset_dir = Path(out_dir) / DATASET_DIRNAME
    digest = hashlib.sha256()
    for path in sorted(dataset_dir.iterdir()):
        if path.is_file():
            digest.update(path.name.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(path.read_bytes())
            digest.update(b"\x00")
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Report files


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def write_case_reports(
    path: Path,
    results: Sequence[CaseResult],
    cases: Sequence[EvalCase],
    seed: int,
    dim: int = 256,
) -> None:
    """One JSON object per (case, policy) run, one per line."""
    by_id = {case.query_id: case for case in cases}
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            case = by_id[result.query_id]
            decision = trigger_decision(case)
            record = {
                "query_id": result.query_id,
                "policy": result.policy,
                "seed": seed,
                "claims_evaluated": result.claims_evaluated,
                "entropy_trace": result.entropy_trace,
                "final_entropy": result.final_entropy,
                "collapse_step": result.collapse_step,
                "dominant": result.dominant,
                "ground_truth": case.ground_truth,
                "stop_reason": result.stop_reason,
                "selected_claim_ids": result.selected_claim_ids,
                "metrics": per_case_metrics(result, case, dim),
                "ecr_trigger": {"trigger": decision.trigger, "reasons": list(decision.reasons)},
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def write_summary_csv(path: Path, report: MetricsReport) -> None:
    header = ["policy", "n_cases"]
    for name in METRIC_NAMES:
        header += [f"{name}_mean", f"{name}_std"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for agg in report.aggregates:
            row: list = [agg.policy, agg.n_cases]
            for name in METRIC_NAMES:
                mean, std = agg.stats[name]
                row += [repr(mean), repr(std)]
            writer.writerow(row)


def write_multiseed_csv(path: Path, report: MultiseedReport) -> None:
    header = ["policy", "seeds"]
    for name in METRIC_NAMES:
        header += [f"{name}_mean", f"{name}_std"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for policy, stats in report.stats.items():
            row: list = [policy, ";".join(str(s) for s in report.seeds)]
            for name in METRIC_NAMES:
                mean, std = stats[name]
                row += [repr(mean), repr(std)]
            writer.writerow(row)


def _stop_reasons_str(counts: dict[str, int]) -> str:
    return ";".join(f"{reason}:{count}" for reason, count in sorted(counts.items()))


def write_ablation_csv(path: Path, cells: Sequence[AblationCell]) -> None:
    header = ["method", "alpha", "lambda", "n_cases", "mean_claims", "mean_h",
              "amb_exp", "overconf_err", "stop_reason"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for cell in cells:
            writer.writerow([
                cell.method, repr(cell.alpha), repr(cell.conflict_weight), cell.n_cases,
                repr(cell.mean_claims), repr(cell.mean_h),
                repr(cell.ambiguity_exposure), repr(cell.overconfident_error),
                _stop_reasons_str(cell.stop_reason_counts),
            ])


def write_entropy_trace_plotdata(
    path: Path, results: Sequence[CaseResult]
) -> None:
    """Mean entropy per step for one policy: (step, mean_h) series."""
    max_len = max(len(r.entropy_trace) for r in results)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "mean_h", "n_traces"])
        for step in range(max_len):
            values = [r.entropy_trace[step] for r in results if len(r.entropy_trace) > step]
            writer.writerow([step, repr(sum(values) / len(values)), len(values)])


def write_sweep_plotdata(path: Path, cells: Sequence[AblationCell]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "alpha", "amb_exp"])
        for cell in cells:
            writer.writerow([repr(cell.conflict_weight), repr(cell.alpha), repr(cell.ambiguity_exposure)])


# ---------------------------------------------------------------------------
# Rendered text tables


_TABLE_COLUMNS = (
    ("claims", "Claims"),
    ("h_final", "H_final"),
    ("dh_per_claim", "dH/claim"),
    ("collapse", "Collapse"),
    ("eff_hyp", "2^H"),
    ("redundancy", "Redund."),
    ("hyp_cond_red", "HypCondRed."),
    ("src_ent", "SrcEnt"),
    ("coverage", "Coverage"),
)


def render_summary_table(report: MetricsReport) -> str:
    lines = []
    header = ["Policy".ljust(16)] + [label.rjust(16) for _, label in _TABLE_COLUMNS]
    lines.append(" ".join(header))
    lines.append("-" * len(lines[0]))
    for agg in report.aggregates:
        cells = [agg.policy.ljust(16)]
        for name, _ in _TABLE_COLUMNS:
            mean, std = agg.stats[name]
            cells.append(f"{mean:.4f}±{std:.4f}".rjust(16))
        lines.append(" ".join(cells))
    return "\n".join(lines)


def render_multiseed_table(report: MultiseedReport) -> str:
    lines = []
    header = ["Policy".ljust(16)] + [label.rjust(16) for _, label in _TABLE_COLUMNS]
    lines.append(" ".join(header))
    lines.append("-" * len(lines[0]))
    for policy, stats in report.stats.items():
        cells = [policy.ljust(16)]
        for name, _ in _TABLE_COLUMNS:
            mean, std = stats[name]
            cells.append(f"{mean:.4f}±{std:.4f}".rjust(16))
        lines.append(" ".join(cells))
    return "\n".join(lines)


def render_ablation_table(cells: Sequence[AblationCell]) -> str:
    lines = []
    header = (
        "Method".ljust(10) + "alpha".rjust(7) + "lambda".rjust(8) + "Claims".rjust(9)
        + "MeanH".rjust(9) + "AmbExp".rjust(9) + "OverconfErr".rjust(13) + "  StopReason"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for cell in cells:
        lines.append(
            cell.method.ljust(10)
            + f"{cell.alpha:.2f}".rjust(7)
            + f"{cell.conflict_weight:.3f}".rjust(8)
            + f"{cell.mean_claims:.2f}".rjust(9)
            + f"{cell.mean_h:.4f}".rjust(9)
            + f"{cell.ambiguity_exposure:.4f}".rjust(9)
            + f"{cell.overconfident_error:.4f}".rjust(13)
            + "  " + _stop_reasons_str(cell.stop_reason_counts)
        )
    return "\n".join(lines)


def render_sweep_table(cells: Sequence[AblationCell]) -> str:
    alphas = sorted({cell.alpha for cell in cells})
    weights = sorted({cell.conflict_weight for cell in cells})
    by_key = {(c.conflict_weight, c.alpha): c for c in cells}
    lines = []
    header = "lambda".rjust(8)
    for alpha in alphas:
        header += f"claims(a={alpha:g})".rjust(15) + f"meanH(a={alpha:g})".rjust(15)
    lines.append(header)
    lines.append("-" * len(header))
    for weight in weights:
        row = f"{weight:.3f}".rjust(8)
        for alpha in alphas:
            cell = by_key[(weight, alpha)]
            row += f"{cell.mean_claims:.2f}".rjust(15) + f"{cell.mean_h:.4f}".rjust(15)
        lines.append(row)
    return "\n".join(lines)
