"""Command-line entry point.

Subcommands: generate, eval, ablate, sweep, sanity. Configuration comes from
built-in defaults, then an optional key=value config file, then flags (flags
win). Every command is deterministic given (config, seed); exit codes are
0 on success, 1 on a sanity or invariance failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .engine import ECRConfig
from .harness import (
    ALL_POLICIES,
    conflict_sanity_test,
    evaluate_policies,
    run_contradiction_ablation,
    run_lambda_sweep,
    run_multiseed,
)
from .reports import (
    REPORTS_DIRNAME,
    dataset_digest,
    load_dataset,
    render_ablation_table,
    render_multiseed_table,
    render_summary_table,
    render_sweep_table,
    write_ablation_csv,
    write_case_reports,
    write_dataset,
    write_entropy_trace_plotdata,
    write_multiseed_csv,
    write_summary_csv,
    write_sweep_plotdata,
)
from .dataset import generate_dataset
from .retrieval import (
    AMBIGUITY_KEYWORDS,
    CLAIM_VOLUME_THRESHOLD,
    CONFIDENCE_VARIANCE_THRESHOLD,
    DEFAULT_DIM,
    DEFAULT_STRATEGY_WEIGHTS,
    RRF_K,
)


class ConfigError(ValueError):
    """Bad config file or flag values; maps to exit code 2."""


@dataclass
class RunConfig:
    epsilon: float = 0.3
    conflict_weight: float = 0.05
    max_iterations: int = 10
    beta_support: float = 0.7
    beta_nonsupport: float = 0.3
    embedding_dim: int = DEFAULT_DIM
    strategy_weights: tuple[float, float, float] = DEFAULT_STRATEGY_WEIGHTS
    trigger_volume: int = CLAIM_VOLUME_THRESHOLD
    trigger_variance: float = CONFIDENCE_VARIANCE_THRESHOLD
    trigger_keywords: tuple[str, ...] = AMBIGUITY_KEYWORDS
    rrf_k: int = RRF_K
    seed: int = 7
    # non-empty switches eval into multiseed mode (e.g. 0,1,2,3,4)
    seeds: tuple[int, ...] = ()
    alphas: tuple[float, ...] = (0.0, 0.3, 0.5)
    conflict_weight_grid: tuple[float, ...] = (0.0, 0.01, 0.025, 0.05, 0.1)
    policies: tuple[str, ...] = ALL_POLICIES
    out: str = "ecr_out"
    workers: int = 1
    emit_plotdata: bool = False

    def validate(self) -> None:
        if not 0.0 < self.epsilon < 1.584:
            raise ConfigError(f"epsilon must be in (0, log2(3)), got {self.epsilon}")
        if self.conflict_weight < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.conflict_weight}")
        if self.max_iterations <= 0:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations}")
        if not 0.0 < self.beta_nonsupport < self.beta_support < 1.0:
            raise ConfigError("need 0 < beta_nonsupport < beta_support < 1")
        if self.embedding_dim < 8:
            raise ConfigError(f"embedding_dim must be >= 8, got {self.embedding_dim}")
        if abs(sum(self.strategy_weights) - 1.0) > 1e-9:
            raise ConfigError("strategy_weights must sum to 1")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ConfigError(f"alphas must lie in [0,1], got {self.alphas}")
        if any(w < 0 for w in self.conflict_weight_grid):
            raise ConfigError("lambda grid values must be >= 0")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        unknown = set(self.policies) - set(ALL_POLICIES)
        if unknown:
            raise ConfigError(f"unknown policies: {sorted(unknown)}")

    def engine_config(self) -> ECRConfig:
        return ECRConfig(
            epsilon=self.epsilon,
            max_iterations=self.max_iterations,
            conflict_weight=self.conflict_weight,
            beta_support=self.beta_support,
            beta_nonsupport=self.beta_nonsupport,
        )


_LIST_FIELDS = {
    "seeds": int,
    "alphas": float,
    "conflict_weight_grid": float,
    "strategy_weights": float,
    "trigger_keywords": str,
    "policies": str,
}
_SCALAR_FIELDS = {
    "epsilon": float,
    "conflict_weight": float,
    "max_iterations": int,
    "beta_support": float,
    "beta_nonsupport": float,
    "embedding_dim": int,
    "trigger_volume": int,
    "trigger_variance": float,
    "rrf_k": int,
    "seed": int,
    "out": str,
    "workers": int,
    "emit_plotdata": lambda v: v.lower() in ("1", "true", "yes"),
}
_KEY_ALIASES = {"lambda": "conflict_weight", "lambda_grid": "conflict_weight_grid"}


def parse_config_file(path: Path) -> dict:
    """Parse a plain key=value file ('#' starts a comment)."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = _KEY_ALIASES.get(key.strip(), key.strip())
            value = value.strip()
            if key in _LIST_FIELDS:
                cast = _LIST_FIELDS[key]
                try:
                    values[key] = tuple(cast(v.strip()) for v in value.split(",") if v.strip())
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            elif key in _SCALAR_FIELDS:
                try:
                    values[key] = _SCALAR_FIELDS[key](value)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            else:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(Path(args.config)))
    if args.seed is not None:
        values["seed"] = args.seed
    if args.seeds is not None:
        values["seeds"] = tuple(int(v) for v in args.seeds.split(",") if v.strip())
    if args.epsilon is not None:
        values["epsilon"] = args.epsilon
    if getattr(args, "conflict_weight", None) is not None:
        values["conflict_weight"] = args.conflict_weight
    if getattr(args, "alpha", None) is not None:
        values["alphas"] = tuple(float(v) for v in args.alpha.split(",") if v.strip())
    if getattr(args, "policies", None) is not None:
        requested = args.policies
        values["policies"] = ALL_POLICIES if requested == "all" else tuple(
            p.strip() for p in requested.split(",") if p.strip()
        )
    if args.out is not None:
        values["out"] = args.out
    if getattr(args, "emit_plotdata", False):
        values["emit_plotdata"] = True
    known = {f.name for f in fields(RunConfig)}
    config = replace(RunConfig(), **{k: v for k, v in values.items() if k in known})
    config.validate()
    return config


def _reports_dir(config: RunConfig) -> Path:
    path = Path(config.out) / REPORTS_DIRNAME
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(config: RunConfig) -> int:
    dataset = generate_dataset(config.seed)
    out = Path(config.out)
    try:
        dataset_dir = write_dataset(dataset, out)
    except OSError as exc:
        print(f"error: cannot write dataset: {exc}", file=sys.stderr)
        return 2
    digest = dataset_digest(out)
    print(f"dataset: {dataset_dir}")
    print(f"cases: {len(dataset.cases)}  tables: {len(dataset.tables)}  seed: {dataset.seed}")
    print(f"digest: {digest}")
    return 0


def _load_cases(config: RunConfig):
    try:
        return load_dataset(Path(config.out))
    except FileNotFoundError as exc:
        raise ConfigError(f"{exc}; run `ecr generate` first") from exc


def cmd_eval(config: RunConfig) -> int:
    dataset = _load_cases(config)
    engine_cfg = config.engine_config()
    reports = _reports_dir(config)

    if len(config.seeds) > 1:
        try:
            report = run_multiseed(
                dataset.cases, config.seeds, config.policies, engine_cfg,
                workers=config.workers, dim=config.embedding_dim,
            )
        except RuntimeError as exc:
            print(f"seed-invariance violation: {exc}", file=sys.stderr)
            return 1
        write_multiseed_csv(reports / "summary_multiseed.csv", report)
        print(render_multiseed_table(report))
        print(f"\nwrote {reports / 'summary_multiseed.csv'}")
        return 0

    seed = config.seeds[0] if config.seeds else config.seed
    results, report = evaluate_policies(
        dataset.cases, config.policies, seed, engine_cfg,
        workers=config.workers, dim=config.embedding_dim,
    )
    write_case_reports(reports / "cases.jsonl", results, dataset.cases, seed, config.embedding_dim)
    write_summary_csv(reports / "summary.csv", report)
    if config.emit_plotdata:
        for policy in config.policies:
            policy_results = [r for r in results if r.policy == policy]
            write_entropy_trace_plotdata(reports / f"plot_entropy_{policy}.csv", policy_results)
    print(render_summary_table(report))
    print(f"\nwrote {reports / 'cases.jsonl'} and {reports / 'summary.csv'}")
    return 0


def cmd_ablate(config: RunConfig) -> int:
    dataset = _load_cases(config)
    cells = run_contradiction_ablation(
        dataset.cases, config.alphas, config.conflict_weight, config.seed,
        config.engine_config(), workers=config.workers,
    )
    reports = _reports_dir(config)
    write_ablation_csv(reports / "ablation.csv", cells)
    print(render_ablation_table(cells))
    print(f"\nwrote {reports / 'ablation.csv'}")
    return 0


def cmd_sweep(config: RunConfig) -> int:
    dataset = _load_cases(config)
    cells = run_lambda_sweep(
        dataset.cases, config.conflict_weight_grid, config.alphas, config.seed,
        config.engine_config(), workers=config.workers,
    )
    reports = _reports_dir(config)
    write_ablation_csv(reports / "sweep.csv", cells)
    if config.emit_plotdata:
        write_sweep_plotdata(reports / "plot_lambda_sweep.csv", cells)
    print(render_sweep_table(cells))
    print(f"\nwrote {reports / 'sweep.csv'}")
    return 0


def cmd_sanity(config: RunConfig) -> int:
    passed = conflict_sanity_test(config.engine_config())
    print("conflict sanity test:", "PASS" if passed else "FAIL")
    return 0 if passed else 1


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--seed", type=int, default=None, help="run seed")
    parser.add_argument("--seeds", default=None, help="comma-separated seeds (eval: multiseed mode)")
    parser.add_argument("--epsilon", type=float, default=None, help="stopping threshold in bits")
    parser.add_argument("--lambda", dest="conflict_weight", type=float, default=None,
                        help="conflict bonus weight")
    parser.add_argument("--out", default=None, help="workspace directory (dataset + reports)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecr",
        description="Entropy-guided claim resolution harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="synthesize the evaluation dataset")
    _add_common_flags(p_gen)

    p_eval = sub.add_parser("eval", help="run selection policies over the dataset")
    _add_common_flags(p_eval)
    p_eval.add_argument("--policies", default=None,
                        help="'all' or comma-separated subset of: " + ",".join(ALL_POLICIES))
    p_eval.add_argument("--emit-plotdata", action="store_true", help="write (x,y) series for plots")

    p_abl = sub.add_parser("ablate", help="contradiction-injection ablation")
    _add_common_flags(p_abl)
    p_abl.add_argument("--alpha", default=None, help="comma-separated injection rates")

    p_sweep = sub.add_parser("sweep", help="conflict-weight sweep over the injection grid")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--alpha", default=None, help="comma-separated injection rates")
    p_sweep.add_argument("--emit-plotdata", action="store_true", help="write (x,y) series for plots")

    p_san = sub.add_parser("sanity", help="minimal contradiction-pair check; exit 0 iff it passes")
    _add_common_flags(p_san)

    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "sanity": cmd_sanity,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
