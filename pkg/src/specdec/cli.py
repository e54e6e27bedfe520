"""Command-line entry point.

Subcommands:

* ``decode`` — run a single episode and print its verification trace.
* ``bench``  — run the batch for every configured policy and emit a report.
* ``ablate`` — sweep the relaxation thresholds and emit the tokens-per-pass
  and success-rate curve.

Exit codes: 0 on success, 1 when a report identity fails, 2 for argparse
usage errors, 3 for a missing config file, 4 for malformed JSON, 5 for
out-of-range or unknown config values.
"""

from __future__ import annotations

import argparse
import sys

from . import report as report_mod
from .action_space import CHUNK_SIZE, detokenize
from .config import ConfigError, ConfigValueError, RunConfig, parse_config
from .harness import build_models, measure_speedup, run_batch, run_episode, policy_for_r
from .models import PrefixState
from .report import (
    SCHEMA_VERSION,
    AblationReport,
    Report,
    aggregate,
    validate_report,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specdec",
        description="Speculative decoding engine for discretized action tokens.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("decode", "decode one episode and print the step-by-step trace"),
        ("bench", "run seeded episode batches and report acceptance statistics"),
        ("ablate", "sweep relaxation thresholds and report the resulting curve"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (fallback: $SPECDEC_SEED)")
        p.add_argument(
            "--r",
            type=int,
            action="append",
            metavar="INT",
            help="relaxation threshold; repeat to sweep (0 = strict)",
        )
        p.add_argument("--top-k", type=int, dest="top_k", help="draft proposals per node")
        p.add_argument("--depth", type=int, dest="tree_depth", help="draft tree depth")
        p.add_argument("--max-nodes", type=int, dest="max_nodes", help="draft tree node budget")
        p.add_argument("--episodes", type=int, help="episodes per policy")
        p.add_argument("--length", type=int, dest="target_length", help="tokens per episode")
        p.add_argument("--format", choices=("json", "csv", "table"), help="report format")
        p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "r_values": tuple(args.r) if args.r else None,
        "top_k": args.top_k,
        "tree_depth": args.tree_depth,
        "max_nodes": args.max_nodes,
        "episodes": args.episodes,
        "target_length": args.target_length,
        "format": args.format,
        "out": args.out,
    }
    return parse_config(args.config, overrides)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def run_ablation(config: RunConfig) -> AblationReport:
    """Run the batch for every threshold and distill the sweep curve."""
    if len(config.r_values) < 2:
        raise ConfigValueError("ablation needs at least 2 r values to sweep")
    stats = run_batch(config)
    rep = aggregate(stats, config)
    validate_report(rep)
    by_r = {row.r: row for row in rep.policies}
    rows = tuple(
        (r, by_r[r].tokens_per_pass, by_r[r].success_rate) for r in config.r_values
    )
    return AblationReport(schema_version=SCHEMA_VERSION, config=config.to_json_dict(), rows=rows)


def _cmd_decode(config: RunConfig) -> int:
    verifier, draft = build_models(config)
    policy = policy_for_r(config.r_values[0], config.per_dimension_r)
    stats = run_episode(
        verifier,
        draft,
        config.tree_params(),
        policy,
        PrefixState(prompt_id="ep000000", observation_id="obs000000"),
        config.target_length,
        config.success_tolerance,
    )

    lines = [
        f"policy: {policy.mode}"
        + (f" (r={policy.r})" if policy.mode == "relaxed" else "")
        + f", length: {config.target_length}, seed: {config.seed}"
    ]
    position = 0
    emitted: list[int] = []
    for step, outcome in enumerate(stats.outcomes, start=1):
        drafted = list(outcome.emitted[: outcome.accepted])
        tail = outcome.emitted[-1]
        tail_kind = "bonus" if outcome.bonus_used else "correction"
        lines.append(
            f"step {step:>3}: pos {position:>4}  accepted {outcome.accepted} {drafted}"
            f"  {tail_kind} {tail}"
        )
        position += len(outcome.emitted)
        emitted.extend(outcome.emitted)
    emitted = emitted[: config.target_length]

    lines.append(f"tokens: {emitted}")
    for start in range(0, len(emitted), CHUNK_SIZE):
        chunk = emitted[start : start + CHUNK_SIZE]
        if len(chunk) < CHUNK_SIZE:
            break
        values = detokenize(chunk, config.dimension_bounds, config.vocab_size)
        rendered = ", ".join(f"{v:+.5f}" for v in values)
        lines.append(f"action {start // CHUNK_SIZE}: [{rendered}]")
    lines.append(
        f"steps: {stats.steps}, tokens/pass: {stats.tokens_per_pass:.4f}, "
        f"success(tol={config.success_tolerance}): {stats.success}"
    )
    _emit("\n".join(lines) + "\n", config.out)
    return 0


def _render_report(report: Report, fmt: str) -> str:
    if fmt == "json":
        return report_mod.render_json(report)
    if fmt == "csv":
        return report_mod.render_csv(report)
    return report_mod.render_table(report)


def _cmd_bench(config: RunConfig) -> int:
    stats = run_batch(config)
    measurements = {}
    if config.measure_speedup and config.cost_model() is not None:
        for r in config.r_values:
            measurements[r] = measure_speedup(config, r)
    rep = aggregate(stats, config, measurements)
    try:
        validate_report(rep)
    except ValueError as exc:
        sys.stderr.write(f"report identity check failed: {exc}\n")
        return 1
    _emit(_render_report(rep, config.format), config.out)
    return 0


def _cmd_ablate(config: RunConfig) -> int:
    rep = run_ablation(config)
    if config.format == "json":
        text = report_mod.render_ablation_json(rep)
    elif config.format == "csv":
        text = report_mod.render_ablation_csv(rep)
    else:
        text = report_mod.render_ablation_table(rep)
    _emit(text, config.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "decode":
            return _cmd_decode(config)
        if args.command == "bench":
            return _cmd_bench(config)
        return _cmd_ablate(config)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
