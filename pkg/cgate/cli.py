#!/usr/bin/env python
"""
cgate command-line tool: generate telemetry, train gates, calibrate, evaluate and serve.

Every command prints its result on stdout. Failures print one ``<code>: <details>``
line on stderr and exit with status 1.
"""

import argparse
import asyncio
import json
import sys
from collections.abc import Sequence
from typing import NoReturn
from dataclasses import asdict
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel

from .calibrate import (
    DEFAULT_GRID,
    DEFAULT_TARGETS,
    HardRules,
    PolicyProvenance,
    calibrate_policy,
    load_sweep,
    save_policy,
    save_sweep,
    sweep_joint,
)
from .config import ServeConfig, create_gate_from_config, load_policy, load_serve_config, load_world_config
from .errors.error_formatting import format_error_line
from .evaluation import (
    DEFAULT_METRICS,
    ab_compare,
    curve_scored,
    export_curve,
    load_curve,
    plot_curve,
    replay,
    save_ab_report,
)
from .evaluation.metrics import check_provenance
from .events import dataset_stats, load_dataset, save_dataset, split_by_user, validate_dataset_dir
from .exceptions import ConfigurationError
from .gbdt import TrainConfig
from .gbdt import save as save_ensemble
from .hybrid import HybridConfig, save_hybrid
from .logging import Logger, logger
from .scoring import Scorer, artifact_digest, load_model, score_dataset
from .serve import DEFAULT_HOST, DEFAULT_PORT, GateServer, bench
from .synthgen import default_world, generate, generate_closed_loop
from .training import evaluate_task, train_hybrid_task, train_task

LOOP_REPORT_FILE = "closed_loop.json"


def _emit(payload: BaseModel | dict | list) -> None:
    if isinstance(payload, BaseModel):
        print(payload.model_dump_json(indent=2))
    else:
        print(json.dumps(payload, indent=2))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _models(args) -> tuple[Scorer | None, Scorer | None]:
    trigger = load_model(args.trigger_model) if args.trigger_model else None
    filter = load_model(args.filter_model) if args.filter_model else None
    return trigger, filter


def _provenance(args) -> PolicyProvenance:
    return PolicyProvenance(
        trigger_model=artifact_digest(args.trigger_model) if args.trigger_model else None,
        filter_model=artifact_digest(args.filter_model) if args.filter_model else None,
    )


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trigger-model", help="trigger model artifact (absent: every opportunity generates)")
    parser.add_argument("--filter-model", help="filter model artifact (absent: every generation is shown)")


# ============= DATA =============


def cmd_gen(args) -> int:
    config = load_world_config(args.config, seed=args.seed) if args.config else default_world(seed=args.seed or 0)
    if args.users is not None:
        config = config.model_copy(update={"user_count": args.users})
    if not args.closed_loop:
        dataset = generate(config)
        save_dataset(dataset, args.out)
        _emit(dataset.manifest)
        return 0

    policy = load_policy(args.policy) if args.policy else None
    if policy is None:
        raise ConfigurationError("--closed-loop needs --policy")
    trigger, filter = _models(args)
    result = generate_closed_loop(config, policy, trigger, filter)
    out = save_dataset(result.dataset, args.out)
    users = [asdict(u) | {"rocc": u.rocc} for u in result.users]
    summary = {
        "opportunities": result.opportunities,
        "generations": result.generations,
        "blocked": result.blocked,
        "block_rate": result.block_rate,
        "symbols_completed": result.symbols_completed,
        "rocc": result.rocc,
    }
    (out / LOOP_REPORT_FILE).write_text(json.dumps(summary | {"users": users}, indent=2) + "\n", encoding="utf-8")
    _emit(summary)
    return 0


def cmd_split(args) -> int:
    train, test = split_by_user(load_dataset(args.data), args.test_fraction, args.seed or 0)
    save_dataset(train, args.train_out)
    save_dataset(test, args.test_out)
    _emit({"train": train.manifest.model_dump(mode="json"), "test": test.manifest.model_dump(mode="json")})
    return 0


def cmd_validate(args) -> int:
    report = validate_dataset_dir(args.data)
    _emit(report)
    if not report.ok:
        print(f"invalid_dataset: {len(report.violations)} violation(s) of kinds {report.kinds()}", file=sys.stderr)
        return 1
    return 0


def cmd_stats(args) -> int:
    dataset = load_dataset(args.data)
    manifest = dataset.manifest
    _emit(
        dataset_stats(
            dataset.events,
            dataset.generations,
            schema_hash=manifest.schema_hash if manifest else "",
            split=manifest.split if manifest else "full",
            collection_policy=manifest.collection_policy if manifest else "gates_off",
            generator=manifest.generator if manifest else None,
        )
    )
    return 0


# ============= TRAINING =============


def _report_training(model: Scorer, args) -> None:
    if args.eval:
        _emit(evaluate_task(model, load_dataset(args.eval), args.task))


def cmd_train(args) -> int:
    config = TrainConfig(
        trees=args.trees,
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        positive_class_weight=args.positive_class_weight,
        seed=args.seed or 0,
    )
    model = train_task(load_dataset(args.data), args.task, config)
    save_ensemble(model, args.out)
    logger.info(f"Wrote {args.task} ensemble to {args.out}")
    _report_training(model, args)
    return 0


def cmd_train_hybrid(args) -> int:
    config = HybridConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed or 0)
    model = train_hybrid_task(load_dataset(args.data), args.task, config)
    save_hybrid(model, args.out)
    logger.info(f"Wrote hybrid {args.task} model to {args.out}")
    _report_training(model, args)
    return 0


# ============= CALIBRATION AND EVALUATION =============


def _scored(args):
    dataset = load_dataset(args.data)
    check_provenance(dataset)
    trigger, filter = _models(args)
    return score_dataset(dataset, trigger, filter)


def cmd_calibrate(args) -> int:
    policy = calibrate_policy(
        _scored(args),
        args.fnr,
        args.grid_pct,
        HardRules(block_non_compilable=args.block_non_compilable),
        _provenance(args),
    )
    save_policy(policy, args.out)
    _emit(policy)
    return 0


def cmd_sweep(args) -> int:
    scored = _scored(args)
    rules = HardRules(block_non_compilable=args.block_non_compilable)
    provenance = _provenance(args)
    points = []
    for target in args.fnr:
        points.extend(sweep_joint(scored, target, args.grid, rules, provenance))
    save_sweep(points, args.out)
    _emit([{"target_fnr": p.target_fnr, "grid_pct": p.grid_pct, "feasible": p.feasible} for p in points])
    return 0


def cmd_replay(args) -> int:
    trigger, filter = _models(args)
    _emit(replay(load_dataset(args.data), load_policy(args.policy), trigger, filter))
    return 0


def cmd_curve(args) -> int:
    scored = _scored(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for target, points in load_sweep(args.sweep).items():
        path = export_curve(curve_scored(scored, points), out_dir / f"curve_fnr{target:g}.tsv")
        written.append(str(path))
    _emit({"curves": written})
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out) if args.out else Path(args.curve).with_suffix(".svg")
    _emit({"plot": str(plot_curve(load_curve(args.curve), out))})
    return 0


def cmd_ab(args) -> int:
    results = ab_compare(
        load_dataset(args.arm_a),
        load_dataset(args.arm_b),
        metrics=args.metrics or DEFAULT_METRICS,
        resamples=args.resamples,
        seed=args.seed or 0,
        pooled=args.pooled,
    )
    save_ab_report(results, args.out)
    _emit([r.model_dump(mode="json") for r in results])
    return 0


# ============= SERVING =============


async def _serve(args) -> None:
    if args.config:
        config = load_serve_config(args.config)
    else:
        config = ServeConfig(
            trigger_model=args.trigger_model,
            filter_model=args.filter_model,
            policy=args.policy,
            host=args.host,
            port=args.port,
        )
    server = GateServer(create_gate_from_config(config), config.host, config.port)
    try:
        await server.serve_forever()
    finally:
        await server.stop()


def cmd_serve(args) -> int:
    if not args.config and not args.policy:
        raise ConfigurationError("serve needs --config or --policy")
    try:
        asyncio.run(_serve(args))
    except KeyboardInterrupt:
        logger.info("Interrupted")
    return 0


def cmd_bench(args) -> int:
    report = asyncio.run(bench(args.host, args.port, args.requests, args.concurrency, args.seed or 0))
    _emit(report)
    return 1 if report.errors else 0


# ============= MAIN =============


class CommandParser(argparse.ArgumentParser):
    """Usage errors raise ConfigurationError, so they surface as one ``config:`` line."""

    def error(self, message: str) -> NoReturn:
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(prog="cgate", description="Trigger and filter gates for code completion")
    parser.add_argument("--seed", type=int, default=None, help="seed for every randomized step")
    # no default on the subcommand, so an absent --seed keeps the global value
    seed_option = argparse.ArgumentParser(add_help=False)
    seed_option.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed, overriding the global --seed")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v for info, -vv for debug logs")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = commands.add_parser("gen", help="generate synthetic telemetry", parents=[seed_option])
    p.add_argument("--config", help="world.json (default: the built-in world)")
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.add_argument("--users", type=int, help="override the number of simulated users")
    p.add_argument("--closed-loop", action="store_true", help="run --policy inside the simulation")
    p.add_argument("--policy", help="policy.json for --closed-loop")
    _add_model_args(p)
    p.set_defaults(handler=cmd_gen)

    p = commands.add_parser("split", help="split a dataset by user", parents=[seed_option])
    p.add_argument("data")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.set_defaults(handler=cmd_split)

    p = commands.add_parser("validate", help="check a dataset against its manifest and schema", parents=[seed_option])
    p.add_argument("data")
    p.set_defaults(handler=cmd_validate)

    p = commands.add_parser("stats", help="recompute a dataset's manifest", parents=[seed_option])
    p.add_argument("data")
    p.set_defaults(handler=cmd_stats)

    defaults = TrainConfig()
    p = commands.add_parser("train", help="train a boosted-tree gate", parents=[seed_option])
    p.add_argument("data")
    p.add_argument("--task", choices=["trigger", "filter"], default="trigger")
    p.add_argument("--out", required=True)
    p.add_argument("--eval", help="dataset to report ROC AUC on")
    p.add_argument("--trees", type=int, default=defaults.trees)
    p.add_argument("--max-depth", type=int, default=defaults.max_depth)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--positive-class-weight", type=float, default=defaults.positive_class_weight)
    p.set_defaults(handler=cmd_train)

    hybrid_defaults = HybridConfig()
    p = commands.add_parser("train-hybrid", help="train a context + tabular gate", parents=[seed_option])
    p.add_argument("data")
    p.add_argument("--task", choices=["trigger", "filter"], default="trigger")
    p.add_argument("--out", required=True)
    p.add_argument("--eval", help="dataset to report ROC AUC on")
    p.add_argument("--epochs", type=int, default=hybrid_defaults.epochs)
    p.add_argument("--batch-size", type=int, default=hybrid_defaults.batch_size)
    p.set_defaults(handler=cmd_train_hybrid)

    p = commands.add_parser("calibrate", help="calibrate one policy at a target FNR", parents=[seed_option])
    p.add_argument("data")
    _add_model_args(p)
    p.add_argument("--fnr", type=float, required=True)
    p.add_argument("--grid-pct", type=float, default=0.0, help="share of generations the trigger blocks")
    p.add_argument("--block-non-compilable", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_calibrate)

    p = commands.add_parser(
        "sweep", help="calibrate policies over a grid of trigger block rates", parents=[seed_option]
    )
    p.add_argument("data")
    _add_model_args(p)
    p.add_argument("--fnr", type=_floats, default=list(DEFAULT_TARGETS), help="comma-separated target FNRs")
    p.add_argument("--grid", type=_floats, default=list(DEFAULT_GRID), help="comma-separated grid percentages")
    p.add_argument("--block-non-compilable", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = commands.add_parser("replay", help="metrics of a policy on gates-off telemetry", parents=[seed_option])
    p.add_argument("data")
    _add_model_args(p)
    p.add_argument("--policy", required=True)
    p.set_defaults(handler=cmd_replay)

    p = commands.add_parser("curve", help="replay every point of a sweep into TSV curves", parents=[seed_option])
    p.add_argument("data")
    _add_model_args(p)
    p.add_argument("--sweep", required=True, help="sweep file written by the sweep command")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_curve)

    p = commands.add_parser("plot", help="render a curve TSV as SVG", parents=[seed_option])
    p.add_argument("curve")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_plot)

    p = commands.add_parser("ab", help="bootstrap comparison of two arms", parents=[seed_option])
    p.add_argument("arm_a")
    p.add_argument("arm_b")
    p.add_argument("--metrics", type=lambda s: [m for m in s.split(",") if m], default=None)
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--pooled", action="store_true", help="pool events instead of averaging per-user metrics")
    p.add_argument("--out", default="ab_report.json")
    p.set_defaults(handler=cmd_ab)

    p = commands.add_parser("serve", help="run the gate service", parents=[seed_option])
    p.add_argument("--config", help="serve.json")
    _add_model_args(p)
    p.add_argument("--policy")
    p.add_argument("--host", default=DEFAULT_HOST)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.set_defaults(handler=cmd_serve)

    p = commands.add_parser("bench", help="load-test a running gate service", parents=[seed_option])
    p.add_argument("--host", default=DEFAULT_HOST)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--requests", "-n", type=int, default=10_000)
    p.add_argument("--concurrency", "-c", type=int, default=8)
    p.set_defaults(handler=cmd_bench)

    return parser


def main(args: Sequence[str] | None = None) -> int:
    """Main entry point for the CLI."""
    load_dotenv()
    Logger.set_debug(Logger.from_env())
    try:
        parsed = build_parser().parse_args(args)
        if parsed.verbose:
            Logger.set_debug(min(parsed.verbose, 2))
        return parsed.handler(parsed)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(format_error_line(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
