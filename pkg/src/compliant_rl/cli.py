"""Command-line entry point: ``compliant-rl {train,sweep,plot,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import typing as t
from pathlib import Path

from compliant_rl import settings
from compliant_rl.config import ConfigError, RunConfig, load_config
from compliant_rl.controllers import ACTION_SPACE_MODELS
from compliant_rl.emitter import METRICS_FILE
from compliant_rl.sac import CheckpointMismatchError, NonFiniteLossError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

EVAL_FILE = "eval.json"


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML run configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a dotted config key, e.g. --set reward.rho=2.0",
    )
    parser.add_argument("--seed", type=int)
    parser.add_argument("--steps", type=int, help="total environment steps")
    parser.add_argument("--penalize", action=argparse.BooleanOptionalAction, default=None)


def _parse_args(argv: t.Optional[t.List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="compliant-rl",
        description="Learn force-control gains and pose offsets for contact-rich insertion.",
    )
    parser.add_argument("--output-dir", type=Path, help="output root for run directories")
    parser.add_argument("--log-level", help="logging level name (default INFO)")
    verbs = parser.add_subparsers(dest="verb", required=True)

    train = verbs.add_parser("train", help="run one seeded training session")
    _add_config_flags(train)
    train.add_argument("--model", choices=list(ACTION_SPACE_MODELS))

    sweep = verbs.add_parser("sweep", help="train every model x seed x penalty setting")
    _add_config_flags(sweep)
    sweep.add_argument("--models", nargs="*", default=["P-14", "A-13pd"])
    sweep.add_argument("--seeds", type=int, default=3, help="runs per model and setting")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--milestone", type=float, default=100.0)
    sweep.add_argument("--name", default="sweep", help="sweep directory under the output root")

    plot = verbs.add_parser("plot", help="write SVG learning curves")
    plot.add_argument("run_dirs", nargs="+", type=Path)
    plot.add_argument("--out", type=Path, help="SVG path (default <output root>/curves.svg)")
    plot.add_argument("--weight", type=float, default=0.6, help="moving-average history weight")

    evaluate = verbs.add_parser("eval", help="run deterministic episodes")
    _add_config_flags(evaluate)
    evaluate.add_argument("--model", choices=list(ACTION_SPACE_MODELS))
    evaluate.add_argument("--checkpoint", type=Path)
    evaluate.add_argument("--policy", choices=["checkpoint", "nominal"], default=None)
    evaluate.add_argument("--episodes", type=int, default=10)
    return parser.parse_args(argv)


def _resolve_config(args: argparse.Namespace, default_path: t.Optional[Path] = None) -> RunConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.steps is not None:
        overrides.append(f"training.total_steps={args.steps}")
    if getattr(args, "model", None) is not None:
        overrides.append(f"model={args.model}")
    if args.penalize is not None:
        overrides.append(f"reward.penalize_collisions={str(args.penalize).lower()}")
    return load_config(args.config or default_path, overrides)


def _expand_run_dirs(paths: t.Sequence[Path]) -> t.List[Path]:
    """Sweep directories stand for every run under their ``runs/`` folder."""
    expanded: t.List[Path] = []
    for path in paths:
        if not (path / METRICS_FILE).exists() and (path / "runs").is_dir():
            expanded.extend(sorted(p for p in (path / "runs").iterdir() if p.is_dir()))
        else:
            expanded.append(path)
    return expanded


def cmd_train(args: argparse.Namespace, root: Path) -> int:
    from compliant_rl.training import run_name, train

    cfg = _resolve_config(args)
    run_dir = root / run_name(cfg)
    result = train(cfg, run_dir)
    print(result.run_dir)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, root: Path) -> int:
    from compliant_rl.experiments import run_sweep

    unknown = [m for m in args.models if m not in ACTION_SPACE_MODELS]
    if unknown:
        raise ConfigError("Unknown action space models", unknown)
    base = _resolve_config(args)
    penalize = (True, False) if args.penalize is None else (args.penalize,)
    result = run_sweep(
        base,
        args.models,
        args.seeds,
        penalize,
        root / args.name,
        processes=args.workers,
        milestone=args.milestone,
    )
    if result is None:
        return EXIT_OK
    print(result.collisions.to_string(index=False))
    failed = [s.name for s in result.statuses if s.status != "finished"]
    if failed:
        logger.warning(f"{len(failed)} sweep member(s) failed: {', '.join(failed)}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace, root: Path) -> int:
    from compliant_rl.plotting import plot_learning_curves

    out = args.out or root / "curves.svg"
    path = plot_learning_curves(_expand_run_dirs(args.run_dirs), out, weight=args.weight)
    if path is None:
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, root: Path) -> int:
    from compliant_rl.training import evaluate

    policy = args.policy or ("checkpoint" if args.checkpoint is not None else "nominal")
    if policy == "checkpoint" and args.checkpoint is None:
        raise ConfigError("Missing checkpoint", ["--policy checkpoint needs --checkpoint PATH"])
    checkpoint = args.checkpoint if policy == "checkpoint" else None

    # a checkpoint's own run directory supplies its config unless one is given
    default_path = None
    out_dir = root
    if checkpoint is not None:
        run_dir = checkpoint.resolve().parent.parent
        if (run_dir / "config.yaml").exists():
            default_path = run_dir / "config.yaml"
            out_dir = run_dir
    cfg = _resolve_config(args, default_path)

    report = evaluate(cfg, args.episodes, checkpoint)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    (out_dir / EVAL_FILE).write_text(payload + "\n")
    print(payload)
    return EXIT_OK


COMMANDS: t.Dict[str, t.Callable[[argparse.Namespace, Path], int]] = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
    "eval": cmd_eval,
}


def main(argv: t.Optional[t.List[str]] = None) -> int:
    args = _parse_args(argv)
    try:
        root = settings.configure(args.output_dir, args.log_level)
    except ValueError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    try:
        return COMMANDS[args.verb](args, root)
    except (ConfigError, CheckpointMismatchError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except NonFiniteLossError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_RUNTIME
    except (RuntimeError, OSError) as e:
        logger.error(f"{args.verb} failed: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
