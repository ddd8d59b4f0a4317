"""``gridnav`` command line: train, suite, eval, emit-figs."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .env import load_map, render
from .metrics import aggregate, direction_changes, smoothness


def _load(args):
    config = harness.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    if getattr(args, "out", None):
        config.output_dir = args.out
    return config


def cmd_train(args) -> None:
    config = _load(args)
    world = harness.build_world(config)
    result = harness.run_single(config, 0, world)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_episodes_csv(out / "episodes.csv", [(0, result.records)], config.gamma)
    harness.write_aggregate_csv(out / "aggregate.csv", [result.summary])
    (out / "world.map").write_text(render(world))
    if result.checkpoint is not None:
        (out / "checkpoint.txt").write_text(result.checkpoint)
    s = result.summary
    print(f"{config.algorithm}: {s.episodes} episodes, success {s.success_rate:.3f}, "
          f"collisions/ep {s.mean_collisions:.3f}, smoothness {s.mean_smoothness:.3f} -> {out}")


def cmd_suite(args) -> None:
    config = _load(args)
    suite = harness.run_suite(config, workers=args.workers)
    c = suite.cross
    print(f"{config.algorithm}: {config.runs} runs x {config.episodes} episodes, "
          f"collisions/ep {c['collisions']['mean']:.3f} (sd {c['collisions']['std']:.3f}), "
          f"smoothness {c['smoothness']['mean']:.3f}, success {c['success_rate']['mean']:.3f} "
          f"-> {config.output_dir}")


def cmd_eval(args) -> None:
    kwargs = {"max_steps": args.max_steps} if args.max_steps else {}
    world = load_map(args.map, **kwargs)
    record = harness.greedy_trajectory(args.checkpoint, world)
    summary = aggregate([record], args.gamma)
    report = {
        "steps": record.steps,
        "reached_goal": record.reached_goal,
        "collisions": record.collisions,
        "direction_changes": direction_changes(record.actions),
        "smoothness": smoothness(record),
        "discounted_return": summary.mean_return,
        "path": [list(p) for p in record.path],
    }
    print(json.dumps(report))
    if args.show:
        sys.stdout.write(render(world, record.path))


def cmd_emit_figs(args) -> None:
    suites = harness.load_suite_dirs(args.in_dir)
    if not suites:
        raise ValueError(f"no suite.json found under {args.in_dir}")
    for path in harness.emit_figure_data(suites, args.out):
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridnav", description="DQN/PPO gridworld navigation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a single run and write its CSVs and checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="override output_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("suite", help="run the full multi-run protocol")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--workers", type=int, default=1, help="parallel runs (output does not depend on it)")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("eval", help="greedy trajectory of a checkpoint on a map")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--show", action="store_true", help="also print the map with the path overlaid")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("emit-figs", help="merge suite outputs into figure-data CSVs")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_figs)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # one diagnostic line, nonzero exit
        print(f"gridnav: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
