"""Command line entry point: train, eval and compare."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, bundled_config, load_config
from .experiment import (CheckpointError, format_table, rows_to_csv, run_compare, run_eval,
                         run_train)

log = logging.getLogger("cogroute")


def _config(args):
    path = Path(args.config)
    if not path.exists() and args.config in ("default", "smoke"):
        path = bundled_config(args.config)
    cfg = load_config(path)
    if args.command == "train":
        return cfg.with_overrides(seed=args.seed, out_dir=args.out, steps=args.steps,
                                  episodes=args.episodes)
    return cfg.with_overrides(out_dir=args.out, steps=args.steps, episodes=args.episodes)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="train: run seed; eval/compare: single traffic seed")
    common.add_argument("--out", help="output directory (overrides run.out_dir)")
    common.add_argument("--steps", type=int, help="override env.steps_per_episode")
    common.add_argument("--episodes", type=int, help="override run.episodes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cogroute", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="train a DDPG agent")
    p.add_argument("config", help="YAML config, run manifest, or 'default' / 'smoke'")
    for name, text in (("eval", "evaluate a checkpoint without exploration noise"),
                       ("compare", "compare ddpg against ospf and random weights")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config")
        p.add_argument("checkpoint", help="checkpoint directory or a training run directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = Path(cfg.run.out_dir)
        if args.command == "train":
            records = run_train(cfg)
            print(f"wrote {len(records)} rows to {out / 'metrics.csv'}")
        elif args.command == "eval":
            row = run_eval(cfg, args.checkpoint, seed=args.seed)
            print(format_table([row]))
            out.mkdir(parents=True, exist_ok=True)
            (out / "eval_summary.csv").write_text(rows_to_csv([row]))
        else:
            rows, per_seed = run_compare(cfg, args.checkpoint, seed=args.seed)
            print(format_table(rows))
            out.mkdir(parents=True, exist_ok=True)
            (out / "compare.csv").write_text(rows_to_csv(rows))
            (out / "compare_seeds.csv").write_text(
                rows_to_csv(per_seed, ("policy", "seed", "mean_delay_ms", "stddev", "drop_rate")))
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
