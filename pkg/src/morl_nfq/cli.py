"""Command-line entry point: ``morl-nfq {run,pareto,aggregate,deviations,calibrate}``."""
from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    AGGREGATE_COLUMNS,
    aggregate,
    mean_deviation_by_step,
    moving_average,
    read_logs,
    write_csv,
)
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .env import HORIZON
from .experiment import CALIBRATION, ManifestMismatch, calibration_text, run_experiment
from .oracle import front_mask, schedule_rewards
from .svg import box_svg, lines_svg, scatter_svg

log = logging.getLogger("morl_nfq")


class UsageError(Exception):
    pass


def _config(path) -> ExperimentConfig:
    return load_config(path) if path else ExperimentConfig()


def _expand(patterns) -> list[str]:
    paths = sorted({p for pattern in patterns for p in glob.glob(pattern)})
    if not paths:
        raise UsageError(f"no log files match {' '.join(patterns)}")
    return paths


def cmd_run(args) -> int:
    cfg = with_overrides(_config(args.config), seeds=args.seeds, update=args.update, out=args.out,
                         seed=args.seed, workers=args.workers)
    paths = run_experiment(cfg)
    print(f"{len(paths)} run logs in {cfg.out}")
    return 0


def cmd_pareto(args) -> int:
    if not args.friction > 0:
        raise UsageError("--friction must be positive")
    cfg = _config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedules, rewards = schedule_rewards(args.friction, cfg.surrogate)
    on_front = front_mask(rewards)
    stem = f"pareto_{args.friction:g}"
    write_csv(out / f"{stem}.csv",
              [f"a{t}" for t in range(HORIZON)] + ["reward_infeed", "reward_thickness", "on_front"],
              ([*map(int, s), repr(float(r[0])), repr(float(r[1])), int(f)]
               for s, r, f in zip(schedules, rewards, on_front)))
    (out / f"{stem}.svg").write_text(
        scatter_svg(rewards, on_front, title=f"Solution space at friction {args.friction:g}",
                    xlabel="infeed reward", ylabel="thickness reward"), encoding="utf-8")
    print(f"{len(rewards)} schedules, {int(on_front.sum())} on the Pareto front -> {out / stem}.csv")
    return 0


def cmd_aggregate(args) -> int:
    paths = _expand(args.logs)
    logs = [row for p in paths for row in read_logs(p)]
    rows = aggregate(logs, args.bucket)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS,
              ([r.task_position, r.episode_bucket, r.n] + [repr(float(v)) for v in r[3:]] for r in rows))
    (out / "aggregate.svg").write_text(box_svg(rows, title="Scalarized reward by task position"),
                                       encoding="utf-8")
    print(f"{len(rows)} aggregate rows from {len(paths)} logs -> {out / 'aggregate.csv'}")
    return 0


def cmd_deviations(args) -> int:
    paths = _expand(args.logs)
    per_run = [np.asarray(mean_deviation_by_step(read_logs(p))) for p in paths]
    n = min(len(d) for d in per_run)
    mean = np.mean([d[:n] for d in per_run], axis=0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "deviations.csv", ["episode", "t", "deviation"],
              ([e, t, repr(float(mean[e, t]))] for e in range(n) for t in range(HORIZON)))
    series = {f"t={t}": moving_average(mean[:, t], args.window, args.stride) for t in range(HORIZON)}
    (out / "deviations.svg").write_text(
        lines_svg(series, title="Expectation deviation (expected - actual)", xlabel="episode",
                  ylabel="deviation"), encoding="utf-8")
    print(f"deviations over {len(paths)} runs, {n} episodes -> {out / 'deviations.csv'}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args.config)
    text = calibration_text(cfg.surrogate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / CALIBRATION).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morl-nfq", description="Multi-objective NFQ experiments on the deep-drawing surrogate.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run seeded task sequences and baselines")
    p.add_argument("--config")
    p.add_argument("--seeds", type=int)
    p.add_argument("--update", choices=["off", "on"])
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pareto", help="enumerate all schedules at one friction and mark the front")
    p.add_argument("--friction", type=float, default=0.028)
    p.add_argument("--config")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("aggregate", help="box statistics by task position and episode bucket")
    p.add_argument("logs", nargs="+", help="log files or glob patterns")
    p.add_argument("--bucket", type=int, default=250)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("deviations", help="expected minus obtained scalarized reward per step")
    p.add_argument("logs", nargs="+", help="log files or glob patterns")
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_deviations)

    p = sub.add_parser("calibrate", help="write the reward calibration sidecar")
    p.add_argument("--config")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ManifestMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
