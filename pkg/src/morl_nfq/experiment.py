"""Seeded batch execution of task sequences and baselines with per-run checkpoints."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import write_logs
from .config import ExperimentConfig, dump_config
from .deepdraw import DeepDrawEnv, SurrogateParams
from .morl import OFF_POLICY, run_baseline_task, run_sequence

log = logging.getLogger(__name__)

MANIFEST = "manifest.txt"
CALIBRATION = "calibration.txt"


class ManifestMismatch(RuntimeError):
    pass


def rule_tag(update_rule: str) -> str:
    return "off" if update_rule == OFF_POLICY else "on"


class EnvFactory:
    """Picklable ``rng -> DeepDrawEnv`` factory."""

    def __init__(self, params: SurrogateParams):
        self.params = params.calibrated()

    def __call__(self, rng: np.random.Generator) -> DeepDrawEnv:
        return DeepDrawEnv(self.params, rng)


def sequence_rng(cfg: ExperimentConfig, k: int) -> np.random.Generator:
    # independent of the update rule, so off/on runs of seed k share weights and process draws
    return np.random.default_rng([cfg.base_seed, k, 0])


def baseline_rng(cfg: ExperimentConfig, k: int) -> np.random.Generator:
    return np.random.default_rng([cfg.base_seed, k, 1])


def calibration_text(params: SurrogateParams) -> str:
    (lo1, hi1), (lo2, hi2) = params.calibrated().reward_calibration
    return (f"negated_infeed_min = {lo1!r}\nnegated_infeed_max = {hi1!r}\n"
            f"thickness_min = {lo2!r}\nthickness_max = {hi2!r}\n")


def manifest_text(cfg: ExperimentConfig) -> str:
    calib = "".join(f"# calibration {line}\n" for line in calibration_text(cfg.surrogate).splitlines())
    return dump_config(cfg) + calib


def run_sequence_job(cfg: ExperimentConfig, k: int) -> list:
    tasks = [replace(cfg.task, weights=w) for w in cfg.task_weights()]
    results = run_sequence(EnvFactory(cfg.surrogate), tasks, sequence_rng(cfg, k), train_cfg=cfg.train,
                           scalarization=cfg.scalarization, sequence_id=f"{rule_tag(cfg.update_rule)}-{k:03d}")
    return [row for r in results for row in r.logs]


def run_baseline_job(cfg: ExperimentConfig, k: int) -> list:
    explicit = cfg.task_weights()
    w = explicit[k % len(explicit)]
    result = run_baseline_task(EnvFactory(cfg.surrogate), replace(cfg.task, weights=w), baseline_rng(cfg, k),
                               train_cfg=cfg.train, sequence_id=f"baseline-{k:03d}")
    return result.logs


def _job(args):
    kind, cfg, k, path = args
    rows = run_sequence_job(cfg, k) if kind == "sequence" else run_baseline_job(cfg, k)
    write_logs(path, rows)
    return str(path)


def planned_runs(cfg: ExperimentConfig, out: Path) -> list[tuple]:
    tag = rule_tag(cfg.update_rule)
    jobs = [("sequence", cfg, k, out / f"{tag}-{k:03d}.csv") for k in range(cfg.seeds)]
    if cfg.baseline:
        jobs += [("baseline", cfg, k, out / f"baseline-{k:03d}.csv") for k in range(cfg.seeds)]
    return jobs


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> list[Path]:
    """Run every seeded sequence (and baseline) not already on disk; return all log paths.

    The output directory holds a manifest that reproduces the run on its
    own. Completed log files act as checkpoints: rerunning into the same
    directory only executes the missing ones.
    """
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = manifest_text(replace(cfg, out=str(out)))
    mpath = out / MANIFEST
    if mpath.exists() and mpath.read_text(encoding="utf-8") != manifest:
        raise ManifestMismatch(f"{out} already holds a different experiment (see {mpath})")
    mpath.write_text(manifest, encoding="utf-8")
    (out / CALIBRATION).write_text(calibration_text(cfg.surrogate), encoding="utf-8")

    jobs = planned_runs(cfg, out)
    todo = [j for j in jobs if not j[3].exists()]
    if len(todo) < len(jobs):
        log.info("resuming: %d of %d runs already complete", len(jobs) - len(todo), len(jobs))
    if cfg.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for path in pool.map(_job, todo):
                log.info("wrote %s", path)
    else:
        for job in todo:
            log.info("wrote %s", _job(job))
    return [j[3] for j in jobs]
