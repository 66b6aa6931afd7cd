"""Episode-log CSV I/O and the aggregations behind the experiment plots."""
from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .env import HORIZON
from .morl import EpisodeLog
from .oracle import compute_deviations

LOG_COLUMNS = (
    ["sequence_id", "task_index", "episode_index"]
    + [f"action_{t}" for t in range(HORIZON)]
    + ["reward_infeed", "reward_thickness", "scalarized_reward", "epsilon"]
    + [f"expected_H_t{t}" for t in range(HORIZON)]
    + ["friction", "w_infeed", "w_thickness"]
)
POSITIONS = "abcdefghijklmnopqrstuvwxyz"
BASELINE = "baseline"


def _f(x: float) -> str:
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    """UTF-8, comma-separated, header row, LF endings; written atomically."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def log_row(log: EpisodeLog) -> list:
    return ([log.sequence_id, log.task_index, log.episode_index, *log.actions,
             _f(log.reward_infeed), _f(log.reward_thickness), _f(log.scalarized_reward), _f(log.epsilon)]
            + [_f(e) for e in log.expected_h]
            + [_f(log.friction), _f(log.w_infeed), _f(log.w_thickness)])


def write_logs(path, logs) -> None:
    write_csv(path, LOG_COLUMNS, (log_row(log) for log in logs))


def read_logs(path) -> list[EpisodeLog]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("sequence_id", "task_index", "episode_index", "reward_infeed",
                               "reward_thickness", "scalarized_reward") if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: not an episode log (missing {', '.join(missing)})")
        logs = []
        for row in reader:
            expected = tuple(float(row[f"expected_H_t{t}"]) if row.get(f"expected_H_t{t}") not in (None, "")
                             else None for t in range(HORIZON))
            logs.append(EpisodeLog(
                sequence_id=row["sequence_id"],
                task_index=int(row["task_index"]),
                episode_index=int(row["episode_index"]),
                actions=tuple(int(row[f"action_{t}"]) for t in range(HORIZON)),
                reward_infeed=float(row["reward_infeed"]),
                reward_thickness=float(row["reward_thickness"]),
                scalarized_reward=float(row["scalarized_reward"]),
                epsilon=float(row["epsilon"]),
                expected_h=expected,
                friction=float(row["friction"]),
                w_infeed=float(row["w_infeed"]),
                w_thickness=float(row["w_thickness"]),
            ))
    return logs


# --------------------------------------------------------------------------
# smoothing

def moving_average(values, window: int = 200, stride: int = 100) -> list[tuple[int, float]]:
    """Mean of the ``window`` values centred on every ``stride``-th index.

    Windows cover ``[i - window/2, i + window/2)`` and are truncated at the
    ends of the series.
    """
    if window < 2 or window % 2:
        raise ValueError("window must be a positive even number")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    values = np.asarray(values, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    half = window // 2
    out = []
    for i in range(0, len(values), stride):
        lo, hi = max(0, i - half), min(len(values), i + half)
        out.append((i, float((csum[hi] - csum[lo]) / (hi - lo))))
    return out


def moving_average_rewards(logs, window: int = 200, stride: int = 100) -> list[tuple[int, float, float]]:
    r1 = moving_average([log.reward_infeed for log in logs], window, stride)
    r2 = moving_average([log.reward_thickness for log in logs], window, stride)
    return [(i, a, b) for (i, a), (_, b) in zip(r1, r2)]


# --------------------------------------------------------------------------
# box statistics

def _median(x: np.ndarray) -> float:
    n = len(x)
    mid = n // 2
    return float(x[mid]) if n % 2 else float((x[mid - 1] + x[mid]) / 2)


def quartiles(values) -> tuple[float, float, float]:
    """(Q1, median, Q3), median-exclusive: for odd n the median joins neither half."""
    x = np.sort(np.asarray(values, dtype=float))
    if len(x) == 0:
        raise ValueError("quartiles of an empty sample")
    n = len(x)
    lower, upper = x[: n // 2], x[(n + 1) // 2:]
    med = _median(x)
    if n == 1:
        return med, med, med
    return _median(lower), med, _median(upper)


class AggregateRow(NamedTuple):
    task_position: str
    episode_bucket: str
    n: int
    mean: float
    whisker_low: float
    q1: float
    median: float
    q3: float
    whisker_high: float


AGGREGATE_COLUMNS = list(AggregateRow._fields)


def box_stats(values) -> tuple[float, float, float, float, float]:
    """Whiskers reach the most extreme data within 1.5 IQR of the box."""
    x = np.asarray(values, dtype=float)
    q1, med, q3 = quartiles(x)
    iqr = q3 - q1
    low = float(x[x >= q1 - 1.5 * iqr].min())
    high = float(x[x <= q3 + 1.5 * iqr].max())
    return low, q1, med, q3, high


def task_position(log: EpisodeLog) -> str:
    if log.sequence_id.startswith(BASELINE):
        return BASELINE
    return POSITIONS[log.task_index]


def aggregate(logs, bucket: int = 250) -> list[AggregateRow]:
    groups = defaultdict(list)
    for log in logs:
        groups[(task_position(log), log.episode_index // bucket)].append(log.scalarized_reward)

    def order(key):
        pos, b = key
        return (pos == BASELINE, pos, b)

    rows = []
    for key in sorted(groups, key=order):
        pos, b = key
        vals = groups[key]
        low, q1, med, q3, high = box_stats(vals)
        rows.append(AggregateRow(pos, f"{b * bucket}-{(b + 1) * bucket}", len(vals), float(np.mean(vals)),
                                 low, q1, med, q3, high))
    return rows


def mean_deviation_by_step(logs) -> list[list[float]]:
    """Per-episode deviations of one run, shape (episodes, HORIZON)."""
    records = compute_deviations(logs)
    out = np.zeros((len(logs), HORIZON))
    for k, rec in enumerate(records):
        out[k // HORIZON, rec.t] = rec.deviation
    return out.tolist()
