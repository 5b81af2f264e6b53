"""Cross-seed aggregation of run CSVs.

Statistics are aligned on the ``step`` column: the output step axis is
the sorted union of all input steps, and each statistic at a step is
computed from the runs that actually logged that step (non-finite entries
skipped).  Values are sorted before reduction so the result is invariant
to input file order.  Linear interpolation exists solely as a plotting
aid (`interp_series`) and never feeds the statistics.
"""

import math
from dataclasses import dataclass

import numpy as np

from bnlab.agent import RunMetrics


@dataclass
class AggregateStats:
    """Per-step summary of one metric column across runs."""

    column: str
    steps: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    count: np.ndarray


def read_metrics(path):
    return RunMetrics.from_csv(path)


def _as_metrics(items):
    out = []
    for item in items:
        out.append(item if isinstance(item, RunMetrics) else read_metrics(item))
    if not out:
        raise ValueError("nothing to aggregate")
    schema = out[0].columns
    for m in out[1:]:
        if m.columns != schema:
            raise ValueError(
                f"schema mismatch: {m.columns} does not match {schema}"
            )
    return out


def aggregate_runs(items, column):
    """Aggregate one metric column across runs (CSV paths or RunMetrics)."""
    runs = _as_metrics(items)
    per_run = []
    all_steps = set()
    for m in runs:
        steps = m.column("step").astype(int)
        per_run.append(dict(zip(steps.tolist(), m.column(column).tolist())))
        all_steps.update(steps.tolist())
    steps = np.array(sorted(all_steps), dtype=int)
    mean, std, lo, hi, count = [], [], [], [], []
    for step in steps.tolist():
        values = sorted(
            v for r in per_run
            if step in r and math.isfinite(v := r[step])
        )
        if values:
            arr = np.array(values)
            mean.append(arr.mean())
            std.append(arr.std())  # population convention
            lo.append(arr.min())
            hi.append(arr.max())
            count.append(len(values))
        else:
            mean.append(np.nan)
            std.append(np.nan)
            lo.append(np.nan)
            hi.append(np.nan)
            count.append(0)
    return AggregateStats(
        column=column,
        steps=steps,
        mean=np.array(mean),
        std=np.array(std),
        min=np.array(lo),
        max=np.array(hi),
        count=np.array(count, dtype=int),
    )


def aggregate_lines(stats):
    """CSV lines for an AggregateStats (plain floats, repr round-trip)."""
    yield "step,mean,std,min,max,count"
    for i in range(len(stats.steps)):
        yield (
            f"{int(stats.steps[i])},{float(stats.mean[i])!r},"
            f"{float(stats.std[i])!r},{float(stats.min[i])!r},"
            f"{float(stats.max[i])!r},{int(stats.count[i])}"
        )


def write_aggregate_csv(stats, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in aggregate_lines(stats):
            fh.write(line + "\n")


def interp_series(steps, values, at_steps):
    """Linearly interpolate over non-finite gaps — for plotting only."""
    steps = np.asarray(steps, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values)
    if not keep.any():
        return np.full(len(at_steps), np.nan)
    return np.interp(np.asarray(at_steps, dtype=float), steps[keep], values[keep])


def final_score(metrics, column="eval_return", fraction=0.1):
    """Mean of the last ``fraction`` of finite values — the scalar used to
    rank sweep cells ("final performance over the last 10% of training")."""
    if isinstance(metrics, AggregateStats):
        values = metrics.mean
    else:
        if not isinstance(metrics, RunMetrics):
            metrics = read_metrics(metrics)
        values = metrics.column(column)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan")
    tail = max(1, math.ceil(fraction * values.size))
    return float(values[-tail:].mean())
