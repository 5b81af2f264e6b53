"""Hyperparameter sweeps: Cartesian grids over config axes, scored cells.

Each cell is a full multi-seed run of the base config with the axis
overrides applied.  A cell's raw score is the across-seed mean of the
final evaluation return (last 10% of eval points per run); normalized
scores divide by the best cell so the winner reads 1.0.  Returns here are
often negative (costs), so the division is sign-aware; a diverged
(faulted) cell is a first-class result pinned to normalized 0 rather than
being dropped.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .aggregate import final_score
from .config import with_updates
from .runner import output_root, run_config
from bnlab.errors import ConfigError

# CLI axis name -> dotted config path.
SWEEP_AXES = {
    "learning_rate": "agent.learning_rate",
    "mode_string": "agent.mode",
    "mix_ratio": "agent.mix_ratio",
    "optimizer": "agent.optimizer",
}


def parse_axis_values(axis, text):
    """Parse a comma-separated value list for one axis."""
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"must be one of {sorted(SWEEP_AXES)}")
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise ConfigError("values", f"no values given for axis {axis!r}")
    if axis == "learning_rate":
        return [float(v) for v in items]
    if axis == "mix_ratio":
        return [None if v.lower() == "none" else int(v) for v in items]
    return items


@dataclass
class SweepCell:
    overrides: dict
    label: str
    config_hash: str = ""
    seed_scores: list = field(default_factory=list)
    faulted_seeds: int = 0
    raw_score: float = float("nan")
    normalized: float = float("nan")

    @property
    def faulted(self):
        return self.faulted_seeds > 0


def _cell_label(axis_values):
    return "|".join(
        f"{axis}={'none' if v is None else v}" for axis, v in axis_values
    )


def build_cells(axes):
    """Cartesian product of (axis, values) pairs into unscored cells."""
    if not axes:
        raise ConfigError("axis", "at least one sweep axis is required")
    names = [a for a, _ in axes]
    if len(set(names)) != len(names):
        raise ConfigError("axis", "each axis may be given once")
    cells = []
    for combo in itertools.product(*[values for _, values in axes]):
        pairs = list(zip(names, combo))
        overrides = {SWEEP_AXES[a]: v for a, v in pairs}
        cells.append(SweepCell(overrides=overrides, label=_cell_label(pairs)))
    return cells


def normalize_scores(cells):
    """Fill ``normalized`` in place: best finite raw score maps to 1.0.

    Sign-aware so that all-negative score tables still land in (0, 1]:
    with best > 0 a cell scores raw/best, with best < 0 it scores
    best/raw.  Scores on the wrong side of zero clamp to 0, as do faulted
    cells with no finite score.
    """
    finite = [c.raw_score for c in cells if math.isfinite(c.raw_score)]
    best = max(finite) if finite else float("nan")
    for cell in cells:
        raw = cell.raw_score
        if not math.isfinite(raw) or not math.isfinite(best):
            cell.normalized = 0.0
        elif best > 0:
            cell.normalized = max(0.0, min(1.0, raw / best))
        elif best < 0:
            cell.normalized = max(0.0, min(1.0, best / raw))
        else:
            cell.normalized = 1.0 if raw == 0 else 0.0
    return cells


def run_sweep(base_cfg, axes, out_dir=None):
    """Run the full grid; returns the scored and normalized cell list."""
    cells = build_cells(axes)
    for cell in cells:
        cfg = with_updates(base_cfg, cell.overrides)
        cell.config_hash = cfg.config_hash
        results = run_config(cfg, out_dir=out_dir)
        for res in results:
            if res.faulted:
                cell.faulted_seeds += 1
            cell.seed_scores.append(final_score(res.metrics))
        finite = [s for s in cell.seed_scores if math.isfinite(s)]
        cell.raw_score = float(np.mean(finite)) if finite else float("nan")
    return normalize_scores(cells)


def format_table(cells):
    header = f"{'cell':<40} {'hash':<12} {'raw':>12} {'norm':>7} {'faults':>6}"
    lines = [header, "-" * len(header)]
    for c in cells:
        raw = "nan" if math.isnan(c.raw_score) else f"{c.raw_score:.4f}"
        lines.append(
            f"{c.label:<40} {c.config_hash:<12} {raw:>12} "
            f"{c.normalized:>7.3f} {c.faulted_seeds:>6}"
        )
    return "\n".join(lines)


def write_sweep_files(cells, base_cfg, out_dir=None, stem="sweep"):
    """Emit the summary table as CSV and JSON next to the runs."""
    root = output_root(out_dir, base_cfg)
    root.mkdir(parents=True, exist_ok=True)
    csv_path = root / f"{stem}_{base_cfg.config_hash}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,config_hash,raw_score,normalized,faulted_seeds\n")
        for c in cells:
            fh.write(
                f"{c.label},{c.config_hash},{c.raw_score!r},"
                f"{c.normalized!r},{c.faulted_seeds}\n"
            )
    json_path = root / f"{stem}_{base_cfg.config_hash}.json"
    payload = [
        {
            "label": c.label,
            "overrides": {k: v for k, v in c.overrides.items()},
            "config_hash": c.config_hash,
            "seed_scores": c.seed_scores,
            "raw_score": c.raw_score,
            "normalized": c.normalized,
            "faulted_seeds": c.faulted_seeds,
        }
        for c in cells
    ]
    json_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return csv_path, json_path
