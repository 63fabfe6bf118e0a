"""Run reports: per-metric CSVs, a manifest, and a long-format table.

Floats are written with repr so a re-parse reproduces the in-memory
series bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
import subprocess

from .config import ExperimentConfig
from .metrics import MetricSeries, bootstrap_ci, group_series, iqm


def _fmt(v: float) -> str:
    return repr(float(v))


def build_version() -> str:
    """Short source revision when running from a checkout, else a marker."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "-C", here, "rev-parse", "--short", "HEAD"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unreleased"


def emit_report(series: list[MetricSeries], config: ExperimentConfig,
                out_dir) -> list[str]:
    """Write one CSV per metric name, a manifest, and a long-format CSV.

    Per-metric columns: step, iqm, ci_low, ci_high, then one seed_<n>
    column per seed.  Seeds must share the same step grid for a metric.
    A single-seed report gets zero-width intervals at the point value.
    """
    os.makedirs(out_dir, exist_ok=True)
    grouped = group_series(series)
    seeds = sorted({s.seed for s in series})
    written = []

    manifest = {
        "version": build_version(),
        "seeds": seeds,
        "metrics": sorted(grouped),
        "config": config.as_dict(),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)

    for name, group in grouped.items():
        steps = group[0].steps
        for s in group[1:]:
            if s.steps != steps:
                raise ValueError(
                    f"metric {name!r}: seed {s.seed} has a different "
                    f"step grid than seed {group[0].seed}")
        path = os.path.join(out_dir, f"metric_{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "iqm", "ci_low", "ci_high"]
                       + [f"seed_{s.seed}" for s in group])
            for i, step in enumerate(steps):
                vals = [s.values[i] for s in group]
                point = iqm(vals)
                if len(group) >= 2:
                    lo, hi = bootstrap_ci(vals)
                else:
                    lo = hi = point
                w.writerow([step] + [_fmt(v) for v in (point, lo, hi)]
                           + [_fmt(v) for v in vals])
        written.append(path)

    if grouped:
        path = os.path.join(out_dir, "metrics_long.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "seed", "step", "value"])
            for name in sorted(grouped):
                for s in grouped[name]:
                    for step, value in zip(s.steps, s.values):
                        w.writerow([name, s.seed, step, _fmt(value)])
        written.append(path)
    return written


def parse_metric_csv(path) -> list[MetricSeries]:
    """Rebuild the per-seed series from one metric CSV."""
    name = os.path.basename(path)
    if not (name.startswith("metric_") and name.endswith(".csv")):
        raise ValueError(f"not a metric CSV path: {path}")
    metric = name[len("metric_"):-len(".csv")]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    seed_cols = [(i, int(col[len("seed_"):]))
                 for i, col in enumerate(header) if col.startswith("seed_")]
    out = [MetricSeries(metric, seed) for _, seed in seed_cols]
    for row in body:
        for series, (i, _) in zip(out, seed_cols):
            series.append(int(row[0]), float(row[i]))
    return out
