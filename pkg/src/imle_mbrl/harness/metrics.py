"""Metric series and the aggregate statistics used in reports.

The interquartile mean drops a quarter of the probability mass from each
end of the sorted sample, splitting boundary values fractionally, so it is
exact for any sample size (n=1 returns the value itself).  Confidence
intervals come from a percentile bootstrap over seed resamples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricSeries:
    """(env step, value) pairs for one metric under one seed."""

    name: str
    seed: int
    steps: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def append(self, step: int, value: float) -> None:
        if self.steps and step <= self.steps[-1]:
            raise ValueError(
                f"{self.name}: step {step} not after {self.steps[-1]}")
        self.steps.append(int(step))
        self.values.append(float(value))

    def __len__(self) -> int:
        return len(self.steps)


def group_series(bundle: list[MetricSeries]) -> dict[str, list[MetricSeries]]:
    """Bundle regrouped as metric name -> series sorted by seed."""
    grouped: dict[str, list[MetricSeries]] = {}
    for series in bundle:
        grouped.setdefault(series.name, []).append(series)
    for name, group in grouped.items():
        group.sort(key=lambda s: s.seed)
        seeds = [s.seed for s in group]
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"duplicate seed in metric '{name}'")
    return grouped


def iqm(values, trim: float = 0.25) -> float:
    """Mean of the middle mass after trimming `trim` from each end.

    Boundary order statistics get the fractional weight of their overlap
    with the kept [trim, 1-trim] band.
    """
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise ValueError("iqm of an empty sample")
    if not 0.0 <= trim < 0.5:
        raise ValueError(f"trim must be in [0, 0.5), got {trim}")
    edges = np.arange(x.size + 1) / x.size
    w = np.minimum(edges[1:], 1.0 - trim) - np.maximum(edges[:-1], trim)
    w = np.clip(w, 0.0, None)
    return float(np.dot(w, x) / np.sum(w))


def bootstrap_ci(seed_values, confidence: float = 0.95,
                 resamples: int = 2000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for the IQM across seeds."""
    x = np.asarray(seed_values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("bootstrap needs at least 2 seeds")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if rng is None:
        rng = np.random.default_rng(0)
    draws = x[rng.integers(0, x.size, size=(resamples, x.size))]
    stats = np.sort(np.asarray([iqm(row) for row in draws]))
    tail = 100.0 * (1.0 - confidence) / 2.0
    lo, hi = np.percentile(stats, [tail, 100.0 - tail])
    return float(lo), float(hi)
