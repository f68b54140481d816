"""Reconstruction-quality metrics: MSE and the windowed peak error (WPE).

WPE measures how well a reconstruction preserves the peak of every sliding
W-hour window: the mean over all window positions of the absolute
difference between the true and reconstructed window maxima. Peaks that
move within a window are not penalized; peaks whose magnitude is smeared
out are.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, SeriesTooShortError, ShapeError
from .series import IntervalSeries, SrPair, group_residuals

REPORT_VERSION = 1

# Reconstructions are flagged (not dropped) when conservation fails at this
# relative tolerance; matches the architectural guarantee of the generator.
CONSTRAINT_FLAG_RTOL = 1e-6


@dataclass(frozen=True)
class MetricConfig:
    """Windowing parameters for WPE."""

    window_hours: int = 3
    samples_per_hour: int = 4
    stride_samples: int = 1

    def __post_init__(self):
        if self.window_hours < 1 or self.samples_per_hour < 1:
            raise ShapeError("window_hours and samples_per_hour must be >= 1")
        if self.stride_samples < 1:
            raise ShapeError("stride_samples must be >= 1")

    @property
    def window_samples(self) -> int:
        return self.window_hours * self.samples_per_hour


def _values_of(x) -> np.ndarray:
    if isinstance(x, IntervalSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


def mse(reference, reconstruction) -> float:
    """Mean squared elementwise difference, in kWh^2."""
    ref = _values_of(reference)
    rec = _values_of(reconstruction)
    if ref.shape != rec.shape or ref.size < 1:
        raise ShapeError(f"length mismatch: {ref.shape} vs {rec.shape}")
    diff = rec - ref
    return float(np.dot(diff, diff) / diff.size)


def window_maxima(values, window: int) -> list[float]:
    """Maximum of every full window of `window` consecutive samples, O(N).

    Monotonic-queue algorithm: the deque holds indices of a decreasing run
    of candidates; the front is always the current window's maximum.
    """
    vals = _values_of(values).tolist()
    n = len(vals)
    if window < 1:
        raise ShapeError(f"window must be >= 1, got {window}")
    if n < window:
        raise SeriesTooShortError(f"series of {n} samples is shorter than one {window}-sample window")
    maxima = []
    candidates: deque[int] = deque()
    for i, v in enumerate(vals):
        while candidates and vals[candidates[-1]] <= v:
            candidates.pop()
        candidates.append(i)
        if candidates[0] <= i - window:
            candidates.popleft()
        if i >= window - 1:
            maxima.append(vals[candidates[0]])
    return maxima


def window_peak_errors(reference, reconstruction, config: MetricConfig) -> list[float]:
    """Per-window |max(reference) - max(reconstruction)| at the configured stride."""
    ref = _values_of(reference)
    rec = _values_of(reconstruction)
    if ref.shape != rec.shape:
        raise ShapeError(f"length mismatch: {ref.shape} vs {rec.shape}")
    w = config.window_samples
    ref_max = window_maxima(ref, w)
    rec_max = window_maxima(rec, w)
    positions = range(0, ref.size - w + 1, config.stride_samples)
    return [abs(ref_max[p] - rec_max[p]) for p in positions]


def wpe(reference, reconstruction, config: MetricConfig) -> float:
    """Mean windowed peak error over all full sliding windows, in kWh."""
    errors = window_peak_errors(reference, reconstruction, config)
    total = 0.0
    for e in errors:
        total += e
    return total / len(errors)


@dataclass(frozen=True)
class MethodMetrics:
    """Pooled metrics for one (method, group, window length) combination."""

    method: str
    group: str
    window_hours: int
    mse: float
    wpe: float
    n_series: int
    n_samples: int
    n_windows: int
    constraint_violations: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.mse) and np.isfinite(self.wpe)):
            raise DataError(f"non-finite metrics for {self.method}/{self.group}")
        if self.mse < 0 or self.wpe < 0:
            raise DataError(f"negative metrics for {self.method}/{self.group}")
        if self.n_series < 1 or self.n_samples < 1 or self.n_windows < 1:
            raise DataError(f"empty sample counts for {self.method}/{self.group}")


POOLED = "pooled"


@dataclass
class EvalReport:
    """Per-group and pooled metric entries plus run metadata.

    Serializes to JSON with a stable key order so identical runs produce
    byte-identical reports.
    """

    entries: list[MethodMetrics] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def merge(self, other: "EvalReport") -> "EvalReport":
        config = dict(self.config)
        for k, v in other.config.items():
            if k in config and config[k] != v:
                raise DataError(f"cannot merge reports with conflicting config key {k!r}")
            config[k] = v
        metadata = dict(self.metadata)
        for k, v in other.metadata.items():
            if k in metadata and metadata[k] != v:
                raise DataError(f"cannot merge reports with conflicting metadata key {k!r}")
            metadata[k] = v
        return EvalReport(self.entries + other.entries, config, metadata)

    def to_json_dict(self) -> dict:
        groups = sorted({e.group for e in self.entries if e.group != POOLED})
        methods = []
        for e in self.entries:
            if e.method not in methods:
                methods.append(e.method)

        def method_block(group: str, method: str) -> dict | None:
            picked = [e for e in self.entries if e.group == group and e.method == method]
            if not picked:
                return None
            picked.sort(key=lambda e: e.window_hours)
            base = picked[0]
            block = {
                "method": method,
                "mse": base.mse,
                "n_series": base.n_series,
                "n_samples": base.n_samples,
                "constraint_violations": base.constraint_violations,
                "wpe": {
                    str(e.window_hours): {"value": e.wpe, "n_windows": e.n_windows}
                    for e in picked
                },
            }
            return block

        def group_blocks(group: str) -> list[dict]:
            return [b for m in methods if (b := method_block(group, m)) is not None]

        return {
            "report_version": REPORT_VERSION,
            "config": self.config,
            "groups": [{"group": g, "methods": group_blocks(g)} for g in groups],
            "pooled": group_blocks(POOLED),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def evaluate(items, grouping, config: MetricConfig, method: str = "baseline",
             metadata: dict | None = None) -> EvalReport:
    """Pool MSE and WPE for one method over a labelled collection of pairs.

    `items` is a sequence of (SrPair, reconstruction) where the
    reconstruction is an IntervalSeries (or array) shape-matching the
    pair's high series; `grouping` assigns each pair a group label.
    Errors are pooled per sample (MSE) and per window (WPE) across all
    series of a group, then across everything for the pooled entry.
    Reconstructions that violate conservation at 1e-6 relative are counted
    in the entry, never dropped.
    """
    items = list(items)
    grouping = list(grouping)
    if not items:
        raise DataError("cannot evaluate an empty collection of pairs")
    if len(grouping) != len(items):
        raise ShapeError(f"{len(grouping)} labels for {len(items)} pairs")

    per_series = []
    for (pair, rec), label in zip(items, grouping):
        ref = pair.high.values
        rec_vals = _values_of(rec)
        if rec_vals.shape != ref.shape:
            raise ShapeError(
                f"reconstruction length {rec_vals.size} != reference length {ref.size}"
            )
        residuals = group_residuals(pair.low.values, rec_vals, pair.factor)
        scale = np.maximum(1.0, np.abs(pair.low.values))
        violated = bool(np.any(residuals > CONSTRAINT_FLAG_RTOL * scale))

        diff = rec_vals - ref
        sq_sum = float(np.dot(diff, diff))
        errors = window_peak_errors(ref, rec_vals, config)
        err_sum = 0.0
        for e in errors:
            err_sum += e
        per_series.append((label, sq_sum, diff.size, err_sum, len(errors), violated))

    def pooled_entry(group: str, rows) -> MethodMetrics:
        sq_total = 0.0
        n_samples = 0
        err_total = 0.0
        n_windows = 0
        violations = 0
        for _, sq, n, es, nw, viol in rows:
            sq_total += sq
            n_samples += n
            err_total += es
            n_windows += nw
            violations += int(viol)
        return MethodMetrics(
            method=method,
            group=group,
            window_hours=config.window_hours,
            mse=sq_total / n_samples,
            wpe=err_total / n_windows,
            n_series=len(rows),
            n_samples=n_samples,
            n_windows=n_windows,
            constraint_violations=violations,
        )

    entries = []
    for group in sorted({label for label, *_ in per_series}):
        entries.append(pooled_entry(group, [r for r in per_series if r[0] == group]))
    entries.append(pooled_entry(POOLED, per_series))

    report_config = {
        "samples_per_hour": config.samples_per_hour,
        "stride_samples": config.stride_samples,
    }
    return EvalReport(entries, report_config, dict(metadata or {}))
