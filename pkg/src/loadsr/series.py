"""Core interval-data types and conservative resampling.

An interval series holds per-interval energy totals (kWh). The central
invariant of the whole package is group-wise energy conservation: each
low-resolution value equals the sum of the S high-resolution values that
subdivide it. Every operation here either preserves that invariant exactly
or checks it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import AllocationError, GapError, InvalidFactorError, NumericError, ShapeError

EPOCH = datetime(2018, 1, 1, tzinfo=timezone.utc)

# Allocation matrices are plain (K, S) float arrays whose rows sum to one.
AllocationMatrix = np.ndarray


def _as_readonly_f64(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"values must be one-dimensional, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class IntervalSeries:
    """A regularly sampled sequence of per-interval energy values (kWh).

    Values may be negative (net export of on-site solar generation). The
    optional gap mask marks intervals whose value is unknown; only the
    ingestion pipeline produces gapped series, and every algorithmic
    operation refuses them.
    """

    household_id: str
    start_time: datetime
    interval_seconds: int
    values: np.ndarray
    gaps: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.interval_seconds <= 0:
            raise ShapeError(f"interval_seconds must be positive, got {self.interval_seconds}")
        object.__setattr__(self, "values", _as_readonly_f64(self.values))
        if self.values.size < 1:
            raise ShapeError("series must contain at least one value")
        if self.start_time.tzinfo is None:
            raise ShapeError("start_time must be timezone-aware (UTC)")
        if self.gaps is not None:
            gaps = np.asarray(self.gaps, dtype=bool).copy()
            if gaps.shape != self.values.shape:
                raise ShapeError("gap mask shape does not match values")
            gaps.setflags(write=False)
            object.__setattr__(self, "gaps", gaps)
            finite_needed = ~gaps
        else:
            finite_needed = np.ones_like(self.values, dtype=bool)
        if not np.all(np.isfinite(self.values[finite_needed])):
            raise NumericError(f"non-finite values in series {self.household_id!r}")

    def __len__(self) -> int:
        return self.values.size

    @property
    def has_gaps(self) -> bool:
        return self.gaps is not None and bool(self.gaps.any())

    def end_time(self) -> datetime:
        return self.start_time + timedelta(seconds=self.interval_seconds * len(self))

    def with_values(self, values, interval_seconds: int | None = None) -> "IntervalSeries":
        """Copy of this series with new values (and optionally a new cadence)."""
        return IntervalSeries(
            household_id=self.household_id,
            start_time=self.start_time,
            interval_seconds=self.interval_seconds if interval_seconds is None else interval_seconds,
            values=values,
        )


def _require_gap_free(series: IntervalSeries):
    if series.has_gaps:
        raise GapError(
            f"series {series.household_id!r} contains gaps; run ingest.clean_gaps first"
        )


def _validate_factor(factor: int):
    if not isinstance(factor, (int, np.integer)) or isinstance(factor, bool):
        raise InvalidFactorError(f"factor must be an integer, got {factor!r}")
    if factor < 2:
        raise InvalidFactorError(f"factor must be >= 2, got {factor}")


@dataclass(frozen=True)
class SrPair:
    """An aligned (low, high) resolution pair related by an integer factor.

    Construction verifies shape consistency and group-wise energy
    conservation at 1e-9 relative, so an SrPair in hand is always a valid
    training or evaluation example.
    """

    low: IntervalSeries
    high: IntervalSeries
    factor: int

    CONSTRAINT_RTOL = 1e-9

    def __post_init__(self):
        _validate_factor(self.factor)
        if len(self.high) != self.factor * len(self.low):
            raise ShapeError(
                f"high length {len(self.high)} != factor {self.factor} x low length {len(self.low)}"
            )
        if self.high.interval_seconds * self.factor != self.low.interval_seconds:
            raise ShapeError(
                "interval mismatch: "
                f"{self.high.interval_seconds}s x {self.factor} != {self.low.interval_seconds}s"
            )
        _require_gap_free(self.low)
        _require_gap_free(self.high)
        report = check_energy_constraint(self, self.CONSTRAINT_RTOL, _validate=False)
        if not report.passed:
            raise ShapeError(
                f"energy constraint violated at construction: max residual {report.max_residual:.3e}"
            )


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of an energy-conservation check on an (low, high) pair."""

    residuals: np.ndarray
    max_residual: float
    tolerance: float
    passed: bool


def group_sums(high_values: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of `factor` high-resolution values."""
    high_values = np.asarray(high_values, dtype=np.float64)
    if high_values.size % factor != 0:
        raise ShapeError(f"length {high_values.size} not divisible by factor {factor}")
    return high_values.reshape(-1, factor).sum(axis=1)


def group_residuals(low_values: np.ndarray, high_values: np.ndarray, factor: int) -> np.ndarray:
    """Per-group absolute residual |s_k - sum of the k-th group of high values|."""
    low_values = np.asarray(low_values, dtype=np.float64)
    sums = group_sums(high_values, factor)
    if sums.shape != low_values.shape:
        raise ShapeError(f"low length {low_values.size} != {sums.size} groups of {factor}")
    return np.abs(low_values - sums)


def downsample(high: IntervalSeries, factor: int) -> IntervalSeries:
    """Aggregate a high-resolution series by summing groups of `factor` values.

    The result together with the input forms a valid SrPair: summation is
    exact energy conservation.
    """
    _validate_factor(factor)
    _require_gap_free(high)
    if len(high) % factor != 0:
        raise ShapeError(f"series length {len(high)} not divisible by factor {factor}")
    return high.with_values(
        group_sums(high.values, factor),
        interval_seconds=high.interval_seconds * factor,
    )


def _high_interval_seconds(low: IntervalSeries, factor: int) -> int:
    if low.interval_seconds % factor != 0:
        raise ShapeError(
            f"interval of {low.interval_seconds}s does not divide into {factor} equal intervals"
        )
    return low.interval_seconds // factor


def baseline_upsample(low: IntervalSeries, factor: int) -> IntervalSeries:
    """Piecewise-constant upsampling: each value is split into `factor` equal parts."""
    _validate_factor(factor)
    _require_gap_free(low)
    high = np.repeat(low.values / factor, factor)
    return low.with_values(high, interval_seconds=_high_interval_seconds(low, factor))


def check_energy_constraint(pair: SrPair, tolerance: float, _validate: bool = True) -> ConstraintReport:
    """Check group-wise conservation of an SrPair.

    Passes iff every residual_k <= tolerance * max(1, |s_k|); the max(1, .)
    floor keeps near-zero intervals from failing on roundoff alone.
    """
    if _validate and not isinstance(pair, SrPair):
        raise ShapeError(f"expected an SrPair, got {type(pair).__name__}")
    residuals = group_residuals(pair.low.values, pair.high.values, pair.factor)
    scale = np.maximum(1.0, np.abs(pair.low.values))
    passed = bool(np.all(residuals <= tolerance * scale))
    return ConstraintReport(
        residuals=residuals,
        max_residual=float(residuals.max()),
        tolerance=float(tolerance),
        passed=passed,
    )


ALLOCATION_ROW_SUM_RTOL = 1e-9


def validate_allocations(alloc: AllocationMatrix, factor: int | None = None,
                         rtol: float = ALLOCATION_ROW_SUM_RTOL) -> np.ndarray:
    """Validate an allocation matrix: 2-D, finite, rows summing to one."""
    alloc = np.asarray(alloc, dtype=np.float64)
    if alloc.ndim != 2:
        raise ShapeError(f"allocation matrix must be 2-D, got shape {alloc.shape}")
    if factor is not None and alloc.shape[1] != factor:
        raise ShapeError(f"allocation rows have length {alloc.shape[1]}, expected {factor}")
    if not np.all(np.isfinite(alloc)):
        raise NumericError("allocation matrix contains non-finite entries")
    row_sums = alloc.sum(axis=1)
    bad = np.abs(row_sums - 1.0) > rtol
    if bad.any():
        k = int(np.argmax(bad))
        raise AllocationError(f"allocation row {k} sums to {row_sums[k]!r}, expected 1")
    return alloc


def reconstruct_from_allocations(low: IntervalSeries, alloc: AllocationMatrix) -> IntervalSeries:
    """Scale each low value by its row of allocation factors.

    high[k*S + j] = alloc[k][j] * low[k]; because rows sum to one the
    result conserves energy to floating-point precision.
    """
    _require_gap_free(low)
    alloc = validate_allocations(alloc)
    if alloc.shape[0] != len(low):
        raise ShapeError(f"allocation has {alloc.shape[0]} rows for {len(low)} low intervals")
    factor = int(alloc.shape[1])
    _validate_factor(factor)
    high = (alloc * low.values[:, None]).reshape(-1)
    return low.with_values(high, interval_seconds=_high_interval_seconds(low, factor))
