"""CSV ingestion, gap handling, and dataset splitting.

The CSV layout is one reading per row (timestamp, household, power), with
the power column either average kW over the interval or per-interval kWh.
All algorithms downstream operate on energy, so kW readings are converted
on the way in.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import timedelta, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, GapError, IngestError, SeriesTooShortError, ShapeError, SplitError
from .series import IntervalSeries, SrPair

log = logging.getLogger(__name__)

POWER_UNITS = ("kW_average", "kWh_interval")


@dataclass(frozen=True)
class CsvSchema:
    """Column names and units of a meter-reading CSV."""

    timestamp_column: str = "timestamp"
    household_column: str = "household_id"
    power_column: str = "energy_kwh"
    power_unit: str = "kWh_interval"
    expected_interval_seconds: int = 900

    def __post_init__(self):
        cols = (self.timestamp_column, self.household_column, self.power_column)
        if len(set(cols)) != 3:
            raise DataError(f"schema columns must be distinct, got {cols}")
        if self.power_unit not in POWER_UNITS:
            raise DataError(f"power_unit must be one of {POWER_UNITS}, got {self.power_unit!r}")
        if self.expected_interval_seconds <= 0:
            raise DataError("expected_interval_seconds must be positive")

    def to_kwh(self, power: np.ndarray) -> np.ndarray:
        if self.power_unit == "kW_average":
            return power * (self.expected_interval_seconds / 3600.0)
        return power

    def from_kwh(self, energy: np.ndarray) -> np.ndarray:
        if self.power_unit == "kW_average":
            return energy / (self.expected_interval_seconds / 3600.0)
        return energy


def load_csv(path, schema: CsvSchema) -> list[IntervalSeries]:
    """Read a meter CSV into one IntervalSeries per household.

    Rows must land on each household's regular time grid; missing grid
    slots and missing/non-finite power values become gap marks for
    clean_gaps to resolve. Error messages name file line numbers (the
    header is line 1).
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    try:
        # round_trip parsing keeps the CSV <-> series round trip exact
        df = pd.read_csv(path, dtype={schema.household_column: str},
                         float_precision="round_trip")
    except Exception as exc:
        raise IngestError(f"cannot parse {path}: {exc}") from exc
    for col in (schema.timestamp_column, schema.household_column, schema.power_column):
        if col not in df.columns:
            raise IngestError(f"{path}: missing column {col!r}; found {list(df.columns)}")

    try:
        stamps = pd.to_datetime(df[schema.timestamp_column], utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise IngestError(f"{path}: unparseable timestamps: {exc}") from exc
    power = pd.to_numeric(df[schema.power_column], errors="coerce").to_numpy(dtype=np.float64)

    step = timedelta(seconds=schema.expected_interval_seconds)
    out = []
    for household, idx in sorted(df.groupby(schema.household_column).groups.items()):
        rows = np.asarray(idx)
        times = stamps.iloc[rows]
        order = np.argsort(times.to_numpy(), kind="stable")
        if not np.array_equal(order, np.arange(len(rows))):
            bad = rows[int(np.flatnonzero(order != np.arange(len(rows)))[0])]
            raise IngestError(
                f"{path} line {bad + 2}: timestamps for household {household!r} are not increasing"
            )
        t0 = times.iloc[0].to_pydatetime()
        offsets = (times - times.iloc[0]).dt.total_seconds().to_numpy()
        slots_f = offsets / schema.expected_interval_seconds
        slots = np.rint(slots_f).astype(np.int64)
        misaligned = np.abs(slots_f - slots) > 1e-9
        if misaligned.any():
            bad = rows[int(np.flatnonzero(misaligned)[0])]
            raise IngestError(
                f"{path} line {bad + 2}: timestamp off the {schema.expected_interval_seconds}s "
                f"grid for household {household!r}"
            )
        dup = np.flatnonzero(np.diff(slots) == 0)
        if dup.size:
            bad = rows[int(dup[0]) + 1]
            raise IngestError(
                f"{path} line {bad + 2}: duplicate timestamp for household {household!r}"
            )

        n = int(slots[-1]) + 1
        values = np.full(n, np.nan)
        values[slots] = schema.to_kwh(power[rows])
        gaps = ~np.isfinite(values)
        values[gaps] = 0.0
        out.append(IntervalSeries(
            household_id=str(household),
            start_time=t0.astimezone(timezone.utc),
            interval_seconds=schema.expected_interval_seconds,
            values=values,
            gaps=gaps if gaps.any() else None,
        ))
    if not out:
        raise IngestError(f"{path}: no data rows")
    return out


def save_corpus_csv(labelled_series, path, schema: CsvSchema) -> None:
    """Write (series, label) pairs in the ingest CSV layout.

    Floats are written with repr so a load_csv round trip is exact.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([schema.timestamp_column, schema.household_column, schema.power_column])
        for series, _label in labelled_series:
            if series.interval_seconds != schema.expected_interval_seconds:
                raise ShapeError(
                    f"series cadence {series.interval_seconds}s does not match schema "
                    f"{schema.expected_interval_seconds}s"
                )
            out_vals = schema.from_kwh(series.values)
            step = timedelta(seconds=series.interval_seconds)
            for k, v in enumerate(out_vals):
                stamp = (series.start_time + k * step).isoformat()
                writer.writerow([stamp, series.household_id, repr(float(v))])


def clean_gaps(series: IntervalSeries, policy: str = "drop_day") -> list[IntervalSeries]:
    """Resolve gap marks into gap-free, whole-day segments.

    drop_day removes every UTC calendar day that contains a gap (or is only
    partially covered) and splits the series at the removed days; fail
    raises on the first gap. Raises GapError when nothing survives.
    """
    if policy not in ("drop_day", "fail"):
        raise DataError(f"unknown gap policy {policy!r}")
    if 86400 % series.interval_seconds != 0:
        raise DataError(f"interval {series.interval_seconds}s does not divide a day")
    per_day = 86400 // series.interval_seconds

    gaps = series.gaps if series.gaps is not None else np.zeros(len(series), dtype=bool)
    if policy == "fail" and gaps.any():
        first = int(np.flatnonzero(gaps)[0])
        stamp = series.start_time + timedelta(seconds=first * series.interval_seconds)
        raise GapError(f"household {series.household_id!r} has a gap at {stamp.isoformat()}")

    start = series.start_time.astimezone(timezone.utc)
    midnight = start.replace(hour=0, minute=0, second=0, microsecond=0)
    lead = int((start - midnight).total_seconds()) // series.interval_seconds
    # index of the first sample of the first fully covered day
    first_full = 0 if lead == 0 else per_day - lead
    n_days = (len(series) - first_full) // per_day

    keep = []
    for d in range(n_days):
        lo = first_full + d * per_day
        if not gaps[lo:lo + per_day].any():
            keep.append(d)
    if not keep:
        raise GapError(f"household {series.household_id!r}: no complete gap-free days")

    segments = []
    run = [keep[0]]
    for d in keep[1:]:
        if d == run[-1] + 1:
            run.append(d)
        else:
            segments.append(run)
            run = [d]
    segments.append(run)

    out = []
    for run in segments:
        lo = first_full + run[0] * per_day
        hi = first_full + (run[-1] + 1) * per_day
        out.append(IntervalSeries(
            household_id=series.household_id,
            start_time=start + timedelta(seconds=lo * series.interval_seconds),
            interval_seconds=series.interval_seconds,
            values=series.values[lo:hi],
        ))
    return out


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint household-level train/test assignment with region labels."""

    train_household_ids: tuple
    test_household_ids: tuple
    regions: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        overlap = set(self.train_household_ids) & set(self.test_household_ids)
        if overlap:
            raise SplitError(f"households in both train and test: {sorted(overlap)}")


def make_split(regions_by_household: dict, train_spec: dict, seed: int = 0) -> DatasetSplit:
    """Draw a deterministic per-region train/test split.

    train_spec maps region -> number of training households; every
    remaining household (including all of any region with count 0 or no
    entry) goes to test.
    """
    rng = np.random.default_rng(seed)
    by_region: dict[str, list[str]] = {}
    for household, region in regions_by_household.items():
        by_region.setdefault(region, []).append(household)
    for region in train_spec:
        if region not in by_region and train_spec[region] > 0:
            raise SplitError(f"region {region!r} has no households")

    train, test = [], []
    for region in sorted(by_region):
        ids = sorted(by_region[region])
        want = int(train_spec.get(region, 0))
        if want > len(ids):
            raise SplitError(
                f"region {region!r} has {len(ids)} households, {want} requested for training"
            )
        picked = rng.permutation(len(ids))
        train.extend(ids[i] for i in picked[:want])
        test.extend(ids[i] for i in picked[want:])
    return DatasetSplit(
        train_household_ids=tuple(sorted(train)),
        test_household_ids=tuple(sorted(test)),
        regions=dict(regions_by_household),
        seed=seed,
    )


def save_split(split: DatasetSplit, path) -> None:
    doc = {
        "train": list(split.train_household_ids),
        "test": list(split.test_household_ids),
        "regions": {k: split.regions[k] for k in sorted(split.regions)},
        "seed": split.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_split(path) -> DatasetSplit:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return DatasetSplit(
        train_household_ids=tuple(doc["train"]),
        test_household_ids=tuple(doc["test"]),
        regions=dict(doc["regions"]),
        seed=int(doc["seed"]),
    )


def sub_series(series: IntervalSeries, start: int, length: int) -> IntervalSeries:
    """Contiguous slice of a series, with the start time shifted to match."""
    if start < 0 or start + length > len(series):
        raise ShapeError(f"slice [{start}, {start + length}) outside series of {len(series)}")
    return IntervalSeries(
        household_id=series.household_id,
        start_time=series.start_time + timedelta(seconds=start * series.interval_seconds),
        interval_seconds=series.interval_seconds,
        values=series.values[start:start + length],
    )


def window_pair(pair: SrPair, start_low: int, length_low: int) -> SrPair:
    """Aligned (low, high) sub-window of an SrPair."""
    return SrPair(
        low=sub_series(pair.low, start_low, length_low),
        high=sub_series(pair.high, start_low * pair.factor, length_low * pair.factor),
        factor=pair.factor,
    )


def window_dataset(pairs, window_hours: int, stride_hours: int) -> list[SrPair]:
    """Cut full (low, high) windows out of every pair.

    Window and stride are in hours at the low resolution; only full windows
    are emitted. Pairs too short for one window are skipped with a logged
    count; zero windows overall is an error.
    """
    if window_hours < 1 or stride_hours < 1:
        raise ShapeError("window_hours and stride_hours must be >= 1")
    windows = []
    skipped = 0
    for pair in pairs:
        if 3600 % pair.low.interval_seconds != 0:
            raise ShapeError(
                f"low cadence {pair.low.interval_seconds}s does not divide an hour"
            )
        per_hour = 3600 // pair.low.interval_seconds
        length = window_hours * per_hour
        stride = stride_hours * per_hour
        if len(pair.low) < length:
            skipped += 1
            continue
        for start in range(0, len(pair.low) - length + 1, stride):
            windows.append(window_pair(pair, start, length))
    if skipped:
        log.info("window_dataset: skipped %d series shorter than %dh", skipped, window_hours)
    if not windows:
        raise SeriesTooShortError(
            f"no series long enough for a single {window_hours}h window"
        )
    return windows


def split_train_val_days(series: IntervalSeries, val_fraction: float = 0.1):
    """Hold out the trailing fraction of whole days for validation."""
    if not 0.0 < val_fraction < 1.0:
        raise DataError(f"val_fraction must be in (0, 1), got {val_fraction}")
    per_day = 86400 // series.interval_seconds
    n_days = len(series) // per_day
    if n_days < 2:
        raise SeriesTooShortError(
            f"need at least 2 whole days to split train/val, have {n_days}"
        )
    val_days = max(1, int(n_days * val_fraction))
    train_days = n_days - val_days
    train = sub_series(series, 0, train_days * per_day)
    val = sub_series(series, train_days * per_day, val_days * per_day)
    return train, val


def corpus_digest(series_list) -> str:
    """Stable digest over household ids, geometry, and values."""
    h = hashlib.sha256()
    for series in sorted(series_list, key=lambda s: (s.household_id, s.start_time)):
        h.update(series.household_id.encode())
        h.update(series.start_time.isoformat().encode())
        h.update(str(series.interval_seconds).encode())
        h.update(np.ascontiguousarray(series.values).tobytes())
    return h.hexdigest()
