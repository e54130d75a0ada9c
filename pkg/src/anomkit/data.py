"""Sensor corpus ingestion, preprocessing, and split construction.

The raw corpus is a set of per-station multichannel records sampled roughly
twice per hour. Preprocessing cuts each station's series at large gaps,
drops short fragments, and resamples the survivors onto a uniform 30-minute
grid so that downstream lag features and tick-based labels line up.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError, SchemaError

DEFAULT_CHANNELS = ("t_air", "t_road", "t_sub", "pressure", "humidity")

TICK_SECONDS = 1800  # uniform grid period: two measurements per hour


@dataclass
class TimeSeriesFrame:
    """One station's multichannel record.

    timestamps are UTC epoch seconds, strictly increasing. Every channel
    array has the same length as timestamps. ``meta`` optionally carries
    numeric station attributes (latitude, longitude, road_id) that feature
    construction passes through when present.
    """

    station_id: str
    timestamps: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.timestamps.ndim != 1:
            raise SchemaError("timestamps must be one-dimensional")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise SchemaError(
                f"station {self.station_id!r}: timestamps must be strictly increasing"
            )
        if not self.channels:
            raise SchemaError(f"station {self.station_id!r}: no channels")
        clean = {}
        for name, values in self.channels.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != self.timestamps.shape:
                raise SchemaError(
                    f"station {self.station_id!r}: channel {name!r} has length "
                    f"{len(arr)}, expected {len(self.timestamps)}"
                )
            clean[name] = arr
        self.channels = clean

    @property
    def n(self) -> int:
        return len(self.timestamps)

    def channel_names(self) -> list[str]:
        return list(self.channels)


@dataclass
class Segment:
    """A contiguous, gap-free slice of one station's record.

    ``source_start``/``source_stop`` index the parent frame's tick range the
    segment was cut from; after resampling the tick count may differ from
    that range but the provenance is kept.
    """

    station_id: str
    timestamps: np.ndarray
    channels: dict[str, np.ndarray]
    source_start: int
    source_stop: int
    meta: dict[str, float] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.timestamps)

    @property
    def duration_hours(self) -> float:
        if self.n < 2:
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0]) / 3600.0


@dataclass
class FeatureMatrix:
    """Dense numeric design matrix with named columns and optional row keys."""

    values: np.ndarray
    column_names: list[str]
    station_ids: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    segment_ids: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise SchemaError("feature values must be a 2-D array")
        if self.values.shape[1] != len(self.column_names):
            raise SchemaError(
                f"{self.values.shape[1]} columns but {len(self.column_names)} names"
            )
        if len(self.column_names) == 0:
            raise SchemaError("feature matrix needs at least one column")
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("column names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("feature matrix contains non-finite values")
        for attr in ("station_ids", "timestamps", "segment_ids"):
            keys = getattr(self, attr)
            if keys is not None and len(keys) != self.n:
                raise SchemaError(f"{attr} length does not match row count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def take_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]
        return FeatureMatrix(
            self.values[idx],
            list(self.column_names),
            station_ids=pick(self.station_ids),
            timestamps=pick(self.timestamps),
            segment_ids=pick(self.segment_ids),
        )

    @staticmethod
    def vstack(parts: list["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            raise SchemaError("cannot stack zero feature matrices")
        names = parts[0].column_names
        for p in parts[1:]:
            if p.column_names != names:
                raise SchemaError("cannot stack matrices with different columns")
        cat = lambda attr: (
            None
            if any(getattr(p, attr) is None for p in parts)
            else np.concatenate([getattr(p, attr) for p in parts])
        )
        return FeatureMatrix(
            np.vstack([p.values for p in parts]),
            list(names),
            station_ids=cat("station_ids"),
            timestamps=cat("timestamps"),
            segment_ids=cat("segment_ids"),
        )


@dataclass
class LabelVector:
    """Binary instance marks plus the tick radius their vicinity semantics use."""

    marks: np.ndarray
    vicinity_radius: int = 0

    def __post_init__(self):
        self.marks = np.asarray(self.marks)
        if self.marks.ndim != 1:
            raise SchemaError("label marks must be one-dimensional")
        if not np.isin(self.marks, (0, 1)).all():
            raise SchemaError("label marks must be 0/1")
        self.marks = self.marks.astype(np.uint8)
        if self.vicinity_radius < 0:
            raise SchemaError("vicinity_radius must be non-negative")

    def __len__(self) -> int:
        return len(self.marks)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def _parse_timestamp(text: str) -> int:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _format_timestamp(seconds: int) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def load_timeseries_csv(path, schema=DEFAULT_CHANNELS) -> list[TimeSeriesFrame]:
    """Read a station corpus CSV into one frame per station.

    Expected header: ``station_id,timestamp,<channel...>`` with the channel
    columns exactly matching ``schema``. Rows may arrive unsorted; they are
    sorted per station. Duplicate (station, timestamp) pairs are rejected.
    """
    schema = list(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        expected = ["station_id", "timestamp"] + schema
        if header != expected:
            raise SchemaError(
                f"{path}: header {header!r} does not match schema {expected!r}"
            )
        per_station: dict[str, list[tuple[int, list[float]]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}"
                )
            try:
                ts = _parse_timestamp(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed row ({exc})") from None
            per_station.setdefault(row[0], []).append((ts, vals))

    frames = []
    for station_id in sorted(per_station):
        rows = sorted(per_station[station_id], key=lambda r: r[0])
        ts = np.array([r[0] for r in rows], dtype=np.int64)
        if len(ts) > 1 and np.any(np.diff(ts) == 0):
            dup = int(ts[np.where(np.diff(ts) == 0)[0][0]])
            raise SchemaError(
                f"{path}: duplicate timestamp {_format_timestamp(dup)} "
                f"for station {station_id!r}"
            )
        values = np.array([r[1] for r in rows], dtype=np.float64)
        channels = {name: values[:, i] for i, name in enumerate(schema)}
        frames.append(TimeSeriesFrame(station_id, ts, channels))
    return frames


def write_timeseries_csv(frames: list[TimeSeriesFrame], path) -> None:
    """Write frames to CSV in the load_timeseries_csv layout (round-trip safe)."""
    if not frames:
        raise SchemaError("no frames to write")
    schema = frames[0].channel_names()
    for f in frames:
        if f.channel_names() != schema:
            raise SchemaError("all frames must share one channel schema")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_id", "timestamp"] + schema)
        for f in frames:
            for i in range(f.n):
                writer.writerow(
                    [f.station_id, _format_timestamp(f.timestamps[i])]
                    + [repr(float(f.channels[c][i])) for c in schema]
                )


def load_tabular_csv(path, label_column: str = "label"):
    """Read a plain tabular CSV (feature header + optional 0/1 label column).

    Returns (FeatureMatrix, LabelVector or None).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        has_label = label_column in header
        label_idx = header.index(label_column) if has_label else -1
        feat_names = [h for h in header if h != label_column]
        if not feat_names:
            raise SchemaError(f"{path}: no feature columns")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                vals = [float(v) for j, v in enumerate(row) if j != label_idx]
                if has_label:
                    labels.append(int(float(row[label_idx])))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed row ({exc})") from None
            rows.append(vals)
    values = (
        np.array(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(feat_names)))
    )
    X = FeatureMatrix(values, feat_names)
    y = LabelVector(np.array(labels, dtype=np.uint8)) if has_label else None
    return X, y


def write_tabular_csv(X: FeatureMatrix, path, labels: LabelVector | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(X.column_names) + (["label"] if labels is not None else [])
        writer.writerow(header)
        for i in range(X.n):
            row = [repr(float(v)) for v in X.values[i]]
            if labels is not None:
                row.append(str(int(labels.marks[i])))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Gap splitting and resampling
# ---------------------------------------------------------------------------

def split_on_gaps(
    frame: TimeSeriesFrame,
    max_gap_hours: float = 2.0,
    min_duration_hours: float = 12.0,
) -> list[Segment]:
    """Cut a frame at every inter-tick gap above ``max_gap_hours``.

    Fragments spanning less than ``min_duration_hours`` are dropped; an empty
    result is legitimate.
    """
    if frame.n == 0:
        return []
    gaps = np.diff(frame.timestamps)
    cuts = np.where(gaps > max_gap_hours * 3600.0)[0]
    bounds = np.concatenate([[0], cuts + 1, [frame.n]])
    segments = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        seg = Segment(
            station_id=frame.station_id,
            timestamps=frame.timestamps[start:stop].copy(),
            channels={c: v[start:stop].copy() for c, v in frame.channels.items()},
            source_start=int(start),
            source_stop=int(stop),
            meta=dict(frame.meta),
        )
        if seg.duration_hours >= min_duration_hours:
            segments.append(seg)
    return segments


def interpolate_linear(segment: Segment, period_seconds: int = TICK_SECONDS) -> Segment:
    """Resample a segment onto a uniform grid by per-channel linear interpolation.

    The grid is anchored at the segment's first timestamp. A segment that is
    already on the grid comes back with identical values.
    """
    if segment.n < 2:
        raise SchemaError(
            f"segment of station {segment.station_id!r} has {segment.n} ticks; "
            "need at least 2 to interpolate"
        )
    t0, t1 = int(segment.timestamps[0]), int(segment.timestamps[-1])
    grid = np.arange(t0, t1 + 1, period_seconds, dtype=np.int64)
    src = segment.timestamps.astype(np.float64)
    channels = {
        name: np.interp(grid.astype(np.float64), src, values)
        for name, values in segment.channels.items()
    }
    return Segment(
        station_id=segment.station_id,
        timestamps=grid,
        channels=channels,
        source_start=segment.source_start,
        source_stop=segment.source_stop,
        meta=dict(segment.meta),
    )


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

@dataclass
class SplitPlan:
    """Fractions for the train / threshold-selection / test partition."""

    train_fraction: float
    threshold_fraction: float
    test_fraction: float
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.threshold_fraction, self.test_fraction)
        for f in fracs:
            if not 0.0 <= f <= 1.0:
                raise ConfigError(f"split fraction {f} outside [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ConfigError(f"split fractions sum to {sum(fracs)}, expected 1")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.threshold_fraction, self.test_fraction)


def _allocate_counts(n: int, fractions) -> list[int]:
    """Largest-remainder allocation of n units over fractions; errors if a
    nonzero fraction gets zero units."""
    raw = [f * n for f in fractions]
    counts = [math.floor(r) for r in raw]
    short = n - sum(counts)
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(raw[i] - counts[i]), i)
    )
    for i in remainders[:short]:
        counts[i] += 1
    for f, c in zip(fractions, counts):
        if f > 0 and c == 0:
            raise ConfigError(
                f"split fraction {f} requires at least one unit but received none "
                f"(only {n} units available)"
            )
    return counts


def split_stations(frames: list[TimeSeriesFrame], plan: SplitPlan):
    """Assign whole stations to the three splits. Deterministic in plan.seed."""
    n = len(frames)
    counts = _allocate_counts(n, plan.fractions)
    order = np.random.default_rng(plan.seed).permutation(n)
    picks = []
    at = 0
    for c in counts:
        picks.append([frames[i] for i in sorted(order[at : at + c])])
        at += c
    return tuple(picks)


def split_rows(
    X: FeatureMatrix,
    labels: LabelVector | None,
    plan: SplitPlan,
    normal_only_threshold: bool = True,
):
    """Row-sampled split: test rows first, then the remainder divided between
    train and threshold. When labels are given, the threshold part keeps only
    normal-class rows (the threshold split must be presumed anomaly-free).
    """
    n = X.n
    counts = _allocate_counts(n, plan.fractions)
    n_train, n_thresh, n_test = counts
    order = np.random.default_rng(plan.seed).permutation(n)
    test_idx = np.sort(order[:n_test])
    rest = order[n_test:]
    train_idx = np.sort(rest[:n_train])
    thresh_idx = np.sort(rest[n_train : n_train + n_thresh])
    if labels is not None and normal_only_threshold:
        thresh_idx = thresh_idx[labels.marks[thresh_idx] == 0]
    take = lambda idx: (
        X.take_rows(idx),
        None if labels is None else LabelVector(labels.marks[idx], labels.vicinity_radius),
    )
    return take(train_idx), take(thresh_idx), take(test_idx)


def make_splits(units, plan: SplitPlan, mode: str = "by_station"):
    """Partition data into (train, threshold, test) by whole stations or rows.

    ``by_station`` takes a list of frames and returns three frame lists.
    ``by_row`` takes (FeatureMatrix, LabelVector|None) and returns three
    (FeatureMatrix, LabelVector|None) pairs, with the threshold part
    restricted to normal-class rows when labels exist.
    """
    if mode == "by_station":
        return split_stations(list(units), plan)
    if mode == "by_row":
        X, labels = units
        return split_rows(X, labels, plan)
    raise ConfigError(f"unknown split mode {mode!r}")
