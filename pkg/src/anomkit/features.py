"""Lagged feature construction for forecast-based detection.

Each row is anchored at one tick of a uniform segment and predicts the
target channel ``horizon`` ticks ahead (one tick = 30 minutes). Lag 1 is the
anchor tick itself, lag 2 the tick before it, and so on, so the target of
row r sits ``horizon`` ticks after its lag-1 value.
"""

from __future__ import annotations

import numpy as np

from .data import FeatureMatrix, Segment
from .errors import ConfigError, SchemaError

META_FEATURES = ("latitude", "longitude", "road_id")


def target_tick_indices(n_ticks: int, lags: int, horizon: int = 1) -> np.ndarray:
    """Segment tick index of each feature row's target value."""
    return np.arange(lags - 1 + horizon, n_ticks)


def _time_encodings(ts: np.ndarray) -> dict[str, np.ndarray]:
    hour = (ts % 86400) / 3600.0
    days = ts.astype("datetime64[s]").astype("datetime64[D]")
    years = days.astype("datetime64[Y]")
    months = days.astype("datetime64[M]")
    doy = (days - years.astype("datetime64[D]")).astype(np.int64)  # 0-based
    month = (months - years.astype("datetime64[M]")).astype(np.int64)  # 0-based
    two_pi = 2.0 * np.pi
    return {
        "hour_sin": np.sin(two_pi * hour / 24.0),
        "hour_cos": np.cos(two_pi * hour / 24.0),
        "doy_sin": np.sin(two_pi * doy / 366.0),
        "doy_cos": np.cos(two_pi * doy / 366.0),
        "month_sin": np.sin(two_pi * month / 12.0),
        "month_cos": np.cos(two_pi * month / 12.0),
    }


def build_features(
    segment: Segment,
    target_channel: str = "t_road",
    lags: int = 6,
    horizon: int = 1,
):
    """Build the per-tick design matrix and forecast target for one segment.

    Columns: ``lags`` lagged values per channel, the differences between the
    target channel's first six lags, cyclic encodings of hour / day-of-year /
    month at the anchor tick, and any numeric station metadata. Returns
    (FeatureMatrix, target array); row r's target is the target channel at
    tick ``lags - 1 + horizon + r``.
    """
    if lags < 6:
        raise ConfigError(f"lags must be >= 6 (got {lags})")
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1 (got {horizon})")
    if target_channel not in segment.channels:
        raise SchemaError(f"segment has no channel {target_channel!r}")
    n = segment.n
    if n <= lags + horizon:
        raise SchemaError(
            f"segment length {n} too short for lags={lags}, horizon={horizon}"
        )
    m = n - lags - horizon + 1
    anchors = np.arange(lags - 1, n - horizon)

    cols: list[np.ndarray] = []
    names: list[str] = []
    for name in segment.channels:
        series = segment.channels[name]
        for lag in range(1, lags + 1):
            cols.append(series[anchors - (lag - 1)])
            names.append(f"{name}_lag{lag}")

    target_series = segment.channels[target_channel]
    for lag in range(1, 6):
        diff = target_series[anchors - (lag - 1)] - target_series[anchors - lag]
        cols.append(diff)
        names.append(f"{target_channel}_dlag{lag}")

    for name, values in _time_encodings(segment.timestamps[anchors]).items():
        cols.append(values)
        names.append(name)

    for key in META_FEATURES:
        if key in segment.meta:
            cols.append(np.full(m, float(segment.meta[key])))
            names.append(key)

    matrix = FeatureMatrix(
        np.column_stack(cols),
        names,
        station_ids=np.full(m, segment.station_id, dtype=object),
        timestamps=segment.timestamps[anchors + horizon],
    )
    target = target_series[anchors + horizon].copy()
    return matrix, target
