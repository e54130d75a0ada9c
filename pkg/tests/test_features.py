import numpy as np
import pytest

from anomkit.data import Segment
from anomkit.errors import ConfigError, SchemaError
from anomkit.features import build_features, target_tick_indices

TICK = 1800


def make_segment(n=40, channels=None, start=1672531200, meta=None):
    if channels is None:
        channels = {"t_road": np.linspace(0, 5, n), "t_air": np.cos(np.arange(n))}
    n = len(next(iter(channels.values())))
    ts = start + np.arange(n, dtype=np.int64) * TICK
    return Segment("st01", ts, {k: np.asarray(v, float) for k, v in channels.items()},
                   0, n, meta=meta or {})


def test_shapes_and_row_count():
    seg = make_segment(n=40)
    X, y = build_features(seg, "t_road", lags=6, horizon=1)
    assert X.n == 40 - 6 - 1 + 1
    assert len(y) == X.n
    # 2 channels x 6 lags + 5 diffs + 6 time encodings
    assert X.d == 12 + 5 + 6


def test_constant_series_zero_diffs():
    seg = make_segment(channels={"t_road": np.full(30, 7.5)})
    X, _ = build_features(seg)
    for lag in range(1, 6):
        col = X.values[:, X.column_names.index(f"t_road_dlag{lag}")]
        assert np.all(col == 0.0)


def test_hour_encoding_at_six():
    # anchor the first feature row exactly at 06:00 UTC
    lags, n = 6, 20
    start = 1672531200 + 6 * 3600 - (lags - 1) * TICK
    seg = make_segment(n=n, start=start, channels={"t_road": np.arange(n, dtype=float)})
    X, _ = build_features(seg, lags=lags)
    row = 0
    assert X.values[row, X.column_names.index("hour_sin")] == pytest.approx(1.0)
    assert X.values[row, X.column_names.index("hour_cos")] == pytest.approx(0.0, abs=1e-12)


def test_target_is_next_tick_of_lag1():
    seg = make_segment(channels={"t_road": np.arange(30, dtype=float) + 1})
    X, y = build_features(seg, lags=6, horizon=1)
    lag1 = X.values[:, X.column_names.index("t_road_lag1")]
    assert np.array_equal(y, lag1 + 1)


def test_target_not_among_feature_columns():
    seg = make_segment()
    X, y = build_features(seg)
    for j in range(X.d):
        assert not np.array_equal(X.values[:, j], y)


def test_all_finite():
    seg = make_segment()
    X, _ = build_features(seg)
    assert np.all(np.isfinite(X.values))


def test_lag_alignment():
    vals = np.arange(30, dtype=float) * 10
    seg = make_segment(channels={"t_road": vals})
    X, _ = build_features(seg, lags=6, horizon=1)
    # row r anchors at tick r + lags - 1; lag L is the value L-1 ticks before
    for lag in (1, 3, 6):
        col = X.values[:, X.column_names.index(f"t_road_lag{lag}")]
        anchors = np.arange(X.n) + 5
        assert np.array_equal(col, vals[anchors - (lag - 1)])


def test_meta_passthrough_and_absence():
    seg = make_segment(meta={"latitude": 55.7, "longitude": 37.6})
    X, _ = build_features(seg)
    assert "latitude" in X.column_names
    assert np.all(X.values[:, X.column_names.index("latitude")] == 55.7)
    bare = make_segment()
    Xb, _ = build_features(bare)
    assert "latitude" not in Xb.column_names
    assert Xb.d == X.d - 2


def test_row_keys_are_target_ticks():
    seg = make_segment(n=20)
    X, _ = build_features(seg, lags=6, horizon=1)
    ticks = target_tick_indices(20, 6, 1)
    assert np.array_equal(X.timestamps, seg.timestamps[ticks])
    assert len(ticks) == X.n


def test_too_short_segment_errors():
    seg = make_segment(n=7)
    with pytest.raises(SchemaError, match="too short"):
        build_features(seg, lags=6, horizon=1)


def test_lags_below_six_rejected():
    with pytest.raises(ConfigError):
        build_features(make_segment(), lags=4)


def test_unknown_target_channel():
    with pytest.raises(SchemaError, match="no channel"):
        build_features(make_segment(), target_channel="bogus")
