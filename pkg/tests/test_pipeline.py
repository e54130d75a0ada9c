import json

import numpy as np
import pytest

from anomkit.data import FeatureMatrix, LabelVector, write_tabular_csv, write_timeseries_csv
from anomkit.errors import ConfigError
from anomkit.pipeline import PipelineConfig, run_pipeline
from anomkit.weather import gen_weather_corpus


def write_corpus(tmp_path, n_stations=4, days=4, seed=0):
    path = tmp_path / "corpus.csv"
    write_timeseries_csv(gen_weather_corpus(n_stations, days, seed), path)
    return path


def ts_config(path, seed=3, **overrides):
    base = {
        "mode": "timeseries",
        "data_paths": [str(path)],
        "seed": seed,
        "split": {"train": 0.5, "threshold": 0.25, "test": 0.25},
        "ensemble": {"type": "model_average", "kinds": ["ridge", "iforest"]},
        "combiner": "LT",
        "detector_params": {"iforest": {"n_trees": 20, "subsample": 64}},
        "generator": {
            "n_single": 6, "n_short": 3, "n_long": 1,
            "long_dur_low": 10, "long_dur_high": 24,
        },
        "metric": {"kind": "neighborhood", "radius": 5},
    }
    base.update(overrides)
    return PipelineConfig.from_dict(base)


def make_tabular(tmp_path, rng, n=400, d=5, outlier_rate=0.06):
    X = rng.normal(size=(n, d)) * np.linspace(2.0, 0.5, d)
    X[:, 0] = X[:, 1] * 1.5 - X[:, 2] + rng.normal(0, 0.1, n)
    labels = np.zeros(n, dtype=np.uint8)
    n_out = int(n * outlier_rate)
    labels[:n_out] = 1
    X[:n_out] += rng.normal(0, 12, size=(n_out, d))
    perm = rng.permutation(n)
    path = tmp_path / "tabular.csv"
    write_tabular_csv(
        FeatureMatrix(X[perm], [f"f{i}" for i in range(d)]),
        path,
        labels=LabelVector(labels[perm]),
    )
    return path


def tab_config(path, seed=5, **overrides):
    base = {
        "mode": "tabular",
        "data_paths": [str(path)],
        "seed": seed,
        "split": {"train": 0.5, "threshold": 0.25, "test": 0.25},
        "ensemble": {"type": "model_average", "kinds": ["ridge", "iforest", "elliptic"]},
        "combiner": "WLT",
        "detector_params": {
            "iforest": {"n_trees": 20, "subsample": 64},
            "elliptic": {"n_starts": 5},
        },
        "target_column": 0,
        "metric": {"kind": "pointwise", "radius": 0},
        "tabular_generator": {"n_per_axis": 100},
    }
    base.update(overrides)
    return PipelineConfig.from_dict(base)


def test_timeseries_end_to_end(tmp_path):
    cfg = ts_config(write_corpus(tmp_path))
    result = run_pipeline(cfg)
    assert 0.0 <= result.threshold <= 1.0
    rep = result.report
    assert rep["mode"] == "timeseries"
    assert set(rep["calibration"]) >= {"f1", "precision", "recall", "n_injections"}
    assert rep["test"] is not None
    assert {"f1", "precision", "recall", "best_achievable_f1"} <= set(rep["test"])
    assert rep["calibration"]["n_injections"] == 10  # one threshold station
    assert result.sweep.shape[1] == 4


def test_timeseries_deterministic(tmp_path):
    path = write_corpus(tmp_path)
    a = run_pipeline(ts_config(path))
    b = run_pipeline(ts_config(path))
    assert a.threshold == b.threshold
    assert a.model_payload == b.model_payload
    ra = {k: v for k, v in a.report.items() if k != "created_at"}
    rb = {k: v for k, v in b.report.items() if k != "created_at"}
    assert ra == rb


def test_timeseries_seed_changes_result(tmp_path):
    path = write_corpus(tmp_path)
    a = run_pipeline(ts_config(path, seed=3))
    b = run_pipeline(ts_config(path, seed=4))
    assert a.model_payload != b.model_payload


def test_tabular_end_to_end(tmp_path, rng):
    cfg = tab_config(make_tabular(tmp_path, rng))
    result = run_pipeline(cfg)
    rep = result.report
    assert rep["test"] is not None
    assert rep["test"]["f1"] > 0.5  # planted outliers are easy
    assert rep["calibration"]["n_injections"] == 200


def test_tabular_feature_bagging(tmp_path, rng):
    cfg = tab_config(
        make_tabular(tmp_path, rng),
        ensemble={"type": "feature_bag", "base_kind": "iforest", "n_models": 6},
        target_column=None,
        combiner="LT",
    )
    result = run_pipeline(cfg)
    assert result.report["ensemble"]["members"] == 6


def test_unknown_detector_kind_rejected_before_compute(tmp_path):
    with pytest.raises(ConfigError, match="unknown detector kind"):
        ts_config(tmp_path / "nonexistent.csv",
                  ensemble={"type": "model_average", "kinds": ["bogus"]})


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        PipelineConfig.from_dict({
            "mode": "timeseries", "data_paths": ["x"], "seed": 1,
            "split": {"train": 1.0}, "bogus_section": {},
        })


def test_tabular_ridge_needs_target_column(tmp_path):
    with pytest.raises(ConfigError, match="target_column"):
        tab_config(tmp_path / "t.csv", target_column=None)


def test_config_round_trip(tmp_path):
    cfg = ts_config(write_corpus(tmp_path))
    clone = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert clone.to_dict() == cfg.to_dict()
    assert clone.config_hash() == cfg.config_hash()


def test_config_hash_tracks_changes(tmp_path):
    path = write_corpus(tmp_path)
    assert ts_config(path, seed=1).config_hash() != ts_config(path, seed=2).config_hash()


def test_stage_names_on_errors(tmp_path, rng):
    from anomkit.pipeline import StageError

    # load stage: malformed CSV
    bad = tmp_path / "bad.csv"
    bad.write_text("station_id,timestamp,wrong_channel\n")
    with pytest.raises(StageError) as err:
        run_pipeline(ts_config(bad))
    assert err.value.stage == "load"

    # calibrate stage: zero injections leave single-class labels
    corpus = write_corpus(tmp_path)
    cfg = ts_config(corpus, generator={"n_single": 0, "n_short": 0, "n_long": 0})
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "calibrate"


def test_gappy_corpus_multi_segment_stations(tmp_path, rng):
    # Punch holes into every station so preprocessing yields several segments
    # per station; the run must still calibrate and evaluate cleanly.
    from anomkit.data import TimeSeriesFrame

    frames = gen_weather_corpus(4, 6, seed=9)
    gappy = []
    for i, f in enumerate(frames):
        keep = np.ones(f.n, dtype=bool)
        hole = 60 + 17 * i
        keep[hole : hole + 8] = False  # 4h hole forces a segment cut
        gappy.append(
            TimeSeriesFrame(
                f.station_id,
                f.timestamps[keep],
                {c: v[keep] for c, v in f.channels.items()},
            )
        )
    path = tmp_path / "gappy.csv"
    write_timeseries_csv(gappy, path)
    cfg = ts_config(path, generator={
        "n_single": 6, "n_short": 3, "n_long": 1,
        "long_dur_low": 10, "long_dur_high": 24,
    })
    result = run_pipeline(cfg)
    assert result.report["test"]["f1"] > 0
    # one hole per station -> two segments each; labels stay per segment
    assert result.report["calibration"]["n_injections"] == 10


def test_convergence_failure_surfaces_fit_stage(tmp_path):
    from anomkit.errors import ConvergenceError
    from anomkit.pipeline import StageError

    cfg = ts_config(
        write_corpus(tmp_path),
        ensemble={"type": "model_average", "kinds": ["ocsvm"]},
        detector_params={"ocsvm": {"max_iter": 1}},
    )
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "fit"
    assert isinstance(err.value.cause, ConvergenceError)
