"""Configuration-driven batch pipeline.

One run executes: load -> split -> fit ensemble on the train part ->
contaminate the threshold part with artificial anomalies -> calibrate member
normalization and the consensus function -> select the decision threshold ->
evaluate on the test part. Everything is reproducible from (config, seed);
the run result carries the report, the sweep curve, injection records, and a
serializable model bundle.
"""

from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import calibration
from .data import (
    FeatureMatrix,
    SplitPlan,
    interpolate_linear,
    load_tabular_csv,
    load_timeseries_csv,
    split_on_gaps,
    split_rows,
    split_stations,
)
from .ensemble import (
    CombinerSpec,
    EnsembleModel,
    FeatureBagConfig,
    combine,
    feature_bag_fit,
    fit_combiner,
    model_average_fit,
)
from .errors import AnomkitError, ConfigError, SchemaError
from .features import build_features, target_tick_indices
from .serialize import (
    canonical_json,
    combiner_from_dict,
    combiner_to_dict,
    ensemble_from_dict,
    ensemble_to_dict,
)
from .synthgen import (
    GeneratorConfig,
    TabularGeneratorConfig,
    contaminate_items,
    contaminate_tabular,
)

MODES = ("timeseries", "tabular")
DETECTOR_KIND_NAMES = ("lof", "iforest", "elliptic", "ocsvm", "ridge")

# Sub-seed tags so the stages draw independent streams from one run seed.
SEED_SPLIT = 0
SEED_THRESH_INJECT = 1
SEED_TEST_INJECT = 2
SEED_SUBSAMPLE = 3
SEED_ENSEMBLE = 4


def _sub_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence((seed, tag)).generate_state(1)[0])


@dataclass
class FeatureConfig:
    target_channel: str = "t_road"
    lags: int = 6
    horizon: int = 1


@dataclass
class MetricConfig:
    kind: str = calibration.NEIGHBORHOOD
    radius: int = 5

    def __post_init__(self):
        if self.kind not in (calibration.NEIGHBORHOOD, calibration.POINTWISE):
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if self.radius < 0:
            raise ConfigError("metric radius must be >= 0")

    @property
    def effective_radius(self) -> int:
        return 0 if self.kind == calibration.POINTWISE else self.radius


@dataclass
class EnsembleConfig:
    type: str = "model_average"
    kinds: list[str] = field(default_factory=lambda: ["ridge"])
    base_kind: str = "ridge"
    n_models: int = 10
    k_min: int | None = None
    k_max: int | None = None

    def __post_init__(self):
        if self.type not in ("model_average", "feature_bag"):
            raise ConfigError(f"unknown ensemble type {self.type!r}")
        names = self.kinds if self.type == "model_average" else [self.base_kind]
        for kind in names:
            if kind not in DETECTOR_KIND_NAMES:
                raise ConfigError(
                    f"unknown detector kind {kind!r}; known: {DETECTOR_KIND_NAMES}"
                )


@dataclass
class PipelineConfig:
    mode: str
    data_paths: list[str]
    seed: int
    split: SplitPlan
    features: FeatureConfig = field(default_factory=FeatureConfig)
    detector_params: dict = field(default_factory=dict)
    max_train_rows: int | None = None
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    combiner: str = "LT"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    tabular_generator: TabularGeneratorConfig = field(
        default_factory=TabularGeneratorConfig
    )
    metric: MetricConfig = field(default_factory=MetricConfig)
    target_column: int | None = None
    label_column: str = "label"
    inject_test: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.data_paths:
            raise ConfigError("data_paths must list at least one input file")
        if self.combiner not in ("LT", "WLT", "LogReg"):
            raise ConfigError(f"unknown combiner {self.combiner!r}")
        for kind in self.detector_params:
            if kind not in DETECTOR_KIND_NAMES:
                raise ConfigError(f"detector_params for unknown kind {kind!r}")
        if self.mode == "tabular" and self.target_column is None:
            needs_ridge = (
                "ridge" in self.ensemble.kinds
                if self.ensemble.type == "model_average"
                else self.ensemble.base_kind == "ridge"
            )
            if needs_ridge:
                raise ConfigError(
                    "tabular mode with a ridge member needs target_column"
                )
        if self.mode == "tabular" and self.metric.kind == calibration.NEIGHBORHOOD:
            raise ConfigError(
                "tabular rows have no tick order; use the pointwise metric"
            )

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "data_paths": list(self.data_paths),
            "seed": self.seed,
            "split": {
                "train": self.split.train_fraction,
                "threshold": self.split.threshold_fraction,
                "test": self.split.test_fraction,
            },
            "features": vars(self.features).copy(),
            "detector_params": json.loads(json.dumps(self.detector_params)),
            "max_train_rows": self.max_train_rows,
            "ensemble": {
                "type": self.ensemble.type,
                "kinds": list(self.ensemble.kinds),
                "base_kind": self.ensemble.base_kind,
                "n_models": self.ensemble.n_models,
                "k_min": self.ensemble.k_min,
                "k_max": self.ensemble.k_max,
            },
            "combiner": self.combiner,
            "generator": {
                f: getattr(self.generator, f)
                for f in self.generator.__dataclass_fields__
                if f != "seed"
            },
            "tabular_generator": {
                "n_per_axis": self.tabular_generator.n_per_axis,
                "component_ranges": [
                    list(r) for r in self.tabular_generator.component_ranges
                ],
            },
            "metric": {"kind": self.metric.kind, "radius": self.metric.radius},
            "target_column": self.target_column,
            "label_column": self.label_column,
            "inject_test": self.inject_test,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {
            "mode", "data_paths", "seed", "split", "features", "detector_params",
            "max_train_rows", "ensemble", "combiner", "generator",
            "tabular_generator", "metric", "target_column", "label_column",
            "inject_test",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("mode", "data_paths", "seed", "split"):
            if key not in d:
                raise ConfigError(f"config is missing required key {key!r}")
        sp = d["split"]
        bad_split_keys = set(sp) - {"train", "threshold", "test"}
        if bad_split_keys:
            raise ConfigError(
                f"unknown split keys: {sorted(bad_split_keys)} "
                "(the split seed derives from the run seed)"
            )
        split = SplitPlan(
            train_fraction=sp.get("train", 0.0),
            threshold_fraction=sp.get("threshold", 0.0),
            test_fraction=sp.get("test", 0.0),
            seed=_sub_seed(d["seed"], SEED_SPLIT),
        )
        ens = d.get("ensemble", {})
        tab = d.get("tabular_generator", {})
        metric = d.get("metric")
        if metric is None:
            metric = (
                {"kind": calibration.POINTWISE, "radius": 0}
                if d["mode"] == "tabular"
                else {}
            )
        try:
            return cls(
                mode=d["mode"],
                data_paths=list(d["data_paths"]),
                seed=int(d["seed"]),
                split=split,
                features=FeatureConfig(**d.get("features", {})),
                detector_params=dict(d.get("detector_params", {})),
                max_train_rows=d.get("max_train_rows"),
                ensemble=EnsembleConfig(**ens),
                combiner=d.get("combiner", "LT"),
                generator=GeneratorConfig(**d.get("generator", {})),
                tabular_generator=TabularGeneratorConfig(
                    n_per_axis=tab.get("n_per_axis", 450),
                    component_ranges=tuple(
                        tuple(r) for r in tab.get(
                            "component_ranges",
                            ((-10000.0, 10000.0), (-5000.0, 5000.0)),
                        )
                    ),
                ),
                metric=MetricConfig(**metric),
                target_column=d.get("target_column"),
                label_column=d.get("label_column", "label"),
                inject_test=bool(d.get("inject_test", True)),
            )
        except TypeError as exc:
            raise ConfigError(f"malformed config section: {exc}") from None

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d)

    def config_hash(self) -> str:
        return hashlib.sha256(
            canonical_json(self.to_dict()).encode("utf-8")
        ).hexdigest()


class StageError(AnomkitError):
    """Wraps an error with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class RunResult:
    report: dict
    model_payload: dict
    sweep: np.ndarray  # threshold, precision, recall, f1
    injections: list
    threshold: float


def _fit_ensemble(cfg: PipelineConfig, X: FeatureMatrix, target) -> EnsembleModel:
    seed = _sub_seed(cfg.seed, SEED_ENSEMBLE)
    if cfg.ensemble.type == "model_average":
        return model_average_fit(
            X, list(cfg.ensemble.kinds), target=target,
            detector_params=cfg.detector_params, seed=seed,
        )
    bag = FeatureBagConfig(
        base_kind=cfg.ensemble.base_kind,
        n_models=cfg.ensemble.n_models,
        k_min=cfg.ensemble.k_min,
        k_max=cfg.ensemble.k_max,
        seed=seed,
    )
    return feature_bag_fit(
        X, bag, target=target, detector_params=cfg.detector_params
    )


def _subsample_rows(cfg: PipelineConfig, X: FeatureMatrix, y):
    if cfg.max_train_rows is None or X.n <= cfg.max_train_rows:
        return X, y
    rng = np.random.default_rng(_sub_seed(cfg.seed, SEED_SUBSAMPLE))
    idx = np.sort(rng.choice(X.n, size=cfg.max_train_rows, replace=False))
    y_sub = None if y is None else np.asarray(y)[idx]
    return X.take_rows(idx), y_sub


# ---------------------------------------------------------------------------
# Time-series mode
# ---------------------------------------------------------------------------

def _preprocess(frames) -> list:
    segments = []
    for frame in frames:
        for seg in split_on_gaps(frame):
            segments.append(interpolate_linear(seg))
    return segments


def _segment_features(cfg: PipelineConfig, segments, tick_labels=None):
    """Stack per-segment feature matrices; rows carry the segment ordinal so
    vicinity matching never crosses segment boundaries. Returns
    (FeatureMatrix, target array, row label array or None)."""
    fc = cfg.features
    mats, targets, label_rows = [], [], []
    for seg_id, seg in enumerate(segments):
        X, y = build_features(seg, fc.target_channel, fc.lags, fc.horizon)
        X.segment_ids = np.full(X.n, seg_id, dtype=np.int64)
        mats.append(X)
        targets.append(y)
        if tick_labels is not None:
            ticks = target_tick_indices(seg.n, fc.lags, fc.horizon)
            label_rows.append(tick_labels[seg_id][ticks])
    X_all = FeatureMatrix.vstack(mats)
    y_all = np.concatenate(targets)
    labels = np.concatenate(label_rows) if tick_labels is not None else None
    return X_all, y_all, labels


def _run_timeseries(cfg: PipelineConfig) -> RunResult:
    with _stage("load"):
        frames = []
        for path in cfg.data_paths:
            frames.extend(load_timeseries_csv(path))
        seen = set()
        for f in frames:
            if f.station_id in seen:
                raise SchemaError(
                    f"station {f.station_id!r} appears in several files"
                )
            seen.add(f.station_id)

    with _stage("split"):
        train_frames, thresh_frames, test_frames = split_stations(frames, cfg.split)
        train_segments = _preprocess(train_frames)
        thresh_segments = _preprocess(thresh_frames)
        test_segments = _preprocess(test_frames)
        if not train_segments or not thresh_segments:
            raise SchemaError(
                "train or threshold split has no usable segments after preprocessing"
            )

    with _stage("fit"):
        X_train, y_train, _ = _segment_features(cfg, train_segments)
        X_fit, y_fit = _subsample_rows(cfg, X_train, y_train)
        ens = _fit_ensemble(cfg, X_fit, target=y_fit)

    with _stage("calibrate"):
        items, tick_labels, records = contaminate_items(
            thresh_segments, cfg.generator, _sub_seed(cfg.seed, SEED_THRESH_INJECT),
            channel=cfg.features.target_channel,
        )
        X_th, y_th, art_labels = _segment_features(cfg, items, tick_labels)
        S = ens.calibrate_scores(X_th, y_th)
        combiner = fit_combiner(S, art_labels, cfg.combiner)
        final = combine(S, combiner)
        radius = cfg.metric.effective_radius
        sel = calibration.select_threshold(
            final, art_labels, radius=radius, metric=cfg.metric.kind,
            segment_ids=X_th.segment_ids,
        )

    test_block = None
    if test_segments and cfg.inject_test:
        with _stage("evaluate"):
            t_items, t_tick_labels, _ = contaminate_items(
                test_segments, cfg.generator, _sub_seed(cfg.seed, SEED_TEST_INJECT),
                channel=cfg.features.target_channel,
            )
            X_te, y_te, truth = _segment_features(cfg, t_items, t_tick_labels)
            report = calibration.evaluate_pipeline(
                ens, combiner, sel.threshold, X_te, truth, radius=radius,
                y_target=y_te, segment_ids=X_te.segment_ids,
                provenance={"seed": cfg.seed, "config_hash": cfg.config_hash()},
            )
            S_te = ens.member_scores(X_te, y_te)
            best = calibration.select_threshold(
                combine(S_te, combiner), truth, radius=radius,
                metric=cfg.metric.kind, segment_ids=X_te.segment_ids,
            )
            test_block = report.as_dict()
            test_block["best_achievable_f1"] = best.achieved
            test_block["f1_ratio"] = (
                report.f1 / best.achieved if best.achieved > 0 else 1.0
            )

    return _finish(cfg, ens, combiner, sel, records, test_block,
                   columns=X_train.column_names)


# ---------------------------------------------------------------------------
# Tabular mode
# ---------------------------------------------------------------------------

def _run_tabular(cfg: PipelineConfig) -> RunResult:
    with _stage("load"):
        if len(cfg.data_paths) != 1:
            raise ConfigError("tabular mode expects exactly one data path")
        X_all, labels = load_tabular_csv(cfg.data_paths[0], cfg.label_column)
        if labels is None:
            raise SchemaError(
                f"tabular mode needs a {cfg.label_column!r} column for the "
                "split protocol (threshold part keeps only normal rows)"
            )
    with _stage("split"):
        (X_tr, y_tr), (X_th, _), (X_te, y_te) = split_rows(X_all, labels, cfg.split)

    with _stage("fit"):
        X_fit, _ = _subsample_rows(cfg, X_tr, None)
        ens = _fit_ensemble(cfg, X_fit, target=cfg.target_column)

    with _stage("calibrate"):
        X_aug, art_labels, records = contaminate_tabular(
            X_th, cfg.tabular_generator, _sub_seed(cfg.seed, SEED_THRESH_INJECT),
            X_train=X_tr,
        )
        S = ens.calibrate_scores(X_aug)
        combiner = fit_combiner(S, art_labels.marks, cfg.combiner)
        final = combine(S, combiner)
        radius = cfg.metric.effective_radius
        sel = calibration.select_threshold(
            final, art_labels.marks, radius=radius, metric=cfg.metric.kind
        )

    test_block = None
    if X_te.n:
        with _stage("evaluate"):
            report = calibration.evaluate_pipeline(
                ens, combiner, sel.threshold, X_te, y_te.marks, radius=radius,
                provenance={"seed": cfg.seed, "config_hash": cfg.config_hash()},
            )
            S_te = ens.member_scores(X_te)
            best = calibration.select_threshold(
                combine(S_te, combiner), y_te.marks, radius=radius,
                metric=cfg.metric.kind,
            )
            test_block = report.as_dict()
            test_block["best_achievable_f1"] = best.achieved
            test_block["f1_ratio"] = (
                report.f1 / best.achieved if best.achieved > 0 else 1.0
            )

    return _finish(cfg, ens, combiner, sel, records, test_block,
                   columns=X_all.column_names)


# ---------------------------------------------------------------------------
# Shared tail
# ---------------------------------------------------------------------------

def _finish(cfg, ens, combiner: CombinerSpec, sel, records, test_block,
            columns) -> RunResult:
    model_payload = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "threshold": sel.threshold,
        "metric": {"kind": cfg.metric.kind, "radius": cfg.metric.radius},
        "features": vars(cfg.features).copy(),
        "columns": list(columns),
        "label_column": cfg.label_column,
        "ensemble": ensemble_to_dict(ens),
        "combiner": combiner_to_dict(combiner),
    }
    idx = int(np.argmax(sel.curve[:, 0] == sel.threshold))
    report = {
        "schema_version": 1,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config_hash": model_payload["config_hash"],
        "threshold": sel.threshold,
        "combiner": cfg.combiner,
        "ensemble": {
            "type": cfg.ensemble.type,
            "members": ens.n_members,
            "kinds": (
                list(cfg.ensemble.kinds)
                if cfg.ensemble.type == "model_average"
                else [cfg.ensemble.base_kind]
            ),
        },
        "calibration": {
            "f1": sel.achieved,
            "precision": float(sel.curve[idx, 1]),
            "recall": float(sel.curve[idx, 2]),
            "n_candidates": int(sel.curve.shape[0]),
            "n_injections": len(records),
        },
        "test": test_block,
    }
    return RunResult(
        report=report,
        model_payload=model_payload,
        sweep=sel.curve,
        injections=records,
        threshold=sel.threshold,
    )


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """Execute the full pipeline for one config; stage errors are wrapped
    with the stage name."""
    runner = _run_timeseries if cfg.mode == "timeseries" else _run_tabular
    return runner(cfg)


# ---------------------------------------------------------------------------
# Scoring with a saved bundle
# ---------------------------------------------------------------------------

def load_bundle(payload: dict):
    """Materialize (ensemble, combiner, threshold, payload) from a saved
    model payload."""
    ens = ensemble_from_dict(payload["ensemble"])
    spec = combiner_from_dict(payload["combiner"])
    return ens, spec, float(payload["threshold"]), payload


def score_with_bundle(payload: dict, data_path):
    """Score a data file with a saved bundle.

    Returns (keys, scores, flags) where keys is a list of per-row identifier
    tuples: (station_id, iso timestamp) in timeseries mode, (row index,) in
    tabular mode.
    """
    ens, spec, threshold, payload = load_bundle(payload)
    columns = payload["columns"]
    if payload["mode"] == "timeseries":
        frames = load_timeseries_csv(data_path)
        fc = payload["features"]
        segs = _preprocess(frames)
        mats, targets = [], []
        for seg_id, seg in enumerate(segs):
            X, y = build_features(seg, fc["target_channel"], fc["lags"], fc["horizon"])
            X.segment_ids = np.full(X.n, seg_id, dtype=np.int64)
            mats.append(X)
            targets.append(y)
        if not mats:
            return [], np.empty(0), np.empty(0, dtype=np.uint8)
        X_all = FeatureMatrix.vstack(mats)
        y_all = np.concatenate(targets)
        _check_columns(columns, X_all.column_names)
        S = ens.member_scores(X_all, y_all)
        scores = combine(S, spec)
        keys = [
            (str(sid), datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
            for sid, ts in zip(X_all.station_ids, X_all.timestamps)
        ]
    else:
        X, _ = load_tabular_csv(data_path, payload.get("label_column", "label"))
        if X.n == 0:
            return [], np.empty(0), np.empty(0, dtype=np.uint8)
        _check_columns(columns, X.column_names)
        S = ens.member_scores(X)
        scores = combine(S, spec)
        keys = [(str(i),) for i in range(X.n)]
    flags = calibration.apply_threshold(scores, threshold)
    return keys, scores, flags


def _check_columns(expected, got):
    missing = [c for c in expected if c not in got]
    extra = [c for c in got if c not in expected]
    if missing or extra:
        raise SchemaError(
            "data columns do not match the model: "
            + (f"missing {missing} " if missing else "")
            + (f"unexpected {extra}" if extra else "")
        )
    if list(expected) != list(got):
        raise SchemaError("data columns are ordered differently than the model's")
