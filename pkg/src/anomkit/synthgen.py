"""Artificial anomaly generation.

Three time-series fault patterns injected into the road-temperature channel
(isolated spikes, short drifting episodes, long multiplicative malfunctions)
plus a principal-axis generator for tabular data. The injections carry their
own ground-truth labels so a threshold can be tuned on them. All generators
are pure functions of (input, config, seed); injections within one station
never overlap.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureMatrix, LabelVector
from .errors import ConfigError, SchemaError

KIND_SINGLE = "single"
KIND_SHORT = "short_term"
KIND_LONG = "long_term"
KIND_TABULAR = "tabular_axis"

REDRAW_CAP = 100


@dataclass
class InjectionRecord:
    station_id: str
    start: int
    duration: int
    kind: str
    params: dict[str, float] = field(default_factory=dict)


@dataclass
class GeneratorConfig:
    """Per-station injection counts and draw bounds."""

    n_single: int = 30
    n_short: int = 20
    n_long: int = 3
    single_low: float = 2.0
    single_high: float = 5.0
    short_rate: float = 2.0
    short_dur_low: int = 3
    short_dur_high: int = 12
    long_mult_low: float = 30.0
    long_mult_high: float = 200.0
    long_dur_low: int = 30
    long_dur_high: int = 200
    long_noise_mu: float = 0.0
    long_noise_sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_single, self.n_short, self.n_long) < 0:
            raise ConfigError("injection counts must be non-negative")
        pairs = (
            (self.single_low, self.single_high),
            (self.short_dur_low, self.short_dur_high),
            (self.long_mult_low, self.long_mult_high),
            (self.long_dur_low, self.long_dur_high),
        )
        for lo, hi in pairs:
            if lo <= 0 or hi < lo:
                raise ConfigError(f"bad generator bounds ({lo}, {hi})")


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _place_episode(rng, occupied: np.ndarray, duration: int) -> int:
    """Draw a start tick for an episode of the given duration, redrawing on
    collision with existing injections."""
    n = len(occupied)
    if duration > n:
        raise ConfigError(f"episode of {duration} ticks cannot fit {n}-tick series")
    for _ in range(REDRAW_CAP):
        start = int(rng.integers(0, n - duration + 1))
        if not occupied[start : start + duration].any():
            return start
    raise ConfigError(
        f"no room left for a {duration}-tick episode after {REDRAW_CAP} draws"
    )


def gen_single(series, cfg: GeneratorConfig, seed, occupied=None,
               station_id: str = ""):
    """Add sign * U(single_low, single_high) at n_single distinct ticks."""
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n <= cfg.n_single:
        raise SchemaError(
            f"series of {n} ticks too short for {cfg.n_single} single outliers"
        )
    rng = _as_rng(seed)
    occupied = np.zeros(n, dtype=bool) if occupied is None else occupied
    out = series.copy()
    labels = np.zeros(n, dtype=np.uint8)
    records = []
    free = np.where(~occupied)[0]
    if len(free) < cfg.n_single:
        raise ConfigError(
            f"only {len(free)} free ticks for {cfg.n_single} single outliers"
        )
    ticks = rng.choice(free, size=cfg.n_single, replace=False)
    signs = rng.choice((-1.0, 1.0), size=cfg.n_single)
    magnitudes = rng.uniform(cfg.single_low, cfg.single_high, size=cfg.n_single)
    for t, sign, mag in zip(ticks, signs, magnitudes):
        out[t] = series[t] + sign * mag
        labels[t] = 1
        occupied[t] = True
        records.append(
            InjectionRecord(station_id, int(t), 1, KIND_SINGLE,
                            {"sign": float(sign), "magnitude": float(mag)})
        )
    return out, labels, records


def gen_short_term(series, cfg: GeneratorConfig, seed, occupied=None,
                   station_id: str = ""):
    """Inject n_short episodes of cumulative exponential drift.

    Episode of duration d: p[0] = 0 and p[i] = p[i-1] + Exp(rate) for i >= 1,
    added with a random sign. The first tick keeps its value but is still
    labeled as part of the episode.
    """
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n <= cfg.short_dur_high + 1:
        raise SchemaError(
            f"series of {n} ticks too short for episodes up to "
            f"{cfg.short_dur_high} ticks"
        )
    rng = _as_rng(seed)
    occupied = np.zeros(n, dtype=bool) if occupied is None else occupied
    out = series.copy()
    labels = np.zeros(n, dtype=np.uint8)
    records = []
    for _ in range(cfg.n_short):
        d = int(rng.integers(cfg.short_dur_low, cfg.short_dur_high + 1))
        start = _place_episode(rng, occupied, d)
        sign = float(rng.choice((-1.0, 1.0)))
        steps = rng.exponential(1.0 / cfg.short_rate, size=d - 1)
        p = np.concatenate([[0.0], np.cumsum(steps)])
        out[start : start + d] = series[start : start + d] + sign * p
        labels[start : start + d] = 1
        occupied[start : start + d] = True
        records.append(
            InjectionRecord(station_id, start, d, KIND_SHORT,
                            {"sign": sign, "drift": float(p[-1])})
        )
    return out, labels, records


def gen_long_term(series, cfg: GeneratorConfig, seed, occupied=None,
                  station_id: str = ""):
    """Inject n_long long multiplicative malfunction episodes.

    Episode of duration d: the series is multiplied by U(mult bounds) and
    Gaussian noise is added from the second tick on.
    """
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n <= cfg.long_dur_high + 1:
        raise SchemaError(
            f"series of {n} ticks too short for episodes up to "
            f"{cfg.long_dur_high} ticks"
        )
    rng = _as_rng(seed)
    occupied = np.zeros(n, dtype=bool) if occupied is None else occupied
    out = series.copy()
    labels = np.zeros(n, dtype=np.uint8)
    records = []
    for _ in range(cfg.n_long):
        d = int(rng.integers(cfg.long_dur_low, cfg.long_dur_high + 1))
        start = _place_episode(rng, occupied, d)
        mult = float(rng.uniform(cfg.long_mult_low, cfg.long_mult_high))
        p = np.zeros(d)
        if d > 1:
            p[1:] = rng.normal(cfg.long_noise_mu, cfg.long_noise_sigma, size=d - 1)
        out[start : start + d] = mult * series[start : start + d] + p
        labels[start : start + d] = 1
        occupied[start : start + d] = True
        records.append(
            InjectionRecord(station_id, start, d, KIND_LONG,
                            {"multiplier": mult})
        )
    return out, labels, records


def contaminate_series(series, cfg: GeneratorConfig, seed,
                       station_id: str = ""):
    """Apply all three fault patterns to one series with a shared occupancy
    mask (long episodes placed first so they can always fit)."""
    series = np.asarray(series, dtype=np.float64)
    rng = _as_rng(seed)
    occupied = np.zeros(len(series), dtype=bool)
    out = series.copy()
    labels = np.zeros(len(series), dtype=np.uint8)
    records = []
    for count_name, gen in _STAGES:
        if getattr(cfg, count_name) == 0:
            continue
        out, stage_labels, stage_records = gen(
            out, cfg, rng, occupied=occupied, station_id=station_id
        )
        labels |= stage_labels
        records.extend(stage_records)
    return out, labels, records


_STAGES = (
    ("n_long", gen_long_term),
    ("n_short", gen_short_term),
    ("n_single", gen_single),
)


def contaminate_items(items, cfg: GeneratorConfig, seed: int,
                      channel: str = "t_road"):
    """Contaminate the target channel of segment- or frame-like items.

    Items are grouped by station; each station receives the configured
    per-station injection counts, spread over its items in proportion to
    their lengths when a station has several. One occupancy mask per item is
    shared across all three fault patterns, so injections never overlap.
    Returns (new items, per-item label arrays, records); everything outside
    labeled ticks is bit-exact.
    """
    by_station: dict[str, list[int]] = {}
    for i, item in enumerate(items):
        by_station.setdefault(item.station_id, []).append(i)

    new_items = list(items)
    labels = [np.zeros(it.n, dtype=np.uint8) for it in items]
    occupied = [np.zeros(it.n, dtype=bool) for it in items]
    records: list[InjectionRecord] = []
    for s_idx, station in enumerate(sorted(by_station)):
        idxs = by_station[station]
        rng = np.random.default_rng(np.random.SeedSequence((seed, s_idx)))
        lengths = np.array([items[i].n for i in idxs], dtype=float)
        shares = lengths / lengths.sum()
        for count_name, gen in _STAGES:
            total = getattr(cfg, count_name)
            raw = shares * total
            counts = np.floor(raw).astype(int)
            for k in np.argsort(-(raw - counts))[: total - counts.sum()]:
                counts[k] += 1
            for i, item_count in zip(idxs, counts):
                if item_count == 0:
                    continue
                sub_cfg = _override_count(cfg, count_name, int(item_count))
                series = new_items[i].channels[channel]
                new_series, stage_labels, stage_records = gen(
                    series, sub_cfg, rng, occupied=occupied[i],
                    station_id=station,
                )
                channels = dict(new_items[i].channels)
                channels[channel] = new_series
                new_items[i] = _replace_channels(new_items[i], channels)
                labels[i] |= stage_labels
                records.extend(stage_records)
    return new_items, labels, records


def _override_count(cfg: GeneratorConfig, name: str, value: int) -> GeneratorConfig:
    kw = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    kw.update({"n_single": 0, "n_short": 0, "n_long": 0, name: value})
    return GeneratorConfig(**kw)


def _replace_channels(item, channels):
    clone = copy.copy(item)
    clone.channels = channels
    return clone


# ---------------------------------------------------------------------------
# Tabular generator
# ---------------------------------------------------------------------------

@dataclass
class TabularGeneratorConfig:
    n_per_axis: int = 450
    component_ranges: tuple = ((-10000.0, 10000.0), (-5000.0, 5000.0))
    seed: int = 0


def pca_axes(X, n_components: int = 2):
    """Mean and top principal directions of X by singular value decomposition.

    Returns (mean, components) with orthonormal rows; raises when the data
    rank is below n_components.
    """
    A = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < n_components:
        raise SchemaError(f"need a 2-D matrix with d >= {n_components}")
    if A.shape[0] <= A.shape[1]:
        raise SchemaError("need more rows than columns for the axis generator")
    mean = A.mean(axis=0)
    _, s, vt = np.linalg.svd(A - mean, full_matrices=False)
    if s[n_components - 1] <= 1e-12 * max(s[0], 1.0):
        raise SchemaError(f"data rank below {n_components}")
    return mean, vt[:n_components]


def gen_tabular_axes(X_train, cfg: TabularGeneratorConfig | None = None,
                     seed: int | None = None) -> FeatureMatrix:
    """Generate outliers stretched along each of the top principal axes.

    For each axis a, draws n_per_axis coordinates uniformly in that axis'
    configured range (all other component coordinates zero) and maps them
    back through the inverse transform: mean + coordinate * loading.
    """
    cfg = cfg or TabularGeneratorConfig()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n_components = len(cfg.component_ranges)
    mean, components = pca_axes(X_train, n_components)
    blocks = []
    for a, (lo, hi) in enumerate(cfg.component_ranges):
        coords = rng.uniform(lo, hi, size=cfg.n_per_axis)
        blocks.append(mean[None, :] + coords[:, None] * components[a][None, :])
    names = (
        list(X_train.column_names)
        if isinstance(X_train, FeatureMatrix)
        else [f"f{j}" for j in range(mean.shape[0])]
    )
    return FeatureMatrix(np.vstack(blocks), names)


def contaminate_tabular(X, cfg: TabularGeneratorConfig, seed: int,
                        X_train=None):
    """Append principal-axis outliers to a tabular split.

    The axes are estimated on ``X_train`` when given (the training split),
    else on X itself. Returns (augmented matrix, labels, records).
    """
    source = X if X_train is None else X_train
    outliers = gen_tabular_axes(source, cfg, seed=seed)
    X_aug = FeatureMatrix(
        np.vstack([X.values, outliers.values]), list(X.column_names)
    )
    marks = np.zeros(X_aug.n, dtype=np.uint8)
    marks[X.n :] = 1
    records = [
        InjectionRecord("", X.n + i, 1, KIND_TABULAR,
                        {"axis": float(i // cfg.n_per_axis)})
        for i in range(outliers.n)
    ]
    return X_aug, LabelVector(marks), records


def contaminate(data, cfg, seed: int, channel: str = "t_road", X_train=None):
    """Dispatch to the time-series or tabular contamination path.

    Lists of frames/segments go through the per-station fault generators;
    a FeatureMatrix gets principal-axis outliers appended.
    """
    if isinstance(data, FeatureMatrix):
        if not isinstance(cfg, TabularGeneratorConfig):
            raise ConfigError("tabular data needs a TabularGeneratorConfig")
        return contaminate_tabular(data, cfg, seed, X_train=X_train)
    if not isinstance(cfg, GeneratorConfig):
        raise ConfigError("time-series data needs a GeneratorConfig")
    return contaminate_items(list(data), cfg, seed, channel=channel)
