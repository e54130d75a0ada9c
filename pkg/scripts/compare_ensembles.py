#!/usr/bin/env python3
"""Ensemble-versus-singles comparison on synthetic corpora.

For each seed: fit the model-averaging members once plus two feature-bagging
ensembles, then push every single detector and every consensus function
through the identical contaminate / calibrate / threshold / test protocol.
A seed counts as a win when some ensemble variant strictly beats every
single detector it is built from on test F1.

Usage: python scripts/compare_ensembles.py [--seeds 10] [--days 30]
                                           [--noise 0.6 --mult 5 30 --nbag 40]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from anomkit import calibration
from anomkit.data import FeatureMatrix, SplitPlan, interpolate_linear, split_on_gaps, split_stations
from anomkit.ensemble import (
    CombinerSpec,
    FeatureBagConfig,
    combine,
    feature_bag_fit,
    fit_combiner,
    model_average_fit,
    normalize_scores,
)
from anomkit.features import build_features, target_tick_indices
from anomkit.synthgen import GeneratorConfig, contaminate_items
from anomkit.weather import WeatherConfig, gen_weather_corpus

KINDS = ["ridge", "elliptic", "iforest"]
RADIUS = 5


def matrix_for(segments, tick_labels=None, lags=6, horizon=1):
    mats, targets, rows = [], [], []
    for seg_id, seg in enumerate(segments):
        X, y = build_features(seg, "t_road", lags, horizon)
        X.segment_ids = np.full(X.n, seg_id, dtype=np.int64)
        mats.append(X)
        targets.append(y)
        if tick_labels is not None:
            rows.append(tick_labels[seg_id][target_tick_indices(seg.n, lags, horizon)])
    X = FeatureMatrix.vstack(mats)
    y = np.concatenate(targets)
    labels = np.concatenate(rows) if tick_labels is not None else None
    return X, y, labels


def preprocess(frames):
    return [interpolate_linear(s) for f in frames for s in split_on_gaps(f)]


def calibrated_scores(raw, lo, hi):
    return np.column_stack(
        [normalize_scores(raw[:, m], lo[m], hi[m]) for m in range(raw.shape[1])]
    )


def evaluate_variant(S_th, S_te, art_labels, truth, seg_th, seg_te, spec):
    final_th = combine(S_th, spec)
    sel = calibration.select_threshold(
        final_th, art_labels, radius=RADIUS, segment_ids=seg_th
    )
    final_te = combine(S_te, spec)
    pred = calibration.apply_threshold(final_te, sel.threshold)
    return calibration.neighborhood_metric(
        pred, truth, RADIUS, segment_ids=seg_te
    ).f1


def score_matrices(ens, X_th, y_th, X_te, y_te):
    raw_th = ens._raw_member_scores(X_th, y_th)
    raw_te = ens._raw_member_scores(X_te, y_te)
    lo, hi = raw_th.min(axis=0), raw_th.max(axis=0)
    return calibrated_scores(raw_th, lo, hi), calibrated_scores(raw_te, lo, hi)


def combiner_sweep(name, S_th, S_te, art_labels, truth, seg_th, seg_te):
    out = {}
    for kind in ("LT", "WLT", "LogReg"):
        spec = (
            CombinerSpec("LT")
            if kind == "LT"
            else fit_combiner(S_th, art_labels, kind)
        )
        out[f"{name}-{kind}"] = evaluate_variant(
            S_th, S_te, art_labels, truth, seg_th, seg_te, spec
        )
    return out


def run_seed(seed, days, stations, noise=0.4, mult=(30.0, 200.0),
             fb_bounds=(lambda d: d // 6, lambda d: d // 2), n_bag=20):
    frames = gen_weather_corpus(stations, days, seed=1000 + seed,
                                cfg=WeatherConfig(noise_scale=noise))
    plan = SplitPlan(0.5, 0.3, 0.2, seed=seed)
    train_f, thresh_f, test_f = split_stations(frames, plan)
    gen_cfg = GeneratorConfig(long_dur_low=30, long_dur_high=120,
                              long_mult_low=mult[0], long_mult_high=mult[1])

    X_tr, y_tr, _ = matrix_for(preprocess(train_f))
    ens = model_average_fit(
        X_tr, KINDS, target=y_tr,
        detector_params={"elliptic": {"n_starts": 10}}, seed=seed,
    )

    th_items, th_ticks, _ = contaminate_items(
        preprocess(thresh_f), gen_cfg, seed=seed * 7919 + 1
    )
    X_th, y_th, art_labels = matrix_for(th_items, th_ticks)
    te_items, te_ticks, _ = contaminate_items(
        preprocess(test_f), gen_cfg, seed=seed * 7919 + 2
    )
    X_te, y_te, truth = matrix_for(te_items, te_ticks)

    seg_th, seg_te = X_th.segment_ids, X_te.segment_ids
    S_th, S_te = score_matrices(ens, X_th, y_th, X_te, y_te)

    singles = {}
    for m, kind in enumerate(KINDS):
        singles[kind] = evaluate_variant(
            S_th[:, [m]], S_te[:, [m]], art_labels, truth,
            seg_th, seg_te, CombinerSpec("LT"),
        )
    ensembles = {}
    constituents = {}
    ensembles.update(combiner_sweep("MA", S_th, S_te, art_labels, truth, seg_th, seg_te))
    for kind in ("LT", "WLT", "LogReg"):
        constituents[f"MA-{kind}"] = list(KINDS)

    d = X_tr.d
    bags = {
        "ridgeFB": FeatureBagConfig("ridge", n_bag, k_min=fb_bounds[0](d),
                                    k_max=fb_bounds[1](d), seed=seed),
        "ellFB": FeatureBagConfig("elliptic", max(n_bag // 2, 10), k_min=2, k_max=2 * d // 3, seed=seed),
    }
    for name, bag in bags.items():
        base = bag.base_kind
        fb = feature_bag_fit(
            X_tr, bag, target=y_tr,
            detector_params={"elliptic": {"n_starts": 10}},
        )
        S_th_fb, S_te_fb = score_matrices(fb, X_th, y_th, X_te, y_te)
        ensembles.update(
            combiner_sweep(name, S_th_fb, S_te_fb, art_labels, truth, seg_th, seg_te)
        )
        for kind in ("LT", "WLT", "LogReg"):
            constituents[f"{name}-{kind}"] = [base]
    return singles, ensembles, constituents


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--days", type=int, default=30)
    ap.add_argument("--stations", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.4)
    ap.add_argument("--mult", type=float, nargs=2, default=(30.0, 200.0))
    ap.add_argument("--fb", choices=["narrow", "wide"], default="narrow",
                    help="ridge bag bounds: narrow [d/6, d/2], wide [d/2, d-1]")
    ap.add_argument("--nbag", type=int, default=20)
    args = ap.parse_args()

    wins = 0
    t0 = time.time()
    for seed in range(args.seeds):
        fb = (
            (lambda d: d // 6, lambda d: d // 2)
            if args.fb == "narrow"
            else (lambda d: d // 2, lambda d: d - 1)
        )
        singles, ensembles, constituents = run_seed(
            seed, args.days, args.stations, args.noise, tuple(args.mult),
            fb, args.nbag,
        )
        winners = [
            name
            for name, f1 in ensembles.items()
            if all(f1 > singles[c] for c in constituents[name])
        ]
        wins += bool(winners)
        parts = " ".join(f"{k}={v:.3f}" for k, v in singles.items())
        eparts = " ".join(f"{k}={v:.3f}" for k, v in ensembles.items())
        print(
            f"seed {seed}: {parts} | {eparts} | "
            f"{'WIN ' + ','.join(winners[:3]) if winners else 'LOSS'}",
            flush=True,
        )
    print(f"\n{wins}/{args.seeds} seeds: some ensemble beats all its "
          f"constituents ({time.time()-t0:.1f}s)")
    return 0 if wins >= int(0.7 * args.seeds) else 1


if __name__ == "__main__":
    sys.exit(main())
