#!/usr/bin/env python3
"""Shuttle-dataset experiment: singles, model averaging, feature bagging.

Runs the tabular protocol (random 25% test; remaining 75% split 2/3 train,
1/3 threshold with the threshold part restricted to normal rows; threshold
calibrated on principal-axis artificial outliers) for a battery of detector
configurations, and prints an F1 table.

Usage:
  python scripts/run_shuttle.py --data data/shuttle.csv [--max-train-rows 4096]

Fetch the dataset first with scripts/fetch_shuttle.py (needs network) or
point --data at a tabular CSV with a binary `label` column.
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from anomkit.pipeline import PipelineConfig, run_pipeline

SINGLE_KINDS = ("ridge", "lof", "elliptic", "ocsvm", "iforest")
FB_KINDS = ("ridge", "elliptic", "lof", "ocsvm")
COMBINERS = ("LT", "WLT", "LogReg")


def shuttle_config(data_path, seed, ensemble, combiner="LT", max_train_rows=None):
    return PipelineConfig.from_dict(
        {
            "mode": "tabular",
            "data_paths": [str(data_path)],
            "seed": seed,
            "split": {"train": 0.5, "threshold": 0.25, "test": 0.25},
            "ensemble": ensemble,
            "combiner": combiner,
            "max_train_rows": max_train_rows,
            "target_column": 0,
            "metric": {"kind": "pointwise", "radius": 0},
        }
    )


def run_variant(data_path, seed, ensemble, combiner, max_train_rows):
    cfg = shuttle_config(data_path, seed, ensemble, combiner, max_train_rows)
    t0 = time.time()
    result = run_pipeline(cfg)
    test = result.report["test"]
    return {
        "f1": test["f1"],
        "precision": test["precision"],
        "recall": test["recall"],
        "threshold": result.threshold,
        "seconds": round(time.time() - t0, 1),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-train-rows", type=int, default=4096)
    ap.add_argument("--out", default=None)
    ap.add_argument("--quick", action="store_true",
                    help="singles + OCSVM FB + model averaging LT only")
    args = ap.parse_args()

    rows = {}
    for kind in SINGLE_KINDS:
        ens = {"type": "model_average", "kinds": [kind]}
        rows[kind] = run_variant(args.data, args.seed, ens, "LT", args.max_train_rows)
        print(f"{kind:12s} f1={rows[kind]['f1']:.3f} "
              f"p={rows[kind]['precision']:.3f} r={rows[kind]['recall']:.3f} "
              f"({rows[kind]['seconds']}s)", flush=True)

    ma = {"type": "model_average", "kinds": list(SINGLE_KINDS)}
    for combiner in (("LT",) if args.quick else COMBINERS):
        key = f"MA-{combiner}"
        rows[key] = run_variant(args.data, args.seed, ma, combiner, args.max_train_rows)
        print(f"{key:12s} f1={rows[key]['f1']:.3f} ({rows[key]['seconds']}s)", flush=True)

    fb_kinds = ("ocsvm",) if args.quick else FB_KINDS
    for kind in fb_kinds:
        ens = {"type": "feature_bag", "base_kind": kind, "n_models": 20}
        for combiner in (("LT", "WLT") if args.quick else COMBINERS):
            key = f"{kind}FB-{combiner}"
            rows[key] = run_variant(args.data, args.seed, ens, combiner,
                                    args.max_train_rows)
            print(f"{key:12s} f1={rows[key]['f1']:.3f} ({rows[key]['seconds']}s)",
                  flush=True)

    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
