#!/usr/bin/env python3
"""Download the Statlog Shuttle dataset and write data/shuttle.csv.

Needs network access. Tries OpenML first (via scikit-learn when available),
then the UCI repository archive. The output is the toolkit's tabular CSV:
nine attribute columns a0..a8 plus a binary label column (classes 1 and 4
mapped to 0, the rest to 1).
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from anomkit.data import write_tabular_csv
from anomkit.shuttle import N_ATTRIBUTES, binarize_classes
from anomkit.data import FeatureMatrix

UCI_URL = "https://archive.ics.uci.edu/static/public/148/statlog+shuttle.zip"


def from_openml():
    from sklearn.datasets import fetch_openml

    bunch = fetch_openml("shuttle", version=1, as_frame=False, parser="liac-arff")
    X = np.asarray(bunch.data, dtype=np.float64)
    classes = np.asarray(bunch.target, dtype=np.float64).astype(np.int64)
    return X, classes


def from_uci():
    with urllib.request.urlopen(UCI_URL, timeout=60) as resp:
        blob = resp.read()
    rows = []
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        for name in zf.namelist():
            # shuttle.trn ships LZW-compressed (.Z), which the stdlib cannot
            # decode; shuttle.tst is plain. Grab whatever plain files exist.
            if name.endswith(".tst") or name.endswith(".trn"):
                rows.append(np.loadtxt(io.BytesIO(zf.read(name)), ndmin=2))
    if not rows:
        raise RuntimeError("no readable shuttle files inside the UCI archive")
    data = np.vstack(rows)
    return data[:, :N_ATTRIBUTES], data[:, N_ATTRIBUTES].astype(np.int64)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/shuttle.csv")
    args = ap.parse_args()
    errors = []
    for source in (from_openml, from_uci):
        try:
            X, classes = source()
            break
        except Exception as exc:
            errors.append(f"{source.__name__}: {exc}")
    else:
        print("could not fetch the shuttle dataset:", file=sys.stderr)
        for err in errors:
            print(f"  {err}", file=sys.stderr)
        return 1
    labels = binarize_classes(classes)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tabular_csv(
        FeatureMatrix(X, [f"a{i}" for i in range(N_ATTRIBUTES)]), out, labels=labels
    )
    outlier_rate = labels.marks.mean()
    print(f"wrote {out} ({len(labels)} rows, {outlier_rate:.1%} outliers)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
