"""Shuttle dataset helpers.

The Statlog Shuttle data has 58000 rows of nine integer attributes plus a
class in 1..7. Classes 1 (Rad Flow) and 4 (High) are treated as normal, the
other five as outliers, which puts the outlier rate near 6%. The raw
distribution format is whitespace-separated with the class in the last
column; ``load_shuttle_raw`` converts it to the toolkit's tabular layout
with a binary label column.
"""

from __future__ import annotations

import numpy as np

from .data import FeatureMatrix, LabelVector
from .errors import SchemaError

NORMAL_CLASSES = (1, 4)
N_ATTRIBUTES = 9


def binarize_classes(classes) -> LabelVector:
    """Map raw shuttle classes to 0 = normal (1, 4), 1 = outlier (rest)."""
    classes = np.asarray(classes, dtype=np.int64)
    if classes.size and (classes.min() < 1 or classes.max() > 7):
        raise SchemaError("shuttle classes must lie in 1..7")
    return LabelVector((~np.isin(classes, NORMAL_CLASSES)).astype(np.uint8))


def load_shuttle_raw(path):
    """Read whitespace-separated shuttle rows (9 attributes + class).

    Returns (FeatureMatrix, LabelVector) with binary labels.
    """
    rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if rows.shape[1] != N_ATTRIBUTES + 1:
        raise SchemaError(
            f"{path}: expected {N_ATTRIBUTES + 1} columns, got {rows.shape[1]}"
        )
    X = FeatureMatrix(
        rows[:, :N_ATTRIBUTES], [f"a{i}" for i in range(N_ATTRIBUTES)]
    )
    return X, binarize_classes(rows[:, N_ATTRIBUTES])
