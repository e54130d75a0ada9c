"""anomkit: ensemble anomaly detection with synthetic-anomaly threshold calibration.

Train ensembles of base outlier detectors on clean sensor data, inject
artificial anomalies into a held-out split, and pick the decision threshold
that optimizes a vicinity-tolerant F1 on the injected labels. Ships as a
library plus a batch CLI (``anomkit gen-corpus | run | score``).
"""

__version__ = "0.1.0"
