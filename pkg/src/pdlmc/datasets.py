"""Synthetic datasets bundled with the package.

The fairness problem ships with a synthetic census-style table rather than
any real survey extract: 2000 rows, five real features plus intercept, a
binary label, and two demographic groups ("a" and "b") with an engineered
positive-rate gap of about 0.2.  A disjoint holdout table from the same
generator supports out-of-sample readouts.  The market problem ships a
three-asset daily log-return series.

``scripts/generate_data.py`` regenerates the CSV files from these functions;
the seeds below are frozen so the files are reproducible byte for byte.
"""

from __future__ import annotations

import csv
from importlib import resources

import numpy as np
from scipy import special

from .problems import LabeledTable, load_labeled_csv

ADULT_SEED = 20240611
ADULT_HOLDOUT_SEED = 20240612
RETURNS_SEED = 20240613

# label model: p(y=1 | x) = sigmoid(c0 + w . x); group "b" has its first two
# features shifted down, which is what creates the ~0.2 positive-rate gap.
_LABEL_BIAS = -1.3
_LABEL_W = np.array([1.0, 0.7, 0.5, 0.3, 0.0])
_GROUP_B_SHIFT = np.array([-1.6, -0.5, 0.0, 0.0, 0.0])
_GROUP_B_FRACTION = 0.4


def synthetic_adult_table(n_rows=2000, seed=ADULT_SEED):
    """Draw the synthetic census-style table used by the fairness problem."""
    rng = np.random.default_rng(seed)
    is_b = rng.random(n_rows) < _GROUP_B_FRACTION
    feats = rng.standard_normal((n_rows, _LABEL_W.size))
    feats[is_b] += _GROUP_B_SHIFT
    p = special.expit(_LABEL_BIAS + feats @ _LABEL_W)
    labels = (rng.random(n_rows) < p).astype(np.int64)
    features = np.column_stack([np.ones(n_rows), feats])
    names = ("intercept",) + tuple(f"feat_{i}" for i in range(_LABEL_W.size))
    row_groups = np.where(is_b, "b", "a")
    return LabeledTable(features=features, labels=labels,
                        group_names=("a", "b"), row_groups=row_groups,
                        feature_names=names)


def synthetic_returns(n_days=250, seed=RETURNS_SEED,
                      means=(0.50, 0.20, -0.05), vols=(1.0, 0.8, 0.6)):
    """Independent Gaussian daily log-returns for a small asset universe."""
    rng = np.random.default_rng(seed)
    means = np.asarray(means, dtype=float)
    vols = np.asarray(vols, dtype=float)
    series = means + vols * rng.standard_normal((n_days, means.size))
    names = tuple(f"asset{i}" for i in range(means.size))
    return names, series


def correlated_pair_returns(n_days=200, seed=7,
                            means=(0.50, 0.10), vols=(1.0, 0.5)):
    """Two assets driven by one common shock: sample correlation exactly 1."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_days)
    series = np.column_stack([means[0] + vols[0] * z, means[1] + vols[1] * z])
    return ("asset0", "asset1"), series


def write_returns_csv(names, series, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in series:
            writer.writerow([format(v, ".17g") for v in row])


def load_returns_csv(path):
    """Read a per-asset return series: header of asset names, float rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        names = tuple(next(reader))
        rows = [[float(v) for v in row] for row in reader]
    return names, np.array(rows, dtype=float)


def _data_path(name):
    return resources.files("pdlmc").joinpath("data", name)


def bundled_adult_table():
    """The shipped 2000-row synthetic table (same schema as the loader expects)."""
    return load_labeled_csv(_data_path("synthetic_adult.csv"))


def bundled_adult_holdout():
    return load_labeled_csv(_data_path("synthetic_adult_holdout.csv"))


def bundled_returns():
    return load_returns_csv(_data_path("synthetic_returns.csv"))
