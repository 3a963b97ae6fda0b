"""Benchmark dataset materialization.

Iris (two-class subset, 100x4) and Breast Cancer (569x30) come from
scikit-learn. The Pima-style diabetes table is not bundled with any local
library, so make-data writes a clearly labeled synthetic stand-in with the
same shape (768 rows, 8 attributes, binary outcome) from a seeded logistic
generative model. Synthetic hyperplane data backs the communication
benchmarks.
"""

from __future__ import annotations

import csv
import os

import numpy as np


def _write_csv(path: str, features: np.ndarray, labels: np.ndarray):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(features.shape[1])] + ["label"])
        for row, lab in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def write_iris(path: str) -> str:
    """Classes 0 and 1 of the iris data: 100 rows, 4 features."""
    from sklearn.datasets import load_iris

    data = load_iris()
    keep = data.target < 2
    _write_csv(path, data.data[keep], data.target[keep])
    return path


def write_breast_cancer(path: str) -> str:
    """569 rows, 30 features, malignant/benign outcome."""
    from sklearn.datasets import load_breast_cancer

    data = load_breast_cancer()
    _write_csv(path, data.data, data.target)
    return path


def write_diabetes_surrogate(path: str, seed: int = 20240) -> str:
    """Synthetic stand-in shaped like the Pima diabetes table (768x8).

    Positive-valued clinical-looking features, labels from a noisy logistic
    model. A surrogate, not the real survey data; results on it are labeled
    accordingly.
    """
    rng = np.random.default_rng(seed)
    n, d = 768, 8
    features = np.abs(rng.normal(loc=rng.uniform(1, 120, d),
                                 scale=rng.uniform(5, 40, d),
                                 size=(n, d)))
    beta = rng.normal(0, 1, d) / np.std(features, axis=0)
    z = (features - features.mean(axis=0)) @ beta
    z = 1.2 * z / np.std(z)
    prob = 1.0 / (1.0 + np.exp(-(z - 0.55)))
    labels = (rng.uniform(size=n) < prob).astype(int)
    _write_csv(path, features, labels)
    return path


def write_synthetic(path: str, rows: int, cols: int, seed: int = 0) -> str:
    """Seeded standard-normal features, labels by a random hyperplane."""
    features, labels = synthetic_arrays(rows, cols, seed)
    _write_csv(path, features, labels)
    return path


def synthetic_arrays(rows: int, cols: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((rows, cols))
    w = rng.standard_normal(cols)
    labels = (features @ w + 0.3 * rng.standard_normal(rows) > 0).astype(float)
    return features, labels


def make_all(outdir: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    return {
        "iris": write_iris(os.path.join(outdir, "iris.csv")),
        "breast_cancer": write_breast_cancer(os.path.join(outdir, "breast_cancer.csv")),
        "diabetes_synthetic": write_diabetes_surrogate(
            os.path.join(outdir, "diabetes_synthetic.csv")),
    }
