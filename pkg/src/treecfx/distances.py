"""Differentiable distance functions and covariance estimation.

Four kinds: euclidean, cosine, manhattan, mahalanobis. Gradients are taken
with respect to the perturbed point; at non-smooth loci (coordinate equality
for manhattan, coincident points for euclidean/mahalanobis) the subgradient 0
is used, which keeps already-matched features fixed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericFailure

KINDS = ("euclidean", "cosine", "manhattan", "mahalanobis")

_DELTA_LADDER = (0.0, 1e-8, 1e-6, 1e-4)


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance with the smallest ridge that makes it positive definite."""

    matrix: np.ndarray
    delta: float

    @property
    def regularized(self) -> np.ndarray:
        return self.matrix + self.delta * np.eye(self.matrix.shape[0])


def estimate_covariance(training_matrix) -> CovarianceEstimate:
    """Sample covariance (divisor N-1) of the training rows, ridged until Cholesky succeeds."""
    m = np.asarray(training_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError("covariance estimation needs a 2-D matrix with at least 2 rows")
    cov = np.atleast_2d(np.cov(m, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    eye = np.eye(cov.shape[0])
    eps = np.finfo(float).eps
    for delta in _DELTA_LADDER:
        ridged = cov + delta * eye
        # Cholesky alone accepts numerically singular inputs (the zero pivot
        # comes out as rounding noise), so gate on the numerical rank first
        eigs = np.linalg.eigvalsh(ridged)
        if eigs[0] <= cov.shape[0] * eps * max(eigs[-1], eps):
            continue
        try:
            np.linalg.cholesky(ridged)
        except np.linalg.LinAlgError:
            continue
        return CovarianceEstimate(matrix=cov, delta=delta)
    raise NumericFailure("covariance not positive definite even after regularization")


def save_covariance(path, estimate: CovarianceEstimate, dataset_hash: str) -> None:
    doc = {
        "F": estimate.matrix.shape[0],
        "delta": estimate.delta,
        "matrix": estimate.matrix.tolist(),
        "dataset_hash": dataset_hash,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_covariance(path, expected_hash: str | None = None) -> CovarianceEstimate:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if expected_hash is not None and doc.get("dataset_hash") != expected_hash:
        raise ValueError("covariance sidecar was computed for a different dataset")
    matrix = np.asarray(doc["matrix"], dtype=float)
    if matrix.shape != (doc["F"], doc["F"]):
        raise ValueError("covariance sidecar matrix shape mismatch")
    return CovarianceEstimate(matrix=matrix, delta=float(doc["delta"]))


def matrix_hash(m) -> str:
    arr = np.ascontiguousarray(np.asarray(m, dtype=float))
    return hashlib.sha256(arr.tobytes()).hexdigest()


class Distance:
    """A distance kind bound to whatever state it needs (covariance for mahalanobis)."""

    def __init__(self, kind: str, covariance: CovarianceEstimate | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown distance kind {kind!r}")
        if kind == "mahalanobis":
            if covariance is None:
                raise ValueError("mahalanobis distance needs a covariance estimate")
            try:
                self._cho = cho_factor(covariance.regularized, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NumericFailure("covariance not positive definite") from exc
        else:
            self._cho = None
        self.kind = kind
        self.covariance = covariance

    def __repr__(self):
        return f"Distance({self.kind!r})"

    def value(self, x, xbar) -> float:
        return float(self.batch_value(np.asarray(x)[None, :], np.asarray(xbar)[None, :])[0])

    def gradient(self, x, xbar) -> np.ndarray:
        return self.batch_gradient(np.asarray(x)[None, :], np.asarray(xbar)[None, :])[0]

    def batch_value(self, X, Xbar) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Xbar = np.asarray(Xbar, dtype=float)
        if X.shape != Xbar.shape:
            raise ValueError("x and xbar shapes differ")
        diff = Xbar - X
        if self.kind == "euclidean":
            return np.sqrt(np.sum(diff * diff, axis=1))
        if self.kind == "manhattan":
            return np.sum(np.abs(diff), axis=1)
        if self.kind == "cosine":
            nx = np.linalg.norm(X, axis=1)
            nb = np.linalg.norm(Xbar, axis=1)
            if np.any(nx == 0) or np.any(nb == 0):
                raise ValueError("cosine distance undefined for the zero vector")
            return 1.0 - np.sum(X * Xbar, axis=1) / (nx * nb)
        w = cho_solve(self._cho, diff.T)
        return np.sqrt(np.sum(diff.T * w, axis=0))

    def batch_gradient(self, X, Xbar) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Xbar = np.asarray(Xbar, dtype=float)
        if X.shape != Xbar.shape:
            raise ValueError("x and xbar shapes differ")
        diff = Xbar - X
        if self.kind == "manhattan":
            return np.sign(diff)
        if self.kind == "euclidean":
            d = np.sqrt(np.sum(diff * diff, axis=1))
            safe = np.where(d > 0, d, 1.0)
            return np.where(d[:, None] > 0, diff / safe[:, None], 0.0)
        if self.kind == "cosine":
            nx = np.linalg.norm(X, axis=1)
            nb = np.linalg.norm(Xbar, axis=1)
            if np.any(nx == 0) or np.any(nb == 0):
                raise ValueError("cosine distance undefined for the zero vector")
            dot = np.sum(X * Xbar, axis=1)
            return -X / (nx * nb)[:, None] + (dot / (nx * nb**3))[:, None] * Xbar
        z = cho_solve(self._cho, diff.T).T
        d = np.sqrt(np.sum(diff * z, axis=1))
        safe = np.where(d > 0, d, 1.0)
        return np.where(d[:, None] > 0, z / safe[:, None], 0.0)


def distance(kind: str, x, xbar, covariance: CovarianceEstimate | None = None) -> float:
    """Distance between two points under the named kind."""
    return Distance(kind, covariance).value(x, xbar)


def distance_gradient(kind: str, x, xbar, covariance: CovarianceEstimate | None = None) -> np.ndarray:
    """Gradient of the distance with respect to the perturbed point xbar."""
    return Distance(kind, covariance).gradient(x, xbar)
