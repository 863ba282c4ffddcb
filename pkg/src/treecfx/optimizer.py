"""Gradient-based counterfactual search on the soft ensemble approximation.

The loss is the soft probability of the original class, gated off by the
*hard* model once the prediction flips, plus a weighted distance term. Search
runs Adam from the original instance; after every step the closest iterate
whose hard prediction differs from the original is recorded, and that best
valid iterate is returned (not the final one). The method is deterministic.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .distances import Distance
from .errors import NumericFailure
from .results import CounterfactualResult
from .soft import PathEngine, SoftEnsembleParams, get_engine
from .trees import TreeEnsemble, ensemble_predict

logger = logging.getLogger(__name__)

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

DEFAULT_GRID = {
    "sigma": [1.0, 5.0, 10.0, 50.0],
    "tau": [1.0, 5.0, 10.0],
    "beta": [0.01, 0.1],
    "alpha": [0.001, 0.01, 0.1],
}


@dataclass(frozen=True)
class FocusConfig:
    """Hyperparameters of one search run."""

    params: SoftEnsembleParams
    beta: float
    learning_rate: float
    distance: Distance
    iterations: int = 1000
    clamp_to_unit_box: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        # beta = 0 degenerates to the pure prediction loss and is allowed
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError("beta must be a non-negative finite real")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning rate must be positive")


@dataclass
class Trace:
    """Per-iteration best-valid summary: how many instances are valid so far
    and the mean distance of their best counterfactuals (nan before any)."""

    n_instances: int
    n_valid: np.ndarray
    sum_best_distance: np.ndarray

    @property
    def mean_best_distance(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n_valid > 0, self.sum_best_distance / self.n_valid, np.nan)

    @property
    def completion_iteration(self) -> int | None:
        """First iteration (1-based) at which every instance has a valid example."""
        hits = np.nonzero(self.n_valid == self.n_instances)[0]
        return int(hits[0]) + 1 if hits.size else None

    @property
    def peak_iteration(self) -> int | None:
        mean = self.mean_best_distance
        if np.all(np.isnan(mean)):
            return None
        return int(np.nanargmax(mean)) + 1

    def write_csv(self, path) -> None:
        mean = self.mean_best_distance
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,n_valid,pct_valid,mean_best_distance\n")
            for i in range(self.n_valid.size):
                pct = self.n_valid[i] / self.n_instances if self.n_instances else 0.0
                fh.write(f"{i + 1},{self.n_valid[i]},{pct:.6f},{mean[i]}\n")


def prediction_loss(ensemble: TreeEnsemble, params: SoftEnsembleParams, xbar, y_x: int) -> float:
    """Soft probability of the original class, zeroed once the hard model flips."""
    engine = get_engine(ensemble)
    xb = np.asarray(xbar, dtype=float)[None, :]
    if int(engine.hard_labels(xb)[0]) != y_x:
        return 0.0
    return float(engine.soft_probabilities(xb, params)[0, y_x])


def total_loss(ensemble: TreeEnsemble, config: FocusConfig, x, xbar) -> float:
    """Prediction loss plus beta times the distance between x and xbar."""
    y_x, _ = ensemble_predict(ensemble, x)
    return prediction_loss(ensemble, config.params, xbar, y_x) + config.beta * config.distance.value(
        x, xbar
    )


def _run_chunk(
    engine: PathEngine,
    config: FocusConfig,
    X: np.ndarray,
    indices: np.ndarray,
) -> tuple[list[CounterfactualResult], Trace]:
    B, F = X.shape
    dist = config.distance
    sigma_tau = config.params
    y0 = engine.hard_labels(X)
    xb = X.copy()
    m = np.zeros_like(xb)
    v = np.zeros_like(xb)
    best_x = np.zeros_like(xb)
    best_d = np.full(B, np.inf)
    best_label = np.full(B, -1, dtype=int)
    found_iter = np.zeros(B, dtype=int)
    n_valid_trace = np.zeros(config.iterations, dtype=int)
    sum_d_trace = np.zeros(config.iterations)

    for t in range(1, config.iterations + 1):
        _, grad_p = engine.soft_probabilities_and_gradient(xb, sigma_tau)
        gate = engine.hard_labels(xb) == y0
        g = grad_p[np.arange(B), y0, :] * gate[:, None]
        g += config.beta * dist.batch_gradient(X, xb)
        if not np.all(np.isfinite(g)):
            raise NumericFailure(f"non-finite loss gradient at iteration {t}")
        m = _ADAM_BETA1 * m + (1 - _ADAM_BETA1) * g
        v = _ADAM_BETA2 * v + (1 - _ADAM_BETA2) * g * g
        m_hat = m / (1 - _ADAM_BETA1**t)
        v_hat = v / (1 - _ADAM_BETA2**t)
        step = -config.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        cand = xb + step
        if dist.kind == "cosine":
            cand = _avoid_zero_vector(xb, step, cand, t)
        if config.clamp_to_unit_box:
            cand = np.clip(cand, 0.0, 1.0)
        xb = cand
        labels = engine.hard_labels(xb)
        flipped = labels != y0
        d = dist.batch_value(X, xb)
        improved = flipped & (d < best_d)
        if np.any(improved):
            best_x[improved] = xb[improved]
            best_d[improved] = d[improved]
            best_label[improved] = labels[improved]
            found_iter[improved] = t
        valid = best_d < np.inf
        n_valid_trace[t - 1] = int(valid.sum())
        sum_d_trace[t - 1] = float(best_d[valid].sum())

    results = []
    for i in range(B):
        valid = bool(best_d[i] < np.inf)
        results.append(
            CounterfactualResult(
                index=int(indices[i]),
                method="focus",
                original=X[i].copy(),
                label=int(y0[i]),
                valid=valid,
                counterfactual=best_x[i].copy() if valid else None,
                cf_label=int(best_label[i]) if valid else None,
                distance=float(best_d[i]) if valid else None,
                iteration_found=int(found_iter[i]) if valid else None,
            )
        )
    return results, Trace(n_instances=B, n_valid=n_valid_trace, sum_best_distance=sum_d_trace)


def _avoid_zero_vector(xb, step, cand, iteration):
    bad = np.linalg.norm(cand, axis=1) == 0
    tries = 0
    while np.any(bad) and tries < 64:
        step = step.copy()
        step[bad] *= 0.5
        cand = xb + step
        bad = np.linalg.norm(cand, axis=1) == 0
        tries += 1
    if np.any(bad):
        raise NumericFailure(f"iterate pinned at the zero vector at iteration {iteration}")
    if tries:
        logger.warning("halved %d step(s) at iteration %d to keep cosine iterates off zero", tries, iteration)
    return cand


def generate_counterfactual(
    ensemble: TreeEnsemble, config: FocusConfig, x, index: int = 0
) -> CounterfactualResult:
    """Search a counterfactual for a single instance; see generate_batch."""
    x = np.asarray(x, dtype=float)
    results, _ = generate_batch(ensemble, config, x[None, :], indices=[index], workers=1)
    return results[0]


def generate_batch(
    ensemble: TreeEnsemble,
    config: FocusConfig,
    X,
    indices=None,
    workers: int | None = None,
) -> tuple[list[CounterfactualResult], Trace]:
    """Run the search for every row of X.

    Instances are independent; `workers` only splits the batch into chunks
    evaluated concurrently against the shared immutable model, so results are
    identical for any worker count. Returns the per-instance results (in input
    order) and the per-iteration trace.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D instance matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("instances must be finite")
    if indices is None:
        indices = np.arange(X.shape[0])
    indices = np.asarray(indices, dtype=int)
    engine = get_engine(ensemble)
    if X.shape[1] != engine.n_features:
        raise ValueError(f"expected {engine.n_features} features, got {X.shape[1]}")
    if workers is None or workers <= 0:
        workers = os.cpu_count() or 1
    n_chunks = max(1, min(workers, X.shape[0]))
    bounds = np.linspace(0, X.shape[0], n_chunks + 1).astype(int)
    chunks = [(X[a:b], indices[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(chunks) == 1:
        return _run_chunk(engine, config, chunks[0][0], chunks[0][1])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: _run_chunk(engine, config, *c), chunks))
    results = [res for part, _ in parts for res in part]
    trace = Trace(
        n_instances=X.shape[0],
        n_valid=np.sum([tr.n_valid for _, tr in parts], axis=0),
        sum_best_distance=np.sum([tr.sum_best_distance for _, tr in parts], axis=0),
    )
    return results, trace


@dataclass
class SweepEntry:
    sigma: float
    tau: float
    beta: float
    alpha: float
    n_valid: int
    validity_pct: float
    d_mean: float


@dataclass
class SweepOutcome:
    best_config: FocusConfig
    complete: bool
    entries: list[SweepEntry] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sigma,tau,beta,alpha,validity_pct,d_mean\n")
            for e in self.entries:
                fh.write(f"{e.sigma},{e.tau},{e.beta},{e.alpha},{e.validity_pct:.6f},{e.d_mean}\n")


def expand_grid(grid: dict) -> list[tuple[float, float, float, float]]:
    try:
        axes = [list(grid[k]) for k in ("sigma", "tau", "beta", "alpha")]
    except KeyError as exc:
        raise ValueError(f"grid is missing axis {exc}") from exc
    if any(len(a) == 0 for a in axes):
        raise ValueError("grid axes must be non-empty")
    combos = [tuple(float(v) for v in combo) for combo in product(*axes)]
    for sigma, tau, beta, alpha in combos:
        if sigma <= 0 or tau <= 0 or alpha <= 0 or beta < 0:
            raise ValueError(f"invalid grid point sigma={sigma} tau={tau} beta={beta} alpha={alpha}")
    return combos


def sweep_hyperparameters(
    ensemble: TreeEnsemble,
    grid: dict,
    X_test,
    distance: Distance,
    iterations: int = 1000,
    clamp_to_unit_box: bool = False,
    workers: int | None = None,
) -> SweepOutcome:
    """Evaluate every grid point and pick the best configuration.

    Selection follows the tuning protocol: among configurations that produce a
    valid example for every test instance, the one with the smallest mean
    distance wins. If none achieves full validity, the one covering the most
    instances wins (ties by the smaller mean distance over its valid subset)
    and the outcome is flagged incomplete.
    """
    X_test = np.asarray(X_test, dtype=float)
    if X_test.ndim != 2 or X_test.shape[0] == 0:
        raise ValueError("X_test must be a non-empty 2-D matrix")
    combos = expand_grid(grid)
    n = X_test.shape[0]
    entries = []
    configs = []
    for sigma, tau, beta, alpha in combos:
        config = FocusConfig(
            params=SoftEnsembleParams(sigma=sigma, tau=tau),
            beta=beta,
            learning_rate=alpha,
            distance=distance,
            iterations=iterations,
            clamp_to_unit_box=clamp_to_unit_box,
        )
        results, _ = generate_batch(ensemble, config, X_test, workers=workers)
        dists = [r.distance for r in results if r.valid]
        d_mean = float(np.mean(dists)) if dists else math.nan
        entries.append(
            SweepEntry(
                sigma=sigma,
                tau=tau,
                beta=beta,
                alpha=alpha,
                n_valid=len(dists),
                validity_pct=len(dists) / n,
                d_mean=d_mean,
            )
        )
        configs.append(config)

    def sort_key(i: int):
        e = entries[i]
        d = e.d_mean if not math.isnan(e.d_mean) else np.inf
        return (-e.n_valid, d, i)

    best_i = min(range(len(entries)), key=sort_key)
    complete = entries[best_i].n_valid == n
    return SweepOutcome(best_config=configs[best_i], complete=complete, entries=entries)
