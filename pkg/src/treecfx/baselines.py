"""Feature-Tweaking and Random-Perturbation baseline generators.

Both emit the same result records as the gradient-based search. Feature
Tweaking perturbs an instance to activate, with an epsilon margin, each leaf
of each tree whose label differs from the original prediction; candidates
that fail to flip the full ensemble are dropped, which is the method's known
failure mode on ensembles. Random Perturbation draws Gaussian noise around
the instance and keeps the closest draw that flips the prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distances import Distance
from .results import CounterfactualResult
from .soft import get_engine
from .trees import DecisionTree, TreeEnsemble, node_activation

FT_EPSILON_GRID = (0.001, 0.005, 0.01, 0.1)


@dataclass(frozen=True)
class FtConfig:
    epsilon: float = 0.01
    epsilon_grid: tuple[float, ...] = FT_EPSILON_GRID

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class RpConfig:
    samples: int = 1000
    scale: float = 0.5  # standard deviation of the per-coordinate Gaussian
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not self.scale > 0:
            raise ValueError("noise scale must be positive")


def ft_changing_leaves(tree: DecisionTree, y_x: int) -> set[int]:
    """Leaves whose argmax label differs from y_x (ties to the lowest index)."""
    return {
        nid
        for nid in tree.leaf_ids
        if int(np.argmax(tree.nodes[nid].distribution)) != y_x
    }


def _path_conditions(tree: DecisionTree, leaf_id: int) -> list[tuple[int, float, bool]]:
    """Root-to-leaf list of (feature, threshold, is_left_branch)."""
    conditions = []
    nid = leaf_id
    while nid != tree.root_id:
        pid = tree.parent[nid]
        parent = tree.nodes[pid]
        conditions.append((parent.feature, parent.threshold, nid == parent.left))
        nid = pid
    conditions.reverse()
    return conditions


def ft_perturb_to_leaf(tree: DecisionTree, leaf_id: int, x, epsilon: float) -> np.ndarray:
    """Minimal per-threshold perturbation that activates the target leaf.

    Conditions are applied in root-to-leaf order against the running
    perturbation: one already satisfied with an epsilon margin leaves the
    feature untouched, otherwise the feature is set to threshold +/- epsilon.
    Later conditions on the same feature therefore override earlier ones.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    xbar = np.asarray(x, dtype=float).copy()
    for feature, threshold, is_left in _path_conditions(tree, leaf_id):
        if is_left:
            if not xbar[feature] >= threshold + epsilon:
                xbar[feature] = threshold + epsilon
        else:
            if not xbar[feature] <= threshold - epsilon:
                xbar[feature] = threshold - epsilon
    return xbar


def ft_candidates(
    ensemble: TreeEnsemble, cfg: FtConfig, x, y_x: int
) -> list[tuple[int, int, np.ndarray]]:
    """All leaf-activating perturbations: (tree index, leaf id, xbar).

    Perturbations that fail to activate their target leaf (possible when the
    same feature is constrained twice along a path) are discarded.
    """
    out = []
    for ti, tree in enumerate(ensemble.trees):
        for leaf_id in sorted(ft_changing_leaves(tree, y_x)):
            xbar = ft_perturb_to_leaf(tree, leaf_id, x, cfg.epsilon)
            if node_activation(tree, leaf_id, xbar) == 1:
                out.append((ti, leaf_id, xbar))
    return out


def ft_generate(
    ensemble: TreeEnsemble, cfg: FtConfig, x, distance: Distance, index: int = 0
) -> CounterfactualResult:
    """Closest candidate whose hard ensemble prediction differs from the original.

    Flipping a single tree does not guarantee flipping the ensemble, so the
    result may be invalid even though candidates exist.
    """
    x = np.asarray(x, dtype=float)
    engine = get_engine(ensemble)
    y_x = int(engine.hard_labels(x[None, :])[0])
    candidates = ft_candidates(ensemble, cfg, x, y_x)
    best = None
    best_d = np.inf
    best_label = None
    if candidates:
        stacked = np.vstack([xbar for _, _, xbar in candidates])
        labels = engine.hard_labels(stacked)
        dists = distance.batch_value(np.broadcast_to(x, stacked.shape), stacked)
        for i in range(stacked.shape[0]):
            if labels[i] != y_x and dists[i] < best_d:
                best = stacked[i]
                best_d = float(dists[i])
                best_label = int(labels[i])
    return CounterfactualResult(
        index=index,
        method="ft",
        original=x.copy(),
        label=y_x,
        valid=best is not None,
        counterfactual=None if best is None else best.copy(),
        cf_label=best_label,
        distance=None if best is None else best_d,
        iteration_found=None,
    )


def ft_select_epsilon(
    ensemble: TreeEnsemble, X, distance: Distance, grid=FT_EPSILON_GRID
) -> tuple[float, list[dict]]:
    """Pick the epsilon that maximizes the number of valid examples, then
    minimizes the mean distance; returns it with per-epsilon summaries."""
    X = np.asarray(X, dtype=float)
    summaries = []
    for eps in grid:
        cfg = FtConfig(epsilon=eps)
        results = [ft_generate(ensemble, cfg, X[i], distance, index=i) for i in range(X.shape[0])]
        dists = [r.distance for r in results if r.valid]
        summaries.append(
            {
                "epsilon": eps,
                "n_valid": len(dists),
                "d_mean": float(np.mean(dists)) if dists else float("nan"),
            }
        )
    def key(s):
        d = s["d_mean"]
        return (-s["n_valid"], d if d == d else np.inf)
    best = min(summaries, key=key)
    return best["epsilon"], summaries


def rp_generate(
    ensemble: TreeEnsemble, cfg: RpConfig, x, distance: Distance, index: int = 0
) -> CounterfactualResult:
    """Best of `samples` Gaussian perturbations that flips the hard prediction.

    Uses a PCG64 generator seeded from cfg.seed, so a fixed seed reproduces
    the draws; no drawn valid sample is closer than the returned one.
    """
    x = np.asarray(x, dtype=float)
    engine = get_engine(ensemble)
    y_x = int(engine.hard_labels(x[None, :])[0])
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    draws = x[None, :] + rng.normal(0.0, cfg.scale, size=(cfg.samples, x.size))
    labels = engine.hard_labels(draws)
    flipped = labels != y_x
    if distance.kind == "cosine":
        flipped &= np.linalg.norm(draws, axis=1) > 0
    best = None
    best_d = np.inf
    best_label = None
    if np.any(flipped):
        idx = np.nonzero(flipped)[0]
        dists = distance.batch_value(np.broadcast_to(x, (idx.size, x.size)), draws[idx])
        k = int(np.argmin(dists))
        best = draws[idx[k]]
        best_d = float(dists[k])
        best_label = int(labels[idx[k]])
    return CounterfactualResult(
        index=index,
        method="rp",
        original=x.copy(),
        label=y_x,
        valid=best is not None,
        counterfactual=None if best is None else best.copy(),
        cf_label=best_label,
        distance=None if best is None else best_d,
        iteration_found=None,
    )


def rp_generate_batch(
    ensemble: TreeEnsemble, cfg: RpConfig, X, distance: Distance
) -> list[CounterfactualResult]:
    """Per-instance draws seeded as cfg.seed + row index, so results do not
    depend on the order instances are processed in."""
    X = np.asarray(X, dtype=float)
    return [
        rp_generate(
            ensemble,
            RpConfig(samples=cfg.samples, scale=cfg.scale, seed=cfg.seed + i),
            X[i],
            distance,
            index=i,
        )
        for i in range(X.shape[0])
    ]


def ft_generate_batch(
    ensemble: TreeEnsemble, cfg: FtConfig, X, distance: Distance
) -> list[CounterfactualResult]:
    X = np.asarray(X, dtype=float)
    return [ft_generate(ensemble, cfg, X[i], distance, index=i) for i in range(X.shape[0])]
