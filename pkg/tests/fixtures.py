"""Shared model/data builders for the test suite.

Everything here is deterministic given the seeds baked into the helpers, so
expected values frozen in the tests stay reproducible.
"""

from __future__ import annotations

import numpy as np

from treecfx.trees import DecisionTree, TreeEnsemble, TreeNode


def make_leaf(nid: int, dist) -> TreeNode:
    return TreeNode(nid, distribution=tuple(float(v) for v in dist))


def make_split(nid: int, feature: int, threshold: float, left: int, right: int) -> TreeNode:
    return TreeNode(nid, feature=feature, threshold=threshold, left=left, right=right)


def depth1_tree(theta=0.5, feature=0, left_dist=(0.0, 1.0), right_dist=(1.0, 0.0), n_classes=2):
    nodes = [
        make_split(0, feature, theta, 1, 2),
        make_leaf(1, left_dist),
        make_leaf(2, right_dist),
    ]
    return DecisionTree(nodes, root_id=0, n_classes=n_classes)


def depth1_model(theta=0.5, n_features=1) -> TreeEnsemble:
    """Single depth-1 tree: class 1 iff x0 > theta. True boundary known exactly."""
    return TreeEnsemble(
        trees=(depth1_tree(theta),),
        weights=(1.0,),
        model_kind="decision_tree",
        n_classes=2,
        feature_names=tuple(f"f{i}" for i in range(n_features)),
    )


def three_tree_model() -> TreeEnsemble:
    """Three-tree boosted ensemble over two features whose decision boundary
    needs at least two trees to flip: single-tree tweaks cannot flip it."""
    t3_nodes = [
        make_split(0, 0, 0.55, 1, 2),
        make_split(1, 1, 0.55, 3, 4),
        make_leaf(2, (1.0, 0.0)),
        make_leaf(3, (0.0, 1.0)),
        make_leaf(4, (1.0, 0.0)),
    ]
    return TreeEnsemble(
        trees=(
            depth1_tree(0.6, feature=0),
            depth1_tree(0.6, feature=1),
            DecisionTree(t3_nodes, root_id=0, n_classes=2),
        ),
        weights=(1.0, 1.0, 1.0),
        model_kind="adaboost",
        n_classes=2,
        feature_names=("f0", "f1"),
    )


THREE_TREE_NEGATIVE_INSTANCES = np.array(
    [[0.3, 0.3], [0.2, 0.45], [0.5, 0.2], [0.45, 0.5], [0.1, 0.1]]
)


def random_tree(rng: np.random.Generator, n_features: int, max_depth: int, n_classes: int,
                leaf_prob: float = 0.25, labeler=None) -> DecisionTree:
    """Random binary tree. Leaf distributions are Dirichlet-like noise unless a
    `labeler(lo, hi) -> distribution` is given, which receives the leaf's
    feature box and lets callers paint coherent class regions."""
    counter = iter(range(1 << 20))
    nodes: list[TreeNode] = []

    def build(depth: int, lo: np.ndarray, hi: np.ndarray) -> int:
        nid = next(counter)
        if depth == 0 or rng.random() < leaf_prob:
            if labeler is None:
                dist = rng.random(n_classes) + 0.05
                dist = dist / dist.sum()
            else:
                dist = labeler(lo, hi)
            nodes.append(make_leaf(nid, dist))
            return nid
        feature = int(rng.integers(n_features))
        threshold = float(rng.uniform(0.1, 0.9))
        lo_l, hi_r = lo.copy(), hi.copy()
        lo_l[feature] = max(lo[feature], threshold)  # left: x > threshold
        hi_r[feature] = min(hi[feature], threshold)
        left = build(depth - 1, lo_l, hi)
        right = build(depth - 1, lo, hi_r)
        nodes.append(make_split(nid, feature, threshold, left, right))
        return nid

    root = build(max_depth, np.zeros(n_features), np.ones(n_features))
    return DecisionTree(nodes, root_id=root, n_classes=n_classes)


def _smooth_labeler(rng: np.random.Generator, n_features: int, n_classes: int):
    """Leaf labeler mimicking a trained model: class probability follows a
    logistic score of the leaf-box center, so class regions are contiguous."""
    w = rng.normal(0, 1.0, n_features)
    w /= np.linalg.norm(w)
    bias = rng.uniform(-0.15, 0.15)

    def labeler(lo: np.ndarray, hi: np.ndarray):
        center = (lo + hi) / 2.0
        score = 6.0 * (w @ (center - 0.5) + bias) + rng.normal(0, 0.3)
        p1 = 1.0 / (1.0 + np.exp(-score))
        p1 = min(max(p1, 1e-3), 1.0 - 1e-3)
        if n_classes == 2:
            return np.array([1.0 - p1, p1])
        rest = rng.random(n_classes - 1) + 0.05
        rest = (1.0 - p1) * rest / rest.sum()
        return np.concatenate([[p1], rest])

    return labeler


def random_ensemble(rng: np.random.Generator, n_features: int, n_trees: int, max_depth: int,
                    n_classes: int = 2, kind: str = "random_forest",
                    coherent: bool = False) -> TreeEnsemble:
    if kind == "decision_tree":
        n_trees = 1
    labeler = _smooth_labeler(rng, n_features, n_classes) if coherent else None
    trees = tuple(
        random_tree(rng, n_features, max_depth, n_classes, labeler=labeler)
        for _ in range(n_trees)
    )
    if kind == "adaboost":
        weights = tuple(float(w) for w in rng.uniform(0.3, 1.2, n_trees))
    else:
        weights = (1.0,) * n_trees
    return TreeEnsemble(
        trees=trees,
        weights=weights,
        model_kind=kind,
        n_classes=n_classes,
        feature_names=tuple(f"f{i}" for i in range(n_features)),
    )


def ensemble_thresholds(ensemble: TreeEnsemble) -> dict[int, np.ndarray]:
    by_feature: dict[int, list[float]] = {}
    for tree in ensemble.trees:
        for node in tree.nodes.values():
            if not node.is_leaf:
                by_feature.setdefault(node.feature, []).append(node.threshold)
    return {f: np.asarray(sorted(v)) for f, v in by_feature.items()}


def off_threshold_points(rng: np.random.Generator, ensemble: TreeEnsemble, n: int,
                         margin: float = 0.01) -> np.ndarray:
    """Uniform points with every coordinate at least `margin` from any split
    threshold of its feature, so hard and sharp-soft predictions must agree."""
    thresholds = ensemble_thresholds(ensemble)
    X = rng.uniform(0.0, 1.0, size=(n, ensemble.n_features))
    for f, ths in thresholds.items():
        col = X[:, f]
        for _ in range(200):
            bad = np.min(np.abs(col[:, None] - ths[None, :]), axis=1) < margin
            if not bad.any():
                break
            col[bad] = rng.uniform(0.0, 1.0, size=int(bad.sum()))
        X[:, f] = col
    return X


def synthetic_instances(which: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Four synthetic tabular stand-ins with different shapes/correlations.

    Dimensionalities (8-12) mirror the evaluated tabular datasets; values stay
    in the unit box and away from the exact zero vector (cosine needs it).
    """
    if which == 0:
        return rng.uniform(0.02, 0.98, size=(n, 9))
    if which == 1:
        f = 10
        base = 0.5 * np.eye(f) + 0.5
        cov = base * np.power(0.7, np.abs(np.subtract.outer(np.arange(f), np.arange(f))))
        raw = rng.multivariate_normal(np.zeros(f), cov, size=n)
        return np.clip(0.5 + raw / 6.0, 0.02, 0.98)
    if which == 2:
        centers = rng.uniform(0.2, 0.8, size=(3, 8))
        pick = rng.integers(len(centers), size=n)
        return np.clip(centers[pick] + rng.normal(0, 0.12, size=(n, 8)), 0.02, 0.98)
    if which == 3:
        base = rng.uniform(0.02, 0.98, size=(n, 12))
        base[:, 3] = np.clip(0.8 * base[:, 0] + 0.2 * rng.random(n), 0.02, 0.98)
        base[:, 7] = np.clip(
            0.5 * base[:, 1] + 0.4 * base[:, 2] + rng.normal(0, 0.08, n) + 0.05, 0.02, 0.98
        )
        return base
    raise ValueError(f"no synthetic dataset {which}")


SYNTH_NAMES = ("synth_uniform", "synth_corr", "synth_blobs", "synth_mixed")
MODEL_KINDS = ("decision_tree", "random_forest", "adaboost")


def desk_setting(dataset_idx: int, kind: str, n_rows: int = 140, seed: int = 20240) -> tuple[TreeEnsemble, np.ndarray, np.ndarray]:
    """One (synthetic dataset, model kind) pair: model + train/test instance
    matrices. The model is regenerated until the test split sees both classes
    and each class keeps a reasonable share, so a counterfactual exists for
    every instance."""
    rng = np.random.default_rng(seed + 131 * dataset_idx + 17 * MODEL_KINDS.index(kind))
    X = synthetic_instances(dataset_idx, rng, n_rows)
    n_features = X.shape[1]
    n_train = int(0.7 * n_rows)
    X_train, X_test = X[:n_train], X[n_train:]
    sizes = {"decision_tree": (1, 4), "random_forest": (7, 3), "adaboost": (5, 3)}
    n_trees, depth = sizes[kind]
    from treecfx.soft import get_engine

    for _ in range(200):
        model = random_ensemble(rng, n_features, n_trees, depth, kind=kind, coherent=True)
        labels = get_engine(model).hard_labels(X)
        share = labels.mean()
        test_labels = labels[n_train:]
        if 0.15 <= share <= 0.85 and len(set(test_labels.tolist())) == 2:
            return model, X_train, X_test
    raise RuntimeError("could not build a balanced desk-scale setting")
