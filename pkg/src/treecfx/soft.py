"""Differentiable approximation of a tree ensemble.

Each split indicator is replaced by a sigmoid centered at the threshold and
the ensemble argmax by a temperature softmax. The sigmoid here is the
*decreasing* form ``sig(z) = (1 + exp(sigma * z))**-1`` paired with argument
``theta - x`` for left children and ``x - theta`` for right children, so a
left child saturates to 1 as x grows past the threshold.

Two evaluation paths exist on purpose: the per-node recursive operations
(`soft_node_activation`, `soft_tree_distribution`) follow the node recursion
directly, while batch queries go through a compiled per-leaf path engine
(products over root-to-leaf path factors, vectorized across instances). The
two are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import NumericFailure
from .trees import DecisionTree, TreeEnsemble

_SAT = 500.0  # |sigma * z| beyond this saturates the sigmoid to exactly 0/1


@dataclass(frozen=True)
class SoftEnsembleParams:
    """Sharpness of the approximation: sigmoid steepness and softmax temperature."""

    sigma: float
    tau: float

    def __post_init__(self):
        for name, v in (("sigma", self.sigma), ("tau", self.tau)):
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite real, got {v!r}")


@dataclass
class SoftPrediction:
    """Soft class probabilities and, on request, their input gradient (K x F)."""

    probabilities: np.ndarray
    gradient: np.ndarray | None = None


def _decreasing_sigmoid(u: np.ndarray) -> np.ndarray:
    """Decreasing sigmoid of the pre-scaled exponent u = sigma * z, saturated at |u| >= 500."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    hi = u >= _SAT
    lo = u <= -_SAT
    mid = ~(hi | lo)
    out[hi] = 0.0
    out[lo] = 1.0
    out[mid] = 1.0 / (1.0 + np.exp(u[mid]))
    return out


def _softmax(scores: np.ndarray, tau: float) -> np.ndarray:
    z = tau * scores
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class PathEngine:
    """Flattened root-to-leaf paths of an ensemble for vectorized evaluation.

    Layout: every (tree, leaf) pair contributes one consecutive run of path
    slots; slot arrays are the split feature, threshold and edge sign
    (-1 left edge, +1 right edge, 0 padding for a root-only tree). Leaf class
    distributions are pre-multiplied by their tree weight.
    """

    def __init__(self, ensemble: TreeEnsemble):
        feats: list[int] = []
        thr: list[float] = []
        sign: list[int] = []
        starts: list[int] = []
        slot_leaf: list[int] = []
        wdist_rows: list[np.ndarray] = []
        for w, tree in zip(ensemble.weights, ensemble.trees):
            for path, leaf in _leaf_paths(tree):
                leaf_idx = len(wdist_rows)
                starts.append(len(feats))
                if not path:
                    path = [(0, 0.0, 0)]
                for f, t, s in path:
                    feats.append(f)
                    thr.append(t)
                    sign.append(s)
                    slot_leaf.append(leaf_idx)
                wdist_rows.append(w * np.asarray(leaf.distribution, dtype=float))
        self.n_classes = ensemble.n_classes
        self.n_features = ensemble.n_features
        self.feats = np.asarray(feats, dtype=np.intp)
        self.thr = np.asarray(thr, dtype=float)
        self.sign = np.asarray(sign, dtype=float)
        self.is_pad = self.sign == 0
        self.leaf_starts = np.asarray(starts, dtype=np.intp)
        self.slot_leaf = np.asarray(slot_leaf, dtype=np.intp)
        self.wdist = np.vstack(wdist_rows)
        self._scatter_t = self._build_scatter().T.tocsr()

    def _build_scatter(self) -> sparse.csr_matrix:
        # (slots x (classes*features)): slot p scatters wdist[leaf(p), k] to column k*F + feat(p)
        n_slots = self.feats.size
        k = self.n_classes
        rows = np.repeat(np.arange(n_slots), k)
        cols = (np.arange(k)[None, :] * self.n_features + self.feats[:, None]).ravel()
        data = self.wdist[self.slot_leaf].ravel()
        return sparse.csr_matrix(
            (data, (rows, cols)), shape=(n_slots, k * self.n_features)
        )

    def hard_scores(self, X: np.ndarray) -> np.ndarray:
        Xf = X[:, self.feats]
        cond = np.where(self.sign < 0, Xf > self.thr, Xf <= self.thr)
        cond[:, self.is_pad] = True
        active = np.logical_and.reduceat(cond, self.leaf_starts, axis=1)
        return active @ self.wdist

    def hard_labels(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.hard_scores(X), axis=1)

    def _path_factors(self, X: np.ndarray, sigma: float) -> np.ndarray:
        u = sigma * self.sign * (X[:, self.feats] - self.thr)
        a = _decreasing_sigmoid(u)
        a[:, self.is_pad] = 1.0
        return a

    def soft_scores(self, X: np.ndarray, sigma: float) -> np.ndarray:
        a = self._path_factors(X, sigma)
        leaf_act = np.multiply.reduceat(a, self.leaf_starts, axis=1)
        return leaf_act @ self.wdist

    def soft_scores_and_gradient(
        self, X: np.ndarray, sigma: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Class scores (B x K) and their gradient wrt the input (B x K x F)."""
        a = self._path_factors(X, sigma)
        leaf_act = np.multiply.reduceat(a, self.leaf_starts, axis=1)
        scores = leaf_act @ self.wdist
        # d log(factor)/dx = -sign * sigma * (1 - factor); exact 0 at saturation
        coeff = -self.sign * sigma * (1.0 - a)
        w = leaf_act[:, self.slot_leaf] * coeff
        grad_flat = self._scatter_t.dot(w.T).T
        grad = grad_flat.reshape(X.shape[0], self.n_classes, self.n_features)
        return scores, grad

    def soft_probabilities(self, X: np.ndarray, params: SoftEnsembleParams) -> np.ndarray:
        return _softmax(self.soft_scores(X, params.sigma), params.tau)

    def soft_probabilities_and_gradient(
        self, X: np.ndarray, params: SoftEnsembleParams
    ) -> tuple[np.ndarray, np.ndarray]:
        scores, g = self.soft_scores_and_gradient(X, params.sigma)
        p = _softmax(scores, params.tau)
        avg = np.einsum("bk,bkf->bf", p, g)
        grad_p = params.tau * p[:, :, None] * (g - avg[:, None, :])
        return p, grad_p


def _leaf_paths(tree: DecisionTree):
    """Yield (path, leaf_node) with path entries (feature, threshold, sign)."""
    stack = [(tree.root_id, [])]
    while stack:
        nid, path = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            yield path, node
            continue
        stack.append((node.right, path + [(node.feature, node.threshold, +1)]))
        stack.append((node.left, path + [(node.feature, node.threshold, -1)]))


def get_engine(ensemble: TreeEnsemble) -> PathEngine:
    """Compiled engine for an ensemble, cached on the (immutable) model."""
    engine = getattr(ensemble, "_path_engine", None)
    if engine is None:
        engine = PathEngine(ensemble)
        object.__setattr__(ensemble, "_path_engine", engine)
    return engine


def _as_batch(x, n_features: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_features:
        raise ValueError(f"expected instances with {n_features} features, got shape {arr.shape}")
    return arr


def soft_node_activation(tree: DecisionTree, node_id: int, x, sigma: float) -> float:
    """Soft activation of one node: product of path sigmoids, 1 at the root."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    t = 1.0
    nid = tree.node(node_id).node_id
    while nid != tree.root_id:
        pid = tree.parent[nid]
        parent = tree.nodes[pid]
        z = (
            parent.threshold - x[parent.feature]
            if nid == parent.left
            else x[parent.feature] - parent.threshold
        )
        t *= float(_decreasing_sigmoid(np.asarray(sigma * z)))
        nid = pid
    return t


def soft_tree_distribution(tree: DecisionTree, x, sigma: float) -> np.ndarray:
    """Convex combination of leaf distributions under soft activations.

    One root-to-leaf pass; the running product memoizes each node's soft
    activation, so cost is O(nodes) per query.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    dist = np.zeros(tree.n_classes)
    stack = [(tree.root_id, 1.0)]
    while stack:
        nid, prod = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            dist += prod * np.asarray(node.distribution)
            continue
        left_f = float(_decreasing_sigmoid(np.asarray(sigma * (node.threshold - x[node.feature]))))
        right_f = float(_decreasing_sigmoid(np.asarray(sigma * (x[node.feature] - node.threshold))))
        stack.append((node.left, prod * left_f))
        stack.append((node.right, prod * right_f))
    return dist


def soft_ensemble_predict(
    ensemble: TreeEnsemble, x, params: SoftEnsembleParams, with_gradient: bool = False
) -> SoftPrediction:
    """Softmax class probabilities of the approximation, optionally with gradient."""
    engine = get_engine(ensemble)
    X = _as_batch(x, engine.n_features)
    if with_gradient:
        p, g = engine.soft_probabilities_and_gradient(X, params)
        return SoftPrediction(probabilities=p[0], gradient=g[0])
    return SoftPrediction(probabilities=engine.soft_probabilities(X, params)[0])


def soft_ensemble_gradient(
    ensemble: TreeEnsemble, x, params: SoftEnsembleParams, y: int
) -> np.ndarray:
    """Analytic gradient of the soft probability of class y wrt the input."""
    engine = get_engine(ensemble)
    X = _as_batch(x, engine.n_features)
    if not 0 <= y < engine.n_classes:
        raise ValueError(f"class index {y} out of range")
    _, g = engine.soft_probabilities_and_gradient(X, params)
    return g[0, y, :]


def fidelity(ensemble: TreeEnsemble, params: SoftEnsembleParams, X) -> float:
    """Fraction of instances whose soft argmax matches the hard prediction."""
    engine = get_engine(ensemble)
    X = _as_batch(X, engine.n_features)
    if X.shape[0] == 0:
        raise ValueError("fidelity needs at least one instance")
    if not np.all(np.isfinite(X)):
        raise NumericFailure("non-finite feature values in fidelity input")
    hard = engine.hard_labels(X)
    soft_labels = np.argmax(engine.soft_probabilities(X, params), axis=1)
    return float(np.mean(hard == soft_labels))
