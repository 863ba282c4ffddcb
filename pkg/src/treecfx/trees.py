"""Hard tree-ensemble classifiers and the portable JSON model format.

A model is a weighted list of binary decision trees whose leaves carry class
distributions. Split convention: the *left* child is taken when
``x[feature] > threshold``, the right child when ``x[feature] <= threshold``.
Serialized models must declare this convention (``"child_convention":
"gt_left"``); files using any other convention are rejected so that exporters
normalize instead of the reader guessing.

Argmax ties are broken toward the lowest class index throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError, TreeStructureError

FORMAT_VERSION = 1
CHILD_CONVENTION = "gt_left"
MODEL_KINDS = ("decision_tree", "random_forest", "adaboost")

_LEAF_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TreeNode:
    """One node of a binary decision tree.

    Internal nodes carry (feature, threshold, left, right); leaves carry a
    normalized class distribution. Exactly one of the two shapes is allowed.
    """

    node_id: int
    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    distribution: tuple[float, ...] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.distribution is not None

    def __post_init__(self):
        if self.is_leaf:
            if any(v is not None for v in (self.feature, self.threshold, self.left, self.right)):
                raise TreeStructureError(f"node {self.node_id}: leaf with split fields")
        else:
            if None in (self.feature, self.threshold, self.left, self.right):
                raise TreeStructureError(f"node {self.node_id}: internal node missing split fields")


class DecisionTree:
    """A single rooted binary tree with validated structure.

    Instances are immutable after construction and safe to share across
    threads; all query operations are pure.
    """

    def __init__(self, nodes: list[TreeNode], root_id: int, n_classes: int):
        self.nodes: dict[int, TreeNode] = {}
        for node in nodes:
            if node.node_id in self.nodes:
                raise TreeStructureError(f"duplicate node id {node.node_id}")
            self.nodes[node.node_id] = node
        if root_id not in self.nodes:
            raise TreeStructureError(f"root id {root_id} not among nodes")
        self.root_id = root_id
        self.n_classes = n_classes
        self.parent: dict[int, int] = {}
        self._validate()
        self.leaf_ids: tuple[int, ...] = tuple(
            nid for nid, n in self.nodes.items() if n.is_leaf and self._reachable(nid)
        )

    def _validate(self):
        seen: set[int] = set()
        stack = [self.root_id]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise TreeStructureError(f"node {nid} reached twice (cycle or shared child)")
            seen.add(nid)
            node = self.nodes[nid]
            if node.is_leaf:
                dist = np.asarray(node.distribution, dtype=float)
                if dist.shape != (self.n_classes,):
                    raise TreeStructureError(
                        f"node {nid}: leaf distribution has {dist.size} entries, expected {self.n_classes}"
                    )
                if np.any(dist < 0) or abs(dist.sum() - 1.0) > _LEAF_SUM_TOL:
                    raise TreeStructureError(f"node {nid}: leaf not normalized")
                continue
            for child in (node.left, node.right):
                if child not in self.nodes:
                    raise TreeStructureError(f"node {nid}: child {child} does not exist")
                if child in self.parent:
                    raise TreeStructureError(f"node {child} has two parents")
                self.parent[child] = nid
            stack.extend((node.left, node.right))
        unreachable = set(self.nodes) - seen
        if unreachable:
            raise TreeStructureError(f"nodes unreachable from root: {sorted(unreachable)}")
        if self.root_id in self.parent:
            raise TreeStructureError("root has a parent")

    def _reachable(self, nid: int) -> bool:
        return nid == self.root_id or nid in self.parent

    def node(self, node_id: int) -> TreeNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise TreeStructureError(f"unknown node id {node_id}") from None

    def max_feature_index(self) -> int:
        return max((n.feature for n in self.nodes.values() if not n.is_leaf), default=-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return (
            self.root_id == other.root_id
            and self.n_classes == other.n_classes
            and self.nodes == other.nodes
        )


@dataclass(frozen=True)
class TreeEnsemble:
    """A weighted list of decision trees, immutable after construction.

    ``weights`` carry boosting coefficients for adaboost models and are all
    1.0 for decision_tree / random_forest models.
    """

    trees: tuple[DecisionTree, ...]
    weights: tuple[float, ...]
    model_kind: str
    n_classes: int
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ModelFormatError(f"unknown model_kind {self.model_kind!r}")
        if len(self.trees) != len(self.weights):
            raise ModelFormatError("weights and trees differ in length")
        if not all(np.isfinite(w) for w in self.weights):
            raise ModelFormatError("non-finite tree weight")
        if self.model_kind == "decision_tree" and (
            len(self.trees) != 1 or self.weights[0] != 1.0
        ):
            raise ModelFormatError("decision_tree model must have one tree with weight 1")
        n_feat = len(self.feature_names)
        for ti, tree in enumerate(self.trees):
            if tree.n_classes != self.n_classes:
                raise ModelFormatError(f"tree {ti} has n_classes {tree.n_classes} != {self.n_classes}")
            if tree.max_feature_index() >= n_feat:
                raise ModelFormatError(f"tree {ti} uses feature index beyond {n_feat - 1}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def node_activation(tree: DecisionTree, node_id: int, x) -> int:
    """1 if every ancestor comparison routes x to this node, else 0.

    The root is always active; a left child needs ``x[f] > threshold`` at its
    parent, a right child needs ``x[f] <= threshold``.
    """
    x = np.asarray(x, dtype=float)
    nid = tree.node(node_id).node_id
    while nid != tree.root_id:
        pid = tree.parent[nid]
        parent = tree.nodes[pid]
        val = x[parent.feature]
        if nid == parent.left:
            if not val > parent.threshold:
                return 0
        else:
            if not val <= parent.threshold:
                return 0
        nid = pid
    return 1


def tree_predict_distribution(tree: DecisionTree, x) -> np.ndarray:
    """Class distribution of the unique leaf activated by x."""
    x = np.asarray(x, dtype=float)
    node = tree.nodes[tree.root_id]
    while not node.is_leaf:
        node = tree.nodes[node.left if x[node.feature] > node.threshold else node.right]
    return np.asarray(node.distribution, dtype=float)


def ensemble_predict(ensemble: TreeEnsemble, x) -> tuple[int, np.ndarray]:
    """Weighted-vote class label and its one-hot indicator.

    Returns ``(label, one_hot)`` with the label the argmax of the weighted
    sum of per-tree distributions, ties to the lowest class index.
    """
    scores = np.zeros(ensemble.n_classes)
    for w, tree in zip(ensemble.weights, ensemble.trees):
        scores += w * tree_predict_distribution(tree, x)
    label = int(np.argmax(scores))
    one_hot = np.zeros(ensemble.n_classes)
    one_hot[label] = 1.0
    return label, one_hot


def _node_to_json(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"id": node.node_id, "kind": "leaf", "distribution": list(node.distribution)}
    return {
        "id": node.node_id,
        "kind": "internal",
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node.left,
        "right": node.right,
    }


def _node_from_json(obj: dict, tree_index: int) -> TreeNode:
    try:
        nid = int(obj["id"])
        kind = obj["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"tree {tree_index}: malformed node entry {obj!r}") from exc
    if kind == "leaf":
        dist = obj.get("distribution")
        if not isinstance(dist, list):
            raise ModelFormatError(f"tree {tree_index} node {nid}: leaf without distribution")
        arr = np.asarray(dist, dtype=float)
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > _LEAF_SUM_TOL:
            raise ModelFormatError(f"tree {tree_index} node {nid}: leaf not normalized")
        return TreeNode(node_id=nid, distribution=tuple(float(v) for v in dist))
    if kind == "internal":
        try:
            return TreeNode(
                node_id=nid,
                feature=int(obj["feature"]),
                threshold=float(obj["threshold"]),
                left=int(obj["left"]),
                right=int(obj["right"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"tree {tree_index} node {nid}: bad internal node") from exc
    raise ModelFormatError(f"tree {tree_index} node {nid}: unknown kind {kind!r}")


def save_model(ensemble: TreeEnsemble) -> bytes:
    """Serialize to the portable JSON model format (UTF-8 bytes)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "model_kind": ensemble.model_kind,
        "n_classes": ensemble.n_classes,
        "feature_names": list(ensemble.feature_names),
        "child_convention": CHILD_CONVENTION,
        "trees": [
            {
                "weight": w,
                "root": tree.root_id,
                "nodes": [_node_to_json(tree.nodes[nid]) for nid in sorted(tree.nodes)],
            }
            for w, tree in zip(ensemble.weights, ensemble.trees)
        ],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def load_model(data: bytes | str) -> TreeEnsemble:
    """Parse and validate the portable JSON model format.

    Raises ModelFormatError naming the offending tree/node on any schema or
    invariant violation; ``load_model(save_model(m))`` is structurally
    identical to ``m``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    convention = doc.get("child_convention")
    if convention != CHILD_CONVENTION:
        raise ModelFormatError(
            f"child_convention must be {CHILD_CONVENTION!r} (got {convention!r}); "
            "exporters must normalize child order"
        )
    kind = doc.get("model_kind")
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model_kind {kind!r}")
    try:
        n_classes = int(doc["n_classes"])
        feature_names = tuple(str(s) for s in doc["feature_names"])
        tree_docs = doc["trees"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"missing or malformed field: {exc}") from exc
    if n_classes < 2:
        raise ModelFormatError("n_classes must be at least 2")
    if not isinstance(tree_docs, list) or not tree_docs:
        raise ModelFormatError("model must contain at least one tree")
    trees = []
    weights = []
    for ti, tdoc in enumerate(tree_docs):
        try:
            weight = float(tdoc["weight"])
            root = int(tdoc["root"])
            node_docs = tdoc["nodes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"tree {ti}: malformed tree entry") from exc
        nodes = [_node_from_json(nd, ti) for nd in node_docs]
        try:
            tree = DecisionTree(nodes, root_id=root, n_classes=n_classes)
        except TreeStructureError as exc:
            raise ModelFormatError(f"tree {ti}: {exc}") from exc
        trees.append(tree)
        weights.append(weight)
    return TreeEnsemble(
        trees=tuple(trees),
        weights=tuple(weights),
        model_kind=kind,
        n_classes=n_classes,
        feature_names=feature_names,
    )
