import json

import numpy as np
import pytest

from treecfx import (
    ModelFormatError,
    TreeStructureError,
    ensemble_predict,
    load_model,
    node_activation,
    save_model,
    tree_predict_distribution,
)
from treecfx.trees import DecisionTree, TreeEnsemble, TreeNode

from fixtures import depth1_model, depth1_tree, make_leaf, make_split, random_ensemble


def single_leaf_tree(dist=(0.2, 0.8)):
    return DecisionTree([make_leaf(0, dist)], root_id=0, n_classes=2)


def test_root_always_active():
    tree = depth1_tree()
    for x in ([0.0], [0.5], [1.0], [7.0]):
        assert node_activation(tree, 0, x) == 1


def test_single_split_activation():
    tree = depth1_tree(theta=0.5)
    assert node_activation(tree, 1, [0.7]) == 1
    assert node_activation(tree, 2, [0.7]) == 0
    # the boundary value falls to the right branch
    assert node_activation(tree, 1, [0.5]) == 0
    assert node_activation(tree, 2, [0.5]) == 1


def test_unknown_node_id():
    tree = depth1_tree()
    with pytest.raises(TreeStructureError):
        node_activation(tree, 99, [0.5])


def test_single_leaf_distribution():
    tree = single_leaf_tree()
    for x in ([0.0], [0.9]):
        assert np.allclose(tree_predict_distribution(tree, x), [0.2, 0.8])


def test_depth1_distribution():
    tree = depth1_tree(left_dist=(1.0, 0.0), right_dist=(0.0, 1.0))
    assert np.array_equal(tree_predict_distribution(tree, [0.8]), [1.0, 0.0])
    assert np.array_equal(tree_predict_distribution(tree, [0.2]), [0.0, 1.0])


def test_leaf_partition_property():
    rng = np.random.default_rng(3)
    for _ in range(30):
        ens = random_ensemble(rng, n_features=4, n_trees=1, max_depth=4)
        tree = ens.trees[0]
        x = rng.uniform(0, 1, 4)
        acts = [node_activation(tree, leaf, x) for leaf in tree.leaf_ids]
        assert sum(acts) == 1
        assert set(acts) <= {0, 1}


def test_ensemble_predict_single_tree():
    ens = TreeEnsemble(
        trees=(single_leaf_tree((0.9, 0.1)),),
        weights=(1.0,),
        model_kind="decision_tree",
        n_classes=2,
        feature_names=("f0",),
    )
    label, one_hot = ensemble_predict(ens, [0.3])
    assert label == 0
    assert np.array_equal(one_hot, [1.0, 0.0])


def test_ensemble_predict_weighted_sum():
    # per-tree class-1 scores {0.6, 0.4, 0.4}: class 0 wins 1.6 to 1.4
    trees = tuple(single_leaf_tree(d) for d in ((0.4, 0.6), (0.6, 0.4), (0.6, 0.4)))
    ens = TreeEnsemble(trees=trees, weights=(1.0, 1.0, 1.0), model_kind="random_forest",
                       n_classes=2, feature_names=("f0",))
    label, _ = ensemble_predict(ens, [0.1])
    assert label == 0


def test_ensemble_tie_breaks_to_lowest_class():
    ens = TreeEnsemble(
        trees=(single_leaf_tree((0.5, 0.5)),),
        weights=(1.0,),
        model_kind="decision_tree",
        n_classes=2,
        feature_names=("f0",),
    )
    assert ensemble_predict(ens, [0.9])[0] == 0


def test_predict_deterministic():
    rng = np.random.default_rng(11)
    ens = random_ensemble(rng, n_features=3, n_trees=4, max_depth=3)
    x = rng.uniform(0, 1, 3)
    first = ensemble_predict(ens, x)
    for _ in range(5):
        again = ensemble_predict(ens, x)
        assert again[0] == first[0]
        assert np.array_equal(again[1], first[1])


def test_save_load_round_trip_structure():
    rng = np.random.default_rng(5)
    ens = random_ensemble(rng, n_features=4, n_trees=3, max_depth=3, kind="adaboost")
    loaded = load_model(save_model(ens))
    assert loaded == ens


def test_save_load_round_trip_predictions():
    rng = np.random.default_rng(7)
    ens = random_ensemble(rng, n_features=5, n_trees=4, max_depth=4, kind="random_forest")
    loaded = load_model(save_model(ens))
    X = rng.uniform(0, 1, (1000, 5))
    for x in X:
        assert ensemble_predict(loaded, x)[0] == ensemble_predict(ens, x)[0]


def _doc(ens):
    return json.loads(save_model(ens).decode())


def test_load_rejects_unnormalized_leaf():
    doc = _doc(depth1_model())
    doc["trees"][0]["nodes"][1]["distribution"] = [0.5, 0.6]
    with pytest.raises(ModelFormatError, match="not normalized"):
        load_model(json.dumps(doc))


def test_load_error_names_node():
    doc = _doc(depth1_model())
    doc["trees"][0]["nodes"][2]["distribution"] = [0.5, 0.6]
    with pytest.raises(ModelFormatError, match="node 2"):
        load_model(json.dumps(doc))


def test_load_rejects_unknown_model_kind():
    doc = _doc(depth1_model())
    doc["model_kind"] = "gradient_boosting"
    with pytest.raises(ModelFormatError, match="model_kind"):
        load_model(json.dumps(doc))


def test_load_rejects_other_child_convention():
    doc = _doc(depth1_model())
    doc["child_convention"] = "le_left"
    with pytest.raises(ModelFormatError, match="child_convention"):
        load_model(json.dumps(doc))


def test_load_rejects_missing_child_convention():
    doc = _doc(depth1_model())
    del doc["child_convention"]
    with pytest.raises(ModelFormatError, match="child_convention"):
        load_model(json.dumps(doc))


def test_load_rejects_dangling_child():
    doc = _doc(depth1_model())
    doc["trees"][0]["nodes"][0]["left"] = 42
    with pytest.raises(ModelFormatError, match="child 42"):
        load_model(json.dumps(doc))


def test_load_rejects_wrong_format_version():
    doc = _doc(depth1_model())
    doc["format_version"] = 2
    with pytest.raises(ModelFormatError, match="format_version"):
        load_model(json.dumps(doc))


def test_load_rejects_bad_json():
    with pytest.raises(ModelFormatError, match="JSON"):
        load_model(b"{not json")


def test_tree_rejects_cycle():
    nodes = [
        make_split(0, 0, 0.5, 1, 2),
        make_split(1, 0, 0.3, 0, 2),  # points back at the root
        make_leaf(2, (1.0, 0.0)),
    ]
    with pytest.raises(TreeStructureError):
        DecisionTree(nodes, root_id=0, n_classes=2)


def test_tree_rejects_shared_child():
    nodes = [
        make_split(0, 0, 0.5, 1, 1),
        make_leaf(1, (1.0, 0.0)),
    ]
    with pytest.raises(TreeStructureError):
        DecisionTree(nodes, root_id=0, n_classes=2)


def test_ensemble_rejects_feature_out_of_range():
    tree = depth1_tree(feature=3)
    with pytest.raises(ModelFormatError, match="feature index"):
        TreeEnsemble(trees=(tree,), weights=(1.0,), model_kind="decision_tree",
                     n_classes=2, feature_names=("f0",))


def test_decision_tree_kind_requires_single_unit_weight_tree():
    t = depth1_tree()
    with pytest.raises(ModelFormatError):
        TreeEnsemble(trees=(t, t), weights=(1.0, 1.0), model_kind="decision_tree",
                     n_classes=2, feature_names=("f0",))
    with pytest.raises(ModelFormatError):
        TreeEnsemble(trees=(t,), weights=(0.5,), model_kind="decision_tree",
                     n_classes=2, feature_names=("f0",))


def test_ensemble_rejects_weight_mismatch():
    t = depth1_tree()
    with pytest.raises(ModelFormatError):
        TreeEnsemble(trees=(t,), weights=(1.0, 1.0), model_kind="random_forest",
                     n_classes=2, feature_names=("f0",))


def test_node_shape_validation():
    with pytest.raises(TreeStructureError):
        TreeNode(0, feature=1, threshold=0.5, left=1, right=2, distribution=(1.0, 0.0))
    with pytest.raises(TreeStructureError):
        TreeNode(0, feature=1, threshold=0.5, left=1, right=None)
