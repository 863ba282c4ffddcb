"""Counterfactual explanations for tree-ensemble classifiers.

Builds a differentiable approximation of a hard tree ensemble (sigmoid splits,
softmax vote) and searches for the closest input perturbation that flips the
hard model's prediction, with feature-tweaking and random-perturbation
baselines and an evaluation harness over four distance functions.
"""

__version__ = "0.1.0"

from .baselines import (
    FtConfig,
    RpConfig,
    ft_changing_leaves,
    ft_generate,
    ft_generate_batch,
    ft_perturb_to_leaf,
    ft_select_epsilon,
    rp_generate,
    rp_generate_batch,
)
from .dataio import Dataset, MinMaxScaler, SplitSpec, fit_scaler, load_csv, load_dataset, split
from .distances import (
    CovarianceEstimate,
    Distance,
    distance,
    distance_gradient,
    estimate_covariance,
)
from .errors import ModelFormatError, NumericFailure, TreeStructureError
from .evaluation import (
    EvaluationReport,
    compare_result_sets,
    mean_distance,
    mean_relative_distance,
    pct_closer,
    report_csv,
    report_text,
    two_tailed_t_test,
)
from .optimizer import (
    DEFAULT_GRID,
    FocusConfig,
    SweepOutcome,
    Trace,
    generate_batch,
    generate_counterfactual,
    prediction_loss,
    sweep_hyperparameters,
    total_loss,
)
from .results import CounterfactualResult, read_results, write_results
from .soft import (
    SoftEnsembleParams,
    SoftPrediction,
    fidelity,
    soft_ensemble_gradient,
    soft_ensemble_predict,
    soft_node_activation,
    soft_tree_distribution,
)
from .trees import (
    DecisionTree,
    TreeEnsemble,
    TreeNode,
    ensemble_predict,
    load_model,
    node_activation,
    save_model,
    tree_predict_distribution,
)
