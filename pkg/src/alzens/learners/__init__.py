"""Native tree learners: CART, random forest, extra trees, second-order boosting."""
from .models import (
    BoostedModel,
    ConstantModel,
    ForestModel,
    Hyperparams,
    Model,
    ModelSpec,
    TreeModel,
    fit_boosted,
    fit_extra_trees,
    fit_majority,
    fit_model,
    fit_random_forest,
    fit_tree,
    load_model,
    model_from_dict,
    predict_proba,
    save_model,
)
from .splits import Split, best_split, gini_impurity, newton_leaf_weight, second_order_gain
from .tree import Tree

__all__ = [
    "BoostedModel", "ConstantModel", "ForestModel", "Hyperparams", "Model", "ModelSpec", "Split", "Tree",
    "TreeModel", "best_split", "fit_boosted", "fit_extra_trees", "fit_majority", "fit_model",
    "fit_random_forest", "fit_tree", "gini_impurity", "load_model", "model_from_dict",
    "newton_leaf_weight", "predict_proba", "save_model", "second_order_gain",
]
