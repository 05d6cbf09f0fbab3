"""Feature selectors and classifiers for handcrafted radiomics features."""
from .classifiers import (CLASSIFIERS, DEFAULT_GRIDS, ClassifierSpec, TrainedClassifier,
                          predict_label, predict_proba, predict_score, train_classifier)
from .cv import CVResult, cross_validate, design, fold_rankings, stratified_folds
from .scaling import StandardizeStats, standardize_apply, standardize_fit
from .selectors import (SELECTORS, Selection, SelectorSpec, dcor, dcor_columns, fit_select,
                        pearson_columns, rank_features)

__all__ = [
    "CLASSIFIERS", "DEFAULT_GRIDS", "ClassifierSpec", "TrainedClassifier", "predict_label",
    "predict_proba", "predict_score", "train_classifier", "CVResult", "cross_validate", "design",
    "fold_rankings", "stratified_folds", "StandardizeStats", "standardize_apply",
    "standardize_fit", "SELECTORS", "Selection", "SelectorSpec", "dcor", "dcor_columns",
    "fit_select", "pearson_columns", "rank_features",
]
