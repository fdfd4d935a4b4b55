"""Supervised learning and evaluation on transaction history summaries."""

from .cv import EvaluationReport, config_hash, cross_validate
from .data import Dataset, mask_columns, parse_mask, read_feature_csv, write_feature_csv
from .metrics import confusion_matrix, evaluate, macro_f1, micro_f1, row_normalize
from .models import (
    MODEL_KINDS,
    Model,
    UnsupportedModel,
    default_config,
    feature_importance,
    resolve_config,
    train,
)
from .prep import FoldPlan, MaxAbsScaler, max_abs_normalize, sample_weights, stratified_kfold

__all__ = [
    "Dataset",
    "EvaluationReport",
    "FoldPlan",
    "MODEL_KINDS",
    "MaxAbsScaler",
    "Model",
    "UnsupportedModel",
    "config_hash",
    "confusion_matrix",
    "cross_validate",
    "default_config",
    "evaluate",
    "feature_importance",
    "macro_f1",
    "mask_columns",
    "max_abs_normalize",
    "micro_f1",
    "parse_mask",
    "read_feature_csv",
    "resolve_config",
    "row_normalize",
    "sample_weights",
    "stratified_kfold",
    "train",
    "write_feature_csv",
]
