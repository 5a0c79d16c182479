"""Predicting which memes take off: archive ingestion, text/image/metadata
features, balanced ensemble learners, and the evaluation suite."""

from .corpus import (
    CorpusStats,
    LabeledPost,
    MemePost,
    assign_dank_labels,
    clean_records,
    label_posts,
    parse_records,
    read_corpus,
    subreddit_correlation,
    write_corpus,
)
from .ensemble import (
    BoostModel,
    ForestModel,
    TrainConfig,
    feature_importances,
    fit_balanced_random_forest,
    fit_gradient_boosting,
    fit_model,
    grid_search_cv,
    load_model,
    predict_proba,
    random_undersample,
    save_model,
    stratified_split,
)
from .errors import ConfigError, DataError, MemepopError
from .evaluate import (
    EvalReport,
    auc,
    classification_metrics,
    emit_report,
    evaluate_model,
    load_report,
    roc_points,
)
from .experiments import (
    evaluate_external_scores,
    incremental_experiment,
    run_table3_suite,
)
from .featurize import LabeledDataset, assemble_dataset, load_features, save_features
from .porter import porter_stem
from .text_features import build_vocabulary, process_text, tokenize

__version__ = "0.1.0"

__all__ = [
    "BoostModel",
    "ConfigError",
    "CorpusStats",
    "DataError",
    "EvalReport",
    "ForestModel",
    "LabeledDataset",
    "LabeledPost",
    "MemePost",
    "MemepopError",
    "TrainConfig",
    "assemble_dataset",
    "assign_dank_labels",
    "auc",
    "build_vocabulary",
    "classification_metrics",
    "clean_records",
    "emit_report",
    "evaluate_external_scores",
    "evaluate_model",
    "feature_importances",
    "fit_balanced_random_forest",
    "fit_gradient_boosting",
    "fit_model",
    "grid_search_cv",
    "incremental_experiment",
    "label_posts",
    "load_features",
    "load_model",
    "load_report",
    "parse_records",
    "porter_stem",
    "predict_proba",
    "process_text",
    "random_undersample",
    "read_corpus",
    "roc_points",
    "run_table3_suite",
    "save_features",
    "save_model",
    "stratified_split",
    "subreddit_correlation",
    "tokenize",
    "write_corpus",
    "__version__",
]
