"""Experiment drivers: the three undersampling regimes, the incremental
block comparison, external-score evaluation, and color-profile summaries.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .ensemble import (
    TrainConfig,
    _derived_seed,
    fit_model,
    random_undersample,
    stratified_split,
)
from .errors import DataError
from .evaluate import (
    EvalReport,
    auc,
    classification_metrics,
    dataset_fingerprint,
    evaluate_model,
    roc_points,
    tune_threshold,
)

__all__ = [
    "color_profile_summary",
    "evaluate_external_scores",
    "incremental_experiment",
    "run_table3_suite",
]

INCREMENTAL_SUBSETS = (
    ("incremental_text", ("text",)),
    ("incremental_image", ("image",)),
    ("incremental_text_image", ("text", "image")),
    ("incremental_all", ("text", "image", "metadata")),
)


def _tuned_threshold(train, config: TrainConfig) -> float:
    """Carve a validation quarter off the training set, fit on the rest,
    and pick the F1-maximizing operating point on the held-out quarter."""
    from .ensemble import predict_proba

    fit_part, val_part = stratified_split(
        train, test_fraction=0.25, seed=_derived_seed(config.seed, 403)
    )
    probe = fit_model(fit_part, config)
    scores = predict_proba(probe, val_part.X, val_part.feature_names)
    return tune_threshold(scores, val_part.y)


def run_table3_suite(
    dataset, config: TrainConfig, *, test_fraction: float = 0.33
) -> list[EvalReport]:
    """Train and score the same model family under the three regimes:
    (a) untouched data with a tuned operating point, (b) a rebalanced
    training set scored at 0.5, and (c) both sides rebalanced, which
    shifts the test distribution and is flagged as such.

    Dataset-level rebalancing makes the model's own per-tree ratio
    infeasible, so regimes (b) and (c) force sampling_strategy to 1.0.
    """
    train, test = stratified_split(dataset, test_fraction, config.seed)
    reports = []

    threshold = _tuned_threshold(train, config)
    model = fit_model(train, config)
    reports.append(
        evaluate_model(
            model, test, threshold=threshold, experiment_id="table3_no_undersample"
        )
    )

    balanced_config = replace(config, sampling_strategy=1.0)
    train_balanced = random_undersample(train, 1.0, _derived_seed(config.seed, 401))
    model = fit_model(train_balanced, balanced_config)
    reports.append(
        evaluate_model(
            model, test, threshold=0.5, experiment_id="table3_undersample_train"
        )
    )

    test_balanced = random_undersample(test, 1.0, _derived_seed(config.seed, 402))
    model = fit_model(train_balanced, balanced_config)
    reports.append(
        evaluate_model(
            model,
            test_balanced,
            threshold=0.5,
            experiment_id="table3_undersample_train_test",
            flags=("distribution_shifted",),
        )
    )
    return reports


def incremental_experiment(
    dataset, config: TrainConfig, *, test_fraction: float = 0.33
) -> list[EvalReport]:
    """Train the same model on the text, image, text+image, and all-column
    subsets of one shared split; reports carry identical fingerprints so
    the comparison is airtight."""
    train_idx, test_idx = _split_indices(dataset, test_fraction, config.seed)
    reports = []
    for experiment_id, blocks in INCREMENTAL_SUBSETS:
        subset = dataset.select_blocks(blocks)
        model = fit_model(subset.take(train_idx), config)
        reports.append(
            evaluate_model(
                model,
                subset.take(test_idx),
                threshold=0.5,
                experiment_id=experiment_id,
            )
        )
    checksums = {r.fingerprint["checksum"] for r in reports}
    if len(checksums) != 1:
        raise DataError("incremental legs diverged onto different test rows")
    return reports


def _split_indices(dataset, test_fraction: float, seed: int):
    """Row indices of the stratified split, shared across column subsets."""
    train, test = stratified_split(dataset, test_fraction, seed)
    pos = {post_id: i for i, post_id in enumerate(dataset.ids)}
    train_idx = np.asarray([pos[i] for i in train.ids], dtype=np.intp)
    test_idx = np.asarray([pos[i] for i in test.ids], dtype=np.intp)
    return train_idx, test_idx


def evaluate_external_scores(
    scores: dict[str, float],
    dataset,
    *,
    threshold: float = 0.5,
    experiment_id: str = "external",
) -> EvalReport:
    """Score externally produced probabilities against a labeled set using
    the exact metric stack internal models get."""
    missing = [post_id for post_id in dataset.ids if post_id not in scores]
    if missing:
        shown = ", ".join(missing[:10])
        raise DataError(
            f"{len(missing)} test ids have no external score; first missing: {shown}"
        )
    vector = np.asarray([scores[post_id] for post_id in dataset.ids], dtype=np.float64)
    m = classification_metrics(vector, dataset.y, threshold)
    report = EvalReport(
        experiment_id=experiment_id,
        model_kind="external",
        blocks=list(dict.fromkeys(dataset.blocks)),
        threshold=float(threshold),
        metrics={
            "accuracy": m["accuracy"],
            "precision": m["precision"],
            "recall": m["recall"],
            "f1": m["f1"],
            "auc": auc(vector, dataset.y),
        },
        precision_status=m["precision_status"],
        confusion=m["confusion"],
        roc=roc_points(vector, dataset.y),
        importances=[],
        config={},
        fingerprint=dataset_fingerprint(dataset.ids, dataset.y),
        flags=["external"],
    )
    report.validate()
    return report


def color_profile_summary(dataset, *, positives_only: bool = True):
    """Mean palette fraction per color, descending, over the top-scoring
    subset (or every row)."""
    cols = [
        (i, name[len("color_"):])
        for i, (name, block) in enumerate(zip(dataset.feature_names, dataset.blocks))
        if block == "image" and name.startswith("color_")
    ]
    if not cols:
        raise DataError("dataset has no color-profile columns")
    rows = dataset.X[dataset.y == 1] if positives_only else dataset.X
    if rows.shape[0] == 0:
        raise DataError("no rows selected for the color summary")
    means = [(name, float(rows[:, i].mean())) for i, name in cols]
    return sorted(means, key=lambda kv: (-kv[1], kv[0]))
