"""From-scratch ensemble learners on LabeledDataset: a random forest whose
trees each train on a fresh class-balanced undersample, and stage-wise
gradient boosting on binomial deviance.

Every sampling decision draws from a generator seeded by the master seed
plus a fixed role tag (and tree/fold counters), so any subset of the work
can be redone independently and results never depend on scheduling:
split [seed,101]; undersample [seed,202]; per-tree undersample/bootstrap/
feature streams [seed,11|12|13,t]; CV folds [seed,301]; per-(point,fold)
training seeds via SeedSequence([seed,3,g,f]).
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .resources import read_config_text
from .tree import Tree, fit_decision_tree, tree_apply, tree_predict

__all__ = [
    "BoostModel",
    "ForestModel",
    "TrainConfig",
    "compute_class_weights",
    "expand_grid",
    "feature_importances",
    "fit_balanced_random_forest",
    "fit_gradient_boosting",
    "fit_model",
    "grid_search_cv",
    "load_default_grid",
    "load_model",
    "predict_proba",
    "random_undersample",
    "save_model",
    "stratified_kfold",
    "stratified_split",
]

MODEL_FORMAT_VERSION = 1
MODEL_KINDS = ("forest", "boosting")
CLASS_WEIGHT_MODES = ("balanced", "none")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters plus the mandatory master seed."""

    seed: int
    model: str = "forest"
    n_trees: int = 300
    max_depth: int | None = None
    min_leaf_weight: float = 1.0
    learning_rate: float = 0.1
    sampling_strategy: float = 1.0
    class_weight: str = "balanced"
    cv_folds: int = 5

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model!r}")
        if self.n_trees < 0:
            raise ConfigError("n_trees must be nonnegative")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be nonnegative or omitted")
        if self.min_leaf_weight <= 0:
            raise ConfigError("min_leaf_weight must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if not 0.0 < self.sampling_strategy <= 1.0:
            raise ConfigError("sampling_strategy must be in (0, 1]")
        if self.class_weight not in CLASS_WEIGHT_MODES:
            raise ConfigError(f"unknown class_weight mode {self.class_weight!r}")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "model": self.model,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf_weight": self.min_leaf_weight,
            "learning_rate": self.learning_rate,
            "sampling_strategy": self.sampling_strategy,
            "class_weight": self.class_weight,
            "cv_folds": self.cv_folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown training parameters: {sorted(extra)}")
        if "seed" not in d:
            raise ConfigError("training config must set an explicit seed")
        return cls(**d)


@dataclass
class ForestModel:
    trees: list[Tree]
    feature_names: list[str]
    config: TrainConfig
    kind: str = field(default="forest", init=False)


@dataclass
class BoostModel:
    f0: float
    trees: list[Tree]
    feature_names: list[str]
    config: TrainConfig
    kind: str = field(default="boosting", init=False)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def compute_class_weights(y: np.ndarray, mode: str = "balanced") -> np.ndarray:
    """Per-row weights; "balanced" gives each class total weight N/2."""
    if mode not in CLASS_WEIGHT_MODES:
        raise ConfigError(f"unknown class_weight mode {mode!r}")
    y = np.asarray(y)
    n = len(y)
    if mode == "none":
        return np.ones(n, dtype=np.float64)
    w = np.empty(n, dtype=np.float64)
    for label in (0, 1):
        mask = y == label
        count = int(mask.sum())
        if count:
            w[mask] = n / (2.0 * count)
    return w


def _class_indices(y: np.ndarray) -> dict[int, np.ndarray]:
    y = np.asarray(y)
    return {label: np.nonzero(y == label)[0] for label in (0, 1)}


def stratified_split(dataset, test_fraction: float = 0.33, seed: int = 0):
    """Per-class proportional split into (train, test); deterministic."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    by_class = _class_indices(dataset.y)
    rng = np.random.default_rng([seed, 101])
    test_parts = []
    for label in (0, 1):
        idx = by_class[label]
        if len(idx) < 2:
            raise DataError(
                f"class {label} has {len(idx)} members; need at least 2 to split"
            )
        n_test = round(len(idx) * test_fraction)
        perm = rng.permutation(idx)
        test_parts.append(perm[:n_test])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.zeros(dataset.n_rows, dtype=bool)
    mask[test_idx] = True
    train_idx = np.nonzero(~mask)[0]
    return dataset.take(train_idx), dataset.take(test_idx)


def _undersample_indices(y: np.ndarray, r: float, rng) -> np.ndarray:
    """Row indices after majority undersampling, in original row order."""
    if not 0.0 < r <= 1.0:
        raise ConfigError("sampling_strategy must be in (0, 1]")
    by_class = _class_indices(y)
    n0, n1 = len(by_class[0]), len(by_class[1])
    if n0 == 0 or n1 == 0:
        raise DataError("undersampling needs both classes present")
    minority, majority = (1, 0) if n1 <= n0 else (0, 1)
    n_min = len(by_class[minority])
    n_keep = round(n_min / r)
    n_maj = len(by_class[majority])
    if n_keep > n_maj:
        raise DataError(
            f"ratio {r} needs {n_keep} majority rows but only {n_maj} exist"
        )
    kept = rng.choice(by_class[majority], size=n_keep, replace=False)
    return np.sort(np.concatenate([by_class[minority], kept]))


def random_undersample(dataset, r: float, seed: int = 0):
    """Keep every minority row; subsample the majority without replacement
    so minority:majority = r.  Row order is preserved, so r=1.0 on an
    already balanced dataset is the identity."""
    rng = np.random.default_rng([seed, 202])
    return dataset.take(_undersample_indices(dataset.y, r, rng))


def fit_balanced_random_forest(dataset, config: TrainConfig) -> ForestModel:
    """Each tree sees its own undersample, bootstrapped, with per-node
    feature subsets of size ceil(sqrt(p)) and class weights recomputed on
    its own sample."""
    if config.model != "forest":
        raise ConfigError(f"config is for {config.model!r}, not a forest")
    if config.n_trees < 1:
        raise ConfigError("a forest needs at least one tree")
    X = dataset.X
    y = np.asarray(dataset.y, dtype=np.float64)
    p = X.shape[1]
    max_features = math.isqrt(p)
    if max_features * max_features < p:
        max_features += 1
    trees = []
    for t in range(config.n_trees):
        sub = _undersample_indices(
            dataset.y, config.sampling_strategy, np.random.default_rng([config.seed, 11, t])
        )
        boot_rng = np.random.default_rng([config.seed, 12, t])
        rows = sub[boot_rng.integers(0, len(sub), size=len(sub))]
        yt = y[rows]
        wt = compute_class_weights(yt, config.class_weight)
        trees.append(
            fit_decision_tree(
                X[rows],
                yt,
                wt,
                mode="gini",
                max_depth=config.max_depth,
                min_leaf_weight=config.min_leaf_weight,
                max_features=max_features,
                rng=np.random.default_rng([config.seed, 13, t]),
            )
        )
    return ForestModel(trees=trees, feature_names=list(dataset.feature_names), config=config)


def fit_gradient_boosting(dataset, config: TrainConfig) -> BoostModel:
    """Stage-wise fit: start from the weighted log-odds, then at each stage
    fit a squared-error tree to the residuals y - sigmoid(F) and take one
    Newton step per leaf."""
    if config.model != "boosting":
        raise ConfigError(f"config is for {config.model!r}, not boosting")
    X = dataset.X
    y = np.asarray(dataset.y, dtype=np.float64)
    w = compute_class_weights(dataset.y, config.class_weight)
    pos = float(w[y == 1].sum())
    neg = float(w[y == 0].sum())
    if pos == 0.0 or neg == 0.0:
        raise DataError("boosting needs both classes present")
    f0 = math.log(pos / neg)
    F = np.full(len(y), f0, dtype=np.float64)
    trees = []
    for _ in range(config.n_trees):
        prob = _sigmoid(F)
        residual = y - prob
        tree = fit_decision_tree(
            X,
            residual,
            w,
            mode="mse",
            max_depth=config.max_depth,
            min_leaf_weight=config.min_leaf_weight,
        )
        leaves = tree_apply(tree, X)
        num = np.bincount(leaves, weights=w * residual, minlength=tree.n_nodes)
        den = np.bincount(leaves, weights=w * prob * (1.0 - prob), minlength=tree.n_nodes)
        step = np.zeros(tree.n_nodes, dtype=np.float64)
        solid = den >= 1e-150  # a saturated leaf contributes no further step
        step[solid] = num[solid] / den[solid]
        is_leaf = tree.feature < 0
        tree.value[is_leaf] = step[is_leaf]
        F += config.learning_rate * tree.value[leaves]
        trees.append(tree)
    return BoostModel(
        f0=f0, trees=trees, feature_names=list(dataset.feature_names), config=config
    )


def fit_model(dataset, config: TrainConfig):
    if config.model == "forest":
        return fit_balanced_random_forest(dataset, config)
    return fit_gradient_boosting(dataset, config)


def _check_registry(model, feature_names) -> None:
    if feature_names is None:
        return
    have = model.feature_names
    if len(feature_names) != len(have):
        raise DataError(
            f"feature registry mismatch: model has {len(have)} columns, "
            f"input has {len(feature_names)}"
        )
    for i, (a, b) in enumerate(zip(have, feature_names)):
        if a != b:
            raise DataError(
                f"feature registry mismatch at column {i}: model {a!r} != input {b!r}"
            )


def predict_proba(model, X: np.ndarray, feature_names=None) -> np.ndarray:
    """Positive-class probability per row."""
    _check_registry(model, feature_names)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != len(model.feature_names):
        raise DataError(
            f"feature registry mismatch: model has {len(model.feature_names)} "
            f"columns, input has {X.shape[1]}"
        )
    if model.kind == "forest":
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in model.trees:
            acc += tree_predict(tree, X)
        return acc / len(model.trees)
    score = np.full(X.shape[0], model.f0, dtype=np.float64)
    for tree in model.trees:
        score += model.config.learning_rate * tree_predict(tree, X)
    return _sigmoid(score)


def feature_importances(model) -> np.ndarray:
    """Total impurity decrease per feature across all trees, normalized to
    sum 1.  A model with no splits yields all zeros with a warning."""
    p = len(model.feature_names)
    total = np.zeros(p, dtype=np.float64)
    for tree in model.trees:
        internal = tree.feature >= 0
        if internal.any():
            total += np.bincount(
                tree.feature[internal], weights=tree.gain[internal], minlength=p
            )
    s = total.sum()
    if s <= 0:
        warnings.warn("model has no splits; importances are all zero")
        return total
    return total / s


def stratified_kfold(y: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """k validation folds partitioning all rows, class-proportional."""
    if k < 2:
        raise ConfigError("cross-validation needs k >= 2")
    rng = np.random.default_rng([seed, 301])
    folds: list[list[int]] = [[] for _ in range(k)]
    for label, idx in _class_indices(np.asarray(y)).items():
        perm = rng.permutation(idx)
        sizes = [len(idx) // k + (1 if i < len(idx) % k else 0) for i in range(k)]
        start = 0
        for i, size in enumerate(sizes):
            folds[i].extend(perm[start : start + size].tolist())
            start += size
    return [np.asarray(sorted(f), dtype=np.intp) for f in folds]


def _derived_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def expand_grid(mapping: dict) -> list[dict]:
    """Cartesian product of parameter lists, in the mapping's key order
    with the last key varying fastest."""
    if not mapping:
        raise ConfigError("parameter grid is empty")
    keys = list(mapping)
    value_lists = []
    for key in keys:
        values = mapping[key]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid entry {key!r} must be a nonempty list")
        value_lists.append(values)
    return [dict(zip(keys, combo)) for combo in itertools.product(*value_lists)]


def load_default_grid(model: str, path=None) -> list[dict]:
    text = read_config_text(path, "default_grid.json")
    try:
        grids = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed grid file: {exc}") from exc
    if model not in grids:
        raise ConfigError(f"grid file has no entry for model {model!r}")
    return expand_grid(grids[model])


def grid_search_cv(
    dataset,
    grid: list[dict],
    *,
    model: str = "forest",
    k: int = 5,
    seed: int = 0,
) -> tuple[TrainConfig, list[dict]]:
    """Mean validation AUC over stratified k-folds for every grid point;
    best point wins, first-in-grid-order on ties."""
    from .evaluate import auc

    if not grid:
        raise ConfigError("parameter grid is empty")
    folds = stratified_kfold(dataset.y, k, seed)
    all_rows = np.arange(dataset.n_rows)
    table: list[dict] = []
    best: tuple[float, int] | None = None
    for g, point in enumerate(grid):
        params = dict(point)
        params.setdefault("model", model)
        fold_aucs: list[float] = []
        for f, val_idx in enumerate(folds):
            val_y = dataset.y[val_idx]
            train_mask = np.ones(dataset.n_rows, dtype=bool)
            train_mask[val_idx] = False
            train_idx = all_rows[train_mask]
            train_y = dataset.y[train_idx]
            if len(np.unique(val_y)) < 2 or len(np.unique(train_y)) < 2:
                warnings.warn(f"fold {f} skipped: a side has a single class")
                continue
            config = TrainConfig(seed=_derived_seed(seed, 3, g, f), **params)
            fitted = fit_model(dataset.take(train_idx), config)
            scores = predict_proba(fitted, dataset.X[val_idx])
            fold_aucs.append(auc(scores, val_y))
        row = {"params": dict(point), "fold_aucs": fold_aucs}
        if fold_aucs:
            row["mean_auc"] = float(np.mean(fold_aucs))
            row["status"] = "ok"
            if best is None or row["mean_auc"] > best[0]:
                best = (row["mean_auc"], g)
        else:
            row["mean_auc"] = None
            row["status"] = "excluded"
        table.append(row)
    if best is None:
        raise DataError("every grid point was excluded during cross-validation")
    chosen = dict(grid[best[1]])
    chosen.setdefault("model", model)
    return TrainConfig(seed=seed, **chosen), table


def save_model(path, model) -> None:
    """Versioned newline-delimited JSON: header line, then one tree per line."""
    header = {
        "kind": "memepop-model",
        "version": MODEL_FORMAT_VERSION,
        "model": model.kind,
        "config": model.config.to_dict(),
        "feature_names": model.feature_names,
        "n_trees": len(model.trees),
    }
    if model.kind == "boosting":
        header["f0"] = model.f0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for tree in model.trees:
            fh.write(
                json.dumps(tree.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            )


def load_model(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline()
            if not header_line:
                raise DataError(f"{path}: empty model file")
            header = json.loads(header_line)
            if header.get("kind") != "memepop-model":
                raise DataError(f"{path}: not a model file")
            if header.get("version") != MODEL_FORMAT_VERSION:
                raise DataError(
                    f"{path}: unsupported model version {header.get('version')!r}"
                )
            trees = [Tree.from_dict(json.loads(line)) for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file: {exc}") from exc
    if len(trees) != header.get("n_trees"):
        raise DataError(
            f"{path}: header says {header.get('n_trees')} trees, found {len(trees)}"
        )
    config = TrainConfig.from_dict(header["config"])
    names = list(header["feature_names"])
    if header["model"] == "forest":
        return ForestModel(trees=trees, feature_names=names, config=config)
    if header["model"] == "boosting":
        return BoostModel(
            f0=float(header["f0"]), trees=trees, feature_names=names, config=config
        )
    raise DataError(f"{path}: unknown model kind {header['model']!r}")
