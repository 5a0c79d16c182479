"""Command-line pipeline: ingest -> featurize -> train -> evaluate, plus
the experiment suites and report regeneration.

Every flag can instead come from a JSON config file (--config); explicit
flags win over file values.  Environment variables are never consulted.
Stages communicate only through files in the output directory, and every
command is rerun-safe: identical inputs, config, and seed produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .ensemble import (
    TrainConfig,
    fit_model,
    grid_search_cv,
    load_default_grid,
    load_model,
    predict_proba,
    save_model,
    stratified_split,
)
from .errors import ConfigError, DataError, MemepopError
from .evaluate import (
    emit_report,
    evaluate_model,
    load_report,
    load_scores,
    tune_threshold,
)
from .experiments import (
    color_profile_summary,
    evaluate_external_scores,
    incremental_experiment,
    run_table3_suite,
)
from .featurize import assemble_dataset, load_annotations, load_features, save_features
from .image_features import load_palette, load_vgg_categories
from .text_features import load_lexicon, load_stopwords, load_word_categories

__all__ = ["main"]


def _int_or_none(text: str):
    if text.lower() in ("none", "null"):
        return None
    return int(text)


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required (flag or config file)")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{flag}: no such file: {p}")
    return p


def _require_dir(path, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required (flag or config file)")
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"{flag}: no such directory: {p}")
    return p


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"--config: no such file: {p}")
    try:
        loaded = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--config {p}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"--config {p}: expected a JSON object")
    return loaded


def _finalize(args: argparse.Namespace, defaults: dict) -> None:
    """Fill unset flags from the config file, then from hard defaults.
    Keys in the file that this command does not use are ignored, so one
    file can configure the whole pipeline."""
    file_cfg = _load_config_file(args.config) if args.config else {}
    for key, fallback in defaults.items():
        if getattr(args, key, None) is None:
            value = file_cfg.get(key, fallback)
            setattr(args, key, value)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        seed=seed,
        model=args.model,
        n_trees=int(args.n_trees),
        max_depth=args.max_depth,
        min_leaf_weight=float(args.min_leaf_weight),
        learning_rate=float(args.learning_rate),
        sampling_strategy=float(args.sampling_strategy),
        class_weight=args.class_weight,
        cv_folds=int(args.cv_folds),
    )


def _require_seed(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required (flag or config file)")
    return int(args.seed)


_MODEL_DEFAULTS = {
    "model": "forest",
    "n_trees": 300,
    "max_depth": None,
    "min_leaf_weight": 1.0,
    "learning_rate": 0.1,
    "sampling_strategy": 1.0,
    "class_weight": "balanced",
    "cv_folds": 5,
    "seed": None,
}


def _add_model_flags(parser) -> None:
    parser.add_argument("--model", choices=("forest", "boosting"))
    parser.add_argument("--n-trees", type=int, dest="n_trees")
    parser.add_argument("--max-depth", type=_int_or_none, dest="max_depth",
                        help="integer or 'none' for unlimited")
    parser.add_argument("--min-leaf-weight", type=float, dest="min_leaf_weight")
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--sampling-strategy", type=float, dest="sampling_strategy")
    parser.add_argument("--class-weight", choices=("balanced", "none"),
                        dest="class_weight")
    parser.add_argument("--cv-folds", type=int, dest="cv_folds")
    parser.add_argument("--seed", type=int)


def _headline(report) -> str:
    m = report.metrics
    precision = "undefined" if m["precision"] is None else repr(m["precision"])
    f1 = "undefined" if m["f1"] is None else repr(m["f1"])
    return (
        f"{report.experiment_id}: auc={m['auc']!r} accuracy={m['accuracy']!r} "
        f"precision={precision} recall={m['recall']!r} f1={f1} "
        f"threshold={report.threshold!r}"
    )


def cmd_ingest(args) -> int:
    _finalize(args, {"archive": None, "schema": None, "quantile": 0.95,
                     "out_dir": "out"})
    archive = _require_file(args.archive, "--archive")
    schema = corpus_mod.load_schema(args.schema)
    with open(archive, encoding="utf-8") as fh:
        posts, errors = corpus_mod.parse_records(fh, schema)
    for err in errors:
        print(f"record {err.line}: {err.message}", file=sys.stderr)
    kept = corpus_mod.clean_records(posts)
    if not kept:
        raise DataError(f"{archive}: no usable records after cleaning")
    labeled = corpus_mod.label_posts(kept, float(args.quantile))
    stats = corpus_mod.subreddit_correlation(labeled)
    out = _out_dir(args) / "corpus.ndjson"
    corpus_mod.write_corpus(out, labeled, float(args.quantile))
    pearson = "undefined" if stats.pearson_r is None else repr(stats.pearson_r)
    print(
        f"records={stats.total_records} dank={stats.dank_count} "
        f"dank_rate={stats.dank_count / stats.total_records!r} "
        f"pearson={pearson} parse_errors={len(errors)}"
    )
    print(f"wrote {out}")
    return 0


def cmd_featurize(args) -> int:
    _finalize(args, {
        "corpus": None, "images_dir": None, "annotations": None,
        "lexicon": None, "stopwords": None, "word_categories": None,
        "palette": None, "vgg_categories": None, "out_dir": "out",
    })
    if args.corpus is None:
        args.corpus = str(Path(args.out_dir) / "corpus.ndjson")
    corpus_path = _require_file(args.corpus, "--corpus")
    images_dir = _require_dir(args.images_dir, "--images-dir")
    annotations = (
        load_annotations(_require_file(args.annotations, "--annotations"))
        if args.annotations
        else None
    )
    _, labeled = corpus_mod.read_corpus(corpus_path)
    dataset, excluded = assemble_dataset(
        labeled,
        images_dir,
        annotations=annotations,
        palette=load_palette(args.palette) if args.palette else None,
        category_map=(
            load_vgg_categories(args.vgg_categories) if args.vgg_categories else None
        ),
        lexicon=load_lexicon(args.lexicon) if args.lexicon else None,
        stopwords=load_stopwords(args.stopwords) if args.stopwords else None,
        word_categories=(
            load_word_categories(args.word_categories)
            if args.word_categories
            else None
        ),
    )
    for line in excluded:
        print(f"excluded {line}", file=sys.stderr)
    out = _out_dir(args)
    features_path = out / "features.ndjson"
    save_features(features_path, dataset)
    counts = {tag: dataset.blocks.count(tag) for tag in ("text", "image", "metadata")}
    manifest = {
        "kind": "memepop-feature-manifest",
        "version": 1,
        "rows": dataset.n_rows,
        "feature_names": dataset.feature_names,
        "blocks": dataset.blocks,
        "block_counts": counts,
    }
    manifest_path = out / "features.manifest.json"
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    print(
        f"rows={dataset.n_rows} text={counts['text']} image={counts['image']} "
        f"metadata={counts['metadata']} excluded={len(excluded)}"
    )
    print(f"wrote {features_path}")
    print(f"wrote {manifest_path}")
    return 0


def cmd_train(args) -> int:
    _finalize(args, {
        "features": None, "test_fraction": 0.33, "grid": None,
        "out_dir": "out", **_MODEL_DEFAULTS,
    })
    if args.features is None:
        args.features = str(Path(args.out_dir) / "features.ndjson")
    dataset = load_features(_require_file(args.features, "--features"))
    seed = _require_seed(args)
    train, _ = stratified_split(dataset, float(args.test_fraction), seed)
    out = _out_dir(args)
    if args.grid:
        if args.grid == "default":
            grid = load_default_grid(args.model)
        else:
            grid = load_default_grid(args.model, _require_file(args.grid, "--grid"))
        config, table = grid_search_cv(
            train, grid, model=args.model, k=int(args.cv_folds), seed=seed
        )
        cv_path = out / "cv_table.json"
        with open(cv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(table, sort_keys=True, separators=(",", ":")) + "\n")
        print(f"grid best: {json.dumps(config.to_dict(), sort_keys=True)}")
        print(f"wrote {cv_path}")
    else:
        config = _train_config(args, seed)
    model = fit_model(train, config)
    model_path = out / "model.ndjson"
    save_model(model_path, model)
    print(
        f"model={model.kind} trees={len(model.trees)} train_rows={train.n_rows} "
        f"features={len(model.feature_names)}"
    )
    print(f"wrote {model_path}")
    return 0


def _resolve_threshold(spec_text, model, train) -> float:
    """Numeric threshold, or F1-tuned on a training slice for 'auto'."""
    if spec_text == "auto":
        from .ensemble import _derived_seed

        _, val = stratified_split(
            train, test_fraction=0.25, seed=_derived_seed(model.config.seed, 403)
        )
        scores = predict_proba(model, val.X, val.feature_names)
        return tune_threshold(scores, val.y)
    try:
        return float(spec_text)
    except ValueError as exc:
        raise ConfigError(f"--threshold must be a number or 'auto': {spec_text!r}") from exc


def cmd_evaluate(args) -> int:
    _finalize(args, {
        "features": None, "model_file": None, "test_fraction": 0.33,
        "threshold": "0.5", "experiment_id": "evaluate", "out_dir": "out",
    })
    if args.features is None:
        args.features = str(Path(args.out_dir) / "features.ndjson")
    if args.model_file is None:
        args.model_file = str(Path(args.out_dir) / "model.ndjson")
    dataset = load_features(_require_file(args.features, "--features"))
    model = load_model(_require_file(args.model_file, "--model-file"))
    train, test = stratified_split(
        dataset, float(args.test_fraction), model.config.seed
    )
    threshold = _resolve_threshold(str(args.threshold), model, train)
    report = evaluate_model(
        model, test, threshold=threshold, experiment_id=args.experiment_id
    )
    for path in emit_report(report, _out_dir(args)):
        print(f"wrote {path}")
    print(_headline(report))
    return 0


def cmd_experiment_table3(args) -> int:
    _finalize(args, {
        "features": None, "test_fraction": 0.33, "out_dir": "out",
        **_MODEL_DEFAULTS,
    })
    if args.features is None:
        args.features = str(Path(args.out_dir) / "features.ndjson")
    dataset = load_features(_require_file(args.features, "--features"))
    config = _train_config(args, _require_seed(args))
    reports = run_table3_suite(
        dataset, config, test_fraction=float(args.test_fraction)
    )
    out = _out_dir(args)
    for report in reports:
        emit_report(report, out)
        print(_headline(report))
    return 0


def cmd_experiment_incremental(args) -> int:
    _finalize(args, {
        "features": None, "test_fraction": 0.33, "out_dir": "out",
        **_MODEL_DEFAULTS,
    })
    if args.features is None:
        args.features = str(Path(args.out_dir) / "features.ndjson")
    dataset = load_features(_require_file(args.features, "--features"))
    config = _train_config(args, _require_seed(args))
    reports = incremental_experiment(
        dataset, config, test_fraction=float(args.test_fraction)
    )
    out = _out_dir(args)
    for report in reports:
        emit_report(report, out)
        print(_headline(report))
    return 0


def cmd_experiment_external(args) -> int:
    _finalize(args, {
        "features": None, "scores": None, "threshold": "0.5",
        "split": "test", "test_fraction": 0.33, "seed": None, "out_dir": "out",
    })
    if args.features is None:
        args.features = str(Path(args.out_dir) / "features.ndjson")
    dataset = load_features(_require_file(args.features, "--features"))
    scores = load_scores(_require_file(args.scores, "--scores"))
    if args.split == "test":
        _, target = stratified_split(
            dataset, float(args.test_fraction), _require_seed(args)
        )
    else:
        target = dataset
    try:
        threshold = float(args.threshold)
    except ValueError as exc:
        raise ConfigError(f"--threshold must be a number: {args.threshold!r}") from exc
    report = evaluate_external_scores(scores, target, threshold=threshold)
    out = _out_dir(args)
    emit_report(report, out)
    print(_headline(report))
    return 0


def cmd_report(args) -> int:
    _finalize(args, {"report": None, "features": None, "out_dir": "out"})
    report = load_report(_require_file(args.report, "--report"))
    color_means = None
    if args.features:
        dataset = load_features(_require_file(args.features, "--features"))
        color_means = color_profile_summary(dataset, positives_only=True)
    for path in emit_report(report, _out_dir(args), color_means=color_means):
        print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memepop",
        description="Meme-popularity pipeline: ingest, featurize, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file supplying any flag values")
        p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("ingest", help="parse, clean, and label the archive")
    common(p)
    p.add_argument("--archive")
    p.add_argument("--schema")
    p.add_argument("--quantile", type=float)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="build the feature matrix")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--images-dir", dest="images_dir")
    p.add_argument("--annotations")
    p.add_argument("--lexicon")
    p.add_argument("--stopwords")
    p.add_argument("--word-categories", dest="word_categories")
    p.add_argument("--palette")
    p.add_argument("--vgg-categories", dest="vgg_categories")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="fit a model, optionally grid-searched")
    common(p)
    p.add_argument("--features")
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--grid", help="'default' or a grid JSON path")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model on the test side")
    common(p)
    p.add_argument("--features")
    p.add_argument("--model-file", dest="model_file")
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--threshold", help="number or 'auto' (F1-tuned)")
    p.add_argument("--experiment-id", dest="experiment_id")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run an evaluation experiment suite")
    esub = p.add_subparsers(dest="experiment", required=True)

    e = esub.add_parser("table3", help="three undersampling regimes")
    common(e)
    e.add_argument("--features")
    e.add_argument("--test-fraction", type=float, dest="test_fraction")
    _add_model_flags(e)
    e.set_defaults(func=cmd_experiment_table3)

    e = esub.add_parser("incremental", help="per-block predictive power")
    common(e)
    e.add_argument("--features")
    e.add_argument("--test-fraction", type=float, dest="test_fraction")
    _add_model_flags(e)
    e.set_defaults(func=cmd_experiment_incremental)

    e = esub.add_parser("external", help="evaluate an external score file")
    common(e)
    e.add_argument("--features")
    e.add_argument("--scores")
    e.add_argument("--threshold")
    e.add_argument("--split", choices=("test", "all"))
    e.add_argument("--test-fraction", type=float, dest="test_fraction")
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment_external)

    p = sub.add_parser("report", help="re-emit plot tables from a saved report")
    common(p)
    p.add_argument("--report")
    p.add_argument("--features", help="also write the color-profile table")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MemepopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
