"""Evaluation: ROC sweeps, Mann-Whitney AUC, thresholded classification
metrics, and structured reports with plot-ready tables.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import feature_importances, predict_proba
from .errors import DataError

__all__ = [
    "EvalReport",
    "auc",
    "classification_metrics",
    "dataset_fingerprint",
    "emit_report",
    "evaluate_model",
    "load_report",
    "load_scores",
    "roc_points",
    "tune_threshold",
]

REPORT_FORMAT_VERSION = 1


def _check_two_classes(labels: np.ndarray) -> None:
    if labels.min() == labels.max():
        raise DataError("labels contain a single class; need both")


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) per distinct threshold, swept descending, with the (0,0)
    start and (1,1) end always present."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise DataError("scores and labels must align")
    if len(scores) == 0:
        raise DataError("cannot build a ROC curve from no scores")
    _check_two_classes(labels)
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    order = np.argsort(-scores, kind="mergesort")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_labels == 1)
    fp = np.cumsum(sorted_labels == 0)
    # last row of each tied-score run = totals at that threshold
    distinct = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]
    points = [(0.0, 0.0)]
    for i in distinct:
        points.append((float(fp[i] / n_neg), float(tp[i] / n_pos)))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def auc(scores, labels) -> float:
    """Mann-Whitney statistic: the fraction of (positive, negative) pairs
    ranked correctly, ties worth half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise DataError("scores and labels must align")
    _check_two_classes(labels)
    n = len(scores)
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = n - n_pos
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_metrics(scores, labels, threshold: float) -> dict:
    """Confusion counts and derived metrics at a fixed operating point;
    predicted positive means score >= threshold.  Precision (and with it
    F1) carries an explicit undefined status when nothing is predicted
    positive."""
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold {threshold} outside [0,1]")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise DataError("scores and labels must align")
    if len(scores) == 0:
        raise DataError("cannot score an empty set")
    pred = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    accuracy = (tp + tn) / len(labels)
    recall = tp / (tp + fn) if tp + fn else 0.0
    if tp + fp == 0:
        precision = None
        status = "undefined"
        f1 = None
    else:
        precision = tp / (tp + fp)
        status = "ok"
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
    return {
        "accuracy": accuracy,
        "precision": precision,
        "precision_status": status,
        "recall": recall,
        "f1": f1,
        "confusion": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    }


def tune_threshold(scores, labels) -> float:
    """Operating point maximizing F1 over the distinct scores; ties go to
    the highest (most conservative) threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    _check_two_classes(np.asarray(labels))
    best_t = 0.5
    best_f1 = -1.0
    for t in np.unique(scores)[::-1]:
        t = float(min(max(t, 0.0), 1.0))
        m = classification_metrics(scores, labels, t)
        f1 = m["f1"]
        if f1 is not None and f1 > best_f1:
            best_f1 = f1
            best_t = t
    return best_t


def dataset_fingerprint(ids, labels) -> dict:
    """Row count, positive count, and an id-order checksum, so experiment
    legs can prove they scored the same split."""
    digest = hashlib.sha256(",".join(ids).encode("utf-8")).hexdigest()
    return {
        "rows": len(ids),
        "positives": int(np.asarray(labels).sum()),
        "checksum": digest,
    }


@dataclass
class EvalReport:
    experiment_id: str
    model_kind: str
    blocks: list[str]
    threshold: float
    metrics: dict
    precision_status: str
    confusion: dict
    roc: list[tuple[float, float]]
    importances: list[tuple[str, float]]
    config: dict
    fingerprint: dict
    flags: list[str] = field(default_factory=list)

    def validate(self) -> None:
        for name, value in self.metrics.items():
            if value is not None and not 0.0 <= value <= 1.0:
                raise DataError(f"metric {name} = {value} outside [0,1]")
        if sum(self.confusion.values()) != self.fingerprint["rows"]:
            raise DataError("confusion counts do not sum to the test-set size")
        if tuple(self.roc[0]) != (0.0, 0.0) or tuple(self.roc[-1]) != (1.0, 1.0):
            raise DataError("ROC must run from (0,0) to (1,1)")
        for (fa, ta), (fb, tb) in zip(self.roc, self.roc[1:]):
            if fb < fa or tb < ta:
                raise DataError("ROC points must be monotone nondecreasing")

    def to_dict(self) -> dict:
        return {
            "kind": "memepop-report",
            "version": REPORT_FORMAT_VERSION,
            "experiment_id": self.experiment_id,
            "model_kind": self.model_kind,
            "blocks": list(self.blocks),
            "threshold": self.threshold,
            "metrics": self.metrics,
            "precision_status": self.precision_status,
            "confusion": self.confusion,
            "roc": [[f, t] for f, t in self.roc],
            "importances": [[n, v] for n, v in self.importances],
            "config": self.config,
            "fingerprint": self.fingerprint,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("kind") != "memepop-report":
            raise DataError("not a report object")
        if d.get("version") != REPORT_FORMAT_VERSION:
            raise DataError(f"unsupported report version {d.get('version')!r}")
        return cls(
            experiment_id=d["experiment_id"],
            model_kind=d["model_kind"],
            blocks=list(d["blocks"]),
            threshold=d["threshold"],
            metrics=d["metrics"],
            precision_status=d["precision_status"],
            confusion=d["confusion"],
            roc=[(f, t) for f, t in d["roc"]],
            importances=[(n, v) for n, v in d["importances"]],
            config=d["config"],
            fingerprint=d["fingerprint"],
            flags=list(d.get("flags", [])),
        )


def evaluate_model(
    model,
    dataset,
    *,
    threshold: float = 0.5,
    experiment_id: str,
    flags: tuple[str, ...] = (),
) -> EvalReport:
    """Score a trained model on a labeled dataset and assemble the report."""
    scores = predict_proba(model, dataset.X, dataset.feature_names)
    m = classification_metrics(scores, dataset.y, threshold)
    imp = feature_importances(model)
    ranked = sorted(
        zip(model.feature_names, imp.tolist()), key=lambda kv: (-kv[1], kv[0])
    )
    report = EvalReport(
        experiment_id=experiment_id,
        model_kind=model.kind,
        blocks=list(dict.fromkeys(dataset.blocks)),
        threshold=float(threshold),
        metrics={
            "accuracy": m["accuracy"],
            "precision": m["precision"],
            "recall": m["recall"],
            "f1": m["f1"],
            "auc": auc(scores, dataset.y),
        },
        precision_status=m["precision_status"],
        confusion=m["confusion"],
        roc=roc_points(scores, dataset.y),
        importances=ranked,
        config=model.config.to_dict(),
        fingerprint=dataset_fingerprint(dataset.ids, dataset.y),
        flags=list(flags),
    )
    report.validate()
    return report


def emit_report(report: EvalReport, out_dir, color_means=None) -> list[Path]:
    """Write the report JSON plus flat plot tables: ROC points, the
    importance ranking, and (when supplied) mean color-profile rows."""
    report.validate()
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        base = report.experiment_id
        report_path = out_dir / f"{base}.report.json"
        with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(
                json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":"))
                + "\n"
            )
        written.append(report_path)
        roc_path = out_dir / f"{base}.roc.tsv"
        with open(roc_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("fpr\ttpr\n")
            for fpr, tpr in report.roc:
                fh.write(f"{fpr!r}\t{tpr!r}\n")
        written.append(roc_path)
        imp_path = out_dir / f"{base}.importances.tsv"
        with open(imp_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("feature\timportance\n")
            for name, value in report.importances:
                fh.write(f"{name}\t{value!r}\n")
        written.append(imp_path)
        if color_means is not None:
            color_path = out_dir / f"{base}.colors.tsv"
            with open(color_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("color\tmean_fraction\n")
                for name, value in color_means:
                    fh.write(f"{name}\t{value!r}\n")
            written.append(color_path)
        return written
    except OSError as exc:
        raise DataError(f"cannot write report under {out_dir}: {exc}") from exc


def load_report(path) -> EvalReport:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            report = EvalReport.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed report: {exc}") from exc
    report.validate()
    return report


def load_scores(path) -> dict[str, float]:
    """External score table: one (post_id, score) pair per line, tab or
    comma separated, optional header."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read scores {path}: {exc}") from exc
    out: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.replace(",", "\t").split("\t") if p.strip()]
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected post_id and score")
        if lineno == 1 and parts[1].lower() in ("score", "probability"):
            continue
        try:
            value = float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad score: {exc}") from exc
        if not 0.0 <= value <= 1.0:
            raise DataError(f"{path}:{lineno}: score {value} outside [0,1]")
        out[parts[0]] = value
    if not out:
        raise DataError(f"{path}: no scores found")
    return out
