"""Assemble labeled feature matrices from a corpus: text block, image
block, metadata block, with a per-column registry and block tags so
experiments can train on column subsets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    IMAGE_EXTENSIONS,
    LabeledPost,
    encode_metadata_features,
)
from .errors import ConfigError, DataError
from .image_features import (
    PaletteEntry,
    VggAnnotation,
    VggCategoryMap,
    encode_image_features,
    load_image,
    load_palette,
    load_vgg_categories,
)
from .text_features import (
    Vocabulary,
    build_vocabulary,
    default_lexicon,
    default_stopwords,
    encode_text_features,
    load_word_categories,
    process_text,
)

__all__ = [
    "LabeledDataset",
    "assemble_dataset",
    "load_annotations",
    "load_features",
    "resolve_image_path",
    "save_features",
]

FEATURES_FORMAT_VERSION = 1
BLOCK_TAGS = ("text", "image", "metadata")

# fixed one-hot column order for the five tracked communities
SUBREDDIT_ORDER = ["MemeEconomy", "memes", "me_irl", "dankmeme", "dank_meme"]


@dataclass
class LabeledDataset:
    """Dense feature matrix plus labels, row ids, and a column registry."""

    X: np.ndarray
    y: np.ndarray
    ids: list[str]
    feature_names: list[str]
    blocks: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int8)
        if self.X.ndim != 2:
            raise ConfigError("feature matrix must be 2-dimensional")
        n, p = self.X.shape
        if len(self.y) != n or len(self.ids) != n:
            raise ConfigError("rows, labels, and ids must align")
        if len(self.feature_names) != p or len(self.blocks) != p:
            raise ConfigError("feature names and block tags must cover every column")
        bad = set(self.blocks) - set(BLOCK_TAGS)
        if bad:
            raise ConfigError(f"unknown block tags: {sorted(bad)}")
        if len(set(self.ids)) != n:
            raise DataError("row ids must be unique")
        if np.isnan(self.X).any():
            raise DataError("feature matrix contains NaN")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def positives(self) -> int:
        return int(self.y.sum())

    def take(self, indices) -> "LabeledDataset":
        """Row subset, preserving the given index order."""
        indices = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(
            X=self.X[indices],
            y=self.y[indices],
            ids=[self.ids[i] for i in indices],
            feature_names=list(self.feature_names),
            blocks=list(self.blocks),
        )

    def select_blocks(self, blocks) -> "LabeledDataset":
        """Column subset by block tag, preserving column order."""
        wanted = list(blocks)
        for b in wanted:
            if b not in BLOCK_TAGS:
                raise ConfigError(f"unknown feature block {b!r}")
            if b not in self.blocks:
                raise ConfigError(f"dataset has no columns tagged {b!r}")
        cols = [i for i, b in enumerate(self.blocks) if b in wanted]
        return LabeledDataset(
            X=self.X[:, cols],
            y=self.y,
            ids=list(self.ids),
            feature_names=[self.feature_names[i] for i in cols],
            blocks=[self.blocks[i] for i in cols],
        )


def resolve_image_path(post_id: str, media_ref: str, images_dir: Path) -> Path | None:
    """Find the stored image for a record: id-named files first, then the
    media link's basename."""
    for ext in sorted(IMAGE_EXTENSIONS):
        candidate = images_dir / f"{post_id}.{ext}"
        if candidate.is_file():
            return candidate
    if media_ref:
        base = media_ref.split("?")[0].split("#")[0].rstrip("/").rsplit("/", 1)[-1]
        if base:
            candidate = images_dir / base
            if candidate.is_file():
                return candidate
    return None


def load_annotations(path) -> dict[str, VggAnnotation]:
    """Read a delimited annotation table: post_id, then three
    (label, probability) pairs per row."""
    out: dict[str, VggAnnotation] = {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read annotations {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.replace(",", "\t").split("\t") if p.strip()]
        if lineno == 1 and parts and parts[0].lower() in ("post_id", "id"):
            continue
        if len(parts) != 7:
            raise DataError(
                f"{path}:{lineno}: expected post_id + 3 label/probability pairs"
            )
        try:
            labels = (parts[1], parts[3], parts[5])
            probs = (float(parts[2]), float(parts[4]), float(parts[6]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad probability: {exc}") from exc
        pairs = sorted(zip(probs, labels), reverse=True)
        out[parts[0]] = VggAnnotation(
            labels=tuple(l for _, l in pairs),
            probs=tuple(p for p, _ in pairs),
        )
    return out


def _text_vector(lp: LabeledPost, vocabulary, categories, lexicon, stopwords):
    post = lp.post
    ptext = process_text(
        post.title,
        post.raw_text,
        processed_words=post.processed_words,
        lexicon=lexicon,
        stopwords=stopwords,
        sentiment_override=post.sentiment_override,
    )
    return encode_text_features(ptext, vocabulary, categories)


def assemble_dataset(
    labeled: list[LabeledPost],
    images_dir,
    *,
    vocabulary: Vocabulary | None = None,
    annotations: dict[str, VggAnnotation] | None = None,
    palette: list[PaletteEntry] | None = None,
    category_map: VggCategoryMap | None = None,
    lexicon: dict[str, float] | None = None,
    stopwords: frozenset[str] | None = None,
    word_categories: dict[str, frozenset[str]] | None = None,
) -> tuple[LabeledDataset, list[str]]:
    """Build the [text | image | metadata] matrix.

    Records whose image is missing or undecodable are dropped and listed
    in the returned exclusion log.  The image block carries the 20
    annotation columns only when at least one record has an annotation;
    otherwise the whole corpus downgrades to the 33-column image block.
    """
    if not labeled:
        raise DataError("cannot assemble features from an empty corpus")
    images_dir = Path(images_dir)
    if not images_dir.is_dir():
        raise DataError(f"images directory not found: {images_dir}")
    palette = palette if palette is not None else load_palette()
    category_map = category_map if category_map is not None else load_vgg_categories()
    lexicon = lexicon if lexicon is not None else default_lexicon()
    stopwords = stopwords if stopwords is not None else default_stopwords()
    word_categories = (
        word_categories if word_categories is not None else load_word_categories()
    )
    annotations = annotations or {}

    def annotation_for(lp: LabeledPost) -> VggAnnotation | None:
        got = annotations.get(lp.post.id)
        return got if got is not None else lp.post.annotation()

    include_vgg = any(annotation_for(lp) is not None for lp in labeled)

    if vocabulary is None:
        processed = [
            process_text(
                lp.post.title,
                lp.post.raw_text,
                processed_words=lp.post.processed_words,
                lexicon=lexicon,
                stopwords=stopwords,
                sentiment_override=lp.post.sentiment_override,
            )
            for lp in labeled
        ]
        vocabulary = build_vocabulary(p.stems for p in processed)

    rows: list[list[float]] = []
    ys: list[int] = []
    ids: list[str] = []
    excluded: list[str] = []
    names: list[str] | None = None
    blocks: list[str] | None = None
    for lp in labeled:
        post = lp.post
        path = resolve_image_path(post.id, post.media_ref, images_dir)
        if path is None:
            excluded.append(f"{post.id}: image file not found")
            continue
        try:
            image = load_image(path)
        except DataError as exc:
            excluded.append(f"{post.id}: {exc}")
            continue
        t_names, t_vals = _text_vector(
            lp, vocabulary, word_categories, lexicon, stopwords
        )
        i_names, i_vals = encode_image_features(
            image, annotation_for(lp), palette, category_map, include_vgg=include_vgg
        )
        m_names, m_vals = encode_metadata_features(lp, SUBREDDIT_ORDER)
        if names is None:
            names = t_names + i_names + m_names
            blocks = (
                ["text"] * len(t_names)
                + ["image"] * len(i_names)
                + ["metadata"] * len(m_names)
            )
        rows.append(t_vals + i_vals + m_vals)
        ys.append(lp.dank)
        ids.append(post.id)
    if not rows:
        raise DataError("every record was excluded during feature assembly")
    dataset = LabeledDataset(
        X=np.asarray(rows, dtype=np.float64),
        y=np.asarray(ys, dtype=np.int8),
        ids=ids,
        feature_names=names,
        blocks=blocks,
    )
    return dataset, excluded


def save_features(path, dataset: LabeledDataset) -> None:
    """Versioned newline-delimited JSON: header, then one row per record."""
    header = {
        "kind": "memepop-features",
        "version": FEATURES_FORMAT_VERSION,
        "count": dataset.n_rows,
        "feature_names": dataset.feature_names,
        "blocks": dataset.blocks,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for i in range(dataset.n_rows):
            row = {
                "id": dataset.ids[i],
                "y": int(dataset.y[i]),
                "x": dataset.X[i].tolist(),
            }
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def load_features(path) -> LabeledDataset:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline()
            if not header_line:
                raise DataError(f"{path}: empty features file")
            header = json.loads(header_line)
            if header.get("kind") != "memepop-features":
                raise DataError(f"{path}: not a features file")
            if header.get("version") != FEATURES_FORMAT_VERSION:
                raise DataError(
                    f"{path}: unsupported features version {header.get('version')!r}"
                )
            ids, ys, xs = [], [], []
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                ids.append(row["id"])
                ys.append(row["y"])
                xs.append(row["x"])
    except OSError as exc:
        raise DataError(f"cannot read features {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed features file: {exc}") from exc
    if len(ids) != header.get("count"):
        raise DataError(
            f"{path}: header count {header.get('count')} != {len(ids)} rows"
        )
    return LabeledDataset(
        X=np.asarray(xs, dtype=np.float64),
        y=np.asarray(ys, dtype=np.int8),
        ids=ids,
        feature_names=list(header["feature_names"]),
        blocks=list(header["blocks"]),
    )
