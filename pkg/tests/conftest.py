"""Shared fixtures: a fully synthetic archive (records + tiny images) with
planted signal, so pipeline tests never need external data."""

import colorsys
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from memepop import corpus as corpus_mod
from memepop.featurize import LabeledDataset, assemble_dataset

SUBREDDITS = [
    # (name, subscribers, baseline normalized-ups rate)
    ("MemeEconomy", 500_000, 0.0020),
    ("memes", 14_000_000, 0.0120),
    ("me_irl", 2_200_000, 0.0045),
    ("dankmeme", 3_400_000, 0.0060),
    ("dank_meme", 80_000, 0.0008),
]

TITLE_WORDS = [
    "quarantine", "virus", "toilet", "paper", "grocery", "store", "corona",
    "pandemic", "lockdown", "march", "vibes", "cancelled", "teacher", "online",
    "class", "homework", "dog", "cat", "monday", "coffee", "sleep", "work",
    "home", "office", "mask", "wash", "hands", "soap", "president", "news",
    "economy", "stock", "market", "panic", "shopping", "weekend", "party",
    "alone", "birthday", "spring",
]

DANK_VGG = (["gas mask", "toilet tissue", "web_site"], [0.52, 0.31, 0.08])
PLAIN_VGG = (["golden retriever", "basketball", "laptop"], [0.44, 0.22, 0.11])


def _grayscale_image(rng) -> Image.Image:
    # equal channels per pixel: zero saturation, values over the full range
    level = rng.integers(0, 256, size=(8, 8, 1), dtype=np.uint8)
    return Image.fromarray(np.repeat(level, 3, axis=2), "RGB")


_BRIGHT_RGB = np.array(
    [colorsys.hsv_to_rgb(h / 360.0, 0.9, 0.9) for h in range(0, 360, 30)]
)
_BRIGHT_RGB = np.round(_BRIGHT_RGB * 255).astype(np.uint8)


def _colorful_image(rng) -> Image.Image:
    # saturated pixels at the twelve bright hue centers
    hues = rng.integers(0, len(_BRIGHT_RGB), size=(8, 8))
    return Image.fromarray(_BRIGHT_RGB[hues], "RGB")


def build_synthetic_archive(
    root: Path, n: int = 240, seed: int = 5, with_vgg: bool = True
) -> dict:
    """Write archive.ndjson plus an images directory.

    Plants learnable structure: the top ~5% of ups/subscribers rows carry
    distinctive title words, grayscale images, and mask/tissue annotations.
    Also includes records that cleaning must drop and one undecodable
    image that featurization must exclude.
    """
    rng = np.random.default_rng(seed)
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    records = []
    n_dank_planted = max(4, round(n * 0.05))
    for i in range(n):
        name, subscribers, base_rate = SUBREDDITS[i % len(SUBREDDITS)]
        post_id = f"p{i:04d}"
        dank = i < n_dank_planted
        rate = base_rate * (float(rng.uniform(8.0, 15.0)) if dank else float(rng.uniform(0.2, 1.8)))
        ups = max(1, int(subscribers * rate))
        if dank:
            words = ["quarantine", "virus", "toilet", "paper"] + list(
                rng.choice(TITLE_WORDS, size=3, replace=False)
            )
        else:
            words = list(rng.choice(TITLE_WORDS, size=5, replace=False))
        title = " ".join(words)
        img = _grayscale_image(rng) if dank else _colorful_image(rng)
        if i % 7 == 3:  # resolved through the media link basename
            filename = f"meme_{i}.png"
            media = f"https://i.example.com/{filename}?width=640"
        else:
            filename = f"{post_id}.png"
            media = f"https://i.example.com/{post_id}.png"
        img.save(images / filename, "PNG")
        record = {
            "id": post_id,
            "ups": ups,
            "subreddit": name,
            "subscribers": subscribers,
            "created_utc": 1_584_000_000 + i * 3_607,
            "over_18": bool(dank and i % 2 == 0),
            "title": title,
            "media": media,
            "thumbnail": {"height": 140, "widith": 140, "thumbnail": ""},
        }
        if with_vgg and i % 3 != 2:  # a third of records carry no annotation
            labels, probs = DANK_VGG if dank else PLAIN_VGG
            record["VGG_features"] = labels
            record["VGG_probs"] = probs
        records.append(record)

    # records that cleaning drops: dead link, then a non-image media type
    records.append({
        "id": "dead01", "ups": 10, "subreddit": "memes",
        "subscribers": 14_000_000, "created_utc": 1_584_000_000,
        "title": "deleted meme", "media": "https://i.example.com/dead01.png",
        "dead_link": True,
    })
    records.append({
        "id": "vid001", "ups": 10, "subreddit": "memes",
        "subscribers": 14_000_000, "created_utc": 1_584_000_000,
        "title": "video meme", "media": "https://v.example.com/clip.mp4",
    })
    # survives cleaning but its image bytes are garbage: featurize excludes it
    records.append({
        "id": "bad001", "ups": 10, "subreddit": "me_irl",
        "subscribers": 2_200_000, "created_utc": 1_584_000_000,
        "title": "broken upload", "media": "https://i.example.com/bad001.png",
    })
    (images / "bad001.png").write_bytes(b"not actually a png")

    archive = root / "archive.ndjson"
    with open(archive, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return {
        "archive": archive,
        "images": images,
        "n_written": len(records),
        "n_clean": n + 1,  # bad001 survives cleaning
        "n_featurized": n,
        "n_dank_planted": n_dank_planted,
    }


@pytest.fixture(scope="session")
def synthetic_archive(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    return build_synthetic_archive(root)


@pytest.fixture(scope="session")
def synthetic_posts(synthetic_archive):
    schema = corpus_mod.load_schema()
    with open(synthetic_archive["archive"], encoding="utf-8") as fh:
        posts, errors = corpus_mod.parse_records(fh, schema)
    assert not errors
    return corpus_mod.clean_records(posts)


@pytest.fixture(scope="session")
def synthetic_labeled(synthetic_posts):
    return corpus_mod.label_posts(synthetic_posts, 0.95)


@pytest.fixture(scope="session")
def synthetic_dataset(synthetic_labeled, synthetic_archive) -> LabeledDataset:
    dataset, excluded = assemble_dataset(
        synthetic_labeled, synthetic_archive["images"]
    )
    assert len(excluded) == 1 and excluded[0].startswith("bad001")
    return dataset


def bytes_of(path: Path) -> bytes:
    return Path(path).read_bytes()


def make_blob_dataset(n=300, p=6, seed=0, positive_rate=0.25) -> LabeledDataset:
    """Plain numeric dataset with a learnable first feature, for learner
    tests that do not need the corpus pipeline."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    cut = np.quantile(X[:, 0] + 0.6 * rng.normal(size=n), 1 - positive_rate)
    y = (X[:, 0] + 0.6 * rng.normal(size=n) > cut).astype(int)
    while y.sum() < 2 or y.sum() > n - 2:  # regenerate degenerate draws
        y = (X[:, 0] + 0.6 * rng.normal(size=n) > cut).astype(int)
    blocks = (["text", "image", "metadata"] * p)[:p]
    return LabeledDataset(
        X=X,
        y=y,
        ids=[f"r{i:05d}" for i in range(n)],
        feature_names=[f"f{i}" for i in range(p)],
        blocks=blocks,
    )
