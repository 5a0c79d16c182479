"""Archive parsing, cleaning, labeling, and metadata features.

The archive is scraped data: malformed records are collected as per-record
errors with their line numbers while parsing continues.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass

from memepop.errors import DataError
from memepop.image_features import VggAnnotation
from memepop.resources import read_config_text

__all__ = [
    "MemePost",
    "LabeledPost",
    "CorpusStats",
    "RecordError",
    "load_schema",
    "parse_records",
    "clean_records",
    "time_of_day_bin",
    "normalize_ups",
    "assign_dank_labels",
    "label_posts",
    "subreddit_correlation",
    "encode_metadata_features",
    "write_corpus",
    "read_corpus",
]

IMAGE_EXTENSIONS = frozenset({"png", "jpg", "jpeg", "bmp", "webp"})

# The collection window sits entirely inside US daylight-saving time, so
# Central time is a fixed UTC-5 offset; no timezone database involved.
CENTRAL_UTC_OFFSET_HOURS = -5

TIME_BINS = 6
DEFAULT_QUANTILE = 0.95
CORPUS_FORMAT_VERSION = 1


@dataclass
class MemePost:
    id: str
    created_utc: int
    ups: int
    is_nsfw: bool
    subreddit: str
    subscribers: int
    thumb_height: float = 0.0
    thumb_width: float = 0.0
    title: str = ""
    media_ref: str = ""
    raw_text: str | None = None
    processed_words: list[str] | None = None
    vgg_labels: list[str] | None = None
    vgg_probs: list[float] | None = None
    dead_link: bool = False
    sentiment_override: float | None = None

    def annotation(self) -> VggAnnotation | None:
        if self.vgg_labels is None or self.vgg_probs is None:
            return None
        pairs = sorted(zip(self.vgg_probs, self.vgg_labels), reverse=True)
        return VggAnnotation(
            labels=tuple(l for _, l in pairs),
            probs=tuple(p for p, _ in pairs),
        )


@dataclass
class LabeledPost:
    post: MemePost
    ups_normed: float
    dank: int
    time_bin: int


@dataclass
class CorpusStats:
    median_ups: dict[str, float]
    subscribers: dict[str, float]
    pearson_r: float | None
    pearson_status: str
    total_records: int
    dank_count: int


@dataclass
class RecordError:
    line: int
    message: str


def load_schema(path=None) -> dict:
    schema = json.loads(read_config_text(path, "archive_schema.json"))
    for key in ("fields", "mandatory", "subreddits"):
        if key not in schema:
            raise DataError(f"schema descriptor missing {key!r}")
    return schema


def _dig(record: dict, dotted: str):
    node = record
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _lookup(record: dict, candidates: list[str]):
    for name in candidates:
        value = _dig(record, name)
        if value is not None:
            return value
    return None


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value != 0
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no", ""):
            return False
    raise ValueError(f"not a boolean: {value!r}")


def _as_string_list(value) -> list[str]:
    if isinstance(value, list):
        return [str(v) for v in value]
    if isinstance(value, str):
        # tolerate tabular cells holding a JSON-style list
        try:
            parsed = json.loads(value.replace("'", '"'))
        except json.JSONDecodeError:
            return [v for v in value.split() if v]
        if isinstance(parsed, list):
            return [str(v) for v in parsed]
    raise ValueError(f"not a string list: {value!r}")


def _as_float_list(value) -> list[float]:
    if isinstance(value, str):
        value = json.loads(value)
    if isinstance(value, list):
        return [float(v) for v in value]
    raise ValueError(f"not a number list: {value!r}")


def _post_from_record(record: dict, schema: dict) -> MemePost:
    fields = schema["fields"]
    raw = {name: _lookup(record, candidates) for name, candidates in fields.items()}
    for name in schema["mandatory"]:
        if raw.get(name) is None:
            raise ValueError(f"missing mandatory field {name!r}")

    subreddit = str(raw["subreddit"]).strip()
    if subreddit.lower().startswith("r/"):
        subreddit = subreddit[2:]
    canonical = {s.lower(): s for s in schema["subreddits"]}
    if subreddit.lower() not in canonical:
        raise ValueError(f"unknown subreddit {subreddit!r}")

    ups = int(raw["ups"])
    if ups < 0:
        raise ValueError(f"negative ups {ups}")
    subscribers = int(raw["subscribers"])
    if subscribers < 1:
        raise ValueError(f"subscribers must be >= 1, got {subscribers}")

    vgg_labels = vgg_probs = None
    if raw.get("vgg_labels") is not None and raw.get("vgg_probs") is not None:
        vgg_labels = _as_string_list(raw["vgg_labels"])
        vgg_probs = _as_float_list(raw["vgg_probs"])
        if len(vgg_labels) != 3 or len(vgg_probs) != 3:
            raise ValueError("annotation lists must have length 3")
        for p in vgg_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"annotation probability {p} outside [0,1]")

    sentiment = raw.get("sentiment_override")
    if sentiment is not None:
        sentiment = float(sentiment)
        if not 0.0 <= sentiment <= 1.0:
            raise ValueError(f"sentiment {sentiment} outside [0,1]")

    return MemePost(
        id=str(raw["id"]),
        created_utc=int(raw["created_utc"]),
        ups=ups,
        is_nsfw=_as_bool(raw["is_nsfw"]) if raw.get("is_nsfw") is not None else False,
        subreddit=canonical[subreddit.lower()],
        subscribers=subscribers,
        thumb_height=float(raw["thumb_height"]) if raw.get("thumb_height") is not None else 0.0,
        thumb_width=float(raw["thumb_width"]) if raw.get("thumb_width") is not None else 0.0,
        title=str(raw["title"]) if raw.get("title") is not None else "",
        media_ref=str(raw["media_ref"]) if raw.get("media_ref") is not None else "",
        raw_text=str(raw["raw_text"]) if raw.get("raw_text") is not None else None,
        processed_words=(
            _as_string_list(raw["processed_words"])
            if raw.get("processed_words") is not None
            else None
        ),
        vgg_labels=vgg_labels,
        vgg_probs=vgg_probs,
        dead_link=_as_bool(raw["dead_link"]) if raw.get("dead_link") is not None else False,
        sentiment_override=sentiment,
    )


def parse_records(stream, schema: dict) -> tuple[list[MemePost], list[RecordError]]:
    """Parse line-delimited JSON or a delimited table into posts.

    Returns (posts, errors); errors carry 1-based line numbers and never
    abort the parse.
    """
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    lines = text.splitlines()
    first = next((l for l in lines if l.strip()), "")
    posts: list[MemePost] = []
    errors: list[RecordError] = []

    if first.lstrip().startswith("{"):
        for num, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
                posts.append(_post_from_record(record, schema))
            except (ValueError, TypeError) as exc:
                errors.append(RecordError(num, str(exc)))
    elif first:
        delimiter = "\t" if "\t" in first else ","
        reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
        # DictReader consumes the header; data rows start at line 2
        for num, row in enumerate(reader, 2):
            try:
                record = {k: v for k, v in row.items() if k is not None and v not in (None, "")}
                posts.append(_post_from_record(record, schema))
            except (ValueError, TypeError) as exc:
                errors.append(RecordError(num, str(exc)))
    return posts, errors


def _media_extension(media_ref: str) -> str:
    path = media_ref.split("?", 1)[0].split("#", 1)[0]
    dot = path.rfind(".")
    return path[dot + 1:].lower() if dot >= 0 else ""


def clean_records(posts: list[MemePost]) -> list[MemePost]:
    """Keep static-image posts that are not flagged dead."""
    return [
        p
        for p in posts
        if not p.dead_link and _media_extension(p.media_ref) in IMAGE_EXTENSIONS
    ]


def time_of_day_bin(created_utc: int) -> int:
    local_hour = (created_utc // 3600 + CENTRAL_UTC_OFFSET_HOURS) % 24
    return int(local_hour) // 4


def normalize_ups(ups: int, subscribers: int) -> float:
    if subscribers < 1:
        raise DataError(f"subscribers must be >= 1, got {subscribers}")
    return ups / subscribers


def assign_dank_labels(values, quantile: float = DEFAULT_QUANTILE) -> list[int]:
    """Label the strict top (1 - quantile) share as 1; ties at the
    threshold stay 0 so the positive share never exceeds it."""
    values = list(values)
    if not values:
        raise DataError("cannot label an empty list")
    if not 0.0 < quantile < 1.0:
        raise DataError(f"quantile must be in (0,1), got {quantile}")
    ordered = sorted(values)
    rank = math.ceil(quantile * len(ordered))
    threshold = ordered[rank - 1]
    return [1 if v > threshold else 0 for v in values]


def label_posts(posts: list[MemePost], quantile: float = DEFAULT_QUANTILE) -> list[LabeledPost]:
    normed = [normalize_ups(p.ups, p.subscribers) for p in posts]
    labels = assign_dank_labels(normed, quantile)
    return [
        LabeledPost(
            post=p,
            ups_normed=normed[i],
            dank=labels[i],
            time_bin=time_of_day_bin(p.created_utc),
        )
        for i, p in enumerate(posts)
    ]


def _pearson(xs: list[float], ys: list[float]) -> tuple[float | None, str]:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        return None, "undefined"
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy), "ok"


def subreddit_correlation(labeled: list[LabeledPost]) -> CorpusStats:
    """Pearson correlation between per-subreddit median raw ups and
    subscriber counts."""
    by_subreddit: dict[str, list[LabeledPost]] = {}
    for lp in labeled:
        by_subreddit.setdefault(lp.post.subreddit, []).append(lp)
    if len(by_subreddit) < 2:
        raise DataError("need at least 2 subreddits for a correlation")
    names = sorted(by_subreddit)
    median_ups = {
        name: float(statistics.median(lp.post.ups for lp in by_subreddit[name]))
        for name in names
    }
    subscribers = {
        name: float(statistics.median(lp.post.subscribers for lp in by_subreddit[name]))
        for name in names
    }
    r, status = _pearson(
        [median_ups[name] for name in names],
        [subscribers[name] for name in names],
    )
    return CorpusStats(
        median_ups=median_ups,
        subscribers=subscribers,
        pearson_r=r,
        pearson_status=status,
        total_records=len(labeled),
        dank_count=sum(lp.dank for lp in labeled),
    )


def encode_metadata_features(
    lp: LabeledPost, subreddit_order: list[str]
) -> tuple[list[str], list[float]]:
    """[subscribers | is_nsfw | thumb dims | subreddit one-hot |
    time-bin one-hot], 4 + 5 + 6 = 15 columns."""
    post = lp.post
    names = ["subscribers", "is_nsfw", "thumb_height", "thumb_width"]
    values = [
        float(post.subscribers),
        1.0 if post.is_nsfw else 0.0,
        float(post.thumb_height),
        float(post.thumb_width),
    ]
    for name in subreddit_order:
        names.append(f"subreddit_{name}")
        values.append(1.0 if post.subreddit == name else 0.0)
    for b in range(TIME_BINS):
        names.append(f"time_bin_{b}")
        values.append(1.0 if lp.time_bin == b else 0.0)
    return names, values


def _post_to_dict(lp: LabeledPost) -> dict:
    p = lp.post
    return {
        "id": p.id,
        "created_utc": p.created_utc,
        "ups": p.ups,
        "is_nsfw": p.is_nsfw,
        "subreddit": p.subreddit,
        "subscribers": p.subscribers,
        "thumb_height": p.thumb_height,
        "thumb_width": p.thumb_width,
        "title": p.title,
        "media_ref": p.media_ref,
        "raw_text": p.raw_text,
        "processed_words": p.processed_words,
        "vgg_labels": p.vgg_labels,
        "vgg_probs": p.vgg_probs,
        "dead_link": p.dead_link,
        "sentiment_override": p.sentiment_override,
        "ups_normed": lp.ups_normed,
        "dank": lp.dank,
        "time_bin": lp.time_bin,
    }


def _post_from_dict(d: dict) -> LabeledPost:
    keys = (
        "id", "created_utc", "ups", "is_nsfw", "subreddit", "subscribers",
        "thumb_height", "thumb_width", "title", "media_ref", "raw_text",
        "processed_words", "vgg_labels", "vgg_probs", "dead_link",
        "sentiment_override",
    )
    post = MemePost(**{k: d[k] for k in keys})
    return LabeledPost(
        post=post,
        ups_normed=d["ups_normed"],
        dank=d["dank"],
        time_bin=d["time_bin"],
    )


def write_corpus(path, labeled: list[LabeledPost], quantile: float) -> None:
    header = {
        "kind": "memepop-corpus",
        "version": CORPUS_FORMAT_VERSION,
        "quantile": quantile,
        "count": len(labeled),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for lp in labeled:
            f.write(
                json.dumps(_post_to_dict(lp), sort_keys=True, separators=(",", ":")) + "\n"
            )


def read_corpus(path) -> tuple[dict, list[LabeledPost]]:
    with open(path, "r", encoding="utf-8") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a corpus file: {exc}") from exc
        if header.get("kind") != "memepop-corpus":
            raise DataError(f"{path}: not a corpus file")
        labeled = [_post_from_dict(json.loads(line)) for line in f if line.strip()]
    if header.get("count") != len(labeled):
        raise DataError(
            f"{path}: header count {header.get('count')} != {len(labeled)} records"
        )
    return header, labeled
