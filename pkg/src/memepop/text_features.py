"""Text feature extraction: 7 category flags, 28 vocabulary flags,
text length, word count, and sentiment, for 38 columns total.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from memepop.errors import ConfigError, DataError
from memepop.porter import porter_stem
from memepop.resources import read_config_text

__all__ = [
    "ProcessedText",
    "Vocabulary",
    "tokenize",
    "porter_stem",
    "process_text",
    "sentiment_score",
    "build_vocabulary",
    "word_category_flags",
    "encode_text_features",
    "word_frequency_report",
    "load_stopwords",
    "load_lexicon",
    "load_word_categories",
]

VOCABULARY_SIZE = 28
NEUTRAL_SENTIMENT = 0.5


@dataclass
class ProcessedText:
    stems: list[str]
    word_count: int
    text_length: int
    sentiment: float


@dataclass
class Vocabulary:
    stems: list[str]
    frequencies: list[int]
    warning: str | None = None

    def __len__(self) -> int:
        return len(self.stems)


def load_stopwords(path=None) -> frozenset[str]:
    words = []
    for line in read_config_text(path, "stopwords.txt").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


def load_lexicon(path=None) -> dict[str, float]:
    """Two-column file: stem, valence in [-1, 1]."""
    lexicon = {}
    for num, line in enumerate(read_config_text(path, "sentiment_lexicon.tsv").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(",")
        if len(parts) != 2:
            raise ConfigError(f"lexicon line {num}: expected 2 columns, got {len(parts)}")
        stem, raw = parts[0].strip(), parts[1].strip()
        try:
            valence = float(raw)
        except ValueError as exc:
            raise ConfigError(f"lexicon line {num}: bad valence {raw!r}") from exc
        if not -1.0 <= valence <= 1.0:
            raise ConfigError(f"lexicon line {num}: valence {valence} outside [-1,1]")
        lexicon[stem] = valence
    return lexicon


def load_word_categories(path=None) -> dict[str, frozenset[str]]:
    """Category name -> stem set, preserving the file's category order."""
    raw = json.loads(read_config_text(path, "word_categories.json"))
    categories = raw.get("categories")
    if not isinstance(categories, dict) or not categories:
        raise ConfigError("word category file must contain a 'categories' object")
    if len(categories) != 7:
        raise ConfigError(f"word category table must have 7 categories, got {len(categories)}")
    return {name: frozenset(stems) for name, stems in categories.items()}


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    return load_stopwords(None)


@lru_cache(maxsize=1)
def default_lexicon() -> dict[str, float]:
    return load_lexicon(None)


def tokenize(text: str, stopwords: frozenset[str] | None = None) -> list[str]:
    """Lowercase, delete punctuation, split, drop short tokens and stopwords.

    Punctuation (anything neither alphanumeric nor whitespace) is deleted in
    place, not replaced by a space, so "it's" collapses to "its" and
    "covid-19" to "covid19".  Order and multiplicity are preserved.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    cleaned = "".join(
        ch for ch in text.lower() if ch.isalnum() or ch.isspace()
    )
    return [
        tok for tok in cleaned.split() if len(tok) >= 3 and tok not in stopwords
    ]


def sentiment_score(stems: list[str], lexicon: dict[str, float]) -> float:
    """Mean lexicon valence mapped affinely from [-1,1] to [0,1]."""
    values = [lexicon[s] for s in stems if s in lexicon]
    if not values:
        return NEUTRAL_SENTIMENT
    mean = sum(values) / len(values)
    return (mean + 1.0) / 2.0


def process_text(
    title: str,
    raw_text: str | None = None,
    *,
    processed_words: list[str] | None = None,
    lexicon: dict[str, float] | None = None,
    stopwords: frozenset[str] | None = None,
    sentiment_override: float | None = None,
) -> ProcessedText:
    """Stem the combined title + in-image text, or pass through
    precomputed stems when the record already carries them.
    """
    title = title or ""
    if processed_words is not None:
        stems = list(processed_words)
    else:
        combined = title if not raw_text else title + " " + raw_text
        stems = [porter_stem(tok) for tok in tokenize(combined, stopwords)]
    if sentiment_override is not None:
        if not 0.0 <= sentiment_override <= 1.0:
            raise DataError(f"sentiment override {sentiment_override} outside [0,1]")
        sentiment = float(sentiment_override)
    else:
        sentiment = sentiment_score(stems, default_lexicon() if lexicon is None else lexicon)
    return ProcessedText(
        stems=stems,
        word_count=len(stems),
        text_length=len(title),
        sentiment=sentiment,
    )


def build_vocabulary(stem_lists, k: int = VOCABULARY_SIZE) -> Vocabulary:
    """Top-k stems by corpus frequency; ties break lexicographically."""
    counts = Counter()
    n_records = 0
    for stems in stem_lists:
        n_records += 1
        counts.update(stems)
    if n_records == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    warning = None
    if len(ranked) < k:
        warning = f"only {len(ranked)} distinct stems, fewer than requested {k}"
    top = ranked[:k]
    return Vocabulary(
        stems=[s for s, _ in top],
        frequencies=[c for _, c in top],
        warning=warning,
    )


def word_category_flags(stems, categories: dict[str, frozenset[str]]) -> list[int]:
    present = set(stems)
    return [1 if present & members else 0 for members in categories.values()]


def encode_text_features(
    ptext: ProcessedText,
    vocabulary: Vocabulary,
    categories: dict[str, frozenset[str]],
) -> tuple[list[str], list[float]]:
    """[category flags | vocabulary flags | text_length | word_count |
    sentiment], with registered names."""
    if len(vocabulary) != VOCABULARY_SIZE:
        raise ConfigError(
            f"vocabulary must have {VOCABULARY_SIZE} entries, got {len(vocabulary)}"
        )
    names = [f"cat_{name}" for name in categories]
    values = [float(v) for v in word_category_flags(ptext.stems, categories)]
    present = set(ptext.stems)
    for stem in vocabulary.stems:
        names.append(f"word_{stem}")
        values.append(1.0 if stem in present else 0.0)
    names += ["text_length", "word_count", "sentiment"]
    values += [float(ptext.text_length), float(ptext.word_count), float(ptext.sentiment)]
    return names, values


def word_frequency_report(stem_lists) -> list[tuple[str, int]]:
    """Full frequency table, descending count then lexicographic."""
    counts = Counter()
    for stems in stem_lists:
        counts.update(stems)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
