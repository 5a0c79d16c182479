"""Image feature extraction: 30 color-box fractions, average HSV, and a
20-column object-annotation block, for 53 columns total (33 when the corpus
carries no annotations at all).

Images are numpy arrays of shape (height, width, 3), dtype uint8, row-major
RGB.  Hue is measured in degrees [0, 360); saturation and value in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from memepop.errors import ConfigError, DataError
from memepop.resources import read_config_text

__all__ = [
    "PaletteEntry",
    "VggAnnotation",
    "VggCategoryMap",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "hsv_channels",
    "average_hsv",
    "color_fraction",
    "color_profile",
    "normalize_label",
    "vgg_feature_block",
    "encode_image_features",
    "load_palette",
    "load_vgg_categories",
    "load_image",
]

PALETTE_SIZE = 30
VGG_BLOCK_WIDTH = 20


@dataclass(frozen=True)
class PaletteEntry:
    name: str
    h_center: float
    h_tol: float
    s_min: float
    s_max: float
    v_min: float
    v_max: float


@dataclass(frozen=True)
class VggAnnotation:
    labels: tuple[str, str, str]
    probs: tuple[float, float, float]

    def __post_init__(self):
        if len(self.labels) != 3 or len(self.probs) != 3:
            raise DataError("annotation needs exactly 3 labels and 3 probabilities")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise DataError(f"annotation probability {p} outside [0,1]")
        if not (self.probs[0] >= self.probs[1] >= self.probs[2]):
            raise DataError("annotation probabilities must be descending")


@dataclass(frozen=True)
class VggCategoryMap:
    categories: dict[str, frozenset[str]]
    standalone: tuple[str, ...]


def load_palette(path=None) -> list[PaletteEntry]:
    entries = []
    header_seen = False
    for num, line in enumerate(read_config_text(path, "color_palette.csv").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True  # column-name row
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 7:
            raise ConfigError(f"palette line {num}: expected 7 columns, got {len(parts)}")
        try:
            entry = PaletteEntry(parts[0], *(float(p) for p in parts[1:]))
        except ValueError as exc:
            raise ConfigError(f"palette line {num}: {exc}") from exc
        if not (0 <= entry.s_min <= entry.s_max <= 1 and 0 <= entry.v_min <= entry.v_max <= 1):
            raise ConfigError(f"palette entry {entry.name}: malformed s/v interval")
        entries.append(entry)
    if len(entries) != PALETTE_SIZE:
        raise ConfigError(f"palette must have {PALETTE_SIZE} entries, got {len(entries)}")
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise ConfigError("palette entry names must be unique")
    return entries


def normalize_label(label: str) -> str:
    return label.strip().lower().replace(" ", "_")


def load_vgg_categories(path=None) -> VggCategoryMap:
    raw = json.loads(read_config_text(path, "vgg_categories.json"))
    cats = raw.get("categories")
    standalone = raw.get("standalone_labels")
    if not isinstance(cats, dict) or len(cats) != 9:
        raise ConfigError("annotation category map must define exactly 9 categories")
    if not isinstance(standalone, list) or len(standalone) != 8:
        raise ConfigError("annotation category map must list exactly 8 standalone labels")
    return VggCategoryMap(
        categories={
            name: frozenset(normalize_label(l) for l in labels)
            for name, labels in cats.items()
        },
        standalone=tuple(normalize_label(l) for l in standalone),
    )


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone conversion of one 8-bit pixel; h = 0 when s = 0."""
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    v = max(rf, gf, bf)
    c = v - min(rf, gf, bf)
    if c == 0.0:
        h = 0.0
    elif v == rf:
        h = 60.0 * (((gf - bf) / c) % 6.0)
    elif v == gf:
        h = 60.0 * ((bf - rf) / c + 2.0)
    else:
        h = 60.0 * ((rf - gf) / c + 4.0)
    s = 0.0 if v == 0.0 else c / v
    return h % 360.0, s, v


def hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    """Inverse hexcone conversion back to 8-bit channels."""
    h = (h % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - abs(h % 2.0 - 1.0))
    sector = int(h) % 6
    r, g, b = (
        (c, x, 0.0), (x, c, 0.0), (0.0, c, x),
        (0.0, x, c), (x, 0.0, c), (c, 0.0, x),
    )[sector]
    m = v - c
    return (
        int(round((r + m) * 255.0)),
        int(round((g + m) * 255.0)),
        int(round((b + m) * 255.0)),
    )


def hsv_channels(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized per-pixel HSV of an (H, W, 3) uint8 image."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError(f"expected (h, w, 3) image, got shape {image.shape}")
    if image.size == 0:
        raise DataError("empty image")
    rgb = image.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)
    safe_c = np.where(c == 0.0, 1.0, c)
    h = np.where(
        v == r,
        ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c == 0.0, 0.0, h * 60.0) % 360.0
    s = np.where(v == 0.0, 0.0, c / np.where(v == 0.0, 1.0, v))
    return h, s, v


def average_hsv(image: np.ndarray) -> tuple[float, float, float]:
    """Arithmetic per-channel means.  Hue is averaged arithmetically in
    degrees, not circularly, so values near the red wraparound mix toward
    the middle of the range; kept for comparability of the avg_H column.
    """
    h, s, v = hsv_channels(image)
    return float(h.mean()), float(s.mean()), float(v.mean())


def _interval_mask(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # half-open [lo, hi), except hi = 1.0 is closed so full saturation
    # and full value stay representable
    mask = x >= lo
    if hi < 1.0:
        mask &= x < hi
    return mask


def _entry_mask(h, s, v, entry: PaletteEntry) -> np.ndarray:
    dist = np.abs(h - entry.h_center)
    dist = np.minimum(dist, 360.0 - dist)
    return (
        (dist <= entry.h_tol)
        & _interval_mask(s, entry.s_min, entry.s_max)
        & _interval_mask(v, entry.v_min, entry.v_max)
    )


def color_fraction(image: np.ndarray, entry: PaletteEntry) -> float:
    h, s, v = hsv_channels(image)
    return float(_entry_mask(h, s, v, entry).mean())


def color_profile(
    image: np.ndarray, palette: list[PaletteEntry]
) -> tuple[list[str], list[float]]:
    h, s, v = hsv_channels(image)
    names, values = [], []
    for entry in palette:
        names.append(f"color_{entry.name}")
        values.append(float(_entry_mask(h, s, v, entry).mean()))
    return names, values


def vgg_feature_block(
    annotation: VggAnnotation | None, cmap: VggCategoryMap
) -> tuple[list[str], list[float]]:
    """[9 category flags | 8 standalone label flags | 3 probabilities].
    A missing annotation yields all zeros.
    """
    names = [f"vgg_cat_{name}" for name in cmap.categories]
    names += [f"vgg_label_{label}" for label in cmap.standalone]
    names += ["vgg_prob_1", "vgg_prob_2", "vgg_prob_3"]
    if annotation is None:
        return names, [0.0] * VGG_BLOCK_WIDTH
    labels = {normalize_label(l) for l in annotation.labels}
    values = [1.0 if labels & members else 0.0 for members in cmap.categories.values()]
    values += [1.0 if label in labels else 0.0 for label in cmap.standalone]
    values += [float(p) for p in annotation.probs]
    return names, values


def encode_image_features(
    image: np.ndarray,
    annotation: VggAnnotation | None,
    palette: list[PaletteEntry],
    cmap: VggCategoryMap,
    include_vgg: bool = True,
) -> tuple[list[str], list[float]]:
    """[30 color fractions | avg_H, avg_S, avg_V | 20 annotation columns],
    53 columns, or 33 when the corpus has no annotations at all.
    """
    h, s, v = hsv_channels(image)
    names, values = [], []
    for entry in palette:
        names.append(f"color_{entry.name}")
        values.append(float(_entry_mask(h, s, v, entry).mean()))
    names += ["avg_h", "avg_s", "avg_v"]
    values += [float(h.mean()), float(s.mean()), float(v.mean())]
    if include_vgg:
        vgg_names, vgg_values = vgg_feature_block(annotation, cmap)
        names += vgg_names
        values += vgg_values
    return names, values


def load_image(path) -> np.ndarray:
    """Decode an image file to an RGB array; raises DataError when the
    file is missing or not decodable."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
