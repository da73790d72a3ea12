"""Per-cell feature vectors: handcrafted text/style/position features plus a text embedding."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .table import FORMAT_CLASSES, CellStyle, GridTable

logger = logging.getLogger(__name__)

SIZE_DIVISOR = 100.0
DEFAULT_EMBED_DIM = 64

HANDCRAFTED = (
    ("text", 5),
    ("format_class", 6),
    ("fill_color", 4),
    ("border_present", 4),
    ("border_color", 16),
    ("font_color", 4),
    ("font_bold", 1),
    ("font_size", 1),
    ("font_underline", 1),
    ("height_width", 2),
    ("has_formula", 1),
    ("indent_level", 1),
    ("coordinates", 4),
    ("decayed", 2),
)
HANDCRAFTED_WIDTH = sum(w for _, w in HANDCRAFTED)  # 52
TEXT_WIDTH = 5
STYLE_WIDTH = 41


# ---------------------------------------------------------------------------
# Handcrafted features


def text_features(text: str) -> np.ndarray:
    """``[length, is_empty, digit_ratio, has_percent, has_dot]``."""
    n = len(text)
    digits = sum(ch.isdigit() for ch in text)
    return np.array(
        [float(n), float(n == 0), digits / n if n else 0.0, float("%" in text), float("." in text)]
    )


def style_features(style: CellStyle) -> np.ndarray:
    one_hot = [0.0] * len(FORMAT_CLASSES)
    one_hot[FORMAT_CLASSES.index(style.format_class)] = 1.0
    parts = [
        one_hot,
        [ch / 255.0 for ch in style.fill_color],
        [float(b) for b in style.border_present],
        [ch / 255.0 for color in style.border_color for ch in color],
        [ch / 255.0 for ch in style.font_color],
        [float(style.font_bold)],
        [style.font_size / SIZE_DIVISOR],
        [float(style.font_underline)],
        [style.height / SIZE_DIVISOR, style.width / SIZE_DIVISOR],
        [float(style.has_formula)],
        [float(style.indent_level)],
    ]
    return np.array([v for part in parts for v in part])


def coordinates(r: int, c: int, n_rows: int, n_cols: int) -> np.ndarray:
    """Distances to the top-left and bottom-right anchors: ``[rt, ct, rb, cb]``."""
    if not (0 <= r < n_rows and 0 <= c < n_cols):
        raise ValueError(f"position ({r},{c}) outside a {n_rows}x{n_cols} table")
    return np.array([r, c, n_rows - 1 - r, n_cols - 1 - c], dtype=np.float64)


def decayed_position(r: int, c: int) -> np.ndarray:
    if r < 0 or c < 0:
        raise ValueError(f"row/col must be non-negative, got ({r},{c})")
    return np.array([math.exp(-r), math.exp(-c)])


# ---------------------------------------------------------------------------
# Text embeddings


class TextEmbeddingProvider:
    """Maps cell text to a fixed-width vector. Empty text always maps to zeros."""

    name: str = "abstract"
    dim: int

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim}


def _clean(text: str) -> str:
    return "".join(ch for ch in text.lower() if unicodedata.category(ch)[0] != "C")


class HashingEmbedding(TextEmbeddingProvider):
    """Character-trigram feature hashing followed by L2 normalization."""

    name = "trigram-hash"

    def __init__(self, dim: int = DEFAULT_EMBED_DIM):
        if dim < 1:
            raise ValueError("embedding dim must be positive")
        self.dim = dim
        self._embed = lru_cache(maxsize=65536)(self._compute)

    def _compute(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        cleaned = _clean(text)
        if not cleaned:
            return vec
        padded = f"<{cleaned}>"
        for k in range(len(padded) - 2):
            digest = hashlib.blake2b(padded[k : k + 3].encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "little") % self.dim] += 1.0
        vec /= np.linalg.norm(vec)
        vec.flags.writeable = False
        return vec

    def embed(self, text: str) -> np.ndarray:
        if not text:
            return np.zeros(self.dim)
        return self._embed(text).copy()


class FileEmbedding(TextEmbeddingProvider):
    """Exact-text lookup in a precomputed ``#dim D`` / ``text<TAB>v1,...,vD`` file."""

    name = "file"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise ValueError(f"cannot read embedding file {self.path}: {exc}") from exc
        if not lines or not lines[0].startswith("#dim"):
            raise ValueError(f"{self.path}: first line must be '#dim D'")
        try:
            self.dim = int(lines[0].split()[1])
        except (IndexError, ValueError):
            raise ValueError(f"{self.path}: malformed header {lines[0]!r}") from None
        self.table: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            text, sep, values = line.rpartition("\t")
            try:
                if not sep:
                    raise ValueError("missing tab")
                vec = np.array([float(v) for v in values.split(",")])
            except ValueError as exc:
                raise ValueError(f"{self.path}:{lineno}: {exc}") from None
            if vec.shape != (self.dim,):
                raise ValueError(f"{self.path}:{lineno}: expected {self.dim} values, got {vec.size}")
            self.table[text] = vec

    def embed(self, text: str) -> np.ndarray:
        if not text:
            return np.zeros(self.dim)
        vec = self.table.get(text)
        if vec is None:
            logger.warning("no precomputed embedding for %r; using zeros", text)
            return np.zeros(self.dim)
        return vec.copy()

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "path": str(self.path)}


def embed_text(provider: TextEmbeddingProvider, text: str) -> np.ndarray:
    return provider.embed(text)


# ---------------------------------------------------------------------------
# Full feature matrices


@dataclass(frozen=True)
class FeatureSchema:
    embed_dim: int = DEFAULT_EMBED_DIM
    provider: str = HashingEmbedding.name

    @property
    def fields(self) -> tuple[tuple[str, int], ...]:
        return HANDCRAFTED + (("embedding", self.embed_dim),)

    @property
    def width(self) -> int:
        return HANDCRAFTED_WIDTH + self.embed_dim

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for name, w in self.fields:
            out[name] = slice(start, start + w)
            start += w
        return out

    def fingerprint(self) -> str:
        doc = json.dumps({"fields": self.fields, "provider": self.provider,
                          "size_divisor": SIZE_DIVISOR}, sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]

    @classmethod
    def for_provider(cls, provider: TextEmbeddingProvider) -> "FeatureSchema":
        return cls(embed_dim=provider.dim, provider=provider.name)


@dataclass(frozen=True)
class FeatureMatrix:
    table_id: str
    values: np.ndarray  # (n_rows, n_cols, width)
    fingerprint: str

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def extract_features(table: GridTable, provider: TextEmbeddingProvider | None = None) -> FeatureMatrix:
    provider = provider or HashingEmbedding()
    schema = FeatureSchema.for_provider(provider)
    out = np.empty((table.n_rows, table.n_cols, schema.width))
    style_cache: dict[CellStyle, np.ndarray] = {}
    text_cache: dict[str, np.ndarray] = {}
    for r, c in table.positions():
        cell = table[r, c]
        if cell.style not in style_cache:
            style_cache[cell.style] = style_features(cell.style)
        if cell.text not in text_cache:
            text_cache[cell.text] = np.concatenate([text_features(cell.text), provider.embed(cell.text)])
        text_part = text_cache[cell.text]
        out[r, c] = np.concatenate([
            text_part[:TEXT_WIDTH],
            style_cache[cell.style],
            coordinates(r, c, table.n_rows, table.n_cols),
            decayed_position(r, c),
            text_part[TEXT_WIDTH:],
        ])
    if not np.all(np.isfinite(out)):
        raise ValueError(f"table {table.id}: non-finite feature values")
    return FeatureMatrix(table.id, out, schema.fingerprint())


def save_features(path: str | Path, matrices: list[FeatureMatrix]) -> None:
    """Write feature matrices to an ``.npz`` archive keyed by table id."""
    arrays = {f"table/{m.table_id}": m.values for m in matrices}
    fingerprints = sorted({m.fingerprint for m in matrices})
    arrays["fingerprint"] = np.array(json.dumps(fingerprints))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_features(path: str | Path) -> list[FeatureMatrix]:
    with np.load(path) as data:
        fingerprints = json.loads(str(data["fingerprint"]))
        if len(fingerprints) != 1:
            raise ValueError(f"{path}: expected a single schema fingerprint, found {fingerprints}")
        return [
            FeatureMatrix(key.split("/", 1)[1], data[key], fingerprints[0])
            for key in data.files
            if key.startswith("table/")
        ]
