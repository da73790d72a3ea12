"""Table data model, JSON table files, merged-cell normalization and dataset splits."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

MAX_CELLS = 5000
FORMAT_CLASSES = ("number", "datetime", "percentage", "currency", "text", "other")
WHITE = (255, 255, 255, 255)
NO_COLOR = (0, 0, 0, 0)


class TableError(ValueError):
    """Base class for table ingestion failures."""


class TableParseError(TableError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.message = message
        self.offset = offset


class TableValidationError(TableError):
    pass


class CellRole(IntEnum):
    INDEX_NAME = 0
    INDEX = 1
    VALUE_NAME = 2
    AGGREGATION = 3
    OTHER = 4

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_key(cls, key: str) -> "CellRole":
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown cell role {key!r}") from None


Color = tuple[int, int, int, int]


def _check_color(name: str, color) -> None:
    if len(color) != 4 or any(not isinstance(ch, int) or not 0 <= ch <= 255 for ch in color):
        raise TableValidationError(f"{name} must be 4 integers in [0,255], got {color!r}")


@dataclass(frozen=True)
class CellStyle:
    """Cell formatting. Colors are stored as ``(A, R, G, B)`` integers in [0, 255].

    Borders are ordered top, bottom, left, right.
    """

    fill_color: Color = WHITE
    font_color: Color = NO_COLOR
    border_color: tuple[Color, Color, Color, Color] = (NO_COLOR,) * 4
    border_present: tuple[bool, bool, bool, bool] = (False,) * 4
    font_bold: bool = False
    font_underline: bool = False
    has_formula: bool = False
    font_size: float = 0.0
    height: float = 0.0
    width: float = 0.0
    indent_level: int = 0
    format_class: str = "other"

    def __post_init__(self):
        for name, color in [("fill_color", self.fill_color), ("font_color", self.font_color)] + [
            (f"border_color[{k}]", c) for k, c in enumerate(self.border_color)
        ]:
            _check_color(name, color)
        if len(self.border_color) != 4 or len(self.border_present) != 4:
            raise TableValidationError("border_color and border_present need exactly 4 entries")
        if self.format_class not in FORMAT_CLASSES:
            raise TableValidationError(f"format_class {self.format_class!r} not in {FORMAT_CLASSES}")
        for name in ("font_size", "height", "width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise TableValidationError(f"{name} must be a non-negative real, got {value!r}")
        if self.indent_level < 0:
            raise TableValidationError("indent_level must be non-negative")

    def to_dict(self) -> dict:
        return {
            "fill_color": list(self.fill_color),
            "font_color": list(self.font_color),
            "border_color": [list(c) for c in self.border_color],
            "border_present": list(self.border_present),
            "font_bold": self.font_bold,
            "font_underline": self.font_underline,
            "has_formula": self.has_formula,
            "font_size": self.font_size,
            "height": self.height,
            "width": self.width,
            "indent_level": self.indent_level,
            "format_class": self.format_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellStyle":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise TableValidationError(f"unknown style fields {sorted(unknown)}")
        kw = dict(d)
        for key in ("fill_color", "font_color"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "border_color" in kw:
            kw["border_color"] = tuple(tuple(c) for c in kw["border_color"])
        if "border_present" in kw:
            kw["border_present"] = tuple(bool(b) for b in kw["border_present"])
        for key in ("font_size", "height", "width"):
            if key in kw:
                kw[key] = float(kw[key])
        return cls(**kw)


DEFAULT_STYLE = CellStyle()


@dataclass(frozen=True)
class RawCell:
    row: int
    col: int
    text: str = ""
    row_span: int = 1
    col_span: int = 1
    style: CellStyle = DEFAULT_STYLE
    label: CellRole | None = None

    def footprint(self) -> Iterable[tuple[int, int]]:
        for r in range(self.row, self.row + self.row_span):
            for c in range(self.col, self.col + self.col_span):
                yield r, c


@dataclass(frozen=True)
class RawTable:
    id: str
    n_rows: int
    n_cols: int
    cells: tuple[RawCell, ...]
    header_rows: tuple[int, ...] = ()
    header_cols: tuple[int, ...] = ()

    def validate(self, max_cells: int | None = MAX_CELLS) -> "RawTable":
        if self.n_rows < 1 or self.n_cols < 1:
            raise TableValidationError(f"table {self.id}: n_rows and n_cols must be positive")
        if max_cells is not None and self.n_rows * self.n_cols > max_cells:
            raise TableValidationError(
                f"table {self.id}: {self.n_rows * self.n_cols} cells exceeds limit {max_cells}"
            )
        owner: dict[tuple[int, int], int] = {}
        for k, cell in enumerate(self.cells):
            where = f"table {self.id}: cell #{k} at ({cell.row},{cell.col})"
            if cell.row_span < 1 or cell.col_span < 1:
                raise TableValidationError(f"{where} has non-positive span")
            if (
                cell.row < 0
                or cell.col < 0
                or cell.row + cell.row_span > self.n_rows
                or cell.col + cell.col_span > self.n_cols
            ):
                raise TableValidationError(f"{where} spans outside the {self.n_rows}x{self.n_cols} grid")
            for pos in cell.footprint():
                if pos in owner:
                    raise TableValidationError(f"{where} overlaps cell #{owner[pos]} at {pos}")
                owner[pos] = k
        for r in self.header_rows:
            if not 0 <= r < self.n_rows:
                raise TableValidationError(f"table {self.id}: header row {r} out of range")
        for c in self.header_cols:
            if not 0 <= c < self.n_cols:
                raise TableValidationError(f"table {self.id}: header col {c} out of range")
        return self

    def to_dict(self) -> dict:
        cells = []
        for cell in self.cells:
            d = {"row": cell.row, "col": cell.col, "row_span": cell.row_span, "col_span": cell.col_span,
                 "text": cell.text, "style": cell.style.to_dict()}
            if cell.label is not None:
                d["label"] = cell.label.key
            cells.append(d)
        return {
            "id": self.id,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "header_rows": list(self.header_rows),
            "header_cols": list(self.header_cols),
            "cells": cells,
        }


def _cell_from_dict(d: dict, k: int) -> RawCell:
    try:
        style = CellStyle.from_dict(d.get("style", {}))
        label = d.get("label")
        return RawCell(
            row=int(d["row"]),
            col=int(d["col"]),
            row_span=int(d.get("row_span", 1)),
            col_span=int(d.get("col_span", 1)),
            text=str(d.get("text", "")),
            style=style,
            label=None if label is None else CellRole.from_key(label),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TableValidationError):
            raise TableValidationError(f"cell #{k}: {exc}") from None
        raise TableValidationError(f"cell #{k}: {exc!r}") from None


def table_from_dict(d: dict, max_cells: int | None = MAX_CELLS) -> RawTable:
    if not isinstance(d, dict):
        raise TableValidationError("table document must be an object")
    try:
        table = RawTable(
            id=str(d["id"]),
            n_rows=int(d["n_rows"]),
            n_cols=int(d["n_cols"]),
            cells=tuple(_cell_from_dict(c, k) for k, c in enumerate(d["cells"])),
            header_rows=tuple(int(r) for r in d.get("header_rows", ())),
            header_cols=tuple(int(c) for c in d.get("header_cols", ())),
        )
    except KeyError as exc:
        raise TableValidationError(f"missing field {exc.args[0]!r}") from None
    return table.validate(max_cells)


def parse_table(content: bytes | str, max_cells: int | None = MAX_CELLS) -> RawTable:
    """Parse and validate one JSON table document.

    Set ``max_cells=None`` to accept tables larger than the default 5,000-cell limit.
    """
    if isinstance(content, bytes):
        try:
            text = content.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TableParseError(f"invalid UTF-8: {exc.reason}", exc.start) from None
    else:
        text = content
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise TableParseError(exc.msg, offset) from None
    return table_from_dict(doc, max_cells)


def dump_table(table: RawTable) -> str:
    return json.dumps(table.to_dict(), indent=1, ensure_ascii=False) + "\n"


def load_table(path: str | Path, max_cells: int | None = MAX_CELLS) -> RawTable:
    return parse_table(Path(path).read_bytes(), max_cells)


# ---------------------------------------------------------------------------
# Normalized grid


@dataclass(frozen=True)
class GridCell:
    text: str
    style: CellStyle
    label: CellRole
    origin: tuple[int, int]


@dataclass(frozen=True)
class GridTable:
    id: str
    n_rows: int
    n_cols: int
    grid: tuple[tuple[GridCell, ...], ...]
    header_rows: tuple[int, ...] = ()
    header_cols: tuple[int, ...] = ()

    def __getitem__(self, pos: tuple[int, int]) -> GridCell:
        r, c = pos
        return self.grid[r][c]

    def positions(self) -> Iterable[tuple[int, int]]:
        for r in range(self.n_rows):
            for c in range(self.n_cols):
                yield r, c

    def labels(self) -> list[list[int]]:
        return [[int(cell.label) for cell in row] for row in self.grid]

    def origins(self) -> dict[tuple[int, int], list[tuple[int, int]]]:
        """Map each origin to the grid positions it covers (row-major order)."""
        groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for pos in self.positions():
            groups.setdefault(self[pos].origin, []).append(pos)
        return groups

    def to_raw(self) -> RawTable:
        """Re-serialize with every position as its own 1x1 cell."""
        cells = tuple(
            RawCell(row=r, col=c, text=self[r, c].text, style=self[r, c].style, label=self[r, c].label)
            for r, c in self.positions()
        )
        return RawTable(self.id, self.n_rows, self.n_cols, cells, self.header_rows, self.header_cols)


def normalize(table: RawTable) -> GridTable:
    """Split merged cells into per-position copies and fill uncovered positions."""
    empty = [[None] * table.n_cols for _ in range(table.n_rows)]
    for cell in table.cells:
        label = CellRole.OTHER if cell.label is None else cell.label
        replica = GridCell(cell.text, cell.style, label, (cell.row, cell.col))
        for r, c in cell.footprint():
            empty[r][c] = replica
    grid = tuple(
        tuple(
            empty[r][c] if empty[r][c] is not None else GridCell("", DEFAULT_STYLE, CellRole.OTHER, (r, c))
            for c in range(table.n_cols)
        )
        for r in range(table.n_rows)
    )
    return GridTable(table.id, table.n_rows, table.n_cols, grid, table.header_rows, table.header_cols)


# ---------------------------------------------------------------------------
# Datasets


def split_dataset(
    tables: Sequence[GridTable],
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> tuple[list[GridTable], list[GridTable], list[GridTable]]:
    """Shuffle tables and partition them by table into train/val/test.

    Validation and test sizes are ``floor(ratio * n)``; train receives the remainder.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(tables)
    if n < 3:
        raise ValueError(f"need at least 3 tables to split, got {n}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_val = math.floor(ratios[1] * n + 1e-9)
    n_test = math.floor(ratios[2] * n + 1e-9)
    n_train = n - n_val - n_test
    if n_val == 0:
        logger.warning("validation split is empty for %d tables", n)
    train = [tables[i] for i in order[:n_train]]
    val = [tables[i] for i in order[n_train : n_train + n_val]]
    test = [tables[i] for i in order[n_train + n_val :]]
    return train, val, test


MANIFEST = "manifest.json"


def write_dataset(directory: str | Path, tables: Sequence[RawTable]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for table in tables:
        name = f"{table.id}.json"
        (directory / name).write_text(dump_table(table), encoding="utf-8")
        names.append(name)
    (directory / MANIFEST).write_text(json.dumps({"tables": names}, indent=1) + "\n", encoding="utf-8")
    return directory


def load_dataset(directory: str | Path, max_cells: int | None = MAX_CELLS) -> list[RawTable]:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
    tables = []
    for name in manifest["tables"]:
        try:
            tables.append(load_table(directory / name, max_cells))
        except TableParseError as exc:
            raise TableParseError(f"{name}: {exc.message}", exc.offset) from None
        except TableValidationError as exc:
            raise TableValidationError(f"{name}: {exc}") from None
    return tables
