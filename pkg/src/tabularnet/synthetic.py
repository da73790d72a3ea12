"""Labeled synthetic spreadsheet tables with hierarchical headers drawn from the demo taxonomy.

Layout of a generated table::

    corner (IndexName of left columns) | top header rows: IndexName > Index > ValueName
    -----------------------------------+-----------------------------------------------
    left header columns (Index)        | numeric data (Other)
    Total (Aggregation)                | numeric data (Other)
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .lexgraph import Lexicon, Taxonomy, demo_lexicon, demo_taxonomy
from .table import CellRole, CellStyle, RawCell, RawTable

# parents whose children make index sets; depth-1 entries give nested categories
INDEX_CATEGORIES = (
    "animal", "vehicle", "food", "product", "country", "city", "region", "year", "month",
    "quarter", "segment", "category", "department", "location", "time_period", "object", "group",
)
VALUE_CATEGORIES = ("quantity", "ratio", "money")
AGGREGATE_WORDS = ("Total", "Sum", "Overall", "Subtotal")
PERCENT_NAMES = {"percent", "rate", "share", "growth", "margin"}
MONEY_NAMES = {"revenue", "profit", "cost", "price", "sales", "income"}

HEADER_FILLS = ((255, 221, 235, 247), (255, 242, 242, 242), (255, 255, 242, 204), (255, 226, 239, 218))
BLACK = (255, 0, 0, 0)
GREY = (255, 128, 128, 128)


@dataclass(frozen=True)
class SyntheticSpec:
    n_tables: int = 300
    data_rows: tuple[int, int] = (3, 9)
    header_depth: tuple[int, int] = (1, 3)
    left_cols: tuple[int, int] = (0, 2)
    index_items: tuple[int, int] = (2, 4)
    value_names: tuple[int, int] = (1, 2)
    p_total: float = 0.4
    style_noise: float = 0.15
    p_empty_data: float = 0.05
    seed: int = 0
    id_prefix: str = "syn"


def _display_names(taxonomy: Taxonomy, lexicon: Lexicon) -> dict[str, str]:
    names: dict[str, str] = {}
    for word, nodes in sorted(lexicon.synsets.items()):
        node = nodes[0]
        if node not in names or word == node:
            names[node] = word
    return {node: (w if w.isdigit() else w.upper() if len(w) == 2 else w.capitalize())
            for node, w in names.items()}


class _Builder:
    def __init__(self, rng: random.Random, spec: SyntheticSpec, children, names):
        self.rng = rng
        self.spec = spec
        self.children = children
        self.names = names
        self.cells: list[RawCell] = []

    def add(self, r, c, text, label, style, row_span=1, col_span=1):
        self.cells.append(RawCell(r, c, text, row_span, col_span, style, label))

    def noisy(self, p: bool) -> bool:
        return (not p) if self.rng.random() < self.spec.style_noise else p

    def header_style(self, fill, level: int = 0) -> CellStyle:
        rng = self.rng
        return CellStyle(
            fill_color=fill if self.noisy(True) else (255, 255, 255, 255),
            font_color=BLACK,
            border_color=((255, 0, 0, 0),) * 4,
            border_present=(False, self.noisy(True), False, False),
            font_bold=self.noisy(True),
            font_size=float(rng.choice((11, 12))) + (1.0 if level == 0 else 0.0),
            height=15.0 + rng.choice((0.0, 3.0)),
            width=float(rng.randint(48, 96)),
            format_class="text",
        )

    def data_style(self, fmt: str, bold: bool = False) -> CellStyle:
        rng = self.rng
        return CellStyle(
            font_color=BLACK if rng.random() > 0.1 else GREY,
            font_bold=self.noisy(bold),
            font_size=float(rng.choice((10, 11))),
            height=15.0,
            width=float(rng.randint(48, 96)),
            has_formula=bold and rng.random() < 0.8,
            format_class=fmt,
        )

    def items(self, category: str, k: int) -> list[str]:
        kids = self.children[category]
        return self.rng.sample(kids, min(k, len(kids)))

    def value(self, value_name: str | None) -> tuple[str, str]:
        rng = self.rng
        if value_name in PERCENT_NAMES:
            return f"{rng.uniform(0, 100):.1f}%", "percentage"
        if value_name in MONEY_NAMES and rng.random() < 0.5:
            return f"${rng.randint(10, 99999):,}", "currency"
        if rng.random() < 0.5:
            return f"{rng.randint(0, 99999):,}", "number"
        return f"{rng.uniform(0, 999):.2f}", "number"


def generate_table(rng: random.Random, spec: SyntheticSpec, table_id: str,
                   taxonomy: Taxonomy, lexicon: Lexicon) -> RawTable:
    children: dict[str, list[str]] = {}
    for child, parent in taxonomy.parent.items():
        children.setdefault(parent, []).append(child)
    for kids in children.values():
        kids.sort()
    names = _display_names(taxonomy, lexicon)
    b = _Builder(rng, spec, children, names)

    depth = rng.randint(*spec.header_depth)
    n_left = rng.randint(*spec.left_cols)
    fill = rng.choice(HEADER_FILLS)

    # pick distinct categories for the top index, the left columns and the value names
    cats = rng.sample(INDEX_CATEGORIES, 3)
    top_cat, left_cats = cats[0], cats[1:1 + n_left]
    value_cat = rng.choice(VALUE_CATEGORIES)

    # top header layout: rows of (role, texts-per-group)
    if depth == 3:
        layout = ["parent", "index", "value"]
    elif depth == 2:
        layout = rng.choice((["parent", "index"], ["index", "value"]))
    else:
        layout = [rng.choice(("index", "value"))]
    top_items = b.items(top_cat, rng.randint(*spec.index_items)) if "index" in layout else [None]
    values = b.items(value_cat, rng.randint(*spec.value_names)) if "value" in layout else [None]
    n_data_cols = len(top_items) * len(values)
    total_col = n_left == 0 and rng.random() < spec.p_total

    # left header layout
    if n_left == 2:
        outer = b.items(left_cats[0], rng.randint(2, 3))
        inner = b.items(left_cats[1], rng.randint(2, 3))
        row_keys = [(o, i) for o in outer for i in inner]
    elif n_left == 1:
        row_keys = [(i,) for i in b.items(left_cats[0], rng.randint(spec.data_rows[0], spec.data_rows[1]))]
    else:
        row_keys = [() for _ in range(rng.randint(*spec.data_rows))]
    total_row = n_left > 0 and rng.random() < spec.p_total

    n_rows = depth + len(row_keys) + int(total_row)
    n_cols = n_left + n_data_cols + int(total_col)

    # top header
    for level, kind in enumerate(layout):
        if kind == "parent":
            b.add(level, n_left, names[top_cat], CellRole.INDEX_NAME, b.header_style(fill, level),
                  col_span=n_data_cols)
        elif kind == "index":
            group = n_data_cols // len(top_items)
            for g, item in enumerate(top_items):
                b.add(level, n_left + g * group, names[item], CellRole.INDEX, b.header_style(fill, level),
                      col_span=group)
        else:
            for g in range(len(top_items)):
                for v, item in enumerate(values):
                    b.add(level, n_left + g * len(values) + v, names[item], CellRole.VALUE_NAME,
                          b.header_style(fill, level))
    if total_col:
        b.add(0, n_cols - 1, rng.choice(AGGREGATE_WORDS), CellRole.AGGREGATION,
              b.header_style(fill), row_span=depth)

    # corner: index names of the left columns on the last header row
    for k, cat in enumerate(left_cats):
        b.add(depth - 1, k, names[cat], CellRole.INDEX_NAME, b.header_style(fill, depth - 1))

    # left header columns
    for k, key in enumerate(row_keys):
        r = depth + k
        if n_left == 2:
            outer_item, inner_item = key
            if k % len(inner) == 0:
                b.add(r, 0, names[outer_item], CellRole.INDEX, b.header_style(fill, 1), row_span=len(inner))
            style = b.header_style(fill, 2)
            b.add(r, 1, names[inner_item], CellRole.INDEX,
                  CellStyle(**{**style.__dict__, "indent_level": 1 if rng.random() < 0.5 else 0}))
        elif n_left == 1:
            b.add(r, 0, names[key[0]], CellRole.INDEX, b.header_style(fill, 1))

    # data region
    data_rows = range(depth, depth + len(row_keys))
    value_of_col = [values[c % len(values)] for c in range(n_data_cols)]
    for r in data_rows:
        for c in range(n_data_cols):
            if rng.random() < spec.p_empty_data:
                continue
            text, fmt = b.value(value_of_col[c])
            b.add(r, n_left + c, text, CellRole.OTHER, b.data_style(fmt))
        if total_col:
            text, fmt = b.value(None)
            b.add(r, n_cols - 1, text, CellRole.OTHER, b.data_style(fmt, bold=True))
    if total_row:
        r = n_rows - 1
        b.add(r, 0, rng.choice(AGGREGATE_WORDS), CellRole.AGGREGATION, b.header_style(fill, 1),
              col_span=n_left)
        for c in range(n_data_cols):
            text, fmt = b.value(value_of_col[c])
            b.add(r, n_left + c, text, CellRole.OTHER, b.data_style(fmt, bold=True))

    cells = tuple(sorted(b.cells, key=lambda cell: (cell.row, cell.col)))
    table = RawTable(table_id, n_rows, n_cols, cells, tuple(range(depth)), tuple(range(n_left)))
    return table.validate()


def gen_synthetic(spec: SyntheticSpec = SyntheticSpec(), taxonomy: Taxonomy | None = None,
                  lexicon: Lexicon | None = None) -> list[RawTable]:
    taxonomy = taxonomy or demo_taxonomy()
    lexicon = lexicon or demo_lexicon(taxonomy)
    rng = random.Random(spec.seed)
    return [
        generate_table(rng, spec, f"{spec.id_prefix}{k:04d}", taxonomy, lexicon)
        for k in range(spec.n_tables)
    ]
