# coding: utf-8
"""Tables, merged cells and per-cell features."""

# %% [markdown]
# A table arrives as JSON: a grid size plus a list of cells, each with an anchor position,
# optional spans, text, formatting and (for training data) a role label. Merged cells cover
# several grid positions; `normalize` copies their text and style into every covered slot.

# %%
import json

import numpy as np

from tabularnet.features import FeatureSchema, coordinates, decayed_position, extract_features, text_features
from tabularnet.table import normalize, parse_table

doc = {
    "id": "sales",
    "n_rows": 4,
    "n_cols": 3,
    "header_rows": [0, 1],
    "header_cols": [0],
    "cells": [
        {"row": 0, "col": 1, "col_span": 2, "text": "Region", "label": "index_name",
         "style": {"font_bold": True, "fill_color": [255, 221, 235, 247]}},
        {"row": 1, "col": 0, "text": "Year", "label": "index_name"},
        {"row": 1, "col": 1, "text": "North", "label": "index"},
        {"row": 1, "col": 2, "text": "South", "label": "index"},
        {"row": 2, "col": 0, "text": "2013", "label": "index"},
        {"row": 2, "col": 1, "text": "1,204", "style": {"format_class": "number"}},
        {"row": 2, "col": 2, "text": "987", "style": {"format_class": "number"}},
        {"row": 3, "col": 0, "text": "Total", "label": "aggregation"},
        {"row": 3, "col": 1, "text": "1,204"},
        {"row": 3, "col": 2, "text": "987"},
    ],
}
raw = parse_table(json.dumps(doc))
grid = normalize(raw)
for row in grid.grid:
    print([f"{cell.text or '.'}:{cell.label.key}" for cell in row])

# %% [markdown]
# The merged "Region" header now occupies (0,1) and (0,2). Empty positions become `other`.
#
# Hand-crafted text features: length, whether the text is empty, the share of digits,
# and two flags for '%' and '.'.

# %%
print(text_features("2013"), text_features("12.5%"))
print("coordinates of (0,0) in a 4x3 table:", coordinates(0, 0, 4, 3))
print("decayed row/col at (1,2):", decayed_position(1, 2))

# %% [markdown]
# `extract_features` stacks everything into an (n_rows, n_cols, d) array. The schema names each
# slice, and its fingerprint is stored in checkpoints so that features and models stay paired.

# %%
fm = extract_features(grid)
schema = FeatureSchema()
print(fm.shape, schema.fingerprint())
for name, sl in schema.slices().items():
    print(f"{name:>14}: {sl.start:3d}..{sl.stop:3d}")
print(np.round(fm.values[2, 0, schema.slices()["text"]], 3))
