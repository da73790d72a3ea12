import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabularnet.features import (
    HANDCRAFTED_WIDTH,
    FeatureSchema,
    FileEmbedding,
    HashingEmbedding,
    coordinates,
    decayed_position,
    embed_text,
    extract_features,
    load_features,
    save_features,
    style_features,
    text_features,
)
from tabularnet.table import FORMAT_CLASSES, CellStyle, RawCell, RawTable, normalize

from conftest import grid_of

SCHEMA = FeatureSchema()
SL = SCHEMA.slices()


@pytest.mark.parametrize("text,expected", [
    ("2013", [4, 0, 1.0, 0, 0]),
    ("", [0, 1, 0.0, 0, 0]),
    ("12.5%", [5, 0, 0.6, 1, 1]),
])
def test_text_features(text, expected):
    assert text_features(text).tolist() == expected


def test_text_features_counts_characters_not_bytes():
    assert text_features("é1")[0] == 2
    assert text_features("é1")[2] == 0.5


def test_style_color_rescaling_keeps_argb_order():
    v = style_features(CellStyle(fill_color=(255, 0, 0, 0)))
    assert v[6:10].tolist() == [1.0, 0.0, 0.0, 0.0]


def test_style_format_one_hot():
    v = style_features(CellStyle(format_class="number"))
    assert v[:6].tolist() == [1, 0, 0, 0, 0, 0]
    assert FORMAT_CLASSES[0] == "number"


def test_default_style_vector():
    v = style_features(CellStyle())
    expected = np.zeros(41)
    expected[FORMAT_CLASSES.index("other")] = 1.0
    expected[6:10] = 1.0
    assert v.tolist() == expected.tolist()


def test_style_width_matches_schema():
    assert HANDCRAFTED_WIDTH == 52
    assert len(style_features(CellStyle())) == HANDCRAFTED_WIDTH - 5 - 4 - 2


def test_style_scalars():
    v = style_features(CellStyle(font_size=12, height=20, width=64, indent_level=2,
                                 font_bold=True, has_formula=True))
    base = 6 + 4 + 4 + 16 + 4  # bold sits after format, fill, presence, border and font colors
    assert v[base:].tolist() == pytest.approx([1.0, 0.12, 0.0, 0.2, 0.64, 1.0, 2.0], abs=1e-15)


@pytest.mark.parametrize("args,expected", [
    ((0, 0, 3, 3), [0, 0, 2, 2]),
    ((2, 2, 3, 3), [2, 2, 0, 0]),
    ((1, 2, 4, 5), [1, 2, 2, 2]),
])
def test_coordinates(args, expected):
    assert coordinates(*args).tolist() == expected


def test_coordinates_out_of_range():
    with pytest.raises(ValueError):
        coordinates(3, 0, 3, 3)
    with pytest.raises(ValueError):
        coordinates(0, -1, 3, 3)


def test_decayed_position():
    assert decayed_position(0, 0).tolist() == [1.0, 1.0]
    assert decayed_position(1, 2).tolist() == [math.exp(-1), math.exp(-2)]
    assert decayed_position(1, 2)[0] == pytest.approx(0.367879, abs=5e-7)
    assert decayed_position(1, 2)[1] == pytest.approx(0.135335, abs=5e-7)
    assert decayed_position(20, 0)[0] == pytest.approx(2.06e-9, rel=1e-2)


def test_hashing_embedding():
    emb = HashingEmbedding()
    assert embed_text(emb, "").tolist() == [0.0] * 64
    v = embed_text(emb, "profit")
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(v, HashingEmbedding().embed("profit"))
    assert np.array_equal(v, embed_text(emb, "PROFIT"))
    v[0] = 99  # returned vectors are copies
    assert embed_text(emb, "profit")[0] != 99


def test_hashing_embedding_oracle():
    import hashlib

    emb = HashingEmbedding(dim=16)
    expected = np.zeros(16)
    for tri in ("<ab", "ab>"):
        h = int.from_bytes(hashlib.blake2b(tri.encode(), digest_size=8).digest(), "little")
        expected[h % 16] += 1
    expected /= np.linalg.norm(expected)
    assert np.array_equal(emb.embed("A\x07B"), expected)


def test_file_embedding(tmp_path, caplog):
    path = tmp_path / "emb.tsv"
    path.write_text("#dim 3\nprofit\t1,2,3\nsales\t0,0,1\n", encoding="utf-8")
    emb = FileEmbedding(path)
    assert emb.dim == 3
    assert emb.embed("profit").tolist() == [1, 2, 3]
    assert emb.embed("missing").tolist() == [0, 0, 0]
    assert "missing" in caplog.text
    assert emb.embed("").tolist() == [0, 0, 0]


def test_file_embedding_errors(tmp_path):
    with pytest.raises(ValueError):
        FileEmbedding(tmp_path / "nope.tsv")
    bad = tmp_path / "bad.tsv"
    bad.write_text("#dim 2\nx\t1,2,3\n")
    with pytest.raises(ValueError):
        FileEmbedding(bad)
    binary = tmp_path / "bin.tsv"
    binary.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(ValueError):
        FileEmbedding(binary)


def test_extract_single_cell():
    fm = extract_features(grid_of([["2013"]]))
    assert fm.shape == (1, 1, 52 + 64)
    assert fm.values[0, 0, :5].tolist() == [4, 0, 1, 0, 0]
    assert fm.values[0, 0, SL["coordinates"]].tolist() == [0, 0, 0, 0]
    assert fm.values[0, 0, SL["decayed"]].tolist() == [1, 1]
    assert fm.fingerprint == SCHEMA.fingerprint()


def test_merged_cell_rows_differ_only_in_position():
    t = normalize(RawTable("m", 3, 3, (RawCell(0, 0, "Total sales", 2, 2, CellStyle(font_bold=True)),
                                       RawCell(2, 2, "7"))))
    fm = extract_features(t).values
    pos = np.r_[SL["coordinates"], SL["decayed"]]
    keep = np.setdiff1d(np.arange(fm.shape[-1]), pos)
    block = [fm[r, c] for r in range(2) for c in range(2)]
    for v in block[1:]:
        assert np.array_equal(v[keep], block[0][keep])
        assert not np.array_equal(v[pos], block[0][pos])


def test_schema_fingerprint_sensitivity():
    assert FeatureSchema(64).fingerprint() != FeatureSchema(32).fingerprint()
    assert FeatureSchema(64, "file").fingerprint() != FeatureSchema(64).fingerprint()
    assert [w for _, w in SCHEMA.fields][:14] == [5, 6, 4, 4, 16, 4, 1, 1, 1, 2, 1, 1, 4, 2]


def test_features_roundtrip(tmp_path):
    fms = [extract_features(grid_of([["a", "1"]], "x")), extract_features(grid_of([["b"]], "y"))]
    save_features(tmp_path / "f.npz", fms)
    back = load_features(tmp_path / "f.npz")
    assert [m.table_id for m in back] == ["x", "y"]
    assert all(np.array_equal(a.values, b.values) for a, b in zip(fms, back))


colors = st.tuples(*[st.integers(0, 255)] * 4)


@settings(max_examples=60, deadline=None)
@given(
    texts=st.lists(st.lists(st.text(max_size=8), min_size=1, max_size=3), min_size=1, max_size=3)
    .filter(lambda rows: len({len(r) for r in rows}) == 1),
    fill=colors,
    fmt=st.sampled_from(FORMAT_CLASSES),
)
def test_feature_ranges_and_purity(texts, fill, fmt):
    style = CellStyle(fill_color=fill, format_class=fmt, font_bold=True)
    cells = tuple(RawCell(r, c, t, style=style) for r, row in enumerate(texts) for c, t in enumerate(row))
    grid = normalize(RawTable("p", len(texts), len(texts[0]), cells))
    a = extract_features(grid).values
    b = extract_features(grid).values
    assert a.tobytes() == b.tobytes()
    assert np.all(np.isfinite(a))
    unbounded = {0, SL["font_size"].start, SL["height_width"].start, SL["height_width"].start + 1,
                 SL["indent_level"].start, *range(SL["coordinates"].start, SL["coordinates"].stop)}
    bounded = [k for k in range(a.shape[-1]) if k not in unbounded and k not in range(*SL["embedding"].indices(a.shape[-1]))]
    assert a[..., bounded].min() >= 0 and a[..., bounded].max() <= 1
    dec = a[..., SL["decayed"]]
    assert np.all(dec > 0) and np.all(dec <= 1)
