import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabularnet.metrics import MetricsReport, confusion_matrix, macro_f1, scores_from_confusion


def test_confusion_rows_true_cols_predicted():
    cm = confusion_matrix([0, 0, 1, 2], [0, 1, 1, 1], 3)
    assert cm.tolist() == [[1, 1, 0], [0, 1, 0], [0, 1, 0]]


def test_f1_two_thirds():
    # class 1: TP=2, FP=1, FN=1
    cm = confusion_matrix([1, 1, 1, 0], [1, 1, 0, 1], 2)
    s = scores_from_confusion(cm)[1]
    assert (s.precision, s.recall) == (pytest.approx(2 / 3), pytest.approx(2 / 3))
    assert s.f1 == pytest.approx(2 / 3, abs=1e-12)
    assert s.support == 3


def test_absent_class_counts_as_zero():
    cm = confusion_matrix([0, 1], [0, 1], 3)
    scores = scores_from_confusion(cm)
    assert scores[2].absent and scores[2].f1 == 0.0
    assert not scores[0].absent
    assert macro_f1(scores) == pytest.approx(2 / 3)
    assert macro_f1(scores, [0, 1]) == 1.0


def test_zero_denominators_are_zero_not_nan():
    # class 1 predicted never but present
    s = scores_from_confusion(confusion_matrix([1, 1], [0, 0], 2))[1]
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
    assert not s.absent


def test_perfect_predictions():
    y = np.array([0, 1, 2, 3, 4, 4, 2])
    report = MetricsReport(cell_confusion=confusion_matrix(y, y, 5))
    assert report.macro_f1_4 == 1.0 and report.macro_f1_5 == 1.0
    assert report.selection_score() == 1.0


def test_selection_score_variants():
    cell = confusion_matrix([0, 1, 2, 3], [0, 1, 2, 0], 5)
    rows = confusion_matrix([1, 0, 0], [1, 0, 0], 2)
    cols = confusion_matrix([1, 0], [0, 0], 2)
    only_cell = MetricsReport(cell_confusion=cell)
    only_region = MetricsReport(row_confusion=rows, col_confusion=cols)
    both = MetricsReport(cell, rows, cols)
    assert only_region.region_score == pytest.approx(0.5)
    assert both.selection_score() == pytest.approx(0.5 * (only_cell.macro_f1_4 + 0.5))
    with pytest.raises(ValueError):
        MetricsReport().selection_score()


def test_report_json_roundtrip_recomputes():
    report = MetricsReport(
        confusion_matrix([0, 1, 4, 4], [0, 4, 4, 1], 5),
        confusion_matrix([1, 0], [1, 1], 2),
        confusion_matrix([1, 0, 0], [1, 0, 0], 2),
        history=[{"epoch": 1, "train_loss": 0.5}],
    )
    d = json.loads(json.dumps(report.to_dict()))
    again = MetricsReport.from_dict(d)
    assert again.to_dict() == report.to_dict()
    assert again.macro_f1_4 == report.macro_f1_4
    assert d["cell"]["per_class"]["value_name"]["absent"] is True


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=40))
def test_confusion_invariants(pairs):
    t, p = zip(*pairs)
    cm = confusion_matrix(t, p, 5)
    assert cm.sum() == len(pairs)
    assert cm.trace() == sum(a == b for a, b in pairs)
    for s in scores_from_confusion(cm):
        assert 0.0 <= s.f1 <= 1.0
        assert min(s.precision, s.recall) - 1e-12 <= s.f1 <= max(s.precision, s.recall) + 1e-12
