"""Confusion matrices and precision/recall/F1 summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .table import CellRole

ROLE_NAMES = [role.key for role in CellRole]
HEADER_ROLES = [int(r) for r in CellRole if r is not CellRole.OTHER]


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int
    absent: bool = False


def scores_from_confusion(cm: np.ndarray) -> list[ClassScore]:
    """Per-class scores. Zero denominators give 0; a class with no true and no predicted
    instances gets F1 = 0 and ``absent=True``."""
    cm = np.asarray(cm)
    out = []
    for k in range(cm.shape[0]):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        out.append(ClassScore(p, r, f1, tp + fn, absent=(tp + fp + fn) == 0))
    return out


def macro_f1(scores: list[ClassScore], classes=None) -> float:
    classes = range(len(scores)) if classes is None else classes
    return float(np.mean([scores[k].f1 for k in classes]))


@dataclass
class MetricsReport:
    """Evaluation summary. Cell metrics and region metrics are filled for the tasks evaluated."""

    cell_confusion: np.ndarray | None = None
    row_confusion: np.ndarray | None = None
    col_confusion: np.ndarray | None = None
    history: list[dict] = field(default_factory=list)

    @property
    def cell_scores(self) -> list[ClassScore] | None:
        return None if self.cell_confusion is None else scores_from_confusion(self.cell_confusion)

    @property
    def macro_f1_4(self) -> float | None:
        s = self.cell_scores
        return None if s is None else macro_f1(s, HEADER_ROLES)

    @property
    def macro_f1_5(self) -> float | None:
        s = self.cell_scores
        return None if s is None else macro_f1(s)

    @property
    def top_header_f1(self) -> float | None:
        return None if self.row_confusion is None else scores_from_confusion(self.row_confusion)[1].f1

    @property
    def left_header_f1(self) -> float | None:
        return None if self.col_confusion is None else scores_from_confusion(self.col_confusion)[1].f1

    @property
    def region_score(self) -> float | None:
        if self.row_confusion is None:
            return None
        return 0.5 * (self.top_header_f1 + self.left_header_f1)

    def selection_score(self) -> float:
        """Model-selection score: cell macro-F1 over the four header roles, the mean of top and
        left header F1, or the unweighted mean of both when both tasks are present."""
        parts = [s for s in (self.macro_f1_4, self.region_score) if s is not None]
        if not parts:
            raise ValueError("report holds no metrics")
        return float(np.mean(parts))

    def to_dict(self) -> dict:
        out: dict = {}
        if self.cell_confusion is not None:
            out["cell"] = {
                "macro_f1": self.macro_f1_4,
                "macro_f1_all5": self.macro_f1_5,
                "per_class": {
                    name: vars(score) for name, score in zip(ROLE_NAMES, self.cell_scores)
                },
                "confusion": self.cell_confusion.tolist(),
                "labels": ROLE_NAMES,
            }
        if self.row_confusion is not None:
            out["region"] = {
                "top_header_f1": self.top_header_f1,
                "left_header_f1": self.left_header_f1,
                "row_confusion": self.row_confusion.tolist(),
                "col_confusion": self.col_confusion.tolist(),
                "per_class_rows": [vars(s) for s in scores_from_confusion(self.row_confusion)],
                "per_class_cols": [vars(s) for s in scores_from_confusion(self.col_confusion)],
            }
        if self.history:
            out["history"] = self.history
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        cell = d.get("cell")
        region = d.get("region")
        return cls(
            cell_confusion=None if cell is None else np.array(cell["confusion"], dtype=np.int64),
            row_confusion=None if region is None else np.array(region["row_confusion"], dtype=np.int64),
            col_confusion=None if region is None else np.array(region["col_confusion"], dtype=np.int64),
            history=list(d.get("history", [])),
        )
