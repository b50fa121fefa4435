"""Confusion matrices and the precision / recall / accuracy derived from them.

Rows index the predicted class and columns the target class, both in the
order NLC, LLC, RLC. Metrics are percentages; a metric whose denominator is
zero is undefined and reported as ``None`` (rendered ``n/a``), never 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .. import CLASSES
from ..errors import ValidationError

UNDEFINED = "n/a"

# Table I sequence counts of the reference dataset, order NLC, LLC, RLC
REFERENCE_CLASS_COUNTS = (3110, 342, 438)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (3, 3):
            raise ValidationError(f"confusion matrix must be 3x3, got {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(c == np.round(c)):
                raise ValidationError("confusion counts must be integers")
            c = c.astype(np.int64)
        if (c < 0).any():
            raise ValidationError("confusion counts must be >= 0")
        self.counts = c.astype(np.int64)

    @classmethod
    def from_predictions(cls, predicted: Iterable[int], target: Iterable[int]) -> "ConfusionMatrix":
        m = np.zeros((3, 3), dtype=np.int64)
        p = np.asarray(list(predicted), dtype=np.int64)
        t = np.asarray(list(target), dtype=np.int64)
        if p.shape != t.shape:
            raise ValidationError("predictions and targets differ in length")
        np.add.at(m, (p, t), 1)
        return cls(m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


def _pct(num, den) -> float | None:
    return None if den == 0 else 100.0 * float(num) / float(den)


@dataclass
class ClassMetrics:
    precision: list[float | None]
    recall: list[float | None]
    accuracy: float


def confusion_metrics(matrix: ConfusionMatrix | Sequence[Sequence[int]]) -> ClassMetrics:
    if not isinstance(matrix, ConfusionMatrix):
        matrix = ConfusionMatrix(np.asarray(matrix))
    m = matrix.counts
    if matrix.total == 0:
        raise ValidationError("confusion matrix is empty")
    diag = np.diag(m)
    rows, cols = m.sum(axis=1), m.sum(axis=0)
    return ClassMetrics(
        precision=[_pct(diag[i], rows[i]) for i in range(3)],
        recall=[_pct(diag[i], cols[i]) for i in range(3)],
        accuracy=100.0 * float(diag.sum()) / float(matrix.total),
    )


def fmt_pct(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.1f}"


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    precision: list[float | None]
    recall: list[float | None]
    accuracy: float
    config: dict = field(default_factory=dict)

    @classmethod
    def from_matrix(cls, matrix: ConfusionMatrix, config: dict | None = None) -> "EvalReport":
        m = confusion_metrics(matrix)
        return cls(matrix, m.precision, m.recall, m.accuracy, dict(config or {}))

    def to_dict(self) -> dict:
        """Machine-readable form; see the README for the key schema."""
        return {
            "classes": list(CLASSES),
            "confusion": self.matrix.to_list(),
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "total": self.matrix.total,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls.from_matrix(ConfusionMatrix(np.asarray(d["confusion"])), d.get("config"))

    def render(self, title: str = "Confusion matrix") -> str:
        """Rows are outputs, columns targets; precision closes each row, recall the table."""
        m = self.matrix.counts
        lines = [title, f"{'Output / Target':<16}" + "".join(f"{c:>8}" for c in CLASSES) + f"{'Prec.':>9}"]
        for i, name in enumerate(CLASSES):
            lines.append(
                f"{name:<16}" + "".join(f"{m[i, j]:>8d}" for j in range(3)) + f"{fmt_pct(self.precision[i]):>9}"
            )
        lines.append(f"{'Recall':<16}" + "".join(f"{fmt_pct(r):>8}" for r in self.recall)
                     + f"{fmt_pct(self.accuracy):>9}")
        return "\n".join(lines)


def constant_predictor_matrix(class_counts: Sequence[int], predicted_class: int = 0) -> ConfusionMatrix:
    """Matrix of a predictor that always outputs ``predicted_class``."""
    m = np.zeros((3, 3), dtype=np.int64)
    m[predicted_class] = np.asarray(class_counts, dtype=np.int64)
    return ConfusionMatrix(m)


def majority_accuracy(class_counts: Sequence[int] = REFERENCE_CLASS_COUNTS) -> float:
    return confusion_metrics(constant_predictor_matrix(class_counts, 0)).accuracy
