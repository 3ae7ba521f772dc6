"""Classification metrics over a confusion matrix.

Convention: rows are true classes, columns are predicted classes, so
cm[i][j] counts samples of true class i predicted as j. Shared by the
trainer's evaluation reports.
"""
from __future__ import annotations

from typing import Sequence

Matrix = Sequence[Sequence[int]]


def _check(cm: Matrix) -> int:
    n = len(cm)
    if n == 0 or any(len(row) != n for row in cm):
        raise ValueError("confusion matrix must be square and non-empty")
    if any(v < 0 for row in cm for v in row):
        raise ValueError("confusion matrix counts must be non-negative")
    return n


def accuracy(cm: Matrix) -> float:
    """Correctly classified fraction: trace / total."""
    n = _check(cm)
    total = sum(v for row in cm for v in row)
    if total == 0:
        raise ValueError("confusion matrix is all zeros")
    return sum(cm[i][i] for i in range(n)) / total


def precision_recall_f1(cm: Matrix) -> list[tuple[float, float, float]]:
    """Per-class (precision, recall, F1); a zero denominator yields 0.0."""
    n = _check(cm)
    out = []
    for i in range(n):
        col = sum(cm[r][i] for r in range(n))
        row = sum(cm[i])
        p = cm[i][i] / col if col else 0.0
        r = cm[i][i] / row if row else 0.0
        f1 = 2.0 * p * r / (p + r) if p + r else 0.0
        out.append((p, r, f1))
    return out


def macro_f1(cm: Matrix) -> float:
    scores = precision_recall_f1(cm)
    return sum(f1 for _, _, f1 in scores) / len(scores)
