"""Classification-quality computations: confusion matrix, per-class
precision/recall/F1 report, ROC AUC and CSV evaluation.

Conventions: confusion rows are true classes, columns predictions;
rates with an empty denominator are defined as 0; displayed values are
rounded half away from zero to 2 decimals while raw values stay
available on the report object. AUC is the Mann-Whitney statistic (ties
count one half), computed with an O(n log n) rank sum and cross-checked
elsewhere against literal pair counting.
"""

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import ArgumentError, CsvError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    """KxK integer counts; entry (i, j) = true class i predicted as j."""

    counts: np.ndarray
    labels: tuple

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ArgumentError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise ArgumentError("confusion counts must be non-negative")
        if len(self.labels) != c.shape[0]:
            raise ArgumentError(
                f"{len(self.labels)} labels for a {c.shape[0]}-class matrix"
            )
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def num_classes(self):
        return self.counts.shape[0]

    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class and aggregate rates mirroring a standard report table."""

    labels: tuple
    precision: tuple
    recall: tuple
    f1: tuple
    support: tuple
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


@dataclass(frozen=True)
class ScoredSample:
    """Binary ground truth plus a score in [0, 1]."""

    label: int
    score: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ArgumentError(f"label must be 0 or 1, got {self.label}")


def confusion(true_labels, predicted_labels, num_classes, labels=None):
    """Count (true, predicted) pairs into a KxK matrix."""
    true_labels = list(true_labels)
    predicted_labels = list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ArgumentError(
            f"{len(true_labels)} true labels vs {len(predicted_labels)} predictions"
        )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        if not (0 <= t < num_classes and 0 <= p < num_classes):
            raise ArgumentError(f"label pair ({t}, {p}) out of range 0..{num_classes - 1}")
        counts[t, p] += 1
    if labels is None:
        labels = tuple(f"class {i}" for i in range(num_classes))
    return ConfusionMatrix(counts, tuple(labels))


def _safe_div(num, den):
    return num / den if den else 0.0


def report(matrix):
    """Precision/recall/F1 per class plus accuracy and averages."""
    total = matrix.total()
    if total == 0:
        raise ArgumentError("cannot report on an all-zero confusion matrix")
    c = matrix.counts.astype(np.float64)
    tp = np.diag(c)
    col = c.sum(axis=0)
    row = c.sum(axis=1)
    precision = [_safe_div(tp[i], col[i]) for i in range(matrix.num_classes)]
    recall = [_safe_div(tp[i], row[i]) for i in range(matrix.num_classes)]
    f1 = [
        _safe_div(2.0 * precision[i] * recall[i], precision[i] + recall[i])
        for i in range(matrix.num_classes)
    ]
    support = [int(r) for r in row]
    weights = [s / total for s in support]
    k = matrix.num_classes
    return ClassificationReport(
        labels=matrix.labels,
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        support=tuple(support),
        accuracy=float(np.trace(c) / total),
        macro_precision=sum(precision) / k,
        macro_recall=sum(recall) / k,
        macro_f1=sum(f1) / k,
        weighted_precision=sum(w * p for w, p in zip(weights, precision)),
        weighted_recall=sum(w * r for w, r in zip(weights, recall)),
        weighted_f1=sum(w * f for w, f in zip(weights, f1)),
    )


def roc_auc(samples):
    """Probability a random positive outranks a random negative.

    Mann-Whitney with tie correction via midranks; equals the
    trapezoidal area under the ROC curve.
    """
    labels = np.array([s.label for s in samples], dtype=np.int64)
    scores = np.array([s.score for s in samples], dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined with {n_pos} positive and {n_neg} negative samples"
        )
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        midrank = 0.5 * (i + j) + 1.0  # 1-based average rank of the tie group
        ranks[order[i : j + 1]] = midrank
        i = j + 1
    rank_sum = float(np.sum(ranks[labels == 1]))
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def parse_scored_csv(text):
    """Parse `label,score` CSV text into ScoredSample rows.

    The header line is required; LF and CRLF both work. Raises CsvError
    with the 1-based line number on any malformed row.
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise CsvError("CSV is empty", line=1)
    header = [h.strip().lower() for h in rows[0]]
    if header != ["label", "score"]:
        raise CsvError(f"expected header 'label,score', got {rows[0]!r}", line=1)
    samples = []
    for idx, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise CsvError(f"expected 2 fields, got {len(row)}", line=idx)
        try:
            label = int(row[0])
            score = float(row[1])
        except ValueError:
            raise CsvError(f"malformed row {row!r}", line=idx) from None
        if label not in (0, 1):
            raise CsvError(f"label must be 0 or 1, got {label}", line=idx)
        samples.append(ScoredSample(label, score))
    if not samples:
        raise CsvError("CSV contains a header but no samples", line=2)
    return samples


def evaluate_scored(samples, threshold, labels=("non-smoking", "smoking")):
    """Threshold scores into predictions, then report + confusion + AUC.

    Scores at or above the threshold predict the positive class; values
    outside [0, 1] are legal and simply force one class everywhere.
    """
    if not np.isfinite(threshold):
        raise ArgumentError(f"threshold must be finite, got {threshold}")
    true = [s.label for s in samples]
    pred = [1 if s.score >= threshold else 0 for s in samples]
    matrix = confusion(true, pred, 2, labels=labels)
    rep = report(matrix)
    try:
        auc = roc_auc(samples)
    except UndefinedMetricError:
        auc = None
    return rep, matrix, auc


def evaluate_csv(path, threshold, labels=("non-smoking", "smoking")):
    """Load a scored CSV and evaluate it at the given threshold."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        samples = parse_scored_csv(fh.read())
    return evaluate_scored(samples, threshold, labels=labels)


def round_display(value, places=2):
    """Half-away-from-zero rounding used for table display."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))


def format_report(rep):
    """Aligned plain-text table of a classification report."""
    name_w = max(16, max(len(l) for l in rep.labels) + 2)
    lines = ["Classification Report"]
    header = f"{'':<{name_w}}{'Precision':>10}{'Recall':>10}{'F1-Score':>10}{'Support':>10}"
    lines.append(header)
    total = sum(rep.support)
    for i, label in enumerate(rep.labels):
        lines.append(
            f"{label:<{name_w}}"
            f"{round_display(rep.precision[i]):>10.2f}"
            f"{round_display(rep.recall[i]):>10.2f}"
            f"{round_display(rep.f1[i]):>10.2f}"
            f"{rep.support[i]:>10d}"
        )
    lines.append(
        f"{'Accuracy':<{name_w}}{'':>10}{'':>10}"
        f"{round_display(rep.accuracy):>10.2f}{total:>10d}"
    )
    lines.append(
        f"{'Macro Average':<{name_w}}"
        f"{round_display(rep.macro_precision):>10.2f}"
        f"{round_display(rep.macro_recall):>10.2f}"
        f"{round_display(rep.macro_f1):>10.2f}"
        f"{total:>10d}"
    )
    lines.append(
        f"{'Weighted Average':<{name_w}}"
        f"{round_display(rep.weighted_precision):>10.2f}"
        f"{round_display(rep.weighted_recall):>10.2f}"
        f"{round_display(rep.weighted_f1):>10.2f}"
        f"{total:>10d}"
    )
    lines.append(f"Accuracy Score: {round_display(rep.accuracy):.2f}")
    return "\n".join(lines) + "\n"


def format_confusion(matrix):
    """Aligned plain-text confusion matrix, rows true / columns predicted."""
    name_w = max(16, max(len(l) for l in matrix.labels) + 2)
    cell_w = max(8, max(len(l) for l in matrix.labels) + 2)
    lines = ["Confusion Matrix (rows: true, columns: predicted)"]
    header = f"{'':<{name_w}}" + "".join(f"{l:>{cell_w}}" for l in matrix.labels)
    lines.append(header)
    for i, label in enumerate(matrix.labels):
        row = "".join(f"{int(v):>{cell_w}d}" for v in matrix.counts[i])
        lines.append(f"{label:<{name_w}}{row}")
    return "\n".join(lines) + "\n"


def report_as_dict(rep, matrix=None, auc=None):
    """Machine-readable form of a report (JSON-serializable)."""
    out = {
        "labels": list(rep.labels),
        "precision": list(rep.precision),
        "recall": list(rep.recall),
        "f1": list(rep.f1),
        "support": list(rep.support),
        "accuracy": rep.accuracy,
        "macro": {
            "precision": rep.macro_precision,
            "recall": rep.macro_recall,
            "f1": rep.macro_f1,
        },
        "weighted": {
            "precision": rep.weighted_precision,
            "recall": rep.weighted_recall,
            "f1": rep.weighted_f1,
        },
    }
    if matrix is not None:
        out["confusion"] = [[int(v) for v in row] for row in matrix.counts]
    if auc is not None:
        out["auc"] = auc
    return out
