"""Classification-quality reporting: confusion matrix, per-class
precision/recall/F1 table, and rank-based AUC cross-checked against
literal pair counting.

Run: python demos/05_classification_report.py
"""

import numpy as np

from netlens import ConfusionMatrix, ScoredSample, format_confusion, format_report, report, roc_auc
from netlens.oracles import auc_pair_counting

print("== Report from a fixed confusion matrix ==\n")
matrix = ConfusionMatrix(
    np.array([[794, 11], [96, 709]]), ("non-smoking", "smoking")
)
print(format_confusion(matrix))
print(format_report(report(matrix)))

print("== AUC on synthetic scores ==")
rng = np.random.default_rng(0)
n = 400
labels = rng.integers(0, 2, n)
# positives score higher on average; plenty of overlap and ties
scores = np.round(np.clip(0.35 * labels + rng.normal(0.35, 0.18, n), 0, 1), 2)
samples = [ScoredSample(int(l), float(s)) for l, s in zip(labels, scores)]

fast = roc_auc(samples)
slow = auc_pair_counting(labels.tolist(), scores.tolist())
print(f"rank-statistic AUC: {fast:.6f}")
print(f"pair-counting AUC:  {slow:.6f}  (agree to {abs(fast - slow):.1e})")

print("\nthresholding the same scores sweeps recall from 1 to 0:")
for t in (0.0, 0.25, 0.5, 0.75, 1.01):
    pred = [1 if s.score >= t else 0 for s in samples]
    tp = sum(1 for s, p in zip(samples, pred) if s.label == 1 and p == 1)
    pos = sum(1 for s in samples if s.label == 1)
    print(f"  threshold {t:<5} recall {tp / pos:.3f}")
