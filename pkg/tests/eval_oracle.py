"""Brute-force DET/EER oracle: explicit confusion counts per threshold, pure Python."""

import math


def sweep(scores, labels):
    """(thresholds, fpr, fnr) with score >= threshold counted as positive."""
    thresholds = [-math.inf] + sorted(set(scores)) + [math.inf]
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    fpr, fnr = [], []
    for th in thresholds:
        fp = sum(1 for s, y in zip(scores, labels) if y == 0 and s >= th)
        fn = sum(1 for s, y in zip(scores, labels) if y == 1 and not s >= th)
        fpr.append(fp / n_neg)
        fnr.append(fn / n_pos)
    return thresholds, fpr, fnr


def eer(scores, labels):
    """Walk the polyline until fnr first reaches fpr, then intersect the segment with fnr = fpr."""
    _, fpr, fnr = sweep(scores, labels)
    for k in range(len(fpr)):
        if fnr[k] >= fpr[k]:
            if fnr[k] == fpr[k]:
                return fpr[k]
            x0, y0, x1, y1 = fpr[k - 1], fnr[k - 1], fpr[k], fnr[k]
            # solve x0 + t (x1 - x0) = y0 + t (y1 - y0)
            t = (x0 - y0) / ((x0 - y0) - (x1 - y1))
            return x0 + t * (x1 - x0)
    raise AssertionError("curve never crosses fpr = fnr")
