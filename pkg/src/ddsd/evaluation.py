"""Equal error rate and detection-error-tradeoff curves.

A score at or above the threshold is a device-directed decision. The EER is read off
the DET polyline by linear interpolation between the two points bracketing fpr = fnr.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=int)
        if scores.shape != labels.shape or scores.ndim != 1:
            raise EvaluationError("scores and labels must be equal-length vectors")
        if not np.all(np.isfinite(scores)):
            raise EvaluationError("scores must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise EvaluationError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pairs(cls, pairs) -> "ScoreSet":
        pairs = list(pairs)
        return cls(np.array([s for s, _ in pairs], dtype=np.float64), np.array([int(l) for _, l in pairs], dtype=int))

    def require_both_classes(self) -> None:
        if not (np.any(self.labels == 1) and np.any(self.labels == 0)):
            raise EvaluationError("both classes must be present")


@dataclass(frozen=True)
class DetCurve:
    thresholds: np.ndarray  # increasing, starting at -inf and ending at +inf
    fpr: np.ndarray
    fnr: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.fnr.tolist()))


def det_curve(scores: ScoreSet) -> DetCurve:
    scores.require_both_classes()
    pos = np.sort(scores.scores[scores.labels == 1])
    neg = np.sort(scores.scores[scores.labels == 0])
    thresholds = np.concatenate([[-np.inf], np.unique(scores.scores), [np.inf]])
    # count of scores >= theta is n - (number strictly below theta)
    fpr = (len(neg) - np.searchsorted(neg, thresholds, side="left")) / len(neg)
    fnr = np.searchsorted(pos, thresholds, side="left") / len(pos)
    return DetCurve(thresholds, fpr, fnr)


def eer_from_curve(curve: DetCurve) -> float:
    diff = curve.fnr - curve.fpr
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return float(curve.fpr[k])
    a, b = curve.fpr[k - 1], curve.fnr[k - 1]
    c, d = curve.fpr[k], curve.fnr[k]
    t = (a - b) / ((a - b) - (c - d))
    return float(a + t * (c - a))


def eer(scores: ScoreSet) -> float:
    return eer_from_curve(det_curve(scores))


def fnr_at_fpr(curve: DetCurve, grid) -> np.ndarray:
    """Lowest fnr the polyline reaches at each fpr grid value."""
    grid = np.asarray(grid, dtype=np.float64)
    out = np.full(grid.shape, np.inf)
    x0, y0 = curve.fpr[:-1], curve.fnr[:-1]
    x1, y1 = curve.fpr[1:], curve.fnr[1:]
    for j, g in enumerate(grid):
        lo, hi = np.minimum(x0, x1), np.maximum(x0, x1)
        on = (lo <= g) & (g <= hi)
        flat = on & (x0 == x1)
        slope = on & (x0 != x1)
        vals = []
        if np.any(flat):
            vals.append(np.minimum(y0[flat], y1[flat]).min())
        if np.any(slope):
            t = (g - x0[slope]) / (x1[slope] - x0[slope])
            vals.append((y0[slope] + t * (y1[slope] - y0[slope])).min())
        out[j] = min(vals)
    return out


@dataclass(frozen=True)
class RunComparison:
    rows: list  # (name, eer) sorted by eer ascending, then name
    dominates: dict  # (a, b) -> True when a's fnr <= b's fnr at every grid fpr

    def format_table(self) -> str:
        width = max([len("run")] + [len(n) for n, _ in self.rows])
        lines = [f"{'run':<{width}}  EER(%)"]
        lines += [f"{name:<{width}}  {100 * value:6.2f}" for name, value in self.rows]
        return "\n".join(lines)


def compare_runs(runs: Mapping[str, Sequence[tuple[str, float, int]]], grid_points: int = 101, tol: float = 1e-12) -> RunComparison:
    """Compare scored runs ``name -> [(id, score, label)]`` over identical test ids."""
    if len(runs) < 2:
        raise EvaluationError("need at least two runs to compare")
    names = list(runs)
    ids = {n: {uid for uid, _, _ in runs[n]} for n in names}
    ref = ids[names[0]]
    for n in names[1:]:
        sym = ref ^ ids[n]
        if sym:
            raise EvaluationError(f"runs {names[0]} and {n} differ in ids: {sorted(sym)}")
    curves = {n: det_curve(ScoreSet.from_pairs((s, l) for _, s, l in runs[n])) for n in names}
    rows = sorted(((n, eer_from_curve(curves[n])) for n in names), key=lambda r: (r[1], r[0]))
    grid = np.linspace(0.0, 1.0, grid_points)
    fnr = {n: fnr_at_fpr(curves[n], grid) for n in names}
    dominates = {(a, b): bool(np.all(fnr[a] <= fnr[b] + tol)) for a in names for b in names if a != b}
    return RunComparison(rows, dominates)


def write_det_csv(curve: DetCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "fnr"])
        for th, x, y in zip(curve.thresholds, curve.fpr, curve.fnr):
            writer.writerow([repr(float(th)), repr(float(x)), repr(float(y))])


def read_det_csv(path) -> DetCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return DetCurve(
        np.array([float(r["threshold"]) for r in rows]),
        np.array([float(r["fpr"]) for r in rows]),
        np.array([float(r["fnr"]) for r in rows]),
    )


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def det_svg(curves: Mapping[str, DetCurve], normal_deviate: bool = False, size: int = 420) -> str:
    """Render DET curves as a standalone SVG (raw error-rate axes unless ``normal_deviate``)."""
    margin = 50
    span = size - 2 * margin
    if normal_deviate:
        nd = NormalDist()
        lo, hi = nd.inv_cdf(0.001), nd.inv_cdf(0.999)

        def axis(v):
            return (nd.inv_cdf(min(max(v, 0.001), 0.999)) - lo) / (hi - lo)

        ticks = [0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999]
    else:

        def axis(v):
            return v

        ticks = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" fill="none" stroke="black"/>',
    ]
    for t in ticks:
        p = axis(t) * span
        parts.append(f'<text x="{margin + p:.1f}" y="{size - margin + 15}" font-size="9" text-anchor="middle">{100 * t:g}</text>')
        parts.append(f'<text x="{margin - 5}" y="{size - margin - p + 3:.1f}" font-size="9" text-anchor="end">{100 * t:g}</text>')
    parts.append(f'<text x="{size / 2}" y="{size - 10}" font-size="11" text-anchor="middle">false positive rate (%)</text>')
    parts.append(
        f'<text x="14" y="{size / 2}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {size / 2})">false negative rate (%)</text>'
    )
    for i, (name, curve) in enumerate(curves.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(
            f"{margin + axis(x) * span:.2f},{size - margin - axis(y) * span:.2f}" for x, y in zip(curve.fpr, curve.fnr)
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{size - margin - 5}" y="{margin + 14 * (i + 1)}" font-size="10" text-anchor="end" fill="{color}">{escape(str(name))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
