"""Evaluation kit: gated ROC/EER curves, point metrics, sweeps, timing.

All classification metrics are computed over gated cells only: cells
whose occupancy exceeds the gate (default 0.6).  Free and unknown cells
carry no velocity evidence and are excluded by definition.

The equal error rate is located on the ROC by linear interpolation
between the two thresholds bracketing fpr = 1 - tpr and reported both
as an error fraction (``eer``) and as accuracy-at-EER (higher better).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .dataset import VALID_ANGLES, rotate_frame
from .errors import DegenerateCurveError, GridValidationError
from .grid import DogGrid, LabelMask, occupied_mask


@dataclass(frozen=True)
class RocCurve:
    """ROC triples ordered by ascending threshold plus EER/AUC summary.

    ``eer`` is the error fraction at the equal-error point;
    ``accuracy_at_eer`` is its complement as a percentage-style
    fraction.  fpr and tpr are monotone non-increasing along the
    stored threshold order.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    eer: float
    auc: float

    def __post_init__(self):
        for name in ("thresholds", "fpr", "tpr"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not 0.0 <= self.eer <= 1.0:
            raise GridValidationError(f"eer must be in [0, 1], got {self.eer}")
        if not 0.0 <= self.auc <= 1.0 + 1e-12:
            raise GridValidationError(f"auc must be in [0, 1], got {self.auc}")

    @property
    def accuracy_at_eer(self) -> float:
        return 1.0 - self.eer


def _interp_eer(fpr, tpr):
    """Error rate where fpr crosses 1 - tpr, linearly interpolated."""
    g = fpr + tpr - 1.0
    k = int(np.argmax(g <= 0.0))
    if g[k - 1] == g[k]:
        return float(fpr[k])
    t = g[k - 1] / (g[k - 1] - g[k])
    return float(fpr[k - 1] + t * (fpr[k] - fpr[k - 1]))


def roc_from_cells(scores, truth) -> RocCurve:
    """Curve over already-gated cells (1-D scores and boolean truth)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(truth, dtype=bool).ravel()
    if s.shape != y.shape:
        raise GridValidationError(
            f"scores ({s.shape}) and truth ({y.shape}) must match"
        )
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateCurveError(
            f"gated cells contain {n_pos} positives and {n_neg} negatives; "
            "both classes are required for a curve"
        )
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    pos_cum = np.concatenate([[0], np.cumsum(y[order])])
    neg_cum = np.concatenate([[0], np.cumsum(~y[order])])
    vals = np.unique(s_sorted)
    # dynamic iff score > t: elements strictly above t are past this index
    idx = np.searchsorted(s_sorted, vals, side="right")
    tp = n_pos - pos_cum[idx]
    fp = n_neg - neg_cum[idx]
    thresholds = np.concatenate([[-np.inf], vals, [np.inf]])
    tpr = np.concatenate([[1.0], tp / n_pos, [0.0]])
    fpr = np.concatenate([[1.0], fp / n_neg, [0.0]])
    eer = _interp_eer(fpr, tpr)
    auc = float(np.trapezoid(tpr[::-1], fpr[::-1]))
    return RocCurve(thresholds, fpr, tpr, eer=eer, auc=auc)


def roc(scores, truth: LabelMask, grid: DogGrid, occ_gate: float = 0.6) -> RocCurve:
    """ROC over occupied cells, thresholded as ``dynamic iff score > t``.

    Thresholds sweep the distinct gated score values plus -inf/+inf
    sentinels.  Raises DegenerateCurveError when the gate contains no
    positive or no negative cells.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != grid.shape or truth.shape != grid.shape:
        raise GridValidationError(
            f"scores {scores.shape}, truth {truth.shape} and grid {grid.shape} "
            "must share dims"
        )
    gate = occupied_mask(grid, occ_gate)
    return roc_from_cells(scores[gate], truth.labels[gate])


def pooled_roc(model, frames, occ_gate: float = 0.6) -> RocCurve:
    """One curve over the gated cells of many labeled frames.

    ``model`` needs ``decision_function(grid)`` or ``predict_proba(grid)``
    returning a per-cell score map; ``frames`` yields objects with
    ``grid`` and ``mask`` attributes (or (grid, mask) pairs).
    """
    score_fn = getattr(model, "decision_function", None) or model.predict_proba
    scores, truths = [], []
    for item in frames:
        grid, mask = (item.grid, item.mask) if hasattr(item, "grid") else item[:2]
        gate = occupied_mask(grid, occ_gate)
        scores.append(np.asarray(score_fn(grid), dtype=np.float64)[gate])
        truths.append(mask.labels[gate])
    return roc_from_cells(np.concatenate(scores), np.concatenate(truths))


@dataclass(frozen=True)
class MetricRow:
    """Point metrics over gated cells for one evaluation."""

    precision: float
    recall: float
    accuracy: float
    rotation_deg: int = 0
    model_id: str = ""

    def __post_init__(self):
        for name in ("precision", "recall", "accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GridValidationError(f"{name} must be in [0, 1], got {v}")


def _counts(pred: LabelMask, truth: LabelMask, grid: DogGrid, occ_gate: float):
    if pred.shape != grid.shape or truth.shape != grid.shape:
        raise GridValidationError(
            f"pred {pred.shape}, truth {truth.shape} and grid {grid.shape} "
            "must share dims"
        )
    gate = occupied_mask(grid, occ_gate)
    p = pred.labels[gate]
    t = truth.labels[gate]
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    tn = int((~p & ~t).sum())
    return tp, fp, fn, tn


def _row_from_counts(tp, fp, fn, tn, rotation_deg=0, model_id="") -> MetricRow:
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    gated = tp + fp + fn + tn
    accuracy = (tp + tn) / gated if gated else 1.0
    return MetricRow(precision, recall, accuracy, rotation_deg, model_id)


def pr_accuracy(pred: LabelMask, truth: LabelMask, grid: DogGrid,
                occ_gate: float = 0.6, rotation_deg: int = 0,
                model_id: str = "") -> MetricRow:
    """Precision/recall/accuracy over gated cells; 0/0 ratios count as 1
    (no claims made, none wrong)."""
    return _row_from_counts(*_counts(pred, truth, grid, occ_gate),
                            rotation_deg=rotation_deg, model_id=model_id)


def rotation_sweep(model, frame, config_id: int | None = None,
                   occ_gate: float = 0.6, angles=VALID_ANGLES) -> list[MetricRow]:
    """Evaluate one labeled frame under every test rotation.

    ``model`` needs ``predict(grid) -> LabelMask`` (already refined) and
    a ``model_id``.  ``config_id`` is a consistency check against models
    that encode internally.
    """
    if config_id is not None:
        own = getattr(model, "config_id", None)
        if own is not None and own != config_id:
            raise GridValidationError(
                f"model encodes with config {own}, sweep requested config {config_id}"
            )
    model_id = getattr(model, "model_id", type(model).__name__)
    rows = []
    for theta in angles:
        grid, mask = rotate_frame(frame.grid, frame.mask, theta)
        pred = model.predict(grid)
        rows.append(pr_accuracy(pred, mask, grid, occ_gate,
                                rotation_deg=theta, model_id=model_id))
    return rows


# ---------------------------------------------------------------------------
# Benchmarking


@dataclass(frozen=True)
class BenchRow:
    stage: str
    median_ms: float
    p95_ms: float


def bench(stages, frames, repetitions: int = 13, warmup: int = 3) -> list[BenchRow]:
    """Time a chain of pipeline stages over a set of frames.

    ``stages`` is an ordered list of (name, fn); each fn consumes the
    previous stage's output (the first consumes a frame).  One
    repetition runs every frame through the whole chain; per-stage wall
    time is summed over frames.  The first ``warmup`` repetitions are
    discarded; median and p95 are computed over the rest.
    """
    if repetitions < 10:
        raise GridValidationError(f"need at least 10 repetitions, got {repetitions}")
    if repetitions <= warmup:
        raise GridValidationError(
            f"repetitions ({repetitions}) must exceed warmup ({warmup})"
        )
    frames = list(frames)
    if not stages or not frames:
        raise GridValidationError("need at least one stage and one frame")
    times = np.zeros((repetitions, len(stages)), dtype=np.float64)
    for rep in range(repetitions):
        for item in frames:
            x = item
            for j, (_, fn) in enumerate(stages):
                t0 = time.perf_counter()
                x = fn(x)
                times[rep, j] += time.perf_counter() - t0
    kept = times[warmup:] * 1e3
    return [
        BenchRow(name, float(np.median(kept[:, j])),
                 float(np.percentile(kept[:, j], 95)))
        for j, (name, _) in enumerate(stages)
    ]


# ---------------------------------------------------------------------------
# CSV / SVG emitters


def write_curve_csv(path, curve: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])


def read_curve_csv(path) -> RocCurve:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [(float(r["threshold"]), float(r["fpr"]), float(r["tpr"]))
                for r in reader]
    t, f, r = (np.array(col) for col in zip(*rows))
    # summary stats are recomputed from the stored triples
    return RocCurve(t, f, r, eer=_interp_eer(f, r),
                    auc=float(np.trapezoid(r[::-1], f[::-1])))


def write_rows_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle", "precision", "recall", "accuracy", "model_id"])
        for row in rows:
            writer.writerow([row.rotation_deg, repr(row.precision),
                             repr(row.recall), repr(row.accuracy), row.model_id])


def write_bench_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "median_ms", "p95_ms"])
        for row in rows:
            writer.writerow([row.stage, repr(row.median_ms), repr(row.p95_ms)])


def write_curve_svg(path, curve: RocCurve, title: str = "ROC") -> None:
    """Standalone SVG of the ROC polyline (fpr vs tpr) with axes."""
    width, height, margin = 480, 360, 48
    plot_w, plot_h = width - 2 * margin, height - 2 * margin

    def sx(v):
        return margin + v * plot_w

    def sy(v):
        return height - margin - v * plot_h

    pts = " ".join(
        f"{sx(f):.2f},{sy(t):.2f}" for f, t in zip(curve.fpr, curve.tpr)
    )
    diag = f"{sx(0):.2f},{sy(0):.2f} {sx(1):.2f},{sy(1):.2f}"
    label = (f"{title}  AUC={curve.auc:.3f}  "
             f"acc@EER={100 * curve.accuracy_at_eer:.1f}%")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline points="{diag}" fill="none" stroke="#bbbbbb" stroke-dasharray="4 4"/>',
        f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="2"/>',
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{margin - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{label}</text>',
        f'<text x="{width / 2:.0f}" y="{height - 10}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12">false positive rate</text>',
        f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {height / 2:.0f})">true positive rate</text>',
    ]
    for v in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{sx(v):.0f}" y="{height - margin + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{v:g}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{sy(v) + 4:.0f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{v:g}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
