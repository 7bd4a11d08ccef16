"""Dataset assembly: rotation augmentation, splits, class-ratio accounting.

Rotation is the only augmentation.  A frame is rotated about the grid
center in 10-degree steps; cell statistics are resampled bilinearly,
labels nearest-neighbor, and the per-cell velocity vector and covariance
matrix are co-rotated so the physics stays consistent with the image.
Cells rotated in from outside the source extent become unknown.

Splits are assigned per source frame; every rotated copy inherits its
parent's split so no rotation of a test frame ever leaks into training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridValidationError
from .grid import DogGrid, LabelMask
from .io import read_mask

VALID_ANGLES = tuple(range(0, 360, 10))
SPLITS = ("train", "val", "test")

#: (cos, sin) pairs that are exact in floating point
_EXACT_TRIG = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}


def _rotate_stats(planes, c, s):
    """Rotate velocity vectors and covariances in place: v <- Rv, S <- RSR^T."""
    vx, vy = planes[1].copy(), planes[2].copy()
    var_x, var_y, cov = planes[3].copy(), planes[4].copy(), planes[5].copy()
    planes[1] = c * vx - s * vy
    planes[2] = s * vx + c * vy
    planes[3] = c * c * var_x - 2.0 * c * s * cov + s * s * var_y
    planes[4] = s * s * var_x + 2.0 * c * s * cov + c * c * var_y
    planes[5] = c * s * (var_x - var_y) + (c * c - s * s) * cov


def _bilinear_with_fill(plane, r_s, c_s, fill):
    """Sample ``plane`` at fractional (r_s, c_s); outside taps read ``fill``."""
    h, w = plane.shape
    padded = np.full((h + 2, w + 2), fill, dtype=np.float64)
    padded[1:-1, 1:-1] = plane
    # clipping to [-1, h] parks fully-outside samples on the fill ring
    r = np.clip(r_s, -1.0, float(h)) + 1.0
    c = np.clip(c_s, -1.0, float(w)) + 1.0
    r0 = np.floor(r).astype(np.int64)
    c0 = np.floor(c).astype(np.int64)
    fr = r - r0
    fc = c - c0
    r1 = np.minimum(r0 + 1, h + 1)
    c1 = np.minimum(c0 + 1, w + 1)
    return (
        (1.0 - fr) * (1.0 - fc) * padded[r0, c0]
        + (1.0 - fr) * fc * padded[r0, c1]
        + fr * (1.0 - fc) * padded[r1, c0]
        + fr * fc * padded[r1, c1]
    )


def rotate_frame(grid: DogGrid, mask: LabelMask, theta_deg: int):
    """Rotate a labeled frame counter-clockwise about the grid center.

    Returns a new (DogGrid, LabelMask) pair.  Angles must be multiples
    of 10 in [0, 350].  Multiples of 90 use exact index permutations on
    square grids; other angles resample (bilinear for statistics,
    nearest for labels) with unknown fill (occ 0.5, zero statistics)
    outside the source extent.
    """
    theta = float(theta_deg)
    if theta != int(theta) or int(theta) % 10 or not 0 <= theta < 360:
        raise GridValidationError(
            f"rotation must be a multiple of 10 in [0, 350], got {theta_deg}"
        )
    theta = int(theta)
    if mask.shape != grid.shape:
        raise GridValidationError(
            f"mask shape {mask.shape} does not match grid {grid.shape}"
        )
    if theta == 0:
        return grid, mask
    h, w = grid.shape
    planes = list(grid.planes().astype(np.float64))
    labels = mask.labels

    if theta in _EXACT_TRIG and (theta == 180 or h == w):
        c, s = _EXACT_TRIG[theta]
        if theta == 180:
            planes = [p[::-1, ::-1] for p in planes]
            labels = labels[::-1, ::-1]
        elif theta == 90:
            # out[r, c] = in[c, W-1-r]
            planes = [p[:, ::-1].T for p in planes]
            labels = labels[:, ::-1].T
        else:  # 270
            planes = [p[::-1, :].T for p in planes]
            labels = labels[::-1, :].T
        planes = [np.ascontiguousarray(p) for p in planes]
        _rotate_stats(planes, c, s)
        out = DogGrid(*planes, cell_size=grid.cell_size, frame_id=grid.frame_id)
        return out, LabelMask(np.ascontiguousarray(labels))

    rad = np.deg2rad(theta)
    c, s = float(np.cos(rad)), float(np.sin(rad))
    cr, cc = (h - 1) / 2.0, (w - 1) / 2.0
    rr, co = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    dr = rr - cr
    dc = co - cc
    # source position of each output cell (inverse image rotation)
    r_s = cr + dr * c + dc * s
    c_s = cc - dr * s + dc * c

    fills = (0.5, 0.0, 0.0, 0.0, 0.0, 0.0)
    planes = [
        _bilinear_with_fill(p, r_s, c_s, fill) for p, fill in zip(planes, fills)
    ]
    _rotate_stats(planes, c, s)

    rn = np.rint(r_s).astype(np.int64)
    cn = np.rint(c_s).astype(np.int64)
    inside = (rn >= 0) & (rn < h) & (cn >= 0) & (cn < w)
    out_labels = np.zeros((h, w), dtype=bool)
    out_labels[inside] = labels[rn[inside], cn[inside]]

    out = DogGrid(*planes, cell_size=grid.cell_size, frame_id=grid.frame_id)
    return out, LabelMask(out_labels)


# ---------------------------------------------------------------------------
# Split index


@dataclass(frozen=True)
class IndexRow:
    path: str
    mask_path: str
    split: str
    rotation_deg: int


@dataclass(frozen=True)
class DatasetIndex:
    """Ordered list of (frame, mask, split, rotation) entries.

    Rotated entries reference the source file; the rotation is applied
    on load.  All rotations of one source frame share its split.
    """

    rows: tuple[IndexRow, ...]

    def select(self, split: str, rotation_deg: int | None = None) -> list[IndexRow]:
        if split not in SPLITS:
            raise GridValidationError(f"unknown split {split!r}; expected {SPLITS}")
        return [
            r for r in self.rows
            if r.split == split
            and (rotation_deg is None or r.rotation_deg == rotation_deg)
        ]

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "mask_path", "split", "rotation_deg"])
            for row in self.rows:
                writer.writerow([row.path, row.mask_path, row.split, row.rotation_deg])

    @classmethod
    def load(cls, path) -> "DatasetIndex":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                rows.append(IndexRow(rec["path"], rec["mask_path"], rec["split"],
                                     int(rec["rotation_deg"])))
        return cls(tuple(rows))


def make_split(
    entries,
    ratios=(0.8, 0.1, 0.1),
    seed: int = 0,
    rotations=VALID_ANGLES,
) -> DatasetIndex:
    """Deterministically split (frame_path, mask_path) pairs.

    Validation and test each get ``max(1, round(ratio * n))`` source
    frames; the rest train.  Each source frame then contributes one row
    per rotation, all in its own split.
    """
    entries = list(entries)
    n = len(entries)
    if n < 3:
        raise GridValidationError(f"need at least 3 frames to split, got {n}")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise GridValidationError(f"ratios must be 3 non-negatives summing to 1, got {ratios}")
    for theta in rotations:
        if theta not in VALID_ANGLES:
            raise GridValidationError(f"invalid rotation {theta}")
    n_val = max(1, round(ratios[1] * n))
    n_test = max(1, round(ratios[2] * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise GridValidationError(
            f"split of {n} frames leaves no training data (val {n_val}, test {n_test})"
        )
    order = np.random.default_rng(seed).permutation(n)
    split_of = {}
    for pos, src in enumerate(order):
        if pos < n_train:
            split_of[src] = "train"
        elif pos < n_train + n_val:
            split_of[src] = "val"
        else:
            split_of[src] = "test"
    rows = []
    for i, (path, mask_path) in enumerate(entries):
        for theta in rotations:
            rows.append(IndexRow(str(path), str(mask_path), split_of[i], int(theta)))
    return DatasetIndex(tuple(rows))


def class_ratio(index: DatasetIndex, split: str, root=None):
    """(dynamic cells, total cells, dynamic fraction) over a split's
    un-rotated masks."""
    rows = index.select(split, rotation_deg=0)
    if not rows:
        raise GridValidationError(f"split {split!r} has no rotation-0 entries")
    dyn = 0
    total = 0
    for row in rows:
        path = Path(root) / row.mask_path if root else Path(row.mask_path)
        mask = read_mask(path)
        dyn += int(mask.n_dynamic)
        total += mask.labels.size
    return dyn, total, dyn / total
