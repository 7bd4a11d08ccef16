"""Automatic label generation: cluster, hull, rasterize.

Candidate cells (occupied and fast in the Mahalanobis sense) are
clustered with DBSCAN; each cluster's convex hull is rasterized back
onto the grid and the union of the filled polygons becomes the label
mask.  Sparse candidates (noise) are dropped, which suppresses isolated
clutter cells.

Point convention: a cell (row, col) enters geometry as (x, y) = (col,
row).  Polygons are counter-clockwise with respect to these axes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .baseline import baseline_scores
from .errors import GridValidationError
from .grid import DogGrid, LabelMask

NOISE = -1


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering; returns a cluster id per point (-1 noise).

    Euclidean metric; neighborhoods use distance <= eps and include the
    point itself.  Deterministic: core points are expanded in ascending
    index order, so cluster ids are ranked by each cluster's lowest core
    point, and a border point reachable from several clusters joins the
    lowest-id one.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GridValidationError(f"points must be (N, 2), got {pts.shape}")
    if eps <= 0:
        raise GridValidationError(f"eps must be > 0, got {eps}")
    if min_pts < 1:
        raise GridValidationError(f"min_pts must be >= 1, got {min_pts}")
    n = pts.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    reach = d2 <= eps * eps
    core = reach.sum(axis=1) >= min_pts
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = [seed]
        while queue:
            i = queue.pop(0)
            if not core[i]:
                continue
            for j in np.flatnonzero(reach[i]):
                if labels[j] == NOISE:
                    labels[j] = cluster
                    queue.append(int(j))
        cluster += 1
    return labels


@dataclass(frozen=True)
class Polygon:
    """Convex polygon; fewer than 3 vertices marks a degenerate hull."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise GridValidationError("polygon needs at least 1 vertex")
        if len(set(self.vertices)) != len(self.vertices):
            raise GridValidationError("polygon has repeated vertices")

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> Polygon:
    """Monotone-chain convex hull, counter-clockwise, collinear dropped.

    1 or 2 distinct input points give a degenerate polygon that
    ``rasterize`` treats as a disk/capsule of radius 0.5 cells.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise GridValidationError(f"need a non-empty (N, 2) point array, got {pts.shape}")
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    if len(uniq) <= 2:
        return Polygon(tuple(uniq))
    lower = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    # collinear inputs leave 2 vertices: a degenerate hull by design
    hull = lower[:-1] + upper[:-1]
    return Polygon(tuple(hull))


def _dist_to_segment(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    norm2 = dx * dx + dy * dy
    if norm2 == 0.0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / norm2, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def rasterize(poly: Polygon, dims) -> LabelMask:
    """Fill a polygon onto a grid: a cell is dynamic iff its center lies
    inside or on the boundary (even-odd rule, boundary inclusive).

    Degenerate polygons (1-2 vertices) fill cells within 0.5 cells of
    the point/segment.
    """
    h, w = int(dims[0]), int(dims[1])
    if h <= 0 or w <= 0:
        raise GridValidationError(f"dims must be positive, got {dims}")
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    verts = poly.vertices
    if poly.degenerate:
        if len(verts) == 1:
            dist = np.hypot(xs - verts[0][0], ys - verts[0][1])
        else:
            dist = _dist_to_segment(xs, ys, verts[0], verts[1])
        return LabelMask(dist <= 0.5)

    inside = np.zeros((h, w), dtype=bool)
    boundary = np.zeros((h, w), dtype=bool)
    k = len(verts)
    for i in range(k):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % k]
        # even-odd ray crossing: horizontal ray toward +x
        straddles = (ay > ys) != (by > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_hit = ax + (ys - ay) * (bx - ax) / (by - ay)
        inside ^= straddles & (xs < np.where(straddles, x_hit, np.inf))
        on = (
            (np.abs((bx - ax) * (ys - ay) - (by - ay) * (xs - ax)) <= 1e-9)
            & (xs >= min(ax, bx) - 1e-9)
            & (xs <= max(ax, bx) + 1e-9)
            & (ys >= min(ay, by) - 1e-9)
            & (ys <= max(ay, by) + 1e-9)
        )
        boundary |= on
    return LabelMask(inside | boundary)


def autolabel_polygons(
    grid: DogGrid,
    m_tau: float = 1.0,
    occ_tau: float = 0.6,
    eps: float = 2.0,
    min_pts: int = 4,
) -> list[Polygon]:
    """Cluster dynamic candidates and hull each cluster.

    Candidates are cells with occ > occ_tau and Mahalanobis velocity
    score > m_tau, in row-major order.  Returns hulls sorted by cluster
    id; noise points contribute nothing.
    """
    m = baseline_scores(grid)
    cand = (grid.occ > occ_tau) & (m > m_tau)
    rows, cols = np.nonzero(cand)
    if rows.size == 0:
        return []
    pts = np.stack([cols, rows], axis=1).astype(np.float64)  # (x, y)
    labels = dbscan(pts, eps, min_pts)
    return [
        convex_hull(pts[labels == cid]) for cid in range(labels.max() + 1)
    ]


def autolabel_pipeline(
    grid: DogGrid,
    m_tau: float = 1.0,
    occ_tau: float = 0.6,
    eps: float = 2.0,
    min_pts: int = 4,
) -> LabelMask:
    """Full labeling pass: candidates -> DBSCAN -> hulls -> filled mask."""
    polys = autolabel_polygons(grid, m_tau, occ_tau, eps, min_pts)
    out = np.zeros(grid.shape, dtype=bool)
    for poly in polys:
        out |= rasterize(poly, grid.shape).labels
    return LabelMask(out)


def write_polygons(path, polygons) -> None:
    """CSV export: polygon_id, vertex_id, x (col), y (row)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["polygon_id", "vertex_id", "x", "y"])
        for pid, poly in enumerate(polygons):
            for vid, (x, y) in enumerate(poly.vertices):
                writer.writerow([pid, vid, repr(float(x)), repr(float(y))])
