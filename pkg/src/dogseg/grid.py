"""Core data model for dynamic occupancy grid maps.

A grid is an ego-centered, row-major raster (row 0 at the top) whose cells
carry an occupancy estimate in ``[0, 1]`` (0 free, 0.5 unknown, 1 occupied),
a mean velocity in m/s, and a 2x2 velocity covariance in (m/s)^2 stored as
``(var_x, var_y, cov_xy)``.  All stored scalars are 32-bit floats; grids are
immutable value objects, so every operation returns a new grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridValidationError
from .validation import (
    PSD_TOL,
    VAR_TOL,
    as_plane,
    check_even_dims,
    check_finite,
    check_same_shape,
    first_violation,
)

#: Occupancy of a cell the sensor knows nothing about.
UNKNOWN_OCC = 0.5

PLANE_NAMES = ("occ", "vx", "vy", "var_x", "var_y", "cov_xy")


@dataclass(frozen=True)
class CellState:
    """State of a single grid cell (scalar view into a :class:`DogGrid`)."""

    occ: float
    vx: float
    vy: float
    var_x: float
    var_y: float
    cov_xy: float

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy], dtype=np.float32)

    @property
    def covariance(self) -> np.ndarray:
        return np.array(
            [[self.var_x, self.cov_xy], [self.cov_xy, self.var_y]], dtype=np.float32
        )


class DogGrid:
    """Immutable dynamic occupancy grid.

    Args:
        occ, vx, vy, var_x, var_y, cov_xy: 2-D arrays of one common shape
            ``(height, width)``; stored as read-only float32 planes.
        cell_size: cell edge length in meters (> 0).
        frame_id: sequence index of the frame this grid came from.
        validate: check structural invariants on construction.  Pass False
            only to build a deliberately invalid grid (e.g. in tests);
            serialization re-validates regardless.
    """

    __slots__ = ("occ", "vx", "vy", "var_x", "var_y", "cov_xy", "cell_size", "frame_id")

    def __init__(
        self,
        occ,
        vx,
        vy,
        var_x,
        var_y,
        cov_xy,
        cell_size: float,
        frame_id: int = 0,
        validate: bool = True,
    ):
        planes = {}
        for name, values in zip(
            PLANE_NAMES, (occ, vx, vy, var_x, var_y, cov_xy)
        ):
            arr = as_plane(values, name)
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            planes[name] = arr
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "cell_size", float(cell_size))
        object.__setattr__(self, "frame_id", int(frame_id))
        check_same_shape({k: v.shape for k, v in planes.items()})
        if validate:
            self.validate()

    def __setattr__(self, name, value):
        raise AttributeError("DogGrid is immutable; build a new grid instead")

    # -- structure ---------------------------------------------------------

    @property
    def height(self) -> int:
        return self.occ.shape[0]

    @property
    def width(self) -> int:
        return self.occ.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.occ.shape

    @property
    def n_cells(self) -> int:
        return self.occ.size

    def validate(self) -> None:
        """Raise :class:`GridValidationError` naming the first bad cell."""
        h, w = self.occ.shape
        check_even_dims(h, w)
        if not self.cell_size > 0:
            raise GridValidationError(f"cell_size must be > 0, got {self.cell_size}")
        for name in PLANE_NAMES:
            check_finite(getattr(self, name), name)
        occ = self.occ
        bad = (occ < 0) | (occ > 1)
        if bad.any():
            i = first_violation(bad)
            raise GridValidationError(
                f"cell {i}: occ={occ.reshape(-1)[i]} outside [0, 1]"
            )
        for name in ("var_x", "var_y"):
            v = getattr(self, name)
            bad = v < -VAR_TOL
            if bad.any():
                i = first_violation(bad)
                raise GridValidationError(
                    f"cell {i}: {name}={v.reshape(-1)[i]} negative beyond tolerance"
                )
        det = (
            self.var_x.astype(np.float64) * self.var_y.astype(np.float64)
            - self.cov_xy.astype(np.float64) ** 2
        )
        bad = det < -PSD_TOL
        if bad.any():
            i = first_violation(bad)
            raise GridValidationError(
                f"cell {i}: covariance not PSD (det={det.reshape(-1)[i]:.3e})"
            )

    # -- access ------------------------------------------------------------

    def cell(self, index: int) -> CellState:
        """Cell state at a row-major index."""
        if not 0 <= index < self.n_cells:
            raise IndexError(f"cell index {index} out of range [0, {self.n_cells})")
        r, c = divmod(index, self.width)
        return CellState(
            float(self.occ[r, c]),
            float(self.vx[r, c]),
            float(self.vy[r, c]),
            float(self.var_x[r, c]),
            float(self.var_y[r, c]),
            float(self.cov_xy[r, c]),
        )

    def planes(self) -> np.ndarray:
        """All six state planes stacked to ``(6, height, width)`` float32."""
        return np.stack([getattr(self, n) for n in PLANE_NAMES])

    def replace(self, **updates) -> "DogGrid":
        """New grid with the given planes (or metadata) swapped out."""
        kwargs = {n: getattr(self, n) for n in PLANE_NAMES}
        kwargs.update(cell_size=self.cell_size, frame_id=self.frame_id)
        kwargs.update(updates)
        return DogGrid(**kwargs)

    # -- comparison --------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, DogGrid):
            return NotImplemented
        if self.shape != other.shape:
            return False
        if self.cell_size != other.cell_size or self.frame_id != other.frame_id:
            return False
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in PLANE_NAMES
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"DogGrid({self.height}x{self.width}, cell_size={self.cell_size}, "
            f"frame_id={self.frame_id})"
        )


class LabelMask:
    """Per-cell binary motion label: False static, True dynamic."""

    __slots__ = ("labels",)

    def __init__(self, labels):
        arr = np.asarray(labels)
        if arr.ndim != 2:
            raise GridValidationError(f"labels must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            uniq = np.unique(arr)
            if not np.isin(uniq, (0, 1)).all():
                raise GridValidationError(
                    f"labels must be binary, found values {uniq[:8]}"
                )
            arr = arr.astype(bool)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LabelMask is immutable; build a new mask instead")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def n_dynamic(self) -> int:
        return int(self.labels.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMask):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.labels, other.labels)

    __hash__ = None

    def __repr__(self) -> str:
        return f"LabelMask({self.shape[0]}x{self.shape[1]}, dynamic={self.n_dynamic})"


def occupied_mask(grid: DogGrid, thresh: float = 0.6) -> np.ndarray:
    """Boolean plane of cells considered occupied: ``occ > thresh`` (strict).

    The strict inequality keeps unknown cells (occ = 0.5) out for every
    threshold >= 0.5.
    """
    if not 0 <= thresh <= 1:
        raise GridValidationError(f"thresh must be in [0, 1], got {thresh}")
    return grid.occ > np.float32(thresh)
