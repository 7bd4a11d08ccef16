"""Per-cell velocity statistics and the five 3-channel grid encodings.

Channel conventions: encoded images store their channels in (blue, green,
red) order; the PPM writer permutes to RGB.  Every channel is affinely
mapped into ``[0, 1]`` after clipping, so the maps are invertible inside
their clip bounds:

====== ==================== ================================= =================================
config blue                 green                             red
====== ==================== ================================= =================================
1      occupancy            vx clipped to +-20 m/s            vy clipped to +-20 m/s
2      occupancy            vx / sqrt(var_x + eps), +-3       vy / sqrt(var_y + eps), +-3
3      2*(max(occ,.5)-.5)   as config 2                       as config 2
4      occupancy            |v| clipped to [0, 20] m/s        var_x + 2 cov_xy + var_y, [0, 100]
5      occupancy            |v| clipped to [0, 20] m/s        Mahalanobis m, [0, 10]
====== ==================== ================================= =================================

Config 3 folds freespace into unknown (both map to 0), keeping only the
degree of occupiedness above 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import GridValidationError
from .grid import DogGrid
from .validation import VAR_TOL

#: Regularizer added to variances before inversion/normalization (m^2/s^2).
EPS = 1e-6

CONFIG_IDS = (1, 2, 3, 4, 5)

#: Clip bounds shared by the channel maps.
RAW_VEL_CLIP = 20.0
NORM_VEL_CLIP = 3.0
SPEED_CLIP = 20.0
VAR_CLIP = 100.0
MAHA_CLIP = 10.0


def mahalanobis(vx, vy, var_x, var_y, cov_xy, eps: float = EPS):
    """Mahalanobis norm of the mean velocity under its 2x2 covariance.

    Computes ``sqrt(v^T (Sigma + eps*I)^-1 v)`` elementwise over broadcast
    inputs.  Zero velocity gives exactly 0; ``eps`` keeps zero-variance
    cells finite.

    Raises:
        GridValidationError: a variance is negative beyond tolerance, or
            the regularized covariance is not invertible (non-PSD input).
    """
    vx = np.asarray(vx, dtype=np.float64)
    vy = np.asarray(vy, dtype=np.float64)
    var_x = np.asarray(var_x, dtype=np.float64)
    var_y = np.asarray(var_y, dtype=np.float64)
    cov_xy = np.asarray(cov_xy, dtype=np.float64)
    for name, v in (("var_x", var_x), ("var_y", var_y)):
        if (v < -VAR_TOL).any():
            raise GridValidationError(
                f"{name} negative beyond tolerance: min {v.min()}"
            )
    a = np.maximum(var_x, 0.0) + eps
    d = np.maximum(var_y, 0.0) + eps
    det = a * d - cov_xy**2
    if (det <= 0).any():
        raise GridValidationError(
            f"covariance not invertible after regularization: min det {det.min():.3e}"
        )
    m2 = (vx * vx * d - 2.0 * vx * vy * cov_xy + vy * vy * a) / det
    m = np.sqrt(np.maximum(m2, 0.0))
    return m if m.ndim else float(m)


def normalized_velocity(v, var, eps: float = EPS):
    """Velocity in units of its standard deviation, clipped to +-3."""
    v = np.asarray(v, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    z = np.clip(v / np.sqrt(np.maximum(var, 0.0) + eps), -NORM_VEL_CLIP, NORM_VEL_CLIP)
    return z if z.ndim else float(z)


def overall_variance(var_x, cov_xy, var_y):
    """Variance of the velocity-component sum: ``var_x + 2*cov_xy + var_y``."""
    out = (
        np.asarray(var_x, dtype=np.float64)
        + 2.0 * np.asarray(cov_xy, dtype=np.float64)
        + np.asarray(var_y, dtype=np.float64)
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EncodedImage:
    """3-channel float image in [0, 1], channels in (B, G, R) order."""

    config_id: int
    channels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise GridValidationError(
                f"channels must be (3, H, W), got shape {arr.shape}"
            )
        if self.config_id not in CONFIG_IDS:
            raise GridValidationError(f"config_id must be in {CONFIG_IDS}")
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise GridValidationError(
                f"channel values outside [0, 1]: range [{arr.min()}, {arr.max()}]"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1:]

    def to_rgb8(self) -> np.ndarray:
        """8-bit (H, W, 3) view in RGB order, for PPM export."""
        bgr = np.round(self.channels * 255.0).astype(np.uint8)
        return np.moveaxis(bgr[::-1], 0, -1).copy()


def _unit(x, lo: float, hi: float) -> np.ndarray:
    return (np.clip(x, lo, hi) - lo) / (hi - lo)


def encode(grid: DogGrid, config_id: int) -> EncodedImage:
    """Encode a grid into one of the five 3-channel input images."""
    if config_id not in CONFIG_IDS:
        raise GridValidationError(
            f"config_id must be one of {CONFIG_IDS}, got {config_id!r}"
        )
    occ = grid.occ.astype(np.float64)
    if config_id == 3:
        blue = 2.0 * (np.maximum(occ, 0.5) - 0.5)
    else:
        blue = occ
    if config_id == 1:
        green = _unit(grid.vx, -RAW_VEL_CLIP, RAW_VEL_CLIP)
        red = _unit(grid.vy, -RAW_VEL_CLIP, RAW_VEL_CLIP)
    elif config_id in (2, 3):
        green = _unit(
            normalized_velocity(grid.vx, grid.var_x), -NORM_VEL_CLIP, NORM_VEL_CLIP
        )
        red = _unit(
            normalized_velocity(grid.vy, grid.var_y), -NORM_VEL_CLIP, NORM_VEL_CLIP
        )
    else:
        speed = np.hypot(
            grid.vx.astype(np.float64), grid.vy.astype(np.float64)
        )
        green = _unit(speed, 0.0, SPEED_CLIP)
        if config_id == 4:
            red = _unit(
                overall_variance(grid.var_x, grid.cov_xy, grid.var_y), 0.0, VAR_CLIP
            )
        else:
            red = _unit(
                mahalanobis(grid.vx, grid.vy, grid.var_x, grid.var_y, grid.cov_xy),
                0.0,
                MAHA_CLIP,
            )
    return EncodedImage(config_id, np.stack([blue, green, red]).astype(np.float32))


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all components in [0, 1]."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    rgb = np.empty(h.shape + (3,), dtype=np.float64)
    for k, (r, g, b) in enumerate(
        [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)]
    ):
        sel = i == k
        rgb[sel, 0] = r[sel]
        rgb[sel, 1] = g[sel]
        rgb[sel, 2] = b[sel]
    return rgb


def render_dog(grid: DogGrid) -> np.ndarray:
    """Debug rendering: velocity direction as hue, speed as saturation,
    occupancy as brightness.  Returns an (H, W, 3) uint8 RGB image."""
    vx = grid.vx.astype(np.float64)
    vy = grid.vy.astype(np.float64)
    angle = np.arctan2(vy, vx)
    hue = np.mod(angle, 2.0 * np.pi) / (2.0 * np.pi)
    sat = np.minimum(np.hypot(vx, vy) / RAW_VEL_CLIP, 1.0)
    val = grid.occ.astype(np.float64)
    rgb = _hsv_to_rgb(hue, sat, val)
    return np.round(rgb * 255.0).astype(np.uint8)


class GridImageEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer turning grids into 3-channel encoded images.

    Parameters:
        config_id: which of the five channel configurations to apply.

    ``transform`` accepts a single :class:`DogGrid` or an iterable of them
    and returns an :class:`EncodedImage` or a list correspondingly.
    """

    def __init__(self, config_id: int = 2):
        self.config_id = config_id

    def fit(self, X=None, y=None):
        if self.config_id not in CONFIG_IDS:
            raise GridValidationError(
                f"config_id must be one of {CONFIG_IDS}, got {self.config_id!r}"
            )
        return self

    def transform(self, X):
        self.fit()
        if isinstance(X, DogGrid):
            return encode(X, self.config_id)
        return [encode(g, self.config_id) for g in X]
