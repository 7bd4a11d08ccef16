"""Velocity-statistics baseline: threshold the per-cell Mahalanobis norm.

A cell is called dynamic when the Mahalanobis norm of its mean velocity
under its velocity covariance exceeds a threshold tau (strictly).  No
occupancy gating happens here; evaluation and refinement apply the
occupancy gate downstream.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .encoding import mahalanobis
from .grid import DogGrid, LabelMask


def baseline_scores(grid: DogGrid) -> np.ndarray:
    """Per-cell Mahalanobis norm of the mean velocity, shape (H, W)."""
    return np.asarray(
        mahalanobis(grid.vx, grid.vy, grid.var_x, grid.var_y, grid.cov_xy)
    )


def baseline_classify(grid: DogGrid, tau: float = 1.0) -> LabelMask:
    """Dynamic iff the Mahalanobis norm strictly exceeds ``tau``."""
    return LabelMask(baseline_scores(grid) > tau)


class MahalanobisBaseline(BaseEstimator):
    """Thresholded Mahalanobis-norm detector with the predictor interface.

    Parameters:
        tau: decision threshold on the per-cell score.

    The model is parameter-free: ``fit`` validates and returns ``self`` so
    the estimator composes with pipelines and the shared evaluation tools.
    """

    model_id = "baseline"

    def __init__(self, tau: float = 1.0):
        self.tau = tau

    def fit(self, X=None, y=None):
        if not np.isfinite(self.tau):
            raise ValueError(f"tau must be finite, got {self.tau}")
        return self

    def decision_function(self, X):
        """Score map(s) for a grid or an iterable of grids."""
        if isinstance(X, DogGrid):
            return baseline_scores(X)
        return [baseline_scores(g) for g in X]

    def predict(self, X):
        """Label mask(s) at the configured threshold."""
        if isinstance(X, DogGrid):
            return baseline_classify(X, self.tau)
        return [baseline_classify(g, self.tau) for g in X]
