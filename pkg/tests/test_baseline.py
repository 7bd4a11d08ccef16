"""Tests for the Mahalanobis-threshold baseline."""

import numpy as np
import pytest
from sklearn.base import clone

from dogseg.baseline import MahalanobisBaseline, baseline_classify, baseline_scores

from conftest import make_grid, random_grid


def solve_oracle(grid):
    """Per-cell m via np.linalg.solve on explicit 2x2 matrices."""
    v = np.stack([grid.vx, grid.vy], axis=-1).astype(np.float64)
    cov = np.empty(grid.shape + (2, 2))
    cov[..., 0, 0] = grid.var_x
    cov[..., 1, 1] = grid.var_y
    cov[..., 0, 1] = cov[..., 1, 0] = grid.cov_xy
    cov[..., 0, 0] += 1e-6
    cov[..., 1, 1] += 1e-6
    sol = np.linalg.solve(cov, v[..., None])[..., 0]
    return np.sqrt((v * sol).sum(-1))


class TestBaselineScores:
    def test_matches_linear_solve_oracle(self, rng):
        grid = random_grid(rng, 16, 16)
        np.testing.assert_allclose(baseline_scores(grid), solve_oracle(grid),
                                   rtol=1e-6)

    def test_zero_velocity_scores_zero(self):
        grid = make_grid(4, 4, var_x=3.0, var_y=0.5, cov_xy=0.2)
        assert (baseline_scores(grid) == 0).all()

    def test_shape_matches_grid(self, rng):
        grid = random_grid(rng, 6, 10)
        assert baseline_scores(grid).shape == (6, 10)


class TestBaselineClassify:
    def test_threshold_strictly_greater(self):
        # v=3, var=9-eps: m = 3/sqrt(9) = 1 exactly up to f32 rounding;
        # use clearly-separated cells instead of a knife edge
        vx = np.array([[0.5, 5.0], [0.0, 1.1]])
        grid = make_grid(2, 2, vx=vx, var_x=1.0 - 1e-6, var_y=1.0)
        mask = baseline_classify(grid, tau=1.0)
        assert mask.labels.tolist() == [[False, True], [False, True]]

    def test_tau_zero_marks_any_motion(self):
        grid = make_grid(2, 2, vx=np.array([[0.0, 0.01], [0.0, 0.0]]))
        mask = baseline_classify(grid, tau=0.0)
        # zero-velocity cells score exactly 0, which is not > 0
        assert mask.labels.tolist() == [[False, True], [False, False]]

    def test_higher_tau_is_subset(self, rng):
        grid = random_grid(rng, 12, 12)
        low = baseline_classify(grid, tau=0.5).labels
        high = baseline_classify(grid, tau=2.0).labels
        assert not (high & ~low).any()


class TestMahalanobisBaselineEstimator:
    def test_model_id(self):
        assert MahalanobisBaseline().model_id == "baseline"

    def test_fit_returns_self_and_validates(self):
        model = MahalanobisBaseline()
        assert model.fit() is model
        with pytest.raises(ValueError, match="tau"):
            MahalanobisBaseline(tau=float("nan")).fit()

    def test_decision_function_single_and_list(self, rng):
        grid = random_grid(rng, 8, 8)
        model = MahalanobisBaseline().fit()
        single = model.decision_function(grid)
        np.testing.assert_array_equal(single, baseline_scores(grid))
        batch = model.decision_function([grid, grid])
        assert isinstance(batch, list) and len(batch) == 2
        np.testing.assert_array_equal(batch[0], single)

    def test_predict_uses_configured_tau(self, rng):
        grid = random_grid(rng, 8, 8)
        model = MahalanobisBaseline(tau=2.5).fit()
        assert model.predict(grid) == baseline_classify(grid, tau=2.5)
        masks = model.predict([grid, grid])
        assert masks[0] == masks[1] == baseline_classify(grid, tau=2.5)

    def test_sklearn_clone_round_trip(self):
        model = MahalanobisBaseline(tau=1.7)
        cloned = clone(model)
        assert cloned is not model
        assert cloned.get_params() == {"tau": 1.7}
