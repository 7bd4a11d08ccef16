"""Grid and mask value objects: structure, validation, immutability."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import make_grid, random_grid
from dogseg.errors import GridValidationError
from dogseg.grid import CellState, DogGrid, LabelMask, occupied_mask


class TestCellState:
    def test_velocity_vector(self):
        c = CellState(0.9, 1.0, -2.0, 0.5, 0.25, 0.1)
        assert c.velocity.tolist() == [1.0, -2.0]
        assert c.velocity.dtype == np.float32

    def test_covariance_matrix(self):
        c = CellState(0.9, 1.0, -2.0, 0.5, 0.25, 0.1)
        expected = np.array([[0.5, 0.1], [0.1, 0.25]], dtype=np.float32)
        assert np.array_equal(c.covariance, expected)


class TestDogGridStructure:
    def test_planes_stored_float32_readonly(self):
        g = make_grid(occ=0.7)
        assert g.occ.dtype == np.float32
        assert not g.occ.flags.writeable
        with pytest.raises(ValueError):
            g.occ[0, 0] = 0.0

    def test_immutable_attributes(self):
        g = make_grid()
        with pytest.raises(AttributeError):
            g.cell_size = 1.0

    def test_shape_properties(self):
        g = make_grid(h=6, w=10)
        assert (g.height, g.width) == (6, 10)
        assert g.shape == (6, 10)
        assert g.n_cells == 60

    def test_planes_stacking_order(self):
        g = make_grid(occ=0.25, vx=1.0, vy=2.0, var_x=3.0, var_y=4.0, cov_xy=0.5)
        p = g.planes()
        assert p.shape == (6, 4, 4)
        assert p[0, 0, 0] == np.float32(0.25)
        assert p[1, 0, 0] == 1.0 and p[2, 0, 0] == 2.0
        assert p[3, 0, 0] == 3.0 and p[4, 0, 0] == 4.0 and p[5, 0, 0] == 0.5

    def test_cell_roundtrip_and_range(self):
        g = make_grid(h=2, w=4, vx=np.arange(8, dtype=np.float32).reshape(2, 4))
        assert g.cell(5).vx == 5.0  # row 1, col 1
        with pytest.raises(IndexError):
            g.cell(8)
        with pytest.raises(IndexError):
            g.cell(-1)

    def test_replace_swaps_one_plane(self):
        g = make_grid(occ=0.5)
        g2 = g.replace(occ=np.full((4, 4), 0.9, dtype=np.float32))
        assert g2.occ[0, 0] == np.float32(0.9)
        assert np.array_equal(g2.vx, g.vx)
        assert g2.cell_size == g.cell_size

    def test_equality(self):
        a = make_grid(occ=0.7)
        assert a == make_grid(occ=0.7)
        assert a != make_grid(occ=0.8)
        assert a != make_grid(occ=0.7, frame_id=3)
        assert (a == 42) is NotImplemented or not (a == 42)

    def test_repr_mentions_dims(self):
        assert "4x4" in repr(make_grid())


class TestDogGridValidation:
    def test_odd_dims_rejected(self):
        with pytest.raises(GridValidationError, match="even"):
            make_grid(h=3, w=4)

    def test_mismatched_plane_shapes_rejected(self):
        with pytest.raises(GridValidationError):
            DogGrid(
                occ=np.zeros((4, 4)), vx=np.zeros((4, 6)), vy=np.zeros((4, 4)),
                var_x=np.ones((4, 4)), var_y=np.ones((4, 4)),
                cov_xy=np.zeros((4, 4)), cell_size=0.25,
            )

    def test_occ_out_of_range_names_cell(self):
        occ = np.full((4, 4), 0.5, dtype=np.float32)
        occ[1, 2] = 1.5
        with pytest.raises(GridValidationError, match="cell 6"):
            make_grid(occ=occ)

    def test_negative_variance_rejected(self):
        var = np.ones((4, 4), dtype=np.float32)
        var[0, 0] = -0.5
        with pytest.raises(GridValidationError, match="var_x"):
            make_grid(var_x=var)

    def test_non_psd_covariance_rejected(self):
        with pytest.raises(GridValidationError, match="PSD"):
            make_grid(var_x=1.0, var_y=1.0, cov_xy=2.0)

    def test_non_finite_rejected(self):
        vx = np.zeros((4, 4), dtype=np.float32)
        vx[0, 1] = np.nan
        with pytest.raises(GridValidationError, match="vx"):
            make_grid(vx=vx)

    def test_bad_cell_size_rejected(self):
        with pytest.raises(GridValidationError, match="cell_size"):
            make_grid(cell_size=0.0)

    def test_validate_false_defers_checks(self):
        occ = np.full((4, 4), 2.0, dtype=np.float32)
        g = DogGrid(occ, occ * 0, occ * 0, occ * 0 + 1, occ * 0 + 1, occ * 0,
                    cell_size=0.25, validate=False)
        with pytest.raises(GridValidationError):
            g.validate()

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_random_valid_grids_validate(self, seed):
        g = random_grid(np.random.default_rng(seed))
        g.validate()
        assert g == g.replace()


class TestLabelMask:
    def test_from_bool(self):
        m = LabelMask(np.eye(4, dtype=bool))
        assert m.n_dynamic == 4
        assert m.shape == (4, 4)

    def test_from_01_ints(self):
        m = LabelMask(np.array([[0, 1], [1, 0]]))
        assert m.labels.dtype == np.bool_
        assert m.n_dynamic == 2

    def test_non_binary_rejected(self):
        with pytest.raises(GridValidationError, match="binary"):
            LabelMask(np.array([[0, 2]]))

    def test_non_2d_rejected(self):
        with pytest.raises(GridValidationError, match="2-D"):
            LabelMask(np.zeros(4, dtype=bool))

    def test_immutable(self):
        m = LabelMask(np.zeros((2, 2), dtype=bool))
        with pytest.raises(AttributeError):
            m.labels = None
        with pytest.raises(ValueError):
            m.labels[0, 0] = True

    def test_equality(self):
        a = LabelMask(np.eye(2, dtype=bool))
        assert a == LabelMask(np.eye(2, dtype=bool))
        assert a != LabelMask(np.zeros((2, 2), dtype=bool))


class TestOccupiedMask:
    def test_strict_inequality(self):
        g = make_grid(occ=np.array([[0.6, 0.61], [0.59, 1.0]], dtype=np.float32),
                      h=2, w=2)
        got = occupied_mask(g, 0.6)
        assert got.tolist() == [[False, True], [False, True]]

    def test_unknown_cells_excluded_at_default(self):
        g = make_grid(occ=0.5)
        assert not occupied_mask(g).any()

    def test_threshold_validation(self):
        with pytest.raises(GridValidationError, match="thresh"):
            occupied_mask(make_grid(), 1.5)

    @settings(max_examples=30, deadline=None)
    @given(
        occ=hnp.arrays(np.float32, (4, 4), elements=st.floats(0, 1, width=32)),
        thresh=st.floats(0, 1),
    )
    def test_matches_elementwise_comparison(self, occ, thresh):
        g = make_grid(occ=occ)
        assert np.array_equal(occupied_mask(g, thresh),
                              g.occ > np.float32(thresh))
