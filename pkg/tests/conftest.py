"""Shared fixtures, grid factories, and the acceptance summary hook."""

import numpy as np
import pytest

from dogseg.grid import DogGrid


def make_grid(h=4, w=4, cell_size=0.25, frame_id=0, **planes):
    """Small all-zero grid with selected planes overridden.

    Plane overrides accept scalars (broadcast) or full (h, w) arrays.
    """
    full = {}
    defaults = dict(occ=0.5, vx=0.0, vy=0.0, var_x=1.0, var_y=1.0, cov_xy=0.0)
    for name, default in defaults.items():
        v = planes.get(name, default)
        full[name] = np.broadcast_to(np.asarray(v, dtype=np.float32), (h, w))
    return DogGrid(cell_size=cell_size, frame_id=frame_id, **full)


def random_grid(rng, h=8, w=8, cell_size=0.25, frame_id=0, max_speed=20.0):
    """Random structurally valid grid: occ in [0,1], PSD covariances."""
    occ = rng.uniform(0.0, 1.0, (h, w))
    vx = rng.uniform(-max_speed, max_speed, (h, w))
    vy = rng.uniform(-max_speed, max_speed, (h, w))
    var_x = rng.uniform(0.05, 30.0, (h, w))
    var_y = rng.uniform(0.05, 30.0, (h, w))
    # |cov| strictly below sqrt(var_x var_y) keeps the matrix PSD in f32
    cov_xy = rng.uniform(-0.9, 0.9, (h, w)) * np.sqrt(var_x * var_y)
    return DogGrid(occ, vx, vy, var_x, var_y, cov_xy,
                   cell_size=cell_size, frame_id=frame_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------------------
# Acceptance criteria reporting: tests in test_acceptance.py record one
# verdict per criterion; a summary section prints them after the run.


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture(scope="session")
def criteria(request):
    """Mutable registry: criterion number -> (passed, message)."""
    return request.config._criteria


def record(criteria, number, passed, message):
    criteria[number] = (bool(passed), message)
    assert passed, f"criterion {number}: {message}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = getattr(config, "_criteria", {})
    if not entries:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(entries):
        passed, message = entries[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number:2d}: {message}")
