import numpy as np
import pytest

from aerial_explore.geometry.transforms import nadir_pose
from aerial_explore.mapping.grids import GridSpec, OccupancyGrid
from aerial_explore.world.camera import CameraModel, NoiseSpec, render_frame
from aerial_explore.world.procedural import build_procedural_world


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def camera():
    return CameraModel()


@pytest.fixture
def quiet():
    """Noise-free sensors"""
    return NoiseSpec()


@pytest.fixture
def flat_world():
    # 120 m square at 2 m cells, a single goal cell near the far corner
    return build_procedural_world(
        "flat", {"size": 120.0, "goals": {"task1": (100.0, 100.0)}}, seed=0
    )


@pytest.fixture
def grid_spec():
    return GridSpec((0.0, 0.0), 1.0, (40, 40))


@pytest.fixture
def empty_occ(grid_spec):
    return OccupancyGrid(grid_spec)


@pytest.fixture
def line_frames(flat_world, camera, quiet):
    """Renderer of nadir frames along +x at 40 m, ids counting from ``first_id``"""

    def render(n, x0=40.0, y=60.0, spacing=2.0, first_id=0):
        return [
            render_frame(
                flat_world,
                nadir_pose(x0 + k * spacing, y, 40.0),
                camera,
                quiet,
                time=float(k),
                frame_id=first_id + k,
            )
            for k in range(n)
        ]

    return render
