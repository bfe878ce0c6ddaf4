"""Synthetic ground truth: heightfield terrain with per-cell semantics"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Set, Tuple

import numpy as np

from ..errors import BadConfig
from ..geometry.pointcloud import PointCloud

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


@dataclass
class Heightfield:
    """Elevation grid indexed ``[ix, iy]``; origin is the min corner of cell (0, 0)"""

    elevation: np.ndarray
    resolution: float = 2.0
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.elevation = np.asarray(self.elevation, dtype=float)
        if self.elevation.ndim != 2 or min(self.elevation.shape) < 1:
            raise BadConfig("terrain elevation must be a non-empty 2D grid")
        if not np.all(np.isfinite(self.elevation)):
            raise BadConfig("terrain elevation must be finite")
        if self.resolution <= 0:
            raise BadConfig("terrain resolution must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def width_cells(self) -> int:
        return self.elevation.shape[0]

    @property
    def height_cells(self) -> int:
        return self.elevation.shape[1]

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) in meters"""

        x0, y0 = self.origin
        return (
            x0,
            y0,
            x0 + self.width_cells * self.resolution,
            y0 + self.height_cells * self.resolution,
        )

    def cell_of(self, x, y):
        """Integer cell indices of world points and an in-bounds mask"""

        ix = np.floor((np.asarray(x) - self.origin[0]) / self.resolution)
        iy = np.floor((np.asarray(y) - self.origin[1]) / self.resolution)
        inside = (
            (ix >= 0)
            & (ix < self.width_cells)
            & (iy >= 0)
            & (iy < self.height_cells)
        )
        return ix.astype(int), iy.astype(int), inside

    def cell_center(self, ix, iy):
        return (
            self.origin[0] + (np.asarray(ix) + 0.5) * self.resolution,
            self.origin[1] + (np.asarray(iy) + 0.5) * self.resolution,
        )

    def elevation_at(self, x, y, outside: float = -np.inf) -> np.ndarray:
        """Piecewise-constant elevation lookup; ``outside`` off the grid"""

        ix, iy, inside = self.cell_of(x, y)
        out = np.full(np.shape(ix), outside, dtype=float)
        out[inside] = self.elevation[ix[inside], iy[inside]]
        return out


@dataclass
class SemanticWorld:
    terrain: Heightfield
    labels: np.ndarray
    dictionary: Dict[int, np.ndarray]
    goals: Dict[str, Set[Cell]] = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.shape != self.terrain.elevation.shape:
            raise BadConfig(
                f"labels shape {self.labels.shape} does not match terrain "
                f"shape {self.terrain.elevation.shape}"
            )
        self.dictionary = {
            int(k): np.asarray(v, dtype=float)
            for k, v in self.dictionary.items()
        }
        dims = {v.shape for v in self.dictionary.values()}
        if len(dims) != 1:
            raise BadConfig("dictionary vectors must share one dimension")
        if self.feature_dim < 2:
            raise BadConfig("feature dimension must be at least 2")
        for class_id, vec in self.dictionary.items():
            if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
                raise BadConfig(f"dictionary vector {class_id} is not unit norm")
        missing = set(np.unique(self.labels).tolist()) - set(self.dictionary)
        if missing:
            raise BadConfig(f"labels without dictionary entry: {sorted(missing)}")
        self.goals = {
            str(k): {(int(c[0]), int(c[1])) for c in v}
            for k, v in self.goals.items()
        }
        nx, ny = self.labels.shape
        for task_id, cells in self.goals.items():
            for ix, iy in cells:
                if not (0 <= ix < nx and 0 <= iy < ny):
                    raise BadConfig(
                        f"goal cell {(ix, iy)} of task {task_id!r} is outside "
                        "the terrain"
                    )

        ## dense lookup table: class id -> feature row
        self._max_class = max(self.dictionary)
        self._table = np.zeros((self._max_class + 1, self.feature_dim))
        for class_id, vec in self.dictionary.items():
            self._table[class_id] = vec

    @property
    def feature_dim(self) -> int:
        return next(iter(self.dictionary.values())).shape[0]

    def features_of(self, class_ids: np.ndarray) -> np.ndarray:
        return self._table[np.asarray(class_ids, dtype=int)]

    def goal_points(self, task_id: str) -> np.ndarray:
        """World (x, y) of the goal cell centers of a task"""

        cells = sorted(self.goals[task_id])
        if not cells:
            return np.zeros((0, 2))
        ix, iy = np.array(cells).T
        return np.stack(self.terrain.cell_center(ix, iy), axis=1)


def class_color(class_ids) -> np.ndarray:
    """Scalar pseudo-color in [0, 1) used to weight ICP correspondences"""

    return np.mod(np.asarray(class_ids, dtype=float) * 0.6180339887, 1.0)


def make_dictionary(
    class_ids: Iterable[int], dim: int = 16, seed: int = 0
) -> Dict[int, np.ndarray]:
    """Random unit feature per class, orthonormal when there are few enough classes"""

    class_ids = sorted(int(c) for c in class_ids)
    if dim < 2:
        raise BadConfig("feature dimension must be at least 2")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dim, len(class_ids)))
    if len(class_ids) <= dim:
        q, r = np.linalg.qr(gauss)
        # fix signs so the result does not depend on the QR implementation
        vectors = q * np.sign(np.diag(r))
    else:
        vectors = gauss / np.linalg.norm(gauss, axis=0)
    return {c: vectors[:, k].copy() for k, c in enumerate(class_ids)}


def task_embedding(
    dictionary: Mapping[int, np.ndarray], mix: Mapping[int, float]
) -> np.ndarray:
    """Normalized weighted sum of class features"""

    vec = sum(float(w) * dictionary[int(c)] for c, w in mix.items())
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise BadConfig("task embedding mix cancels to zero")
    return vec / norm


def ground_truth_cloud(world: SemanticWorld, stride: int = 1) -> PointCloud:
    """Cell-center surface points of the terrain"""

    terrain = world.terrain
    ix, iy = np.meshgrid(
        np.arange(0, terrain.width_cells, stride),
        np.arange(0, terrain.height_cells, stride),
        indexing="ij",
    )
    x, y = terrain.cell_center(ix.ravel(), iy.ravel())
    z = terrain.elevation[ix.ravel(), iy.ravel()]
    colors = class_color(world.labels[ix.ravel(), iy.ravel()])
    return PointCloud(np.stack([x, y, z], axis=1), colors)
