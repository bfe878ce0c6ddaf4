"""2D known/unknown occupancy and EMA-fused per-cell feature grids"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..errors import BadConfig, DegenerateBlend
from ..geometry.transforms import transform_points
from ..world.camera import CameraModel, SensorFrame

logger = logging.getLogger(__name__)

UNKNOWN = 0
KNOWN = 1
POSE_SOURCES = ("ground_truth", "slam")


@dataclass
class MappingConfig:
    resolution: float = 2.0
    alpha: float = 0.3
    feature_stride: int = 4
    pose_source: str = "ground_truth"

    def __post_init__(self):
        if self.resolution <= 0:
            raise BadConfig("grid resolution must be positive")
        if not 0 < self.alpha <= 1:
            raise BadConfig("EMA alpha must lie in (0, 1]")
        if self.feature_stride < 1:
            raise BadConfig("feature_stride must be at least 1")
        if self.pose_source not in POSE_SOURCES:
            raise BadConfig(
                f"pose_source must be one of {POSE_SOURCES}, got {self.pose_source!r}"
            )


@dataclass(frozen=True)
class GridSpec:
    """Cell (ix, iy) covers [origin + i*res, origin + (i+1)*res) on each axis"""

    origin: Tuple[float, float]
    resolution: float
    dims: Tuple[int, int]

    def __post_init__(self):
        if self.resolution <= 0:
            raise BadConfig("grid resolution must be positive")
        if self.dims[0] < 1 or self.dims[1] < 1:
            raise BadConfig("grid must have at least one cell")

    @classmethod
    def from_bounds(cls, bounds, resolution: float) -> "GridSpec":
        xmin, ymin, xmax, ymax = bounds
        dims = (
            max(int(np.ceil((xmax - xmin) / resolution - 1e-9)), 1),
            max(int(np.ceil((ymax - ymin) / resolution - 1e-9)), 1),
        )
        return cls((float(xmin), float(ymin)), float(resolution), dims)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (
            x0,
            y0,
            x0 + self.dims[0] * self.resolution,
            y0 + self.dims[1] * self.resolution,
        )

    def cell_of(self, x, y):
        ix = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(int)
        iy = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(int)
        inside = (ix >= 0) & (ix < self.dims[0]) & (iy >= 0) & (iy < self.dims[1])
        return ix, iy, inside

    def cell_center(self, ix, iy):
        return (
            self.origin[0] + (np.asarray(ix) + 0.5) * self.resolution,
            self.origin[1] + (np.asarray(iy) + 0.5) * self.resolution,
        )

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays of shape ``dims``"""

        ix, iy = np.meshgrid(
            np.arange(self.dims[0]), np.arange(self.dims[1]), indexing="ij"
        )
        return self.cell_center(ix, iy)


@dataclass
class ChangeBBox:
    min_index: Tuple[int, int] = (0, 0)
    max_index: Tuple[int, int] = (-1, -1)
    empty: bool = True

    @classmethod
    def full(cls, spec: GridSpec) -> "ChangeBBox":
        return cls((0, 0), (spec.dims[0] - 1, spec.dims[1] - 1), False)

    @classmethod
    def of_cells(cls, ix: np.ndarray, iy: np.ndarray) -> "ChangeBBox":
        if len(ix) == 0:
            return cls()
        return cls(
            (int(ix.min()), int(iy.min())), (int(ix.max()), int(iy.max())), False
        )

    def union(self, other: "ChangeBBox") -> "ChangeBBox":
        if self.empty:
            return ChangeBBox(other.min_index, other.max_index, other.empty)
        if other.empty:
            return ChangeBBox(self.min_index, self.max_index, self.empty)
        return ChangeBBox(
            (
                min(self.min_index[0], other.min_index[0]),
                min(self.min_index[1], other.min_index[1]),
            ),
            (
                max(self.max_index[0], other.max_index[0]),
                max(self.max_index[1], other.max_index[1]),
            ),
            False,
        )

    def inflated(self, margin: int, dims: Tuple[int, int]) -> "ChangeBBox":
        if self.empty:
            return ChangeBBox()
        return ChangeBBox(
            (max(self.min_index[0] - margin, 0), max(self.min_index[1] - margin, 0)),
            (
                min(self.max_index[0] + margin, dims[0] - 1),
                min(self.max_index[1] + margin, dims[1] - 1),
            ),
            False,
        )

    def slices(self) -> Tuple[slice, slice]:
        if self.empty:
            return slice(0, 0), slice(0, 0)
        return (
            slice(self.min_index[0], self.max_index[0] + 1),
            slice(self.min_index[1], self.max_index[1] + 1),
        )

    def mask(self, dims: Tuple[int, int]) -> np.ndarray:
        out = np.zeros(dims, dtype=bool)
        out[self.slices()] = True
        return out

    def contains(self, ix, iy):
        if self.empty:
            return np.zeros(np.shape(ix), dtype=bool)
        return (
            (np.asarray(ix) >= self.min_index[0])
            & (np.asarray(ix) <= self.max_index[0])
            & (np.asarray(iy) >= self.min_index[1])
            & (np.asarray(iy) <= self.max_index[1])
        )


@dataclass
class OccupancyGrid:
    spec: GridSpec
    state: np.ndarray = None
    pending: ChangeBBox = field(default_factory=ChangeBBox)

    def __post_init__(self):
        if self.state is None:
            self.state = np.full(self.spec.dims, UNKNOWN, dtype=np.uint8)
        if self.state.shape != tuple(self.spec.dims):
            raise BadConfig("occupancy state does not match the grid spec")

    @property
    def known(self) -> np.ndarray:
        return self.state == KNOWN

    def known_fraction(self, mask: np.ndarray = None) -> float:
        known = self.known if mask is None else self.known[mask]
        return float(known.mean()) if known.size else 0.0

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            self.spec,
            self.state.copy(),
            ChangeBBox(self.pending.min_index, self.pending.max_index, self.pending.empty),
        )


@dataclass
class FeatureGrid:
    spec: GridSpec
    dim: int
    alpha: float = 0.3
    feature: np.ndarray = None
    count: np.ndarray = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise BadConfig("EMA alpha must lie in (0, 1]")
        if self.feature is None:
            self.feature = np.zeros(tuple(self.spec.dims) + (self.dim,))
        if self.count is None:
            self.count = np.zeros(self.spec.dims, dtype=int)

    @property
    def observed(self) -> np.ndarray:
        return self.count > 0

    def copy(self) -> "FeatureGrid":
        return FeatureGrid(
            self.spec, self.dim, self.alpha, self.feature.copy(), self.count.copy()
        )


def ema_update(
    f_old: Optional[np.ndarray], f_new: np.ndarray, alpha: float, strict: bool = False
) -> np.ndarray:
    """Blend a new unit feature into a stored one and renormalize.

    ``f_old`` of None (or the zero vector) means no previous observation. A
    blend that cancels to zero returns ``f_new``, or raises DegenerateBlend
    when ``strict`` is set.
    """

    if not 0 < alpha <= 1:
        raise BadConfig("EMA alpha must lie in (0, 1]")
    f_new = np.asarray(f_new, dtype=float)
    if f_old is None or not np.any(f_old):
        return f_new.copy()
    blend = (1.0 - alpha) * np.asarray(f_old, dtype=float) + alpha * f_new
    norm = np.linalg.norm(blend)
    if norm < 1e-12:
        if strict:
            raise DegenerateBlend("EMA blend cancelled to the zero vector")
        logger.debug("degenerate EMA blend, keeping the new observation")
        return f_new.copy()
    return blend / norm


def _blend_rows(old, new, fresh, alpha):
    out = (1.0 - alpha) * old + alpha * new
    norm = np.linalg.norm(out, axis=1)
    cancelled = norm < 1e-12
    out = out / np.where(cancelled, 1.0, norm)[:, None]
    use_new = fresh | cancelled
    out[use_new] = new[use_new]
    if np.any(cancelled & ~fresh):
        logger.debug("%d degenerate EMA blends", int(np.sum(cancelled & ~fresh)))
    return out


def fuse_features(feat: FeatureGrid, ix, iy, vectors) -> None:
    """Sequential EMA of ``vectors`` into their cells, in the given order"""

    remaining = np.arange(len(ix))
    while len(remaining):
        ## one observation per cell per round keeps the blend sequential
        flat = ix[remaining] * feat.spec.dims[1] + iy[remaining]
        _, first = np.unique(flat, return_index=True)
        take = remaining[np.sort(first)]
        cx, cy = ix[take], iy[take]
        fresh = feat.count[cx, cy] == 0
        feat.feature[cx, cy] = _blend_rows(
            feat.feature[cx, cy], vectors[take], fresh, feat.alpha
        )
        feat.count[cx, cy] += 1
        keep = np.ones(len(remaining), dtype=bool)
        keep[np.sort(first)] = False
        remaining = remaining[keep]


def integrate_frame(
    occ: OccupancyGrid,
    feat: Optional[FeatureGrid],
    pose: np.ndarray,
    frame: SensorFrame,
    camera: CameraModel = None,
    feature_stride: int = 4,
) -> ChangeBBox:
    """Mark the cells under valid depth pixels known and fuse their features"""

    camera = camera or CameraModel()
    depth = frame.depth
    valid = np.isfinite(depth)
    if not valid.any():
        return ChangeBBox()

    rays = camera.ray_directions()
    points = transform_points(pose, rays[valid] * depth[valid, None])
    ix, iy, inside = occ.spec.cell_of(points[:, 0], points[:, 1])
    ix, iy = ix[inside], iy[inside]
    occ.state[ix, iy] = KNOWN
    box = ChangeBBox.of_cells(ix, iy)

    if feat is not None:
        rows, cols = np.nonzero(valid)
        sub = (rows % feature_stride == 0) & (cols % feature_stride == 0)
        sub &= inside
        fx, fy, _ = occ.spec.cell_of(points[sub, 0], points[sub, 1])
        fuse_features(feat, fx, fy, frame.features[rows[sub], cols[sub]])

    occ.pending = occ.pending.union(box)
    return box


def take_change_bbox(grid: OccupancyGrid) -> ChangeBBox:
    """Return the accumulated change box and reset it"""

    box = grid.pending
    grid.pending = ChangeBBox()
    return box
