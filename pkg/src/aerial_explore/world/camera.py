"""Nadir camera sensing and GPS emulation"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import BadConfig, PoseBelowTerrain
from ..geometry.pointcloud import PointCloud
from ..geometry.transforms import transform_points
from .terrain import SemanticWorld, class_color

logger = logging.getLogger(__name__)

NO_RETURN = np.nan
BISECTION_STEPS = 24


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics; pixel (row v, col u) looks along (u-cx)/fx, (v-cy)/fy, 1"""

    fx: float = 64.0
    fy: float = 64.0
    cx: float = 31.5
    cy: float = 31.5
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise BadConfig("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise BadConfig("principal point must lie inside the image")

    def ray_directions(self) -> np.ndarray:
        """(height, width, 3) camera-frame rays with unit optical-axis component"""

        v, u = np.meshgrid(
            np.arange(self.height), np.arange(self.width), indexing="ij"
        )
        return np.stack(
            [
                (u - self.cx) / self.fx,
                (v - self.cy) / self.fy,
                np.ones_like(u, dtype=float),
            ],
            axis=-1,
        )

    def footprint_half_width(self, altitude: float) -> float:
        """Half-width of the smaller footprint side at nadir over flat ground"""

        half_x = min(self.cx + 0.5, self.width - self.cx - 0.5) / self.fx
        half_y = min(self.cy + 0.5, self.height - self.cy - 0.5) / self.fy
        return float(altitude * min(half_x, half_y))


@dataclass
class NoiseSpec:
    """Noise levels of the emulated sensors; owns the scenario's random stream"""

    gps_sigma: float = 0.0
    depth_sigma_rel: float = 0.0
    submap_scale_sigma: float = 0.0
    rel_rot_sigma: float = 0.0
    rel_trans_sigma_rel: float = 0.0
    f3dr_scale: float = 1.0
    seed: int = 0
    _rng: Optional[np.random.Generator] = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for name in (
            "gps_sigma",
            "depth_sigma_rel",
            "submap_scale_sigma",
            "rel_rot_sigma",
            "rel_trans_sigma_rel",
        ):
            if getattr(self, name) < 0:
                raise BadConfig(f"{name} must be non-negative")
        if self.f3dr_scale <= 0:
            raise BadConfig("f3dr_scale must be positive")

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.seed)
        return self._rng


@dataclass
class SensorFrame:
    true_pose: np.ndarray
    depth: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    time: float = 0.0
    frame_id: int = 0

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


def render_frame(
    world: SemanticWorld,
    pose: np.ndarray,
    camera: CameraModel,
    noise: NoiseSpec,
    time: float = 0.0,
    frame_id: int = 0,
) -> SensorFrame:
    """Ray-cast a depth and feature image of the heightfield"""

    terrain = world.terrain
    R = pose[:3, :3]
    if abs(np.linalg.det(R) - 1.0) > 1e-6 or not np.allclose(
        R.T @ R, np.eye(3), atol=1e-6
    ):
        raise BadConfig("pose rotation is not orthonormal")
    cam = pose[:3, 3]
    ground = float(terrain.elevation_at(cam[0], cam[1], outside=-np.inf))
    if cam[2] <= ground:
        raise PoseBelowTerrain(
            f"camera at z={cam[2]:.2f} m is not above terrain ({ground:.2f} m)"
        )

    rays_cam = camera.ray_directions().reshape(-1, 3)
    rays = rays_cam @ R.T
    n_pix = len(rays)
    depth = np.full(n_pix, NO_RETURN)
    downward = rays[:, 2] < -1e-9

    z_max = float(terrain.elevation.max())
    z_min = float(terrain.elevation.min())
    dz = np.where(downward, -rays[:, 2], 1.0)
    t_lo = np.maximum((cam[2] - z_max) / dz, 0.0)
    t_hi = (cam[2] - z_min) / dz
    horiz = np.linalg.norm(rays[:, :2], axis=1)

    ## march each ray at half-cell horizontal steps
    span = (t_hi - t_lo) * horiz / (0.5 * terrain.resolution)
    n_steps = int(np.clip(np.ceil(span[downward].max(initial=0.0)), 0, 4096))
    k = np.arange(n_steps + 1) / max(n_steps, 1)
    t = t_lo[:, None] + (t_hi - t_lo)[:, None] * k[None, :]

    def height_gap(tt):
        x = cam[0] + tt * rays[:, 0, None]
        y = cam[1] + tt * rays[:, 1, None]
        z = cam[2] + tt * rays[:, 2, None]
        return z - terrain.elevation_at(x, y, outside=-np.inf)

    below = (height_gap(t) <= 0) & downward[:, None]
    hit = below.any(axis=1)
    first = np.argmax(below, axis=1)
    idx = np.nonzero(hit)[0]

    hi = t[idx, first[idx]]
    lo = np.where(first[idx] > 0, t[idx, np.maximum(first[idx] - 1, 0)], hi)
    sub_rays = rays[idx]

    def gap_at(tt):
        x = cam[0] + tt * sub_rays[:, 0]
        y = cam[1] + tt * sub_rays[:, 1]
        z = cam[2] + tt * sub_rays[:, 2]
        return z - terrain.elevation_at(x, y, outside=-np.inf)

    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        is_below = gap_at(mid) <= 0
        hi = np.where(is_below, mid, hi)
        lo = np.where(is_below, lo, mid)

    ## snap onto the top face of the hit cell when the ray crosses it
    hx = cam[0] + hi * sub_rays[:, 0]
    hy = cam[1] + hi * sub_rays[:, 1]
    elev = terrain.elevation_at(hx, hy, outside=-np.inf)
    t_plane = (cam[2] - elev) / -sub_rays[:, 2]
    on_top = (t_plane >= lo - 1e-9) & (t_plane <= hi + 1e-9)
    t_hit = np.where(on_top, t_plane, hi)
    if np.any(elev >= cam[2]):
        raise PoseBelowTerrain("terrain under the footprint reaches the camera")
    depth[idx] = t_hit

    if noise.depth_sigma_rel > 0:
        eps = noise.rng.normal(0.0, noise.depth_sigma_rel, size=len(idx))
        depth[idx] *= 1.0 + eps

    labels = np.full(n_pix, -1, dtype=int)
    hx = cam[0] + t_hit * sub_rays[:, 0]
    hy = cam[1] + t_hit * sub_rays[:, 1]
    ix, iy, inside = terrain.cell_of(hx, hy)
    labels[idx[inside]] = world.labels[ix[inside], iy[inside]]
    depth[idx[~inside]] = NO_RETURN

    features = np.zeros((n_pix, world.feature_dim))
    seen = labels >= 0
    features[seen] = world.features_of(labels[seen])

    shape = (camera.height, camera.width)
    return SensorFrame(
        true_pose=np.array(pose, dtype=float),
        depth=depth.reshape(shape),
        features=features.reshape(shape + (world.feature_dim,)),
        labels=labels.reshape(shape),
        time=time,
        frame_id=frame_id,
    )


def sample_gps(true_position, noise: NoiseSpec) -> np.ndarray:
    """Position-only GPS fix: truth plus isotropic Gaussian noise"""

    position = np.asarray(true_position, dtype=float).reshape(3)
    if noise.gps_sigma == 0:
        return position.copy()
    return position + noise.rng.normal(0.0, noise.gps_sigma, size=3)


def backproject(
    frame: SensorFrame,
    camera: CameraModel,
    pose: np.ndarray = None,
    stride: int = 1,
    depth: np.ndarray = None,
) -> PointCloud:
    """Points of the valid depth pixels, in the camera frame or through ``pose``"""

    depth = frame.depth if depth is None else depth
    rays = camera.ray_directions()[::stride, ::stride].reshape(-1, 3)
    d = depth[::stride, ::stride].reshape(-1)
    labels = frame.labels[::stride, ::stride].reshape(-1)
    valid = np.isfinite(d)
    points = rays[valid] * d[valid, None]
    if pose is not None:
        points = transform_points(pose, points)
    return PointCloud(points, class_color(labels[valid]))
