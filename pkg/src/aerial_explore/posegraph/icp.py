"""Point-to-point ICP with open3d, seeded by a color-aware correspondence stage.

When ``color_weight`` is positive, correspondences are searched in
(x, y, z, w * color) space and each step's rigid fit comes from open3d's
point-to-point estimator. open3d's ``registration_icp`` then refines the
result on geometry alone.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import open3d as o3d
from scipy.spatial import KDTree

from ..errors import BadConfig, EmptyCloud, NoCorrespondences
from ..geometry.pointcloud import PointCloud
from ..geometry.transforms import transform_points

logger = logging.getLogger(__name__)

MIN_POINTS = 10

registration = o3d.pipelines.registration


@dataclass
class IcpConfig:
    max_iter: int = 30
    max_corr_dist: float = 2.0
    color_weight: float = 0.5
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise BadConfig("icp max_iter must be at least 1")
        if self.max_corr_dist <= 0:
            raise BadConfig("icp max_corr_dist must be positive")
        if self.color_weight < 0:
            raise BadConfig("icp color_weight must be non-negative")


class IcpResult(NamedTuple):
    transform: np.ndarray
    rmse: float
    fitness: float


def _augmented(points, colors, color_weight):
    return np.hstack([points, color_weight * colors[:, None]])


def _color_stage(source, target, src3d, tgt3d, T, config):
    estimator = registration.TransformationEstimationPointToPoint()
    tree = KDTree(_augmented(target.points, target.colors, config.color_weight))
    previous = np.inf
    for _ in range(config.max_iter):
        moved = transform_points(T, source.points)
        dist, idx = tree.query(
            _augmented(moved, source.colors, config.color_weight),
            distance_upper_bound=config.max_corr_dist,
        )
        inlier = np.flatnonzero(np.isfinite(dist))
        if len(inlier) < 3:
            break
        corres = o3d.utility.Vector2iVector(np.stack([inlier, idx[inlier]], axis=1))
        T = np.asarray(estimator.compute_transformation(src3d, tgt3d, corres))
        rmse = float(np.sqrt(np.mean(dist[inlier] ** 2)))
        if abs(previous - rmse) < config.tolerance:
            break
        previous = rmse
    return T


def icp_align(
    source: PointCloud,
    target: PointCloud,
    init: np.ndarray = None,
    config: IcpConfig = None,
) -> IcpResult:
    """Align ``source`` onto ``target``; the transform maps source points into the target frame"""

    config = config or IcpConfig()
    if len(source) < MIN_POINTS or len(target) < MIN_POINTS:
        raise EmptyCloud(
            f"ICP needs {MIN_POINTS}+ points per cloud, got "
            f"{len(source)} and {len(target)}"
        )
    T = np.eye(4) if init is None else np.array(init, dtype=float)
    src3d = source.to_open3d()
    tgt3d = target.to_open3d()

    start = registration.evaluate_registration(src3d, tgt3d, config.max_corr_dist, T)
    if start.fitness == 0.0:
        raise NoCorrespondences(
            f"no source point within {config.max_corr_dist} m of the target"
        )
    if config.color_weight > 0.0:
        T = _color_stage(source, target, src3d, tgt3d, T, config)

    result = registration.registration_icp(
        src3d,
        tgt3d,
        config.max_corr_dist,
        T,
        registration.TransformationEstimationPointToPoint(),
        registration.ICPConvergenceCriteria(
            relative_fitness=config.tolerance,
            relative_rmse=config.tolerance,
            max_iteration=config.max_iter,
        ),
    )
    if result.fitness == 0.0:
        raise NoCorrespondences(
            f"no source point within {config.max_corr_dist} m of the target"
        )
    transform = np.array(result.transformation, dtype=float)
    logger.debug(
        "icp: rmse %.4f m, fitness %.3f", result.inlier_rmse, result.fitness
    )
    return IcpResult(transform, float(result.inlier_rmse), float(result.fitness))
