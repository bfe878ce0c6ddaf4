"""Writers for clouds, grids and frontier clusters"""

import logging
from pathlib import Path
from typing import Iterable, Tuple

import numpy as np
import open3d as o3d
import tifffile

from ..geometry.pointcloud import PointCloud
from ..mapping.grids import FeatureGrid, GridSpec, OccupancyGrid
from ..taskinfo.frontiers import FrontierCluster
from ..taskinfo.relevancy import RelevancyGrid
from ..world.terrain import Heightfield

logger = logging.getLogger(__name__)

GRID_MAGIC = "AEGRID"


def write_ply(cloud: PointCloud, path) -> bool:
    """Binary PLY through open3d; the scalar color is stored as 8-bit grey RGB

    Returns False and writes nothing for an empty cloud.
    """

    if len(cloud) == 0:
        logger.warning("not writing %s: the cloud is empty", path)
        return False
    if not o3d.io.write_point_cloud(str(path), cloud.to_open3d()):
        raise OSError(f"could not write point cloud {path}")
    logger.info("wrote %d points to %s", len(cloud), path)
    return True


def read_ply(path) -> PointCloud:
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    return PointCloud.from_open3d(o3d.io.read_point_cloud(str(path)))


def heightfield_cloud(terrain: Heightfield) -> PointCloud:
    ix, iy = np.meshgrid(
        np.arange(terrain.width_cells), np.arange(terrain.height_cells), indexing="ij"
    )
    x, y = terrain.cell_center(ix.ravel(), iy.ravel())
    z = terrain.elevation[ix.ravel(), iy.ravel()]
    return PointCloud(np.stack([x, y, z], axis=1))


def export_occupancy(occ: OccupancyGrid, path) -> None:
    """Plain-text matrix, one grid row (fixed ix) per line; 0 unknown, 1 known"""

    np.savetxt(path, occ.state, fmt="%d")


def load_occupancy(path, spec: GridSpec) -> OccupancyGrid:
    state = np.loadtxt(path, dtype=np.uint8, ndmin=2)
    return OccupancyGrid(spec, state)


def _grid_header(spec: GridSpec, dim: int) -> str:
    return (
        f"{GRID_MAGIC} dims {spec.dims[0]} {spec.dims[1]} d {dim} "
        f"resolution {spec.resolution!r} origin {spec.origin[0]!r} "
        f"{spec.origin[1]!r}\n"
    )


def _write_grid(path, spec: GridSpec, values: np.ndarray) -> None:
    dim = values.shape[2] if values.ndim == 3 else 1
    with open(path, "wb") as fh:
        fh.write(_grid_header(spec, dim).encode("ascii"))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes(order="C"))


def _read_grid(path) -> Tuple[GridSpec, np.ndarray]:
    with open(path, "rb") as fh:
        fields = fh.readline().decode("ascii").split()
        if not fields or fields[0] != GRID_MAGIC:
            raise ValueError(f"{path}: not a grid file")
        dims = (int(fields[2]), int(fields[3]))
        dim = int(fields[5])
        spec = GridSpec((float(fields[9]), float(fields[10])), float(fields[7]), dims)
        values = np.frombuffer(fh.read(), dtype="<f8")
    return spec, values.reshape(dims + (dim,))


def export_feature_grid(feat: FeatureGrid, path) -> None:
    """Text header line, then row-major little-endian float64 features"""

    _write_grid(path, feat.spec, feat.feature)


def load_feature_grid(path, alpha: float = 0.3) -> FeatureGrid:
    spec, values = _read_grid(path)
    count = (np.linalg.norm(values, axis=2) > 0).astype(int)
    return FeatureGrid(spec, values.shape[2], alpha, values.copy(), count)


def export_relevancy(rel: RelevancyGrid, path) -> None:
    _write_grid(path, rel.spec, rel.score)


def load_relevancy(path) -> RelevancyGrid:
    spec, values = _read_grid(path)
    return RelevancyGrid(spec, values[:, :, 0].copy())


def export_clusters(clusters: Iterable[FrontierCluster], path) -> None:
    lines = ["# id cx cy radius utility cells"]
    for c in sorted(clusters, key=lambda c: c.id):
        lines.append(
            f"{c.id} {c.centroid[0]:.3f} {c.centroid[1]:.3f} {c.radius:.3f} "
            f"{c.mean_utility:.4f} {len(c)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def export_map_images(occ: OccupancyGrid, rel: RelevancyGrid, directory) -> None:
    """Occupancy and relevancy snapshots as TIFF images for external viewers"""

    directory = Path(directory)
    tifffile.imwrite(directory / "occupancy.tif", occ.state)
    tifffile.imwrite(
        directory / "relevancy.tif", rel.score.astype(np.float32)
    )
