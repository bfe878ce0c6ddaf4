"""Geometric frontiers: detection, region growing and principal-axis splitting.

Updates are driven by the change box of the occupancy grid. Any connected
frontier component that could have changed is regrown from scratch, so the
incremental cluster set always equals a full recompute.
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Tuple

import numpy as np
from skimage import measure

from ..errors import BadConfig, DegenerateCluster
from ..mapping.grids import ChangeBBox, GridSpec, OccupancyGrid

logger = logging.getLogger(__name__)

# frontier status can change two cells away from a changed cell once
# 8-connected components are taken into account
SEED_MARGIN = 2


@dataclass
class FrontierParams:
    ftr_min: float = 2.0
    ftr_max: float = 20.0
    connectivity: int = 8

    def __post_init__(self):
        if not 0 <= self.ftr_min < self.ftr_max:
            raise BadConfig("frontier radii need 0 <= ftr_min < ftr_max")
        if self.connectivity not in (4, 8):
            raise BadConfig("connectivity must be 4 or 8")


@dataclass
class FrontierCluster:
    id: int
    cells: np.ndarray
    points: np.ndarray
    centroid: np.ndarray
    radius: float
    mean_utility: float = 0.0

    @classmethod
    def from_cells(cls, cluster_id: int, cells, spec: GridSpec) -> "FrontierCluster":
        cells = np.asarray(cells, dtype=int).reshape(-1, 2)
        points = np.stack(spec.cell_center(cells[:, 0], cells[:, 1]), axis=1)
        return cls.from_points(cluster_id, cells, points)

    @classmethod
    def from_points(cls, cluster_id, cells, points) -> "FrontierCluster":
        if len(cells) == 0:
            raise ValueError("a frontier cluster needs at least one cell")
        centroid = points.mean(axis=0)
        radius = float(np.linalg.norm(points - centroid, axis=1).max())
        return cls(cluster_id, cells, points, centroid, radius)

    @property
    def cell_set(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(map(tuple, self.cells.tolist()))

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class ClusterSet:
    """Current clusters plus the id counter and the cached frontier mask"""

    clusters: List[FrontierCluster] = field(default_factory=list)
    next_id: int = 0
    mask: np.ndarray = None

    def partition(self) -> FrozenSet[FrozenSet[Tuple[int, int]]]:
        return frozenset(c.cell_set for c in self.clusters)

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)


def frontier_mask(occ: OccupancyGrid, window: ChangeBBox = None) -> np.ndarray:
    """Known cells with at least one unknown 4-neighbor inside the map"""

    known = occ.known
    # pad with known so that the map border never counts as unknown
    padded = np.pad(known, 1, constant_values=True)
    unknown_nb = (
        ~padded[:-2, 1:-1] | ~padded[2:, 1:-1] | ~padded[1:-1, :-2] | ~padded[1:-1, 2:]
    )
    mask = known & unknown_nb
    if window is not None:
        return mask & window.mask(known.shape)
    return mask


def split_cluster(
    cluster: FrontierCluster, ftr_max: float
) -> List[FrontierCluster]:
    """Recursively halve along the first principal axis until radius <= ftr_max.

    Children keep the parent's id; callers assign fresh ones.
    """

    if cluster.radius <= ftr_max:
        return [cluster]
    centered = cluster.points - cluster.centroid
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    projection = centered @ Vt[0]
    side = projection >= 0
    if side.all() or not side.any():
        raise DegenerateCluster(
            f"cluster {cluster.id} of {len(cluster)} cells cannot be split"
        )
    out = []
    for part in (side, ~side):
        child = FrontierCluster.from_points(
            cluster.id, cluster.cells[part], cluster.points[part]
        )
        out.extend(split_cluster(child, ftr_max))
    return out


def _clusters_of_component(coords, spec, params) -> List[FrontierCluster]:
    component = FrontierCluster.from_cells(-1, coords, spec)
    if component.radius < params.ftr_min:
        return []
    return split_cluster(component, params.ftr_max)


def detect_frontiers(
    occ: OccupancyGrid,
    bbox: ChangeBBox,
    clusters: ClusterSet = None,
    params: FrontierParams = None,
) -> ClusterSet:
    """Update ``clusters`` for the map changes inside ``bbox``"""

    params = params or FrontierParams()
    clusters = ClusterSet() if clusters is None else clusters
    dims = occ.spec.dims
    if clusters.mask is None:
        bbox = ChangeBBox.full(occ.spec)
        mask = frontier_mask(occ)
    elif bbox.empty:
        return clusters
    else:
        mask = clusters.mask.copy()
        window = bbox.inflated(1, dims)
        sl = window.slices()
        mask[sl] = frontier_mask(occ, window)[sl]

    region = bbox.inflated(SEED_MARGIN, dims).mask(dims)
    labels = measure.label(mask, connectivity=1 if params.connectivity == 4 else 2)

    ## regrow every component that touches the region or a removed cluster
    kept = list(clusters.clusters)
    removed: List[FrontierCluster] = []
    seeds = mask & region
    affected = np.zeros(labels.max() + 1, dtype=bool)
    while True:
        affected[np.unique(labels[seeds])] = True
        affected[0] = False
        grown = affected[labels]
        touched = grown | region
        newly = [c for c in kept if touched[c.cells[:, 0], c.cells[:, 1]].any()]
        if not newly:
            break
        kept = [c for c in kept if not touched[c.cells[:, 0], c.cells[:, 1]].any()]
        removed.extend(newly)
        seeds = np.zeros_like(mask)
        for c in newly:
            seeds[c.cells[:, 0], c.cells[:, 1]] = True
        seeds &= mask

    next_id = clusters.next_id
    fresh = []
    for props in measure.regionprops(labels):
        if not affected[props.label]:
            continue
        for child in _clusters_of_component(props.coords, occ.spec, params):
            child.id = next_id
            next_id += 1
            fresh.append(child)

    logger.debug(
        "frontiers: %d removed, %d added, %d total",
        len(removed),
        len(fresh),
        len(kept) + len(fresh),
    )
    return ClusterSet(kept + fresh, next_id, mask)


def detect_frontiers_full(
    occ: OccupancyGrid, params: FrontierParams = None
) -> ClusterSet:
    """Batch recompute over the whole map"""

    return detect_frontiers(occ, ChangeBBox.full(occ.spec), None, params)
