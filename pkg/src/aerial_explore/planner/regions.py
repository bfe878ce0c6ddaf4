"""Global planning regions: tiling, exploration/exploitation labels, selection"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import BadConfig, NoCandidates
from ..mapping.grids import GridSpec, OccupancyGrid
from ..taskinfo.frontiers import FrontierCluster
from ..taskinfo.relevancy import RelevancyGrid, thresholded
from .config import PlannerConfig

logger = logging.getLogger(__name__)


class RegionLabel(Enum):
    NONE = "none"
    EXPLORATION = "exploration"
    EXPLOITATION = "exploitation"


@dataclass
class Region:
    id: int
    bounds: Tuple[float, float, float, float]
    label: RegionLabel = RegionLabel.NONE
    utility: float = 0.0
    cost: float = 0.0
    cluster_ids: List[int] = field(default_factory=list)
    # closed upper edges, set on tiles at the far side of the bounds
    closed: Tuple[bool, bool] = (False, False)

    @property
    def center(self) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        return np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])

    def contains(self, x, y) -> np.ndarray:
        """Half-open membership that partitions the tiled bounds"""

        xmin, ymin, xmax, ymax = self.bounds
        x = np.asarray(x)
        y = np.asarray(y)
        in_x = (x >= xmin) & ((x <= xmax) if self.closed[0] else (x < xmax))
        in_y = (y >= ymin) & ((y <= ymax) if self.closed[1] else (y < ymax))
        return in_x & in_y

    def holds_robot(self, position) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        x, y = position[0], position[1]
        return bool(xmin <= x <= xmax and ymin <= y <= ymax)

    def cell_mask(self, spec: GridSpec) -> np.ndarray:
        cx, cy = spec.centers()
        return self.contains(cx, cy)


def decompose_regions(bounds, s_reg: float) -> List[Region]:
    """Tile ``bounds`` from its min corner, x-major ids, truncated at the far edges"""

    if s_reg <= 0:
        raise BadConfig(f"s_reg must be positive, got {s_reg}")
    xmin, ymin, xmax, ymax = (float(b) for b in bounds)
    if xmax <= xmin or ymax <= ymin:
        raise BadConfig(f"degenerate bounds {bounds}")
    nx = int(np.ceil((xmax - xmin) / s_reg - 1e-9))
    ny = int(np.ceil((ymax - ymin) / s_reg - 1e-9))
    regions = []
    for i in range(nx):
        for j in range(ny):
            x0 = xmin + i * s_reg
            y0 = ymin + j * s_reg
            regions.append(
                Region(
                    id=len(regions),
                    bounds=(x0, y0, min(x0 + s_reg, xmax), min(y0 + s_reg, ymax)),
                    closed=(i == nx - 1, j == ny - 1),
                )
            )
    return regions


Box = Tuple[int, int, int, int]


def region_boxes(regions: Sequence[Region], spec: GridSpec) -> List[Optional[Box]]:
    """Cell index box (ix0, ix1, iy0, iy1) of each region, None when it holds no cell"""

    boxes = []
    for region in regions:
        mask = region.cell_mask(spec)
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0 or cols.size == 0:
            boxes.append(None)
        else:
            boxes.append((rows[0], rows[-1] + 1, cols[0], cols[-1] + 1))
    return boxes


def _box_means(values: np.ndarray, boxes: Sequence[Optional[Box]]) -> np.ndarray:
    # summed-area table, one lookup per box
    table = np.pad(values.cumsum(axis=0).cumsum(axis=1), ((1, 0), (1, 0)))
    means = np.zeros(len(boxes))
    for k, box in enumerate(boxes):
        if box is None:
            continue
        x0, x1, y0, y1 = box
        total = table[x1, y1] - table[x0, y1] - table[x1, y0] + table[x0, y0]
        means[k] = total / ((x1 - x0) * (y1 - y0))
    return means


def assign_clusters(
    regions: Sequence[Region], clusters: Iterable[FrontierCluster]
) -> None:
    """Attach each cluster to the region holding its centroid"""

    clusters = list(clusters)
    for region in regions:
        region.cluster_ids = []
    if not clusters:
        return
    centroids = np.array([c.centroid for c in clusters])
    free = np.ones(len(clusters), dtype=bool)
    for region in regions:
        hit = free & region.contains(centroids[:, 0], centroids[:, 1])
        if hit.any():
            region.cluster_ids = [clusters[k].id for k in np.flatnonzero(hit)]
            free &= ~hit


def _max_relevancy(scores: np.ndarray) -> float:
    observed = scores[np.isfinite(scores)]
    return float(observed.max()) if observed.size else 0.0


def label_regions(
    regions: Sequence[Region],
    clusters: Iterable[FrontierCluster],
    rel: RelevancyGrid,
    occ: OccupancyGrid,
    cfg: PlannerConfig,
    new_task: bool,
    robot_pos,
    boxes: Sequence[Optional[Box]] = None,
) -> Tuple[List[Region], List[Region]]:
    """Label regions in place and return (exploration, exploitation) lists.

    Exploitation labels are recomputed only for a new task; otherwise the
    previous ones persist until the robot stands inside the region.
    """

    assign_clusters(regions, clusters)
    if boxes is None:
        boxes = region_boxes(regions, rel.spec)

    def cells(grid, box):
        x0, x1, y0, y1 = box
        return grid[x0:x1, y0:y1]

    if new_task:
        exploit = set()
        for region, box in zip(regions, boxes):
            if box is None:
                continue
            if (
                cells(occ.known, box).mean() >= cfg.explored_fraction
                and _max_relevancy(cells(rel.score, box)) > cfg.eps_r
            ):
                exploit.add(region.id)
    else:
        exploit = {r.id for r in regions if r.label is RegionLabel.EXPLOITATION}
    exploit -= {r.id for r in regions if r.holds_robot(robot_pos)}

    utilities = _box_means(thresholded(rel.score, cfg.eps_e, cfg.u0), boxes)
    explore_list, exploit_list = [], []
    for region, box, utility in zip(regions, boxes, utilities):
        if region.id in exploit:
            region.label = RegionLabel.EXPLOITATION
            region.utility = _max_relevancy(cells(rel.score, box))
            exploit_list.append(region)
        elif region.cluster_ids:
            region.label = RegionLabel.EXPLORATION
            region.utility = float(utility)
            explore_list.append(region)
        else:
            region.label = RegionLabel.NONE
            region.utility = 0.0
    return explore_list, exploit_list


def clear_visited(regions: Sequence[Region], robot_pos) -> List[int]:
    """Drop exploitation labels of regions the robot is in; returns their ids"""

    cleared = []
    for region in regions:
        if region.label is RegionLabel.EXPLOITATION and region.holds_robot(robot_pos):
            region.label = RegionLabel.NONE
            cleared.append(region.id)
    return cleared


def _set_costs(candidates: Sequence[Region], robot_pos, c_min: float) -> None:
    robot = np.asarray(robot_pos, dtype=float)[:2]
    for region in candidates:
        region.cost = max(c_min, float(np.linalg.norm(region.center - robot)))


def select_next_region(
    candidates: Sequence[Region], robot_pos, c_min: float = 1.0
) -> Region:
    """argmax utility / cost, cost = distance to the region center clamped at c_min"""

    if not candidates:
        raise NoCandidates("no exploration or exploitation region left")
    _set_costs(candidates, robot_pos, c_min)
    best, best_ratio = None, -np.inf
    for region in sorted(candidates, key=lambda r: r.id):
        ratio = region.utility / region.cost
        if ratio > best_ratio:
            best, best_ratio = region, ratio
    return best


def nearest_region(
    candidates: Sequence[Region], robot_pos, c_min: float = 1.0
) -> Region:
    """Closest region center, lower id on ties"""

    if not candidates:
        raise NoCandidates("no exploration or exploitation region left")
    _set_costs(candidates, robot_pos, c_min)
    return min(candidates, key=lambda r: (r.cost, r.id))
