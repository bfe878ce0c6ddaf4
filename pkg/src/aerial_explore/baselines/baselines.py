"""Comparison planners: coverage sweep, nearest frontier, full frontier tour
and utility-over-distance frontier selection"""

import logging
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import BadConfig, NoFrontiers
from ..mapping.grids import GridSpec
from ..planner.config import PlannerConfig
from ..planner.hierarchical import (
    HierarchicalPlanner,
    Planner,
    PlanningSnapshot,
)
from ..planner.local import PathPlan, PlanMode, tour_plan
from ..taskinfo.frontiers import FrontierCluster
from ..taskinfo.relevancy import RelevancyGrid, score_cluster

logger = logging.getLogger(__name__)


class BaselineKind(Enum):
    COVERAGE = "coverage"
    FRONTIER = "frontier"
    FUEL = "fuel"
    VLFM = "vlfm"


def coverage_plan(bounds, robot_pos, footprint_width: float) -> PathPlan:
    """Boustrophedon sweep from the corner nearest the robot.

    Passes run along the longer side, spaced ``footprint_width`` apart; the
    last one is pulled in to stay half a swath from the far edge.
    """

    if footprint_width <= 0:
        raise BadConfig("footprint_width must be positive")
    xmin, ymin, xmax, ymax = (float(b) for b in bounds)
    robot = np.asarray(robot_pos, dtype=float)[:2]
    corners = np.array([[xmin, ymin], [xmax, ymin], [xmin, ymax], [xmax, ymax]])
    corner = corners[int(np.argmin(np.linalg.norm(corners - robot, axis=1)))]

    along_x = (xmax - xmin) >= (ymax - ymin)
    # sweep axis (passes run along it) and step axis (passes advance along it)
    if along_x:
        sweep = (xmin, xmax) if corner[0] == xmin else (xmax, xmin)
        step = (ymin, ymax) if corner[1] == ymin else (ymax, ymin)
    else:
        sweep = (ymin, ymax) if corner[1] == ymin else (ymax, ymin)
        step = (xmin, xmax) if corner[0] == xmin else (xmax, xmin)
    extent = abs(step[1] - step[0])
    n_passes = max(int(np.ceil(extent / footprint_width - 1e-9)), 1)
    direction = np.sign(step[1] - step[0]) or 1.0

    waypoints = [robot, corner]
    for i in range(n_passes):
        # pass centers sit half a swath inside the covered strip
        if n_passes == 1:
            offset = extent / 2.0
        else:
            offset = min((i + 0.5) * footprint_width, extent - 0.5 * footprint_width)
        s = step[0] + direction * offset
        a, b = sweep if i % 2 == 0 else sweep[::-1]
        for t in (a, b):
            waypoints.append((t, s) if along_x else (s, t))
    logger.debug("coverage sweep: %d passes of %.1f m", n_passes, footprint_width)
    return PathPlan(np.array(waypoints), PlanMode.EXPLORE)


def _require(clusters: Sequence[FrontierCluster]) -> None:
    if not clusters:
        raise NoFrontiers("no frontier clusters left")


def nearest_frontier_plan(
    clusters: Sequence[FrontierCluster], robot_pos
) -> PathPlan:
    _require(clusters)
    robot = np.asarray(robot_pos, dtype=float)[:2]
    best = min(
        clusters, key=lambda c: (float(np.linalg.norm(c.centroid - robot)), c.id)
    )
    return PathPlan(np.array([robot, best.centroid]), PlanMode.EXPLORE)


def fuel_plan(
    clusters: Sequence[FrontierCluster], robot_pos, n_exact: int = 12
) -> PathPlan:
    """Open tour through every cluster centroid in the map"""

    _require(clusters)
    return tour_plan(sorted(clusters, key=lambda c: c.id), robot_pos, n_exact)


def vlfm_select(
    clusters: Sequence[FrontierCluster],
    rel: RelevancyGrid,
    robot_pos,
    eps_ftr: float,
    u0: float = 0.05,
    c_min: float = 1.0,
) -> PathPlan:
    """Single cluster maximizing mean utility over distance"""

    _require(clusters)
    robot = np.asarray(robot_pos, dtype=float)[:2]
    best, best_ratio = None, -np.inf
    for cluster in sorted(clusters, key=lambda c: c.id):
        utility = score_cluster(cluster, rel, eps_ftr, u0)
        cost = max(c_min, float(np.linalg.norm(cluster.centroid - robot)))
        if utility / cost > best_ratio:
            best, best_ratio = cluster, utility / cost
    return PathPlan(np.array([robot, best.centroid]), PlanMode.EXPLORE)


class CoveragePlanner(Planner):
    """Computes the sweep once and never replans it"""

    name = "coverage"

    def __init__(self, bounds, footprint_width: float, config: PlannerConfig = None):
        super().__init__(config)
        self.bounds = bounds
        self.footprint_width = footprint_width
        self._plan: Optional[PathPlan] = None

    def update(self, snap: PlanningSnapshot) -> Optional[PathPlan]:
        if self._plan is None:
            self._plan = self.plan(snap)
            return self._plan
        return None

    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        if self._plan is not None:
            return self._plan
        return coverage_plan(self.bounds, snap.robot_pos, self.footprint_width)


class NearestFrontierPlanner(Planner):
    name = "frontier"

    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        return nearest_frontier_plan(list(snap.clusters), snap.robot_pos)


class FuelPlanner(Planner):
    name = "fuel"

    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        return fuel_plan(list(snap.clusters), snap.robot_pos, self.config.n_exact)


class VlfmPlanner(Planner):
    name = "vlfm"

    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        cfg = self.config
        return vlfm_select(
            list(snap.clusters),
            snap.rel,
            snap.robot_pos,
            cfg.eps_ftr,
            cfg.u0,
            cfg.c_min,
        )


PLANNER_NAMES = ("halo",) + tuple(kind.value for kind in BaselineKind)


def make_planner(
    name: str,
    bounds,
    spec: GridSpec,
    config: PlannerConfig = None,
    footprint_width: float = 40.0,
) -> Planner:
    """Planner object for a CLI / scenario planner name"""

    if name == HierarchicalPlanner.name:
        return HierarchicalPlanner(bounds, spec, config)
    try:
        kind = BaselineKind(name)
    except ValueError:
        raise BadConfig(
            f"unknown planner {name!r}; expected one of {list(PLANNER_NAMES)}"
        ) from None
    if kind is BaselineKind.COVERAGE:
        return CoveragePlanner(bounds, footprint_width, config)
    return {
        BaselineKind.FRONTIER: NearestFrontierPlanner,
        BaselineKind.FUEL: FuelPlanner,
        BaselineKind.VLFM: VlfmPlanner,
    }[kind](config)
