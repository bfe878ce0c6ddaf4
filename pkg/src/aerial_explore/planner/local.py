import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyRegion
from ..taskinfo.frontiers import FrontierCluster
from ..taskinfo.relevancy import RelevancyGrid, score_cluster
from .atsp import build_atsp_cost, solve_atsp
from .config import PlannerConfig
from .regions import Region

logger = logging.getLogger(__name__)


class PlanMode(Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


@dataclass
class PathPlan:
    waypoints: np.ndarray
    mode: PlanMode = PlanMode.EXPLORE
    target_region: Optional[int] = None

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if len(self.waypoints) < 1:
            raise ValueError("a plan needs at least one waypoint")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1).sum())

    def to_record(self) -> dict:
        return {
            "mode": self.mode.value,
            "region": self.target_region,
            "waypoints": np.round(self.waypoints, 3).tolist(),
        }


def tour_plan(
    clusters: Sequence[FrontierCluster],
    robot_pos,
    n_exact: int = 12,
    region_id: Optional[int] = None,
) -> PathPlan:
    """Robot position followed by the cluster centroids in open-tour order"""

    robot = np.asarray(robot_pos, dtype=float)[:2]
    centroids = np.array([c.centroid for c in clusters])
    order = solve_atsp(build_atsp_cost(robot, centroids), n_exact)
    waypoints = [robot] + [centroids[k - 1] for k in order]
    return PathPlan(np.array(waypoints), PlanMode.EXPLORE, region_id)


def plan_exploration(
    region: Region,
    clusters: Sequence[FrontierCluster],
    rel: RelevancyGrid,
    robot_pos,
    cfg: PlannerConfig,
) -> PathPlan:
    """Tour over the region's clusters whose mean utility reaches eps_ftr"""

    members = [c for c in clusters if c.id in set(region.cluster_ids)]
    if not members:
        raise EmptyRegion(f"region {region.id} has no frontier clusters")
    utilities = [score_cluster(c, rel, cfg.eps_ftr, cfg.u0) for c in members]
    survivors = [c for c, u in zip(members, utilities) if u >= cfg.eps_ftr]
    if not survivors:
        survivors = members
    logger.debug(
        "region %d: %d of %d clusters kept", region.id, len(survivors), len(members)
    )
    return tour_plan(survivors, robot_pos, cfg.n_exact, region.id)


def plan_exploitation(region: Region, robot_pos) -> PathPlan:
    robot = np.asarray(robot_pos, dtype=float)[:2]
    return PathPlan(np.array([robot, region.center]), PlanMode.EXPLOIT, region.id)
