"""Receding-horizon planner interface and the hierarchical region planner"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..mapping.grids import GridSpec, OccupancyGrid
from ..taskinfo.frontiers import ClusterSet
from ..taskinfo.relevancy import RelevancyGrid, score_cluster
from .config import PlannerConfig
from .local import PathPlan, plan_exploitation, plan_exploration
from .regions import (
    Region,
    RegionLabel,
    clear_visited,
    decompose_regions,
    label_regions,
    nearest_region,
    region_boxes,
    select_next_region,
)

logger = logging.getLogger(__name__)

PERIOD_SLACK = 1e-9


@dataclass
class PlanningSnapshot:
    time: float
    robot_pos: np.ndarray
    occ: OccupancyGrid
    rel: RelevancyGrid
    clusters: ClusterSet
    plan_exhausted: bool = False


class Planner(ABC):
    """Replans every ``local_period`` seconds, on demand, or when forced by a subclass"""

    name = "planner"

    def __init__(self, config: PlannerConfig = None) -> None:
        self.config = config or PlannerConfig()
        self._last_local: Optional[float] = None
        self._new_task = True

    def new_task(self) -> None:
        self._new_task = True

    def update(self, snap: PlanningSnapshot) -> Optional[PathPlan]:
        """A new plan when one is due, otherwise None"""

        forced = self._tick(snap)
        due = (
            self._last_local is None
            or snap.plan_exhausted
            or snap.time - self._last_local >= self.config.local_period - PERIOD_SLACK
        )
        if not (forced or due):
            return None
        self._last_local = snap.time
        plan = self.plan(snap)
        self._new_task = False
        return plan

    def _tick(self, snap: PlanningSnapshot) -> bool:
        return False

    @abstractmethod
    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        ...


class HierarchicalPlanner(Planner):
    """Global region selection every ``global_period``, local routing inside the region.

    Exploration candidates are narrowed to regions that still hold a frontier
    cluster scoring at least ``eps_ftr`` whenever such a cluster exists
    anywhere in the map. When no candidate carries any utility the nearest
    region is taken instead of the lowest id.
    """

    name = "halo"

    def __init__(self, bounds, spec: GridSpec, config: PlannerConfig = None) -> None:
        super().__init__(config)
        self.regions: List[Region] = decompose_regions(bounds, self.config.s_reg)
        self._boxes = region_boxes(self.regions, spec)
        self.target: Optional[Region] = None
        self._last_global: Optional[float] = None

    def _tick(self, snap: PlanningSnapshot) -> bool:
        if clear_visited(self.regions, snap.robot_pos):
            logger.debug("exploitation region visited at t=%.1f", snap.time)
        due = (
            self._new_task
            or self._last_global is None
            or snap.time - self._last_global >= self.config.global_period - PERIOD_SLACK
        )
        if not due:
            return False
        return self._select(snap)

    def _relevant(self, explore: List[Region], snap: PlanningSnapshot) -> List[Region]:
        cfg = self.config
        ids = {
            c.id
            for c in snap.clusters
            if score_cluster(c, snap.rel, cfg.eps_ftr, cfg.u0) >= cfg.eps_ftr
        }
        gated = [r for r in explore if ids.intersection(r.cluster_ids)]
        return gated or explore

    def _select(self, snap: PlanningSnapshot) -> bool:
        """Relabel and reselect; True when the target region changed"""

        previous = None if self.target is None else (self.target.id, self.target.label)
        explore, exploit = label_regions(
            self.regions,
            snap.clusters,
            snap.rel,
            snap.occ,
            self.config,
            self._new_task,
            snap.robot_pos,
            self._boxes,
        )
        self._new_task = False
        self._last_global = snap.time
        if self.config.relevant_gate:
            explore = self._relevant(explore, snap)
        candidates = explore + exploit
        if candidates and all(r.utility <= 0 for r in candidates):
            self.target = nearest_region(candidates, snap.robot_pos, self.config.c_min)
        else:
            self.target = select_next_region(
                candidates, snap.robot_pos, self.config.c_min
            )
        current = (self.target.id, self.target.label)
        if current != previous:
            logger.debug(
                "global target region %d (%s, u=%.3f, c=%.1f)",
                self.target.id,
                self.target.label.value,
                self.target.utility,
                self.target.cost,
            )
        return current != previous

    def _target_valid(self, snap: PlanningSnapshot) -> bool:
        if self.target is None:
            return False
        if self.target.label is RegionLabel.EXPLOITATION:
            return True
        self.target.cluster_ids = [
            c.id
            for c in snap.clusters
            if self.target.contains(c.centroid[0], c.centroid[1])
        ]
        return self.target.label is RegionLabel.EXPLORATION and bool(
            self.target.cluster_ids
        )

    def plan(self, snap: PlanningSnapshot) -> PathPlan:
        if not self._target_valid(snap):
            self._select(snap)
        if self.target.label is RegionLabel.EXPLOITATION:
            return plan_exploitation(self.target, snap.robot_pos)
        return plan_exploration(
            self.target, list(snap.clusters), snap.rel, snap.robot_pos, self.config
        )
