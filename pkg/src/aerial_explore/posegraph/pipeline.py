import logging
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from ..world.camera import CameraModel, NoiseSpec, SensorFrame
from ..world.f3dr import emulate_f3dr
from .config import SlamConfig
from .graph import (
    PoseGraph,
    add_loop_closure,
    add_submap,
    detect_loop_candidates,
)
from .optimizer import OptimizeReport, optimize

logger = logging.getLogger(__name__)


def _geometry_only(frame: SensorFrame) -> SensorFrame:
    """Drop the feature image; submap prediction only needs depth and labels"""

    return replace(frame, features=np.zeros(frame.depth.shape + (0,)))


class SubmapMapper:
    """Batches captured frames into overlapping submaps and maintains the graph"""

    def __init__(
        self,
        config: SlamConfig = None,
        noise: NoiseSpec = None,
        camera: CameraModel = None,
    ) -> None:
        self.config = config or SlamConfig()
        self.noise = noise or NoiseSpec()
        self.camera = camera or CameraModel()
        self.graph = PoseGraph(config=self.config)
        self.reports: List[OptimizeReport] = []

        self._pending: List[SensorFrame] = []
        self._overlap: List[SensorFrame] = []
        self._gps: Dict[int, np.ndarray] = {}
        self._anchors: Dict[int, SensorFrame] = {}

    @property
    def frames_needed(self) -> int:
        if not self.graph.nodes:
            return self.config.submap_size
        return self.config.submap_size - self.config.overlap

    def add_frame(
        self, frame: SensorFrame, gps: Optional[np.ndarray] = None
    ) -> List[int]:
        """Queue a frame; returns the ids of frames that just received a pose"""

        self._pending.append(_geometry_only(frame))
        if gps is not None:
            self._gps[frame.frame_id] = np.asarray(gps, dtype=float)
        if len(self._pending) < self.frames_needed:
            return []
        return self._process()

    def flush(self) -> List[int]:
        """Build a submap from whatever is pending (at least two frames in total)"""

        if not self._pending or len(self._overlap) + len(self._pending) < 2:
            return []
        return self._process()

    def frame_pose(self, frame_id: int) -> np.ndarray:
        return self.graph.frame_pose(frame_id)

    def _process(self) -> List[int]:
        frames, overlap = self._pending, self._overlap
        pred = emulate_f3dr(frames, overlap, self.noise, self.camera)
        batch = list(overlap) + list(frames)
        gps = None
        if self.config.use_gps:
            gps = [self._gps[f.frame_id] for f in batch]
        anchor_guess = batch[0].true_pose if not self.graph.nodes else None
        node_id = add_submap(self.graph, pred, gps, anchor_guess)
        self._anchors[node_id] = batch[0]

        self._close_loops(node_id)
        if len(self.graph.nodes) % self.config.optimize_every == 0:
            self.optimize()

        self._overlap = batch[-self.config.overlap :]
        self._pending = []
        for f in batch[: -self.config.overlap]:
            self._gps.pop(f.frame_id, None)
        new_ids = [f.frame_id for f in (batch if node_id == 0 else frames)]
        return new_ids

    def _close_loops(self, node_id: int) -> None:
        node = self.graph.nodes[node_id]
        candidates = detect_loop_candidates(self.graph, node.position)
        if not candidates:
            return
        best = candidates[0]
        pred = emulate_f3dr(
            [self._anchors[node_id]],
            [self._anchors[best]],
            self.noise,
            self.camera,
        )
        measurement = pred.frame_poses_local[1].copy()
        measurement[:3, 3] *= self.graph.scale
        add_loop_closure(self.graph, best, node_id, measurement)

    def optimize(self) -> Optional[OptimizeReport]:
        if not self.graph.factors:
            return None
        report = optimize(self.graph, max_iter=self.config.max_iter)
        self.reports.append(report)
        return report

    def trajectory_error(self) -> float:
        """Mean anchor position error against the true anchor poses"""

        errors = [
            np.linalg.norm(self._anchors[n.id].true_pose[:3, 3] - n.position)
            for n in self.graph.nodes
        ]
        return float(np.mean(errors)) if errors else 0.0
