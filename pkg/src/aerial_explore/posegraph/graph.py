"""Submap pose graph: nodes are submap anchor poses, factors are GPS priors
and relative-pose measurements between anchors."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import (
    DegenerateMotion,
    EmptyCloud,
    GraphPreconditionError,
    NoCorrespondences,
    NoOverlap,
)
from ..geometry.pointcloud import PointCloud
from ..geometry.transforms import invert, make_pose, mean_pose
from ..world.f3dr import SubmapPrediction
from .config import SlamConfig
from .icp import icp_align
from .scale import consecutive_deltas, estimate_scale

logger = logging.getLogger(__name__)


class FactorKind(Enum):
    GPS_PRIOR = "GPS_PRIOR"
    F3DR_REL = "F3DR_REL"
    ICP_REL = "ICP_REL"
    LOOP_REL = "LOOP_REL"

    @property
    def is_relative(self) -> bool:
        return self is not FactorKind.GPS_PRIOR


@dataclass
class PoseNode:
    id: int
    pose: np.ndarray
    frame_count: int = 0
    frame_ids: List[int] = field(default_factory=list)
    # scaled submap content, expressed in the anchor frame
    frame_poses: List[np.ndarray] = field(default_factory=list)
    clouds: List[PointCloud] = field(default_factory=list)

    def __post_init__(self):
        self.pose = np.array(self.pose, dtype=float)
        R = self.pose[:3, :3]
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ValueError(f"node {self.id} rotation is not a proper rotation")

    @property
    def position(self) -> np.ndarray:
        return self.pose[:3, 3]

    def local_pose_of(self, frame_id: int) -> np.ndarray:
        return self.frame_poses[self.frame_ids.index(frame_id)]

    def cloud_of(self, frame_ids: Sequence[int]) -> PointCloud:
        return PointCloud.concatenate(
            [self.clouds[self.frame_ids.index(f)] for f in frame_ids]
        )


@dataclass
class Factor:
    kind: FactorKind
    nodes: Tuple[int, ...]
    measurement: np.ndarray
    information: np.ndarray

    def __post_init__(self):
        self.kind = FactorKind(self.kind)
        self.nodes = tuple(int(n) for n in self.nodes)
        self.measurement = np.array(self.measurement, dtype=float)
        self.information = np.array(self.information, dtype=float)
        expected = 2 if self.kind.is_relative else 1
        if len(self.nodes) != expected:
            raise ValueError(f"{self.kind.value} factor needs {expected} node(s)")
        if self.kind.is_relative and self.nodes[0] == self.nodes[1]:
            raise ValueError("relative factor must join two distinct nodes")
        dim = 6 if self.kind.is_relative else 3
        if self.information.shape != (dim, dim):
            raise ValueError(f"{self.kind.value} information must be {dim}x{dim}")
        if not np.allclose(self.information, self.information.T):
            raise ValueError("information matrix must be symmetric")
        if np.linalg.eigvalsh(self.information).min() <= 0:
            raise ValueError("information matrix must be positive definite")


@dataclass
class PoseGraph:
    config: SlamConfig = field(default_factory=SlamConfig)
    nodes: List[PoseNode] = field(default_factory=list)
    factors: List[Factor] = field(default_factory=list)
    scale: float = 1.0
    scale_initialized: bool = False
    # frame id -> node that introduced the frame
    frame_owner: Dict[int, int] = field(default_factory=dict)

    @property
    def loop_radius(self) -> float:
        return self.config.loop_radius

    @property
    def min_loop_gap(self) -> int:
        return self.config.min_loop_gap

    def add_factor(self, factor: Factor) -> None:
        for node_id in factor.nodes:
            if not 0 <= node_id < len(self.nodes):
                raise GraphPreconditionError(f"factor references unknown node {node_id}")
        self.factors.append(factor)

    def factors_of(self, kind: FactorKind) -> List[Factor]:
        return [f for f in self.factors if f.kind is kind]

    def frame_pose(self, frame_id: int) -> np.ndarray:
        """Current world pose estimate of a frame"""

        node = self.nodes[self.frame_owner[frame_id]]
        return node.pose @ node.local_pose_of(frame_id)

    def has_frame(self, frame_id: int) -> bool:
        return frame_id in self.frame_owner

    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodes]).reshape(-1, 3)


def _update_scale(graph: PoseGraph, pred: SubmapPrediction, gps) -> float:
    """Scale for this submap; keeps the previous one when motion is degenerate"""

    cfg = graph.config
    positions = np.array([T[:3, 3] for T in pred.frame_poses_local])
    try:
        if cfg.use_gps:
            s = estimate_scale(
                consecutive_deltas(positions),
                consecutive_deltas(gps),
                previous=graph.scale if graph.scale_initialized else None,
                blend=cfg.scale_blend,
            )
        elif not graph.nodes:
            s = 1.0
        else:
            ## chain the scale across the shared overlap frames
            prev = graph.nodes[-1]
            shared = [f for f in pred.overlap_ids if f in prev.frame_ids]
            if len(shared) < 2:
                raise DegenerateMotion("fewer than two shared frames")
            scaled_prev = [prev.local_pose_of(f)[:3, 3] for f in shared]
            raw_cur = [positions[pred.index_of(f)] for f in shared]
            s = estimate_scale(
                consecutive_deltas(raw_cur), consecutive_deltas(scaled_prev)
            )
    except DegenerateMotion as err:
        logger.debug("keeping scale %.5f: %s", graph.scale, err)
        return graph.scale
    graph.scale = s
    graph.scale_initialized = True
    return s


def add_submap(
    graph: PoseGraph,
    pred: SubmapPrediction,
    gps: Optional[Sequence] = None,
    anchor_guess: Optional[np.ndarray] = None,
) -> int:
    """Scale a submap prediction and attach it to the graph; returns the new node id.

    ``gps`` holds one position per prediction frame. ``anchor_guess`` sets the
    initial pose of the first node (only its rotation when GPS is used).
    """

    cfg = graph.config
    if graph.nodes and not pred.overlap_ids:
        raise NoOverlap("submap shares no frames with the previous submap")
    if cfg.use_gps:
        if gps is None or len(gps) != pred.n_frames:
            raise ValueError("one GPS position per prediction frame is required")
        gps = np.asarray(gps, dtype=float).reshape(-1, 3)

    s = _update_scale(graph, pred, gps)
    poses = []
    for T in pred.frame_poses_local:
        scaled = T.copy()
        scaled[:3, 3] *= s
        poses.append(scaled)
    clouds = [c.scaled(s) for c in pred.clouds_local]

    node_id = len(graph.nodes)
    T_rel = None
    if not graph.nodes:
        pose = np.eye(4) if anchor_guess is None else np.array(anchor_guess)
        if cfg.use_gps:
            pose[:3, 3] = gps[0]
    else:
        prev = graph.nodes[-1]
        shared = [f for f in pred.overlap_ids if f in prev.frame_ids]
        if not shared:
            raise NoOverlap(
                f"overlap frames {pred.overlap_ids} are not in submap {prev.id}"
            )
        ## previous anchor <- current anchor, averaged over shared frames
        T_rel = mean_pose(
            [
                prev.local_pose_of(f) @ invert(poses[pred.index_of(f)])
                for f in shared
            ]
        )
        pose = prev.pose @ T_rel

    node = PoseNode(
        id=node_id,
        pose=pose,
        frame_count=pred.n_frames,
        frame_ids=list(pred.frame_ids),
        frame_poses=poses,
        clouds=clouds,
    )
    graph.nodes.append(node)
    for f in pred.frame_ids:
        graph.frame_owner.setdefault(f, node_id)

    if cfg.use_gps:
        graph.add_factor(
            Factor(FactorKind.GPS_PRIOR, (node_id,), gps[0], cfg.gps_information())
        )
    if T_rel is not None:
        graph.add_factor(
            Factor(
                FactorKind.F3DR_REL,
                (prev.id, node_id),
                T_rel,
                cfg.f3dr_information(),
            )
        )
        _add_icp_factor(graph, prev, node, shared, T_rel)

    logger.debug(
        "submap %d: frames %s, scale %.4f", node_id, pred.frame_ids, s
    )
    return node_id


def _add_icp_factor(graph, prev, node, shared, init) -> None:
    cfg = graph.config
    try:
        result = icp_align(
            node.cloud_of(shared), prev.cloud_of(shared), init, cfg.icp
        )
    except (EmptyCloud, NoCorrespondences) as err:
        logger.warning("no ICP factor %d-%d: %s", prev.id, node.id, err)
        return
    if result.fitness < cfg.icp_fitness_floor:
        logger.warning(
            "no ICP factor %d-%d: fitness %.2f below %.2f",
            prev.id,
            node.id,
            result.fitness,
            cfg.icp_fitness_floor,
        )
        return
    graph.add_factor(
        Factor(
            FactorKind.ICP_REL,
            (prev.id, node.id),
            result.transform,
            cfg.icp_information(),
        )
    )


def detect_loop_candidates(graph: PoseGraph, current_position) -> List[int]:
    """Nodes near ``current_position`` and far enough back in the sequence"""

    if not graph.nodes:
        raise GraphPreconditionError("loop detection on an empty graph")
    newest = graph.nodes[-1].id
    position = np.asarray(current_position, dtype=float).reshape(3)
    dist = np.linalg.norm(graph.positions() - position, axis=1)
    ids = np.arange(len(graph.nodes))
    keep = (dist <= graph.loop_radius) & (newest - ids >= graph.min_loop_gap)
    order = np.lexsort((ids[keep], dist[keep]))
    return [int(i) for i in ids[keep][order]]


def add_loop_closure(
    graph: PoseGraph, candidate: int, current: int, measurement: np.ndarray
) -> Factor:
    factor = Factor(
        FactorKind.LOOP_REL,
        (candidate, current),
        measurement,
        graph.config.loop_information(),
    )
    graph.add_factor(factor)
    logger.info("loop closure %d -> %d", candidate, current)
    return factor


def export_world_cloud(graph: PoseGraph) -> PointCloud:
    """All submap clouds transformed through their node poses"""

    return PointCloud.concatenate(
        [c.transformed(node.pose) for node in graph.nodes for c in node.clouds]
    )


## text format


def _pose_fields(T: np.ndarray) -> List[float]:
    quat = Rotation.from_matrix(T[:3, :3]).as_quat()
    return list(T[:3, 3]) + list(quat)


def _pose_from_fields(values: Sequence[float]) -> np.ndarray:
    values = [float(v) for v in values]
    R = Rotation.from_quat(values[3:7]).as_matrix()
    return make_pose(R, values[:3])


def save_graph(graph: PoseGraph, path) -> None:
    """One node or factor per line; submap clouds are not stored"""

    lines = ["# aerial-explore pose graph", f"SCALE {graph.scale:.12g}"]
    for node in graph.nodes:
        values = " ".join(f"{v:.12g}" for v in _pose_fields(node.pose))
        lines.append(f"NODE {node.id} {values} {node.frame_count}")
    for factor in graph.factors:
        if factor.kind.is_relative:
            meas = _pose_fields(factor.measurement)
        else:
            meas = list(factor.measurement)
        values = " ".join(
            f"{v:.12g}" for v in meas + list(np.diag(factor.information))
        )
        ids = " ".join(str(n) for n in factor.nodes)
        lines.append(f"FACTOR {factor.kind.value} {ids} {values}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_graph(path, config: SlamConfig = None) -> PoseGraph:
    graph = PoseGraph(config=config or SlamConfig())
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "SCALE":
                    graph.scale = float(parts[1])
                    graph.scale_initialized = True
                elif parts[0] == "NODE":
                    graph.nodes.append(
                        PoseNode(
                            id=int(parts[1]),
                            pose=_pose_from_fields(parts[2:9]),
                            frame_count=int(parts[9]),
                        )
                    )
                elif parts[0] == "FACTOR":
                    kind = FactorKind(parts[1])
                    if kind.is_relative:
                        ids, rest = parts[2:4], parts[4:]
                        meas = _pose_from_fields(rest[:7])
                        diag = rest[7:13]
                    else:
                        ids, rest = parts[2:3], parts[3:]
                        meas = np.array(rest[:3], dtype=float)
                        diag = rest[3:6]
                    graph.add_factor(
                        Factor(kind, ids, meas, np.diag(np.array(diag, dtype=float)))
                    )
                else:
                    raise ValueError(f"unknown record {parts[0]!r}")
            except (ValueError, IndexError) as err:
                raise GraphPreconditionError(f"{path}:{lineno}: {err}") from err
    return graph
