"""Emulator of a feed-forward 3D reconstruction model.

Predictions are ground truth relative poses and back-projected depth with
the translation scale divided by one hidden lognormal draw per submap,
plus optional rotation/translation perturbations.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import TooFewFrames
from ..geometry.pointcloud import PointCloud
from ..geometry.transforms import make_pose, relative, rotation_exp
from .camera import CameraModel, NoiseSpec, SensorFrame, backproject

logger = logging.getLogger(__name__)


@dataclass
class SubmapPrediction:
    frame_ids: List[int]
    frame_poses_local: List[np.ndarray]
    clouds_local: List[PointCloud]
    overlap_ids: List[int] = field(default_factory=list)
    # hidden scale of this prediction, kept for evaluation only
    s_true: float = 1.0

    def __post_init__(self):
        if len(self.frame_poses_local) < 2:
            raise TooFewFrames("a submap prediction needs at least 2 frames")
        if not (
            len(self.frame_ids)
            == len(self.frame_poses_local)
            == len(self.clouds_local)
        ):
            raise ValueError("frame ids, poses and clouds must be index-aligned")
        unknown = set(self.overlap_ids) - set(self.frame_ids)
        if unknown:
            raise ValueError(f"overlap ids {sorted(unknown)} are not frames")

    def index_of(self, frame_id: int) -> int:
        return self.frame_ids.index(frame_id)

    @property
    def n_frames(self) -> int:
        return len(self.frame_ids)


def emulate_f3dr(
    frames: Sequence[SensorFrame],
    overlap: Sequence[SensorFrame],
    noise: NoiseSpec,
    camera: CameraModel = None,
    scale: Optional[float] = None,
    cloud_stride: int = 2,
) -> SubmapPrediction:
    """Predict local poses and clouds of ``overlap + frames`` at an arbitrary scale"""

    batch = list(overlap) + list(frames)
    if len(batch) < 2:
        raise TooFewFrames(f"got {len(batch)} frame(s), need at least 2")
    camera = camera or CameraModel()
    rng = noise.rng

    if scale is None:
        s_true = noise.f3dr_scale
        if noise.submap_scale_sigma > 0:
            s_true *= float(np.exp(rng.normal(0.0, noise.submap_scale_sigma)))
    else:
        s_true = float(scale)

    anchor = batch[0].true_pose
    poses, clouds = [], []
    for k, frame in enumerate(batch):
        rel = relative(anchor, frame.true_pose)
        R = rel[:3, :3]
        t = rel[:3, 3] / s_true
        if k > 0 and noise.rel_rot_sigma > 0:
            R = R @ rotation_exp(rng.normal(0.0, noise.rel_rot_sigma, size=3))
        if k > 0 and noise.rel_trans_sigma_rel > 0:
            t = t + np.linalg.norm(t) * rng.normal(
                0.0, noise.rel_trans_sigma_rel, size=3
            )
        local_pose = make_pose(R, t)
        poses.append(local_pose)

        cam_cloud = backproject(frame, camera, stride=cloud_stride)
        clouds.append(cam_cloud.scaled(1.0 / s_true).transformed(local_pose))

    logger.debug(
        "emulated submap over frames %s (hidden scale %.4f)",
        [f.frame_id for f in batch],
        s_true,
    )
    return SubmapPrediction(
        frame_ids=[f.frame_id for f in batch],
        frame_poses_local=poses,
        clouds_local=clouds,
        overlap_ids=[f.frame_id for f in overlap],
        s_true=s_true,
    )
