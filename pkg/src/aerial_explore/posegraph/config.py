from dataclasses import dataclass, field

import numpy as np

from ..errors import BadConfig
from .icp import IcpConfig


@dataclass
class SlamConfig:
    """Submap batching, factor weights and optimizer settings"""

    submap_size: int = 5
    overlap: int = 3
    scale_blend: float = 0.3
    loop_radius: float = 20.0
    min_loop_gap: int = 5
    icp_fitness_floor: float = 0.3
    # standard deviation assumed for GPS priors, in meters
    gps_sigma: float = 1.0
    f3dr_rot_weight: float = 100.0
    f3dr_trans_weight: float = 1.0
    icp_rot_weight: float = 100.0
    icp_trans_weight: float = 4.0
    loop_rot_weight: float = 100.0
    loop_trans_weight: float = 1.0
    huber_width: float = 1.0
    use_gps: bool = True
    optimize_every: int = 1
    max_iter: int = 20
    icp: IcpConfig = field(default_factory=IcpConfig)

    def __post_init__(self):
        if isinstance(self.icp, dict):
            self.icp = IcpConfig(**self.icp)
        if self.overlap < 1:
            raise BadConfig("overlap must be at least 1 frame")
        if self.submap_size <= self.overlap:
            raise BadConfig("submap_size must exceed overlap")
        if not 0 < self.scale_blend <= 1:
            raise BadConfig("scale_blend must lie in (0, 1]")
        if self.loop_radius < 0 or self.min_loop_gap < 1:
            raise BadConfig("loop_radius >= 0 and min_loop_gap >= 1 required")
        if self.gps_sigma <= 0:
            raise BadConfig("gps_sigma must be positive")
        if self.huber_width <= 0:
            raise BadConfig("huber_width must be positive")
        if self.optimize_every < 1 or self.max_iter < 1:
            raise BadConfig("optimize_every and max_iter must be positive")
        weights = (
            self.f3dr_rot_weight,
            self.f3dr_trans_weight,
            self.icp_rot_weight,
            self.icp_trans_weight,
            self.loop_rot_weight,
            self.loop_trans_weight,
        )
        if min(weights) <= 0:
            raise BadConfig("factor weights must be positive")

    def gps_information(self) -> np.ndarray:
        return np.eye(3) / self.gps_sigma**2

    def f3dr_information(self) -> np.ndarray:
        return np.diag([self.f3dr_rot_weight] * 3 + [self.f3dr_trans_weight] * 3)

    def icp_information(self) -> np.ndarray:
        return np.diag([self.icp_rot_weight] * 3 + [self.icp_trans_weight] * 3)

    def loop_information(self) -> np.ndarray:
        return np.diag([self.loop_rot_weight] * 3 + [self.loop_trans_weight] * 3)
