from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import open3d as o3d

from .transforms import transform_points


@dataclass
class PointCloud:
    """Points with a per-point scalar color"""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    colors: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.colors is None or len(self.colors) == 0:
            self.colors = np.zeros(len(self.points))
        self.colors = np.asarray(self.colors, dtype=float).reshape(-1)
        if len(self.colors) != len(self.points):
            raise ValueError("points and colors must be index-aligned")

    def __len__(self) -> int:
        return len(self.points)

    def to_open3d(self) -> o3d.geometry.PointCloud:
        """open3d cloud with the scalar color as grey RGB"""

        cloud = o3d.geometry.PointCloud()
        cloud.points = o3d.utility.Vector3dVector(self.points)
        grey = np.clip(self.colors, 0.0, 1.0)
        cloud.colors = o3d.utility.Vector3dVector(np.repeat(grey[:, None], 3, axis=1))
        return cloud

    @staticmethod
    def from_open3d(cloud: o3d.geometry.PointCloud) -> "PointCloud":
        points = np.asarray(cloud.points, dtype=float)
        if cloud.has_colors():
            colors = np.asarray(cloud.colors, dtype=float).mean(axis=1)
        else:
            colors = np.zeros(len(points))
        return PointCloud(points, colors)

    def transformed(self, T: np.ndarray) -> "PointCloud":
        return PointCloud(transform_points(T, self.points), self.colors.copy())

    def scaled(self, s: float) -> "PointCloud":
        return PointCloud(self.points * s, self.colors.copy())

    @staticmethod
    def concatenate(clouds: Sequence["PointCloud"]) -> "PointCloud":
        clouds = [c for c in clouds if len(c) > 0]
        if not clouds:
            return PointCloud()
        return PointCloud(
            np.concatenate([c.points for c in clouds]),
            np.concatenate([c.colors for c in clouds]),
        )
