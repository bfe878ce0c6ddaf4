"""Rigid transforms as 4x4 homogeneous matrices.

Rotations go through scipy's ``Rotation`` so that composition and the
exponential/log maps stay numerically orthonormal.
"""

from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation


def make_pose(rotation: np.ndarray = None, translation=None) -> np.ndarray:
    """Build a 4x4 transform from a 3x3 rotation and a translation"""

    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = np.asarray(translation, dtype=float)
    return T


def nadir_pose(x: float, y: float, z: float, yaw: float = 0.0) -> np.ndarray:
    """Camera pose looking straight down (optical axis = world -z)"""

    # camera x -> world x, camera y -> world -y, camera z -> world -z
    down = np.diag([1.0, -1.0, -1.0])
    yaw_rot = Rotation.from_euler("z", yaw).as_matrix()
    return make_pose(yaw_rot @ down, (x, y, z))


def invert(T: np.ndarray) -> np.ndarray:
    R = T[:3, :3]
    t = T[:3, 3]
    return make_pose(R.T, -R.T @ t)


def relative(T_a: np.ndarray, T_b: np.ndarray) -> np.ndarray:
    """Transform of b expressed in the frame of a (a^-1 * b)"""

    return invert(T_a) @ T_b


def transform_points(T: np.ndarray, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return points @ T[:3, :3].T + T[:3, 3]


def rotation_exp(rotvec) -> np.ndarray:
    return Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()


def rotation_log(R: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(R).as_rotvec()


def rotation_angle(R: np.ndarray) -> float:
    return float(np.linalg.norm(rotation_log(R)))


def mean_pose(poses: Sequence[np.ndarray]) -> np.ndarray:
    """Chordal rotation mean and arithmetic translation mean"""

    rotations = Rotation.from_matrix(np.stack([T[:3, :3] for T in poses]))
    translation = np.mean([T[:3, 3] for T in poses], axis=0)
    return make_pose(rotations.mean().as_matrix(), translation)


def pose_error(T_est: np.ndarray, T_true: np.ndarray):
    """Translation error (m) and rotation error (rad) between two poses"""

    delta = relative(T_true, T_est)
    return (
        float(np.linalg.norm(T_est[:3, 3] - T_true[:3, 3])),
        rotation_angle(delta[:3, :3]),
    )
