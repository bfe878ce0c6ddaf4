"""Mission and reconstruction evaluation"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import KDTree

from ..errors import BadDistance, EmptyCloud
from ..geometry.pointcloud import PointCloud

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["task_id", "time_s", "distance_m", "d_opt_m", "cr", "complete"]
TOTAL_ROW = "total"


def competitive_ratio(d_opt: float, d_actual: float) -> float:
    """Optimal over executed path length, capped at 1"""

    if not (d_opt > 0 and d_actual > 0):
        raise BadDistance(
            f"path lengths must be positive (d_opt={d_opt}, d_actual={d_actual})"
        )
    return min(1.0, d_opt / d_actual)


def shortest_goal_distance(
    goal_points: np.ndarray, issue_position, footprint_half_width: float
) -> float:
    """Distance flown until the nearest goal first enters the footprint"""

    goal_points = np.asarray(goal_points, dtype=float).reshape(-1, 2)
    if len(goal_points) == 0:
        raise ValueError("task has no goal cells")
    start = np.asarray(issue_position, dtype=float)[:2]
    d = np.linalg.norm(goal_points - start, axis=1).min()
    return float(max(0.0, d - footprint_half_width))


def task_ratio(d_opt: float, d_actual: float) -> float:
    """Competitive ratio with a task resolved at issue counted as optimal"""

    if d_opt <= 0 or d_actual <= 0:
        return 1.0
    return competitive_ratio(d_opt, d_actual)


@dataclass
class TaskRecord:
    task_id: str
    issue_time: float
    time_s: float = np.nan
    distance_m: float = np.nan
    d_opt_m: float = np.nan
    cr: float = np.nan
    complete: bool = False


@dataclass
class MetricsRecord:
    planner: str
    seed: int
    tasks: List[TaskRecord] = field(default_factory=list)
    # complete / timeout / stalled
    status: str = "complete"
    recon: Optional[Dict[str, float]] = None

    @property
    def complete(self) -> bool:
        return self.status == "complete" and all(t.complete for t in self.tasks)

    @property
    def timed_out(self) -> bool:
        return self.status == "timeout"

    def totals(self) -> TaskRecord:
        """Summed time, distance and d_opt of the completed tasks"""

        done = [t for t in self.tasks if t.complete]
        total = TaskRecord(TOTAL_ROW, 0.0, complete=self.complete)
        if not done:
            return total
        total.time_s = float(sum(t.time_s for t in done))
        total.distance_m = float(sum(t.distance_m for t in done))
        total.d_opt_m = float(sum(t.d_opt_m for t in done))
        total.cr = task_ratio(total.d_opt_m, total.distance_m)
        return total

    def to_frame(self, with_totals: bool = True) -> pd.DataFrame:
        rows = list(self.tasks)
        if with_totals:
            rows.append(self.totals())
        df = pd.DataFrame([asdict(r) for r in rows], columns=METRIC_COLUMNS)
        df["complete"] = df["complete"].astype(bool)
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.6f")

    def summary(self) -> Dict[str, object]:
        total = self.totals()
        summary = {
            "planner": self.planner,
            "seed": self.seed,
            "status": self.status,
            "complete": self.complete,
            "time_s": total.time_s,
            "distance_m": total.distance_m,
            "cr": total.cr,
        }
        if self.recon:
            summary.update(self.recon)
        return summary


## reconstruction


def umeyama(source: np.ndarray, target: np.ndarray, with_scale: bool = True):
    """Similarity (s, R, t) minimizing |s R source + t - target| over paired rows"""

    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    xs = source - mu_s
    xt = target - mu_t
    cov = xt.T @ xs / len(source)
    U, S, Vt = np.linalg.svd(cov)
    D = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        D[2, 2] = -1.0
    R = U @ D @ Vt
    var_s = (xs**2).sum() / len(source)
    s = float(np.trace(np.diag(S) @ D) / var_s) if with_scale and var_s > 0 else 1.0
    t = mu_t - s * R @ mu_s
    return s, R, t


def align_similarity(
    recon: np.ndarray,
    gt: np.ndarray,
    iterations: int = 30,
    tolerance: float = 1e-9,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Coarse centroid/spread match, then nearest-neighbour Umeyama refinement"""

    mu_r, mu_g = recon.mean(axis=0), gt.mean(axis=0)
    spread_r = np.sqrt(((recon - mu_r) ** 2).sum(axis=1).mean())
    spread_g = np.sqrt(((gt - mu_g) ** 2).sum(axis=1).mean())
    s = spread_g / spread_r if spread_r > 0 else 1.0
    R = np.eye(3)
    t = mu_g - s * mu_r

    tree = KDTree(gt)
    previous = np.inf
    for _ in range(iterations):
        moved = s * recon @ R.T + t
        dist, idx = tree.query(moved)
        rmse = float(np.sqrt(np.mean(dist**2)))
        if previous - rmse < tolerance:
            break
        previous = rmse
        s, R, t = umeyama(recon, gt[idx])
    return s, R, t


def recon_metrics(
    recon: PointCloud, gt: PointCloud, align: bool = False
) -> Dict[str, float]:
    """Accuracy, completion and Chamfer distance in meters"""

    if len(recon) == 0 or len(gt) == 0:
        raise EmptyCloud("reconstruction metrics need two non-empty clouds")
    points = recon.points
    if align:
        s, R, t = align_similarity(points, gt.points)
        points = s * points @ R.T + t
        logger.debug("aligned reconstruction with scale %.4f", s)

    accuracy_d, _ = KDTree(gt.points).query(points)
    completion_d, _ = KDTree(points).query(gt.points)
    accuracy = float(np.sqrt(np.mean(accuracy_d**2)))
    completion = float(np.sqrt(np.mean(completion_d**2)))
    return {
        "accuracy": accuracy,
        "completion": completion,
        "chamfer": (accuracy + completion) / 2.0,
    }
