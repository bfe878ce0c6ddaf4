import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import BadConfig
from ..mapping.grids import ChangeBBox, FeatureGrid, GridSpec
from .frontiers import FrontierCluster

logger = logging.getLogger(__name__)

# scope marker for a refresh of every cell
FULL = None


@dataclass
class TaskEmbedding:
    task_id: str
    e: np.ndarray
    description: str = ""

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float)
        if abs(np.linalg.norm(self.e) - 1.0) > 1e-6:
            raise BadConfig(f"task {self.task_id!r} embedding is not unit norm")


@dataclass
class RelevancyGrid:
    """Clamped cosine score per cell; NaN where nothing was observed"""

    spec: GridSpec
    score: np.ndarray = None

    def __post_init__(self):
        if self.score is None:
            self.score = np.full(self.spec.dims, np.nan)

    @property
    def observed(self) -> np.ndarray:
        return np.isfinite(self.score)

    def copy(self) -> "RelevancyGrid":
        return RelevancyGrid(self.spec, self.score.copy())


def update_relevancy(
    rel: RelevancyGrid,
    feat: FeatureGrid,
    task: TaskEmbedding,
    bbox: Optional[ChangeBBox] = FULL,
) -> RelevancyGrid:
    """Rescore the cells in ``bbox`` (every cell for FULL) against ``task``"""

    if rel.spec != feat.spec:
        raise BadConfig("relevancy and feature grids must share a grid spec")
    if bbox is FULL:
        sl = (slice(None), slice(None))
    elif bbox.empty:
        return rel
    else:
        sl = bbox.slices()

    features = feat.feature[sl]
    observed = feat.count[sl] > 0
    norms = np.linalg.norm(features, axis=-1)
    cosine = features @ task.e / np.where(norms > 0, norms, 1.0)
    rel.score[sl] = np.where(observed, np.maximum(cosine, 0.0), np.nan)
    return rel


def thresholded(scores: np.ndarray, eps: float, u0: float) -> np.ndarray:
    """Scores below ``eps`` become 0 and unobserved cells become ``u0``"""

    scores = np.asarray(scores, dtype=float)
    out = np.where(scores < eps, 0.0, scores)
    return np.where(np.isnan(scores), u0, out)


def score_cluster(
    cluster: FrontierCluster, rel: RelevancyGrid, eps_ftr: float, u0: float = 0.05
) -> float:
    """Mean thresholded relevancy over the cluster's cells"""

    values = rel.score[cluster.cells[:, 0], cluster.cells[:, 1]]
    utility = float(thresholded(values, eps_ftr, u0).mean())
    cluster.mean_utility = utility
    return utility
