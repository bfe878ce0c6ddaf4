"""Levenberg-Marquardt over the submap anchor poses with gtsam.

GPS priors become ``GPSFactor``s on the anchor translation, F3DR, ICP and
loop measurements become ``BetweenFactorPose3``s. Loop factors carry a
Huber kernel of width ``SlamConfig.huber_width`` on their whitened error.
Without any GPS prior the first anchor is pinned by a tight pose prior.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import gtsam
import numpy as np

from ..errors import GraphPreconditionError
from .graph import Factor, FactorKind, PoseGraph

logger = logging.getLogger(__name__)

GAUGE_SIGMA = 1e-9


@dataclass
class OptimizeReport:
    initial_cost: float
    final_cost: float
    iterations: int
    not_converged: bool = False


def pose_key(node_id: int) -> int:
    return gtsam.symbol("x", node_id)


def _noise(factor: Factor, huber: float):
    model = gtsam.noiseModel.Gaussian.Information(factor.information)
    if factor.kind is FactorKind.LOOP_REL:
        return gtsam.noiseModel.Robust.Create(
            gtsam.noiseModel.mEstimator.Huber.Create(huber), model
        )
    return model


def build_factor_graph(
    graph: PoseGraph, poses: List[np.ndarray] = None
) -> Tuple[gtsam.NonlinearFactorGraph, gtsam.Values]:
    """gtsam factors and initial values for the graph (or for ``poses``)"""

    poses = [n.pose for n in graph.nodes] if poses is None else poses
    huber = graph.config.huber_width
    factors = gtsam.NonlinearFactorGraph()
    values = gtsam.Values()
    for node, pose in zip(graph.nodes, poses):
        values.insert(pose_key(node.id), gtsam.Pose3(pose))

    for factor in graph.factors:
        noise = _noise(factor, huber)
        if factor.kind is FactorKind.GPS_PRIOR:
            (i,) = factor.nodes
            factors.add(
                gtsam.GPSFactor(pose_key(i), gtsam.Point3(*factor.measurement), noise)
            )
        else:
            i, j = factor.nodes
            factors.add(
                gtsam.BetweenFactorPose3(
                    pose_key(i), pose_key(j), gtsam.Pose3(factor.measurement), noise
                )
            )

    if not graph.factors_of(FactorKind.GPS_PRIOR):
        # gauge: hold the first anchor where it is
        factors.add(
            gtsam.PriorFactorPose3(
                pose_key(graph.nodes[0].id),
                gtsam.Pose3(poses[0]),
                gtsam.noiseModel.Isotropic.Sigma(6, GAUGE_SIGMA),
            )
        )
    return factors, values


def total_cost(graph: PoseGraph, poses: List[np.ndarray] = None) -> float:
    factors, values = build_factor_graph(graph, poses)
    return float(factors.error(values))


def optimize(
    graph: PoseGraph,
    max_iter: int = 20,
    tolerance: float = 1e-9,
    damping: float = 1e-4,
) -> OptimizeReport:
    """Minimize the factor graph error in place; never increases the cost"""

    if not graph.nodes or not graph.factors:
        raise GraphPreconditionError(
            "optimize needs at least one node and one factor"
        )
    factors, initial = build_factor_graph(graph)
    initial_cost = float(factors.error(initial))

    params = gtsam.LevenbergMarquardtParams()
    params.setMaxIterations(max_iter)
    params.setRelativeErrorTol(tolerance)
    params.setAbsoluteErrorTol(tolerance)
    params.setlambdaInitial(damping)
    optimizer = gtsam.LevenbergMarquardtOptimizer(factors, initial, params)
    result = optimizer.optimize()
    final_cost = float(factors.error(result))
    iterations = int(optimizer.iterations())

    if final_cost > initial_cost:
        # a rejected run keeps the starting poses
        result, final_cost = initial, initial_cost
    for node in graph.nodes:
        node.pose = result.atPose3(pose_key(node.id)).matrix()

    not_converged = iterations >= max_iter and final_cost > tolerance
    if not_converged:
        logger.warning(
            "pose graph did not converge in %d iterations (cost %.4g)",
            max_iter,
            final_cost,
        )
    logger.debug(
        "optimize: cost %.6g -> %.6g in %d iterations",
        initial_cost,
        final_cost,
        iterations,
    )
    return OptimizeReport(initial_cost, final_cost, iterations, not_converged)
