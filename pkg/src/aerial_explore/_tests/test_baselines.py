import numpy as np
import pytest

from aerial_explore.baselines.baselines import (
    PLANNER_NAMES,
    CoveragePlanner,
    coverage_plan,
    fuel_plan,
    make_planner,
    nearest_frontier_plan,
    vlfm_select,
)
from aerial_explore.errors import BadConfig, NoFrontiers
from aerial_explore.mapping.grids import GridSpec, OccupancyGrid
from aerial_explore.planner.atsp import build_atsp_cost, solve_atsp
from aerial_explore.planner.hierarchical import HierarchicalPlanner, PlanningSnapshot
from aerial_explore.taskinfo.frontiers import ClusterSet, FrontierCluster
from aerial_explore.taskinfo.relevancy import RelevancyGrid

SPEC = GridSpec((0.0, 0.0), 1.0, (100, 100))


def _cluster(cid, ix, iy):
    return FrontierCluster.from_cells(cid, [[ix, iy]], SPEC)


def test_coverage_sweep_from_the_robot_corner():
    plan = coverage_plan((0.0, 0.0, 200.0, 100.0), (0.0, 0.0), 30.0)
    # four passes along x; the last one stays half a swath inside the edge
    np.testing.assert_allclose(
        plan.waypoints,
        [
            [0, 0], [0, 0], [0, 15], [200, 15], [200, 45], [0, 45],
            [0, 75], [200, 75], [200, 85], [0, 85],
        ],
    )
    assert plan.length == pytest.approx(15 + 4 * 200 + 2 * 30 + 10)


def test_coverage_sweep_starts_at_nearest_corner():
    plan = coverage_plan((0.0, 0.0, 100.0, 200.0), (95.0, 190.0), 40.0)
    np.testing.assert_allclose(plan.waypoints[1], [100.0, 200.0])
    # passes run along y at x = 80, 40 and 20
    np.testing.assert_allclose(plan.waypoints[2], [80.0, 200.0])
    np.testing.assert_allclose(plan.waypoints[-1], [20.0, 0.0])
    assert len(plan.waypoints) == 2 + 2 * 3


def test_single_swath_runs_down_the_middle():
    plan = coverage_plan((0.0, 0.0, 100.0, 20.0), (0.0, 0.0), 40.0)
    np.testing.assert_allclose(plan.waypoints[2:], [[0.0, 10.0], [100.0, 10.0]])


def test_coverage_needs_a_positive_width():
    with pytest.raises(BadConfig):
        coverage_plan((0.0, 0.0, 10.0, 10.0), (0.0, 0.0), 0.0)


def test_nearest_frontier_breaks_ties_by_id():
    clusters = [_cluster(4, 10, 0), _cluster(2, 0, 10), _cluster(7, 30, 30)]
    plan = nearest_frontier_plan(clusters, (0.5, 0.5))
    np.testing.assert_allclose(plan.waypoints[-1], [0.5, 10.5])
    with pytest.raises(NoFrontiers):
        nearest_frontier_plan([], (0.0, 0.0))


def test_vlfm_prefers_utility_over_distance():
    rel = RelevancyGrid(SPEC)
    rel.score[10, 0] = 0.4
    rel.score[40, 0] = 0.8
    near, far = _cluster(0, 10, 0), _cluster(1, 40, 0)
    plan = vlfm_select([far, near], rel, (0.5, 0.5), eps_ftr=0.25)
    np.testing.assert_allclose(plan.waypoints[-1], near.centroid)
    assert near.mean_utility == pytest.approx(0.4)
    assert far.mean_utility == pytest.approx(0.8)


def test_fuel_tours_every_cluster(rng):
    cells = rng.integers(0, 100, size=(6, 2))
    clusters = [_cluster(k, x, y) for k, (x, y) in enumerate(cells)]
    robot = np.array([50.0, 50.0])
    plan = fuel_plan(clusters[::-1], robot)

    centroids = np.array([c.centroid for c in clusters])
    order = solve_atsp(build_atsp_cost(robot, centroids))
    np.testing.assert_allclose(plan.waypoints[1:], centroids[np.array(order) - 1])
    np.testing.assert_allclose(plan.waypoints[0], robot)


def test_make_planner_names():
    bounds = (0.0, 0.0, 100.0, 100.0)
    assert PLANNER_NAMES == ("halo", "coverage", "frontier", "fuel", "vlfm")
    for name in PLANNER_NAMES:
        assert make_planner(name, bounds, SPEC).name == name
    assert isinstance(make_planner("halo", bounds, SPEC), HierarchicalPlanner)
    with pytest.raises(BadConfig):
        make_planner("random-walk", bounds, SPEC)


def test_coverage_planner_plans_once():
    planner = CoveragePlanner((0.0, 0.0, 100.0, 100.0), 40.0)
    snap = PlanningSnapshot(
        0.0, np.array([0.0, 0.0]), OccupancyGrid(SPEC), RelevancyGrid(SPEC), ClusterSet()
    )
    first = planner.update(snap)
    assert first is not None
    snap.time = 5.0
    snap.plan_exhausted = True
    assert planner.update(snap) is None
