import itertools

import numpy as np
import pytest

from aerial_explore.errors import BadConfig, EmptyRegion, NoCandidates
from aerial_explore.mapping.grids import KNOWN, GridSpec, OccupancyGrid
from aerial_explore.planner.atsp import (
    build_atsp_cost,
    path_cost,
    solve_atsp,
    solve_atsp_exact,
    solve_atsp_heuristic,
)
from aerial_explore.planner.config import PlannerConfig
from aerial_explore.planner.hierarchical import HierarchicalPlanner, PlanningSnapshot
from aerial_explore.planner.local import (
    PlanMode,
    plan_exploitation,
    plan_exploration,
    tour_plan,
)
from aerial_explore.planner.regions import (
    Region,
    RegionLabel,
    decompose_regions,
    label_regions,
    nearest_region,
    region_boxes,
    select_next_region,
)
from aerial_explore.taskinfo.frontiers import ClusterSet, FrontierCluster
from aerial_explore.taskinfo.relevancy import RelevancyGrid, thresholded


def _random_atsp(rng, n):
    C = rng.uniform(1.0, 100.0, size=(n + 1, n + 1))
    np.fill_diagonal(C, 0.0)
    C[1:, 0] = 0.0
    return C


def _brute_force(C):
    n = len(C) - 1
    perms = np.array(list(itertools.permutations(range(1, n + 1))))
    costs = C[0, perms[:, 0]] + C[perms[:, :-1], perms[:, 1:]].sum(axis=1)
    return float(costs.min())


def test_exact_atsp_matches_brute_force(rng):
    # 100 instances cycling through every size from 2 to 9
    for k in range(100):
        n = 2 + k % 8
        C = _random_atsp(rng, n)
        order = solve_atsp_exact(C)
        assert sorted(order) == list(range(1, n + 1))
        assert path_cost(C, order) == pytest.approx(_brute_force(C))


def test_heuristic_atsp_is_near_optimal(rng):
    within = 0
    for k in range(100):
        n = 10 + k % 3
        C = build_atsp_cost(rng.uniform(0, 100, 2), rng.uniform(0, 100, (n, 2)))
        best = path_cost(C, solve_atsp_exact(C))
        order = solve_atsp_heuristic(C)
        assert sorted(order) == list(range(1, n + 1))
        if path_cost(C, order) <= 1.05 * best + 1e-9:
            within += 1
    assert within >= 95


def test_single_frontier_route():
    C = build_atsp_cost([0.0, 0.0], [[3.0, 4.0]])
    assert solve_atsp(C) == [1]
    assert path_cost(C, [1]) == pytest.approx(5.0)


def test_atsp_cost_has_free_return():
    C = build_atsp_cost([0.0, 0.0], [[3.0, 4.0], [6.0, 8.0]])
    np.testing.assert_allclose(C[1:, 0], 0.0)
    assert C[0, 2] == pytest.approx(10.0)
    assert solve_atsp(C) == [1, 2]


def test_large_instances_use_the_heuristic(rng):
    C = build_atsp_cost([0.0, 0.0], rng.uniform(0, 100, (20, 2)))
    order = solve_atsp(C, n_exact=12)
    assert sorted(order) == list(range(1, 21))


def test_regions_partition_the_bounds(rng):
    regions = decompose_regions((0.0, 0.0, 100.0, 100.0), 40.0)
    assert len(regions) == 9
    assert regions[1].bounds == (0.0, 40.0, 40.0, 80.0)
    assert regions[8].bounds == (80.0, 80.0, 100.0, 100.0)
    points = np.vstack(
        [
            rng.uniform(0.0, 100.0, (500, 2)),
            [[0.0, 0.0], [40.0, 40.0], [100.0, 100.0], [100.0, 0.0], [80.0, 39.999]],
        ]
    )
    hits = np.stack([r.contains(points[:, 0], points[:, 1]) for r in regions])
    assert (hits.sum(axis=0) == 1).all()


def test_region_size_validated():
    with pytest.raises(BadConfig):
        decompose_regions((0.0, 0.0, 10.0, 10.0), 0.0)
    with pytest.raises(BadConfig):
        PlannerConfig(s_reg=-1.0)


def test_select_next_region_ratio_and_ties():
    a = Region(0, (0.0, 0.0, 10.0, 10.0), utility=0.5)
    b = Region(1, (10.0, 0.0, 20.0, 10.0), utility=0.5)
    # equidistant from the robot: the lower id wins
    assert select_next_region([b, a], (10.0, 5.0)).id == 0
    far = Region(2, (90.0, 0.0, 100.0, 10.0), utility=0.9)
    assert select_next_region([far, b], (10.0, 5.0)).id == 1
    # cost is clamped at c_min
    assert b.cost == pytest.approx(5.0)
    inside = Region(3, (0.0, 0.0, 2.0, 2.0), utility=0.1)
    select_next_region([inside], (1.0, 1.0), c_min=1.0)
    assert inside.cost == 1.0
    with pytest.raises(NoCandidates):
        select_next_region([], (0.0, 0.0))


def _two_region_scene():
    """Left half fully mapped and relevant, one frontier in the right half"""

    bounds = (0.0, 0.0, 80.0, 40.0)
    spec = GridSpec.from_bounds(bounds, 2.0)
    occ = OccupancyGrid(spec)
    occ.state[:20, :] = KNOWN
    rel = RelevancyGrid(spec)
    rel.score[:20, :] = 0.9
    cells = np.stack([np.arange(30, 35), np.full(5, 10)], axis=1)
    cluster = FrontierCluster.from_cells(0, cells, spec)
    return bounds, spec, occ, rel, ClusterSet([cluster], 1, np.zeros(spec.dims, bool))


def test_label_regions_exploitation_persists_until_visited():
    bounds, spec, occ, rel, clusters = _two_region_scene()
    cfg = PlannerConfig()
    regions = decompose_regions(bounds, cfg.s_reg)
    explore, exploit = label_regions(
        regions, clusters, rel, occ, cfg, True, (70.0, 20.0)
    )
    assert [r.id for r in exploit] == [0]
    assert [r.id for r in explore] == [1]
    assert exploit[0].utility == pytest.approx(0.9)
    assert explore[0].utility == pytest.approx(cfg.u0)

    _, exploit = label_regions(regions, clusters, rel, occ, cfg, False, (70.0, 20.0))
    assert [r.id for r in exploit] == [0]
    _, exploit = label_regions(regions, clusters, rel, occ, cfg, False, (20.0, 20.0))
    assert exploit == []
    assert regions[0].label is RegionLabel.NONE


def test_plan_exploration_prunes_low_utility_clusters():
    spec = GridSpec((0.0, 0.0), 1.0, (40, 40))
    rel = RelevancyGrid(spec)
    rel.score[5, 5] = 0.8
    rel.score[30, 30] = 0.1
    good = FrontierCluster.from_cells(0, [[5, 5]], spec)
    poor = FrontierCluster.from_cells(1, [[30, 30]], spec)
    region = Region(0, (0.0, 0.0, 40.0, 40.0), cluster_ids=[0, 1])
    plan = plan_exploration(region, [good, poor], rel, (0.0, 0.0), PlannerConfig())
    np.testing.assert_allclose(plan.waypoints, [[0.0, 0.0], [5.5, 5.5]])
    assert plan.target_region == 0

    rel.score[5, 5] = 0.1
    plan = plan_exploration(region, [good, poor], rel, (0.0, 0.0), PlannerConfig())
    assert len(plan.waypoints) == 3

    with pytest.raises(EmptyRegion):
        plan_exploration(Region(1, (0.0, 0.0, 1.0, 1.0)), [good], rel, (0, 0), PlannerConfig())


def test_plan_exploitation_heads_for_the_center():
    plan = plan_exploitation(Region(4, (0.0, 0.0, 40.0, 40.0)), (50.0, 20.0))
    assert plan.mode is PlanMode.EXPLOIT
    np.testing.assert_allclose(plan.waypoints, [[50.0, 20.0], [20.0, 20.0]])
    assert plan.length == pytest.approx(30.0)


def test_tour_plan_starts_at_the_robot():
    spec = GridSpec((0.0, 0.0), 1.0, (40, 40))
    clusters = [
        FrontierCluster.from_cells(k, [[x, 0]], spec) for k, x in enumerate((30, 10, 20))
    ]
    plan = tour_plan(clusters, (0.5, 0.5))
    np.testing.assert_allclose(
        plan.waypoints[:, 0], [0.5, 10.5, 20.5, 30.5]
    )


def test_hierarchical_planner_exploits_the_mapped_region():
    bounds, spec, occ, rel, clusters = _two_region_scene()
    planner = HierarchicalPlanner(bounds, spec, PlannerConfig())
    snap = PlanningSnapshot(0.0, np.array([70.0, 20.0]), occ, rel, clusters, True)
    plan = planner.update(snap)
    assert plan.mode is PlanMode.EXPLOIT
    np.testing.assert_allclose(plan.waypoints[-1], [20.0, 20.0])

    # not due before the local period
    later = PlanningSnapshot(0.5, np.array([69.0, 20.0]), occ, rel, clusters, False)
    assert planner.update(later) is None
    due = PlanningSnapshot(1.0, np.array([68.0, 20.0]), occ, rel, clusters, False)
    assert planner.update(due) is not None


def test_nearest_region_breaks_ties_by_id():
    a = Region(0, (0.0, 0.0, 10.0, 10.0))
    b = Region(1, (10.0, 0.0, 20.0, 10.0))
    c = Region(2, (40.0, 0.0, 50.0, 10.0))
    assert nearest_region([c, b, a], (10.0, 5.0)).id == 0
    assert nearest_region([c, b, a], (44.0, 5.0)).id == 2
    with pytest.raises(NoCandidates):
        nearest_region([], (0.0, 0.0))


def test_region_utilities_match_cell_means(rng):
    bounds = (0.0, 0.0, 90.0, 50.0)
    spec = GridSpec.from_bounds(bounds, 2.0)
    rel = RelevancyGrid(spec)
    rel.score = rng.uniform(0.0, 1.0, spec.dims)
    rel.score[rng.uniform(size=spec.dims) < 0.3] = np.nan
    occ = OccupancyGrid(spec)
    cfg = PlannerConfig(s_reg=20.0)
    regions = decompose_regions(bounds, cfg.s_reg)
    clusters = [
        FrontierCluster.from_points(r.id, np.zeros((1, 2), int), r.center[None])
        for r in regions
    ]
    explore, _ = label_regions(regions, clusters, rel, occ, cfg, True, (-10.0, -10.0))
    assert len(explore) == len(regions) == 15
    for region, box in zip(regions, region_boxes(regions, spec)):
        mask = region.cell_mask(spec)
        x0, x1, y0, y1 = box
        assert mask.sum() == (x1 - x0) * (y1 - y0)
        assert mask[x0:x1, y0:y1].all()
        expected = thresholded(rel.score[mask], cfg.eps_e, cfg.u0).mean()
        assert region.utility == pytest.approx(expected)


def _gate_scene():
    """Grass frontier next to the robot, relevant frontier in the far region"""

    bounds = (0.0, 0.0, 80.0, 40.0)
    spec = GridSpec.from_bounds(bounds, 2.0)
    occ = OccupancyGrid(spec)
    rel = RelevancyGrid(spec)
    near_cells = np.stack([np.arange(5, 10), np.full(5, 10)], axis=1)
    far_cells = np.stack([np.arange(30, 35), np.full(5, 10)], axis=1)
    for cells, score in ((near_cells, 0.0), (far_cells, 0.8)):
        occ.state[cells[:, 0], cells[:, 1]] = KNOWN
        rel.score[cells[:, 0], cells[:, 1]] = score
    clusters = ClusterSet(
        [
            FrontierCluster.from_cells(0, near_cells, spec),
            FrontierCluster.from_cells(1, far_cells, spec),
        ],
        2,
        np.zeros(spec.dims, bool),
    )
    return bounds, spec, occ, rel, clusters


@pytest.mark.parametrize("gate, region", [(True, 1), (False, 0)])
def test_relevant_frontiers_gate_region_choice(gate, region):
    bounds, spec, occ, rel, clusters = _gate_scene()
    planner = HierarchicalPlanner(
        bounds, spec, PlannerConfig(s_reg=40.0, relevant_gate=gate)
    )
    snap = PlanningSnapshot(0.0, np.array([5.0, 20.0]), occ, rel, clusters, True)
    plan = planner.update(snap)
    assert plan.target_region == region
    assert plan.mode is PlanMode.EXPLORE


def test_zero_utility_falls_back_to_the_nearest_region():
    bounds, spec, occ, rel, clusters = _gate_scene()
    rel.score[np.isfinite(rel.score)] = 0.0
    planner = HierarchicalPlanner(bounds, spec, PlannerConfig(s_reg=40.0, u0=0.0))
    snap = PlanningSnapshot(0.0, np.array([75.0, 20.0]), occ, rel, clusters, True)
    assert planner.update(snap).target_region == 1
    assert planner.target.cost == pytest.approx(15.0)
