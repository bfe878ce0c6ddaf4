import numpy as np
import pytest

from aerial_explore.errors import BadConfig
from aerial_explore.mapping.grids import (
    KNOWN,
    ChangeBBox,
    FeatureGrid,
    GridSpec,
    OccupancyGrid,
    take_change_bbox,
)
from aerial_explore.taskinfo.frontiers import (
    FrontierCluster,
    FrontierParams,
    detect_frontiers,
    detect_frontiers_full,
    frontier_mask,
    split_cluster,
)
from aerial_explore.taskinfo.relevancy import (
    RelevancyGrid,
    TaskEmbedding,
    score_cluster,
    thresholded,
    update_relevancy,
)


def _reveal(occ, x0, y0, x1, y1):
    occ.state[x0:x1, y0:y1] = KNOWN
    box = ChangeBBox((x0, y0), (x1 - 1, y1 - 1), False)
    occ.pending = occ.pending.union(box)


def test_frontier_mask_uses_four_neighbours():
    occ = OccupancyGrid(GridSpec((0.0, 0.0), 1.0, (5, 5)))
    occ.state[:] = KNOWN
    occ.state[2, 2] = 0
    mask = frontier_mask(occ)
    assert set(zip(*np.nonzero(mask))) == {(1, 2), (3, 2), (2, 1), (2, 3)}


def test_map_border_is_not_a_frontier():
    occ = OccupancyGrid(GridSpec((0.0, 0.0), 1.0, (5, 5)))
    occ.state[:] = KNOWN
    assert not frontier_mask(occ).any()
    occ.state[:] = 0
    occ.state[1:4, 1:4] = KNOWN
    assert frontier_mask(occ).sum() == 8


def test_small_components_are_dropped(empty_occ):
    empty_occ.state[10, 10] = KNOWN
    assert len(detect_frontiers_full(empty_occ)) == 0


def test_split_cluster_bounds_radius():
    spec = GridSpec((0.0, 0.0), 1.0, (80, 3))
    cells = np.stack([np.arange(61), np.ones(61, dtype=int)], axis=1)
    cluster = FrontierCluster.from_cells(0, cells, spec)
    assert cluster.radius == pytest.approx(30.0)
    parts = split_cluster(cluster, 20.0)
    assert sorted(len(p) for p in parts) == [30, 31]
    assert all(p.radius <= 20.0 for p in parts)
    merged = set().union(*(p.cell_set for p in parts))
    assert merged == cluster.cell_set


def test_long_frontier_is_split(empty_occ):
    _reveal(empty_occ, 0, 0, 40, 10)
    clusters = detect_frontiers_full(empty_occ, FrontierParams(ftr_max=8.0))
    assert len(clusters) > 1
    assert all(c.radius <= 8.0 for c in clusters)
    covered = set().union(*(c.cell_set for c in clusters))
    assert covered == set(zip(*np.nonzero(frontier_mask(empty_occ))))


def test_frontier_params_validated():
    with pytest.raises(BadConfig):
        FrontierParams(ftr_min=5.0, ftr_max=5.0)
    with pytest.raises(BadConfig):
        FrontierParams(connectivity=6)


@pytest.mark.parametrize("seed", range(50))
def test_incremental_frontiers_match_full_recompute(seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec((0.0, 0.0), 1.0, (200, 200))
    occ = OccupancyGrid(spec)
    params = FrontierParams(ftr_min=2.0, ftr_max=10.0)
    clusters = detect_frontiers(occ, take_change_bbox(occ), None, params)
    for _ in range(10):
        x0, y0 = rng.integers(0, 190, size=2)
        w, h = rng.integers(8, 40, size=2)
        _reveal(occ, x0, y0, min(x0 + w, 200), min(y0 + h, 200))
        clusters = detect_frontiers(occ, take_change_bbox(occ), clusters, params)
        batch = detect_frontiers_full(occ, params)
        assert clusters.partition() == batch.partition()
        ids = [c.id for c in clusters]
        assert len(set(ids)) == len(ids)
        assert all(i < clusters.next_id for i in ids)


def test_empty_change_keeps_clusters(empty_occ):
    _reveal(empty_occ, 5, 5, 20, 20)
    clusters = detect_frontiers(empty_occ, take_change_bbox(empty_occ))
    again = detect_frontiers(empty_occ, take_change_bbox(empty_occ), clusters)
    assert again is clusters


def _relevancy_setup():
    spec = GridSpec((0.0, 0.0), 1.0, (2, 2))
    e = np.array([1.0, 0.0, 0.0])
    feat = FeatureGrid(spec, 3)
    feat.feature[0, 0] = e
    feat.feature[1, 1] = [0.0, 1.0, 0.0]
    feat.feature[0, 1] = -e
    feat.count[[0, 1, 0], [0, 1, 1]] = 1
    return spec, feat, TaskEmbedding("t", e)


def test_relevancy_is_clamped_cosine():
    spec, feat, task = _relevancy_setup()
    rel = update_relevancy(RelevancyGrid(spec), feat, task)
    assert rel.score[0, 0] == pytest.approx(1.0)
    assert rel.score[1, 1] == pytest.approx(0.0)
    assert rel.score[0, 1] == 0.0
    assert np.isnan(rel.score[1, 0])


def test_relevancy_update_is_scoped_to_the_box():
    spec, feat, task = _relevancy_setup()
    rel = update_relevancy(
        RelevancyGrid(spec), feat, task, ChangeBBox((0, 0), (0, 0), False)
    )
    assert rel.score[0, 0] == pytest.approx(1.0)
    assert np.isnan(rel.score[1, 1])
    unchanged = update_relevancy(rel, feat, task, ChangeBBox())
    assert np.isnan(unchanged.score[1, 1])


def test_task_embedding_must_be_unit():
    with pytest.raises(BadConfig):
        TaskEmbedding("t", [1.0, 1.0])


def test_thresholded_scores():
    out = thresholded(np.array([np.nan, 0.1, 0.5]), 0.25, 0.05)
    np.testing.assert_allclose(out, [0.05, 0.0, 0.5])


def test_score_cluster_sets_mean_utility():
    spec, feat, task = _relevancy_setup()
    rel = update_relevancy(RelevancyGrid(spec), feat, task)
    cluster = FrontierCluster.from_cells(3, [[0, 0], [1, 0]], spec)
    # 1.0 observed and the unobserved prior
    assert score_cluster(cluster, rel, 0.25, 0.05) == pytest.approx(0.525)
    assert cluster.mean_utility == pytest.approx(0.525)
