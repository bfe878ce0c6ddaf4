import numpy as np
import pandas as pd
import pytest

from aerial_explore.errors import BadDistance, EmptyCloud
from aerial_explore.geometry.pointcloud import PointCloud
from aerial_explore.geometry.transforms import rotation_exp
from aerial_explore.mission.events import Event, EventLog, first_divergence
from aerial_explore.mission.metrics import (
    METRIC_COLUMNS,
    MetricsRecord,
    TaskRecord,
    competitive_ratio,
    recon_metrics,
    shortest_goal_distance,
    task_ratio,
    umeyama,
)


@pytest.mark.parametrize(
    "d_actual, d_opt, expected",
    [
        (289.38, 100.70, 0.35),
        (139.86, 114.83, 0.82),
        (240.67, 100.70, 0.42),
        (98.16, 53.32, 0.54),
    ],
)
def test_competitive_ratio_table(d_actual, d_opt, expected):
    assert round(competitive_ratio(d_opt, d_actual), 2) == expected


def test_competitive_ratio_is_capped():
    assert competitive_ratio(50.0, 50.0) == 1.0
    assert competitive_ratio(80.0, 40.0) == 1.0


@pytest.mark.parametrize("d_opt, d_actual", [(0.0, 10.0), (10.0, 0.0), (-1.0, 5.0)])
def test_competitive_ratio_rejects_nonpositive(d_opt, d_actual):
    with pytest.raises(BadDistance):
        competitive_ratio(d_opt, d_actual)


def test_task_resolved_at_issue_counts_as_optimal():
    assert task_ratio(0.0, 12.0) == 1.0
    assert task_ratio(10.0, 0.0) == 1.0
    assert task_ratio(10.0, 20.0) == pytest.approx(0.5)


def test_shortest_goal_distance():
    assert shortest_goal_distance([[100.0, 0.0]], (0.0, 0.0), 20.0) == pytest.approx(80.0)
    assert shortest_goal_distance(
        [[0.0, 200.0], [50.0, 0.0]], (0.0, 0.0), 20.0
    ) == pytest.approx(30.0)
    assert shortest_goal_distance([[5.0, 5.0]], (0.0, 0.0), 20.0) == 0.0
    with pytest.raises(ValueError):
        shortest_goal_distance(np.zeros((0, 2)), (0.0, 0.0), 20.0)


def _record():
    tasks = [
        TaskRecord("task1", 0.0, 150.0, 289.38, 100.70, 0.35, True),
        TaskRecord("task2", 150.0, 60.0, 98.16, 53.32, 0.54, True),
    ]
    return MetricsRecord("halo", 3, tasks)


def test_totals_sum_completed_tasks():
    total = _record().totals()
    assert total.distance_m == pytest.approx(387.54)
    assert total.d_opt_m == pytest.approx(154.02)
    assert total.time_s == pytest.approx(210.0)
    assert total.cr == pytest.approx(154.02 / 387.54)
    assert total.complete


def test_incomplete_task_is_flagged():
    record = _record()
    record.tasks.append(TaskRecord("task3", 210.0))
    record.status = "timeout"
    assert not record.complete
    assert record.timed_out
    # the unfinished task does not enter the totals
    assert record.totals().distance_m == pytest.approx(387.54)


def test_metrics_csv(tmp_path):
    path = tmp_path / "metrics.csv"
    _record().to_csv(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == METRIC_COLUMNS
    assert frame["task_id"].tolist() == ["task1", "task2", "total"]
    assert frame["cr"].iloc[-1] == pytest.approx(154.02 / 387.54, abs=1e-6)


def test_summary_fields():
    summary = _record().summary()
    assert summary["planner"] == "halo"
    assert summary["complete"] is True
    assert summary["distance_m"] == pytest.approx(387.54)


def test_identical_clouds_score_zero(rng):
    cloud = PointCloud(rng.uniform(0.0, 10.0, (100, 3)))
    metrics = recon_metrics(cloud, cloud)
    assert metrics == {"accuracy": 0.0, "completion": 0.0, "chamfer": 0.0}


def test_single_point_offset():
    metrics = recon_metrics(
        PointCloud(np.array([[0.0, 0.0, 3.0]])), PointCloud(np.zeros((1, 3)))
    )
    assert metrics["accuracy"] == pytest.approx(3.0)
    assert metrics["completion"] == pytest.approx(3.0)
    assert metrics["chamfer"] == pytest.approx(3.0)


def test_shifted_plane_scores_its_height():
    x, y = np.meshgrid(np.arange(20.0), np.arange(20.0), indexing="ij")
    plane = np.stack([x.ravel(), y.ravel(), np.zeros(x.size)], axis=1)
    metrics = recon_metrics(PointCloud(plane + [0.0, 0.0, 0.25]), PointCloud(plane))
    for value in metrics.values():
        assert value == pytest.approx(0.25)


def test_similarity_alignment_removes_scale(rng):
    gt = rng.uniform(0.0, 20.0, (100, 3))
    R = rotation_exp([0.0, 0.0, 0.02])
    recon = (gt - 5.0) @ R.T * 0.5
    assert recon_metrics(PointCloud(recon), PointCloud(gt))["chamfer"] > 1.0
    aligned = recon_metrics(PointCloud(recon), PointCloud(gt), align=True)
    assert aligned["chamfer"] < 1e-6


def test_umeyama_exact(rng):
    source = rng.normal(size=(50, 3))
    R = rotation_exp([0.3, -0.1, 0.2])
    target = 2.5 * source @ R.T + [1.0, 2.0, 3.0]
    s, R_est, t = umeyama(source, target)
    assert s == pytest.approx(2.5)
    np.testing.assert_allclose(R_est, R, atol=1e-10)
    np.testing.assert_allclose(t, [1.0, 2.0, 3.0], atol=1e-10)


def test_recon_metrics_need_points():
    with pytest.raises(EmptyCloud):
        recon_metrics(PointCloud(np.zeros((0, 3))), PointCloud(np.zeros((1, 3))))


def test_event_log_file(tmp_path):
    log = EventLog()
    log.record(0.0, "mission_start", planner="halo", start=np.array([1.0, 2.0]))
    log.record(1.5, "capture", frame=np.int64(3), position=[0.1234567891234, 2.0, 40.0])
    path = tmp_path / "events.jsonl"
    log.write(path)
    again = EventLog.read(path)

    assert len(again) == 2
    assert again.lines() == log.lines()
    assert again.of_kind("capture")[0].payload["frame"] == 3
    assert first_divergence(log, again) is None


def test_event_lines_are_canonical():
    line = Event(2.0, "stall", {"reason": "x", "cost": float("nan")}).to_line()
    assert line == '{"kind": "stall", "payload": {"cost": null, "reason": "x"}, "t": 2.0}'


def test_first_divergence():
    a, b = EventLog(), EventLog()
    for log in (a, b):
        log.record(0.0, "capture", frame=0)
    a.record(1.0, "capture", frame=1)
    b.record(1.0, "capture", frame=2)
    assert first_divergence(a, b) == 1
    b.events.pop()
    assert first_divergence(a, b) == 1
