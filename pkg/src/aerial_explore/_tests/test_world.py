import numpy as np
import pytest

from aerial_explore.errors import BadConfig, PoseBelowTerrain, TooFewFrames
from aerial_explore.geometry.transforms import (
    invert,
    make_pose,
    nadir_pose,
    pose_error,
    rotation_exp,
)
from aerial_explore.world.camera import (
    NoiseSpec,
    backproject,
    render_frame,
    sample_gps,
)
from aerial_explore.world.f3dr import emulate_f3dr
from aerial_explore.world.procedural import (
    BENCH,
    BRIDGE,
    CAR,
    GRASS,
    HOUSE,
    STADIUM,
    WATER,
    build_procedural_world,
)
from aerial_explore.world.terrain import (
    ground_truth_cloud,
    make_dictionary,
    task_embedding,
)


def test_nadir_pose_looks_down():
    T = nadir_pose(1.0, 2.0, 30.0, yaw=0.4)
    axis = T[:3, :3] @ np.array([0.0, 0.0, 1.0])
    np.testing.assert_allclose(axis, [0.0, 0.0, -1.0], atol=1e-12)
    assert np.linalg.det(T[:3, :3]) == pytest.approx(1.0)
    np.testing.assert_allclose(T[:3, 3], [1.0, 2.0, 30.0])


def test_invert_composes_to_identity(rng):
    T = make_pose(rotation_exp(rng.normal(size=3)), rng.normal(size=3) * 10)
    np.testing.assert_allclose(T @ invert(T), np.eye(4), atol=1e-12)
    trans, rot = pose_error(T, T)
    assert trans == pytest.approx(0.0, abs=1e-12)
    assert rot == pytest.approx(0.0, abs=1e-7)


def test_footprint_half_width(camera):
    assert camera.footprint_half_width(40.0) == pytest.approx(20.0)


def test_flat_ground_depth_equals_altitude(flat_world, camera, quiet):
    frame = render_frame(flat_world, nadir_pose(60.0, 60.0, 40.0), camera, quiet)
    assert frame.valid.all()
    np.testing.assert_allclose(frame.depth, 40.0)
    assert (frame.labels == GRASS).all()
    np.testing.assert_allclose(frame.features[10, 20], flat_world.dictionary[GRASS])


def test_backprojected_points_lie_on_the_ground(flat_world, camera, quiet):
    pose = nadir_pose(60.0, 60.0, 40.0)
    frame = render_frame(flat_world, pose, camera, quiet)
    cloud = backproject(frame, camera, pose=pose, stride=4)
    assert len(cloud) == 16 * 16
    np.testing.assert_allclose(cloud.points[:, 2], 0.0, atol=1e-9)
    assert cloud.points[:, 0].min() >= 40.0 - 1e-9
    assert cloud.points[:, 0].max() <= 80.0 + 1e-9


def test_pose_below_terrain_raises(camera, quiet):
    world = build_procedural_world("flat", {"size": 60.0, "elevation": 10.0})
    with pytest.raises(PoseBelowTerrain):
        render_frame(world, nadir_pose(30.0, 30.0, 5.0), camera, quiet)


def test_frame_off_the_map_has_no_returns(flat_world, camera, quiet):
    frame = render_frame(flat_world, nadir_pose(200.0, 200.0, 40.0), camera, quiet)
    assert not frame.valid.any()
    assert (frame.labels == -1).all()


def test_depth_noise_is_reproducible(flat_world, camera):
    pose = nadir_pose(60.0, 60.0, 40.0)
    a = render_frame(flat_world, pose, camera, NoiseSpec(depth_sigma_rel=0.01, seed=3))
    b = render_frame(flat_world, pose, camera, NoiseSpec(depth_sigma_rel=0.01, seed=3))
    np.testing.assert_array_equal(a.depth, b.depth)
    assert not np.allclose(a.depth, 40.0)


def test_exact_gps_without_noise(quiet):
    np.testing.assert_array_equal(sample_gps([1.0, 2.0, 3.0], quiet), [1.0, 2.0, 3.0])


def test_negative_noise_rejected():
    with pytest.raises(BadConfig):
        NoiseSpec(gps_sigma=-1.0)


def test_dictionary_is_orthonormal():
    dictionary = make_dictionary(range(6), dim=16, seed=3)
    V = np.stack([dictionary[c] for c in range(6)], axis=1)
    np.testing.assert_allclose(V.T @ V, np.eye(6), atol=1e-10)


def test_task_embedding_is_unit_norm():
    dictionary = make_dictionary(range(6), dim=16, seed=3)
    e = task_embedding(dictionary, {HOUSE: 1.0, 2: 0.6})
    assert np.linalg.norm(e) == pytest.approx(1.0)
    assert e @ dictionary[HOUSE] > e @ dictionary[2] > 0


def test_zero_task_embedding_rejected():
    dictionary = make_dictionary(range(6), dim=16, seed=3)
    with pytest.raises(BadConfig):
        task_embedding(dictionary, {HOUSE: 0.0})


def test_procedural_world_is_deterministic():
    a = build_procedural_world("corridor", {}, seed=3)
    b = build_procedural_world("corridor", {}, seed=3)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.terrain.elevation, b.terrain.elevation)
    assert a.goals == b.goals
    assert a.goals["task1"]


def test_unknown_procedural_world():
    with pytest.raises(BadConfig):
        build_procedural_world("volcano", {}, seed=0)


@pytest.mark.parametrize(
    "variant, classes",
    [("relevant", (WATER, BRIDGE, HOUSE)), ("irrelevant", (CAR, BENCH, STADIUM))],
)
def test_three_task_world_goals(variant, classes):
    world = build_procedural_world("three_task", {"variant": variant}, seed=7)
    assert sorted(world.goals) == ["task1", "task2", "task3"]
    for task_id, class_id in zip(["task1", "task2", "task3"], classes):
        cells = np.array(sorted(world.goals[task_id]))
        assert len(cells)
        assert (world.labels[cells[:, 0], cells[:, 1]] == class_id).all()


def test_three_task_relevant_goals_are_close():
    world = build_procedural_world("three_task", {"variant": "relevant"}, seed=7)
    lake = world.goal_points("task1").mean(axis=0)
    for task_id in ("task2", "task3"):
        gap = np.linalg.norm(world.goal_points(task_id).mean(axis=0) - lake)
        assert gap < 50.0


def test_three_task_irrelevant_goals_are_spread():
    world = build_procedural_world("three_task", {"variant": "irrelevant"}, seed=7)
    centers = [world.goal_points(f"task{k}").mean(axis=0) for k in (1, 2, 3)]
    for a in range(3):
        for b in range(a + 1, 3):
            assert np.linalg.norm(centers[a] - centers[b]) > 200.0


def test_three_task_unknown_variant():
    with pytest.raises(BadConfig):
        build_procedural_world("three_task", {"variant": "easy"}, seed=0)


def test_goal_points_are_cell_centers(flat_world):
    np.testing.assert_allclose(flat_world.goal_points("task1"), [[101.0, 101.0]])
    assert flat_world.labels[50, 50] == HOUSE


def test_ground_truth_cloud_covers_every_cell(flat_world):
    cloud = ground_truth_cloud(flat_world)
    assert len(cloud) == 60 * 60
    cloud = ground_truth_cloud(flat_world, stride=2)
    assert len(cloud) == 30 * 30


def test_f3dr_translations_are_divided_by_scale(line_frames, quiet, camera):
    frames = line_frames(3)
    pred = emulate_f3dr(frames, [], quiet, camera, scale=2.0)
    assert pred.s_true == 2.0
    np.testing.assert_allclose(pred.frame_poses_local[0], np.eye(4), atol=1e-12)
    np.testing.assert_allclose(pred.frame_poses_local[1][:3, 3], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(pred.frame_poses_local[2][:3, 3], [2.0, 0.0, 0.0])
    # clouds shrink by the same factor: ground sits 20 units below the camera
    np.testing.assert_allclose(pred.clouds_local[0].points[:, 2], 20.0)


def test_f3dr_needs_two_frames(line_frames, quiet):
    with pytest.raises(TooFewFrames):
        emulate_f3dr(line_frames(1), [], quiet)
