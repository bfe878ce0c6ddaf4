"""Deterministic sense / map / plan / move mission loop.

One tick moves the robot along its current plan by at most ``v_max * dt``,
capturing a frame every ``capture_interval`` meters. Captured frames are
posed (ground truth or through the submap pose graph), integrated into the
occupancy and feature grids, and checked against the active task's goal.
After the motion the frontier clusters and relevancy scores are refreshed
from the accumulated change box, and the planner is consulted on the next
tick.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..baselines.baselines import coverage_plan, make_planner
from ..errors import (
    BadConfig,
    EmptyRegion,
    NoCandidates,
    NoFrontiers,
    PlannerStalled,
)
from ..geometry.pointcloud import PointCloud
from ..geometry.transforms import nadir_pose
from ..mapping.grids import (
    FeatureGrid,
    GridSpec,
    MappingConfig,
    OccupancyGrid,
    integrate_frame,
    take_change_bbox,
)
from ..planner.config import PlannerConfig
from ..planner.hierarchical import Planner, PlanningSnapshot
from ..planner.local import PathPlan, PlanMode
from ..posegraph.config import SlamConfig
from ..posegraph.graph import export_world_cloud
from ..posegraph.pipeline import SubmapMapper
from ..taskinfo.frontiers import ClusterSet, FrontierParams, detect_frontiers
from ..taskinfo.relevancy import FULL, RelevancyGrid, TaskEmbedding, update_relevancy
from ..world.camera import (
    CameraModel,
    NoiseSpec,
    SensorFrame,
    render_frame,
    sample_gps,
)
from ..world.terrain import SemanticWorld, ground_truth_cloud
from .events import EventLog, first_divergence
from .metrics import (
    MetricsRecord,
    TaskRecord,
    recon_metrics,
    shortest_goal_distance,
    task_ratio,
)

logger = logging.getLogger(__name__)

TERMINATIONS = ("goal_observed", "frontiers_exhausted")
ALTITUDE_MARGIN = 5.0
EPS = 1e-9


@dataclass
class TaskSpec:
    task_id: str
    embedding: TaskEmbedding
    # world (x, y) of the goal cell centers
    goal_points: np.ndarray = None
    description: str = ""
    termination: str = "goal_observed"

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise BadConfig(
                f"task {self.task_id!r}: termination must be one of {TERMINATIONS}"
            )
        if self.goal_points is None:
            self.goal_points = np.zeros((0, 2))
        self.goal_points = np.asarray(self.goal_points, dtype=float).reshape(-1, 2)
        if self.termination == "goal_observed" and len(self.goal_points) == 0:
            raise BadConfig(f"task {self.task_id!r} has no goal cells")


@dataclass
class MissionSpec:
    world: SemanticWorld
    tasks: List[TaskSpec]
    start: Tuple[float, float]
    bounds: Optional[Tuple[float, float, float, float]] = None
    v_max: float = 2.0
    altitude: float = 40.0
    capture_interval: float = 2.0
    dt: float = 1.0
    time_budget: float = 1800.0
    # straight motion before planning, for scale initialization
    init_leg: float = 10.0
    camera: CameraModel = field(default_factory=CameraModel)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    slam: SlamConfig = field(default_factory=SlamConfig)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    frontier: FrontierParams = field(default_factory=FrontierParams)
    name: str = "mission"

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = self.world.terrain.extent
        self.bounds = tuple(float(b) for b in self.bounds)
        self.start = (float(self.start[0]), float(self.start[1]))
        if not self.tasks:
            raise BadConfig("a mission needs at least one task")
        if self.v_max <= 0 or self.dt <= 0 or self.capture_interval <= 0:
            raise BadConfig("v_max, dt and capture_interval must be positive")
        if self.init_leg < 0 or self.time_budget <= 0:
            raise BadConfig("init_leg must be >= 0 and time_budget > 0")
        top = float(self.world.terrain.elevation.max())
        if self.altitude <= top + ALTITUDE_MARGIN:
            raise BadConfig(
                f"altitude {self.altitude} m is not {ALTITUDE_MARGIN} m above "
                f"the highest terrain ({top:.1f} m)"
            )
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin <= self.start[0] <= xmax and ymin <= self.start[1] <= ymax):
            raise BadConfig(f"start {self.start} lies outside the bounds")

    @property
    def footprint_half_width(self) -> float:
        height = self.altitude - float(self.world.terrain.elevation.mean())
        return self.camera.footprint_half_width(height)


@dataclass
class RobotState:
    position: np.ndarray
    time: float = 0.0
    distance_traveled: float = 0.0
    since_capture: float = 0.0


@dataclass
class SimRun:
    spec: MissionSpec
    planner_kind: str
    seed: int
    noise: NoiseSpec
    planner: Planner
    robot: RobotState
    occ: OccupancyGrid
    feat: FeatureGrid
    rel: RelevancyGrid
    # cells observed since the active task was issued
    task_occ: OccupancyGrid
    clusters: ClusterSet = field(default_factory=ClusterSet)
    mapper: Optional[SubmapMapper] = None
    events: EventLog = field(default_factory=EventLog)
    task_index: int = 0
    plan: Optional[PathPlan] = None
    waypoint: int = 0
    init_leg_pending: bool = True
    status: str = "running"
    records: List[TaskRecord] = field(default_factory=list)
    frame_count: int = 0
    last_frame: Optional[SensorFrame] = None
    unposed: Dict[int, SensorFrame] = field(default_factory=dict)
    refresh_relevancy: bool = True
    issue_distance: float = 0.0

    @property
    def active(self) -> bool:
        return self.status == "running"

    @property
    def task(self) -> TaskSpec:
        return self.spec.tasks[self.task_index]

    @property
    def world(self) -> SemanticWorld:
        return self.spec.world

    @property
    def plan_exhausted(self) -> bool:
        return self.plan is None or self.waypoint >= len(self.plan.waypoints)

    def metrics(self) -> MetricsRecord:
        status = "complete" if self.status == "done" else self.status
        return MetricsRecord(self.planner_kind, self.seed, list(self.records), status)


def check_termination(task: TaskSpec, occ: OccupancyGrid) -> bool:
    """True once any goal cell of ``task`` is KNOWN in ``occ``"""

    ix, iy, inside = occ.spec.cell_of(task.goal_points[:, 0], task.goal_points[:, 1])
    return bool(occ.known[ix[inside], iy[inside]].any())


def frontiers_exhausted(clusters: ClusterSet) -> bool:
    return len(clusters) == 0


## setup


def start_run(spec: MissionSpec, planner_kind: str = "halo", seed: int = 0) -> SimRun:
    """Initial state: grids, planner, the first task and a frame at the start"""

    grid = GridSpec.from_bounds(spec.bounds, spec.mapping.resolution)
    noise = replace(spec.noise, seed=seed)
    planner = make_planner(
        planner_kind,
        spec.bounds,
        grid,
        spec.planner,
        2.0 * spec.footprint_half_width,
    )
    mapper = None
    if spec.mapping.pose_source == "slam":
        mapper = SubmapMapper(spec.slam, noise, spec.camera)
    run = SimRun(
        spec=spec,
        planner_kind=planner_kind,
        seed=seed,
        noise=noise,
        planner=planner,
        robot=RobotState(np.array([spec.start[0], spec.start[1], spec.altitude])),
        occ=OccupancyGrid(grid),
        feat=FeatureGrid(grid, spec.world.feature_dim, spec.mapping.alpha),
        rel=RelevancyGrid(grid),
        task_occ=OccupancyGrid(grid),
        mapper=mapper,
    )
    run.events.record(
        0.0,
        "mission_start",
        mission=spec.name,
        planner=planner_kind,
        seed=seed,
        start=spec.start,
        tasks=[t.task_id for t in spec.tasks],
    )
    _issue_task(run)
    run.plan = _initial_leg(spec)
    run.waypoint = 1
    _capture(run, run.robot.position.copy(), 0.0)
    _refresh_maps(run)
    return run


def _initial_leg(spec: MissionSpec) -> PathPlan:
    """Fixed-length straight leg from the start toward the bounds center"""

    start = np.array(spec.start)
    xmin, ymin, xmax, ymax = spec.bounds
    heading = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0]) - start
    norm = np.linalg.norm(heading)
    heading = heading / norm if norm > EPS else np.array([1.0, 0.0])
    end = start + heading * spec.init_leg
    end = np.clip(end, [xmin, ymin], [xmax, ymax])
    return PathPlan(np.array([start, end]), PlanMode.EXPLORE)


def _issue_task(run: SimRun) -> None:
    task = run.task
    position = run.robot.position[:2]
    d_opt = 0.0
    if len(task.goal_points):
        d_opt = shortest_goal_distance(
            task.goal_points, position, run.spec.footprint_half_width
        )
    run.records.append(TaskRecord(task.task_id, run.robot.time, d_opt_m=d_opt))
    run.issue_distance = run.robot.distance_traveled
    run.task_occ = OccupancyGrid(run.occ.spec)
    run.refresh_relevancy = True
    run.planner.new_task()
    run.events.record(
        run.robot.time,
        "task_start",
        task=task.task_id,
        description=task.description,
        position=position,
        d_opt=d_opt,
    )
    logger.info("task %s issued at t=%.1f s", task.task_id, run.robot.time)


## sensing


def _capture(run: SimRun, position: np.ndarray, time: float) -> None:
    spec = run.spec
    pose = nadir_pose(position[0], position[1], position[2])
    frame = render_frame(
        run.world, pose, spec.camera, run.noise, time, run.frame_count
    )
    gps = sample_gps(position, run.noise)
    run.frame_count += 1
    run.last_frame = frame
    run.events.record(time, "capture", frame=frame.frame_id, position=position)

    if run.mapper is None:
        integrate_frame(
            run.occ, run.feat, pose, frame, spec.camera, spec.mapping.feature_stride
        )
    else:
        run.unposed[frame.frame_id] = frame
        for fid in run.mapper.add_frame(frame, gps):
            posed = run.unposed.pop(fid)
            integrate_frame(
                run.occ,
                run.feat,
                run.mapper.frame_pose(fid),
                posed,
                spec.camera,
                spec.mapping.feature_stride,
            )
    # goal observation is judged on the current image at its true pose
    integrate_frame(run.task_occ, None, pose, frame, spec.camera)


def _check_tasks(run: SimRun) -> bool:
    """Complete and advance tasks; True when the active task changed"""

    changed = False
    while run.active:
        task = run.task
        if task.termination == "frontiers_exhausted":
            done = run.clusters.mask is not None and frontiers_exhausted(run.clusters)
        else:
            done = check_termination(task, run.task_occ)
        if not done:
            break
        _complete_task(run)
        changed = True
        if run.task_index + 1 >= len(run.spec.tasks):
            run.status = "done"
            run.events.record(run.robot.time, "mission_end", status="complete")
            break
        run.task_index += 1
        _issue_task(run)
        if run.last_frame is not None:
            integrate_frame(
                run.task_occ,
                None,
                run.last_frame.true_pose,
                run.last_frame,
                run.spec.camera,
            )
    return changed


def _complete_task(run: SimRun) -> None:
    record = run.records[-1]
    record.complete = True
    record.time_s = run.robot.time - record.issue_time
    record.distance_m = run.robot.distance_traveled - run.issue_distance
    record.cr = task_ratio(record.d_opt_m, record.distance_m)
    run.plan = None
    run.events.record(
        run.robot.time,
        "task_complete",
        task=record.task_id,
        time_s=record.time_s,
        distance=record.distance_m,
        d_opt=record.d_opt_m,
        cr=record.cr,
    )
    logger.info(
        "task %s complete: %.1f m in %.1f s (CR %.2f)",
        record.task_id,
        record.distance_m,
        record.time_s,
        record.cr,
    )


def _refresh_maps(run: SimRun) -> None:
    box = take_change_bbox(run.occ)
    run.clusters = detect_frontiers(run.occ, box, run.clusters, run.spec.frontier)
    task = run.task
    if run.refresh_relevancy:
        update_relevancy(run.rel, run.feat, task.embedding, FULL)
        run.refresh_relevancy = False
    elif not box.empty:
        update_relevancy(run.rel, run.feat, task.embedding, box)
    if _check_tasks(run) and run.active:
        update_relevancy(run.rel, run.feat, run.task.embedding, FULL)
        run.refresh_relevancy = False


## planning and motion


def _stall(run: SimRun, reason: str) -> None:
    run.status = "stalled"
    run.events.record(run.robot.time, "stall", task=run.task.task_id, reason=reason)
    run.events.record(run.robot.time, "mission_end", status="stalled")
    logger.warning("planner stalled on task %s: %s", run.task.task_id, reason)
    raise PlannerStalled(reason)


def _plan_tick(run: SimRun) -> None:
    if run.init_leg_pending:
        if not run.plan_exhausted:
            return
        run.init_leg_pending = False
    snap = PlanningSnapshot(
        time=run.robot.time,
        robot_pos=run.robot.position[:2].copy(),
        occ=run.occ,
        rel=run.rel,
        clusters=run.clusters,
        plan_exhausted=run.plan_exhausted,
    )
    try:
        plan = run.planner.update(snap)
    except (NoCandidates, NoFrontiers, EmptyRegion) as exc:
        _stall(run, str(exc))
    if plan is None:
        if run.plan_exhausted:
            _stall(run, "no plan left")
        return
    run.plan = plan
    run.waypoint = 1 if len(plan.waypoints) > 1 else 0
    run.events.record(
        run.robot.time,
        "plan",
        mode=plan.mode.value,
        region=plan.target_region,
        n_waypoints=len(plan.waypoints),
        target=plan.waypoints[run.waypoint],
    )


def _move(run: SimRun, dt: float) -> float:
    """Follow the plan for one tick; returns the distance flown"""

    robot = run.robot
    spec = run.spec
    budget = spec.v_max * dt
    remaining = budget
    task_before = run.task_index
    while remaining > EPS and not run.plan_exhausted and run.active:
        target = run.plan.waypoints[run.waypoint]
        delta = target - robot.position[:2]
        gap = float(np.linalg.norm(delta))
        if gap <= EPS:
            run.waypoint += 1
            continue
        to_capture = spec.capture_interval - robot.since_capture
        step_len = min(remaining, gap, to_capture)
        robot.position[:2] += delta / gap * step_len
        remaining -= step_len
        robot.distance_traveled += step_len
        robot.since_capture += step_len
        if step_len >= gap - EPS:
            robot.position[:2] = target
            run.waypoint += 1
        if robot.since_capture >= spec.capture_interval - EPS:
            robot.since_capture = 0.0
            t = robot.time + (budget - remaining) / spec.v_max
            _capture(run, robot.position.copy(), t)
            if _check_tasks(run) or run.task_index != task_before:
                # new task: stop and replan from here
                break
    return budget - remaining


def step(run: SimRun, dt: float = None) -> SimRun:
    """Advance the mission by one tick"""

    if not run.active:
        return run
    dt = run.spec.dt if dt is None else dt
    _plan_tick(run)
    flown = _move(run, dt)
    run.robot.time += dt
    if run.active or run.status == "done":
        _refresh_maps(run)
    logger.debug("t=%.1f flew %.2f m", run.robot.time, flown)
    if run.active and run.robot.time >= run.spec.time_budget - EPS:
        run.status = "timeout"
        run.events.record(run.robot.time, "timeout", task=run.task.task_id)
        run.events.record(run.robot.time, "mission_end", status="timeout")
        logger.warning(
            "mission timed out after %.0f s on task %s",
            run.robot.time,
            run.task.task_id,
        )
    return run


def simulate(spec: MissionSpec, planner_kind: str = "halo", seed: int = 0) -> SimRun:
    """Run a mission to completion, stall or timeout"""

    run = start_run(spec, planner_kind, seed)
    while run.active:
        try:
            step(run)
        except PlannerStalled:
            break
    return run


def run_mission(
    spec: MissionSpec, planner_kind: str = "halo", seed: int = 0
) -> MetricsRecord:
    return simulate(spec, planner_kind, seed).metrics()


def replay_matches(
    log: EventLog, spec: MissionSpec, planner_kind: str, seed: int
) -> bool:
    """Rerun a mission and compare its event log with ``log``"""

    rerun = simulate(spec, planner_kind, seed).events
    divergence = first_divergence(log, rerun)
    if divergence is not None:
        logger.warning("replay diverges at event %d", divergence)
    return divergence is None


## reconstruction flights


@dataclass
class ReconResult:
    mapper: SubmapMapper
    recon: PointCloud
    gt: PointCloud
    metrics: Dict[str, float]
    use_gps: bool
    trajectory: str


def sample_path(waypoints: Sequence, interval: float) -> np.ndarray:
    """Points every ``interval`` meters along a polyline, starting at its head"""

    waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    seg = np.diff(waypoints, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.arange(0.0, cum[-1] + EPS, interval)
    x = np.interp(s, cum, waypoints[:, 0])
    y = np.interp(s, cum, waypoints[:, 1])
    return np.stack([x, y], axis=1)


def recon_trajectory(spec: MissionSpec, kind: str = "coverage") -> np.ndarray:
    if kind == "coverage":
        plan = coverage_plan(spec.bounds, spec.start, 2.0 * spec.footprint_half_width)
        return plan.waypoints
    if kind == "line":
        xmin, _, xmax, _ = spec.bounds
        far = xmax if spec.start[0] - xmin < xmax - spec.start[0] else xmin
        return np.array([spec.start, (far, spec.start[1])])
    raise BadConfig(f"unknown trajectory {kind!r}; expected coverage or line")


def fly_reconstruction(
    spec: MissionSpec,
    trajectory: str = "coverage",
    seed: int = 0,
    use_gps: bool = True,
    gt_stride: int = 1,
) -> ReconResult:
    """Fly a scripted path through the submap pipeline and score the cloud"""

    noise = replace(spec.noise, seed=seed)
    mapper = SubmapMapper(replace(spec.slam, use_gps=use_gps), noise, spec.camera)
    path = sample_path(recon_trajectory(spec, trajectory), spec.capture_interval)
    for fid, (x, y) in enumerate(path):
        position = np.array([x, y, spec.altitude])
        frame = render_frame(
            spec.world,
            nadir_pose(x, y, spec.altitude),
            spec.camera,
            noise,
            fid / spec.v_max * spec.capture_interval,
            fid,
        )
        mapper.add_frame(frame, sample_gps(position, noise))
    mapper.flush()
    mapper.optimize()

    recon = export_world_cloud(mapper.graph)
    gt = ground_truth_cloud(spec.world, gt_stride)
    hw = spec.footprint_half_width
    lo = path.min(axis=0) - hw
    hi = path.max(axis=0) + hw
    seen = np.all((gt.points[:, :2] >= lo) & (gt.points[:, :2] <= hi), axis=1)
    gt = PointCloud(gt.points[seen], gt.colors[seen])

    metrics = recon_metrics(recon, gt, align=not use_gps)
    logger.info(
        "%s flight (%s GPS): %d frames, chamfer %.3f m",
        trajectory,
        "with" if use_gps else "without",
        len(path),
        metrics["chamfer"],
    )
    return ReconResult(mapper, recon, gt, metrics, use_gps, trajectory)
