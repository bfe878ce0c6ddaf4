"""YAML scenario files: one document drives world, sensors, SLAM, mapping,
planner and mission settings.

Validation errors carry the file name and the line of the offending key.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import yaml
from skimage.io import imread

from ..baselines.baselines import PLANNER_NAMES
from ..errors import AerialExploreError, ScenarioError
from ..mapping.grids import MappingConfig
from ..mission.runner import MissionSpec, TaskSpec
from ..planner.config import PlannerConfig
from ..posegraph.config import SlamConfig
from ..taskinfo.frontiers import FrontierParams
from ..taskinfo.relevancy import TaskEmbedding
from ..world.camera import CameraModel, NoiseSpec
from ..world.procedural import CLASS_NAMES, build_procedural_world
from ..world.terrain import Heightfield, SemanticWorld, make_dictionary, task_embedding

logger = logging.getLogger(__name__)

TOP_LEVEL = {
    "name",
    "world",
    "tasks",
    "mission",
    "noise",
    "camera",
    "slam",
    "mapping",
    "planner",
    "frontier",
    "seeds",
    "planners",
}
MISSION_KEYS = {
    "start",
    "bounds",
    "v_max",
    "altitude",
    "capture_interval",
    "dt",
    "time_budget",
    "init_leg",
}
TASK_KEYS = {"id", "description", "embedding", "goal", "termination"}
WORLD_KEYS = {
    "procedural",
    "terrain",
    "labels",
    "classes",
    "feature_dim",
    "dictionary_seed",
    "goals",
}


@dataclass
class Scenario:
    name: str
    mission: MissionSpec
    seeds: List[int] = field(default_factory=lambda: [0])
    planners: List[str] = field(default_factory=lambda: list(PLANNER_NAMES))
    class_names: Dict[int, str] = field(default_factory=dict)
    source: Optional[Path] = None


class _Document:
    """Parsed data plus the node tree used to report line numbers"""

    def __init__(self, text: str, source: str) -> None:
        self.source = source
        try:
            self.node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ScenarioError(f"invalid YAML: {exc}", source, line) from None
        if not isinstance(self.data, dict):
            raise ScenarioError("scenario must be a mapping", source, 1)

    def line_of(self, *path) -> Optional[int]:
        """1-based line of the key (or item) at ``path``"""

        node, line = self.node, None
        for key in path:
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == str(key):
                        node, line = v, k.start_mark.line + 1
                        break
                else:
                    return line
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
                if key >= len(node.value):
                    return line
                node = node.value[key]
                line = node.start_mark.line + 1
            else:
                return line
        return line

    def error(self, message: str, *path) -> ScenarioError:
        return ScenarioError(message, self.source, self.line_of(*path))

    def section(self, name: str) -> Dict[str, Any]:
        value = self.data.get(name) or {}
        if not isinstance(value, dict):
            raise self.error(f"section {name!r} must be a mapping", name)
        return value

    def check_keys(self, values: Mapping, allowed, *path) -> None:
        for key in values:
            if key not in allowed:
                raise self.error(
                    f"unknown key {key!r} in {'.'.join(map(str, path)) or 'scenario'}",
                    *path,
                    key,
                )


def _config(doc: _Document, name: str, cls, drop: Sequence[str] = ()):
    """Instantiate a config dataclass from a section, keys checked against its fields"""

    values = doc.section(name)
    allowed = {f.name for f in fields(cls) if f.init} - set(drop)
    doc.check_keys(values, allowed, name)
    try:
        return cls(**values)
    except (AerialExploreError, TypeError, ValueError) as exc:
        raise doc.error(f"{name}: {exc}", name) from None


def _array(doc: _Document, value, base: Path, dtype, *path) -> np.ndarray:
    """Inline nested list or ``{file: ...}`` reference (.npy, text or image)"""

    if isinstance(value, dict):
        if "file" not in value:
            raise doc.error("array reference needs a 'file' key", *path)
        target = base / value["file"]
        if not target.exists():
            raise doc.error(f"referenced file {target} does not exist", *path)
        suffix = target.suffix.lower()
        if suffix == ".npy":
            arr = np.load(target)
        elif suffix in (".txt", ".csv", ".asc"):
            arr = np.loadtxt(target, delimiter="," if suffix == ".csv" else None)
        else:
            arr = imread(target, as_gray=True)
        arr = np.asarray(arr, dtype=float) * float(value.get("scale", 1.0))
    else:
        arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise doc.error(f"expected a 2D grid, got shape {arr.shape}", *path)
    return arr.astype(dtype)


def _world(doc: _Document, base: Path):
    section = doc.section("world")
    doc.check_keys(section, WORLD_KEYS, "world")
    procedural = section.get("procedural")
    if procedural is not None:
        if not isinstance(procedural, dict) or "kind" not in procedural:
            raise doc.error("procedural world needs a 'kind'", "world", "procedural")
        try:
            world = build_procedural_world(
                procedural["kind"],
                procedural.get("params") or {},
                int(procedural.get("seed", 0)),
            )
        except AerialExploreError as exc:
            raise doc.error(str(exc), "world", "procedural") from None
        return world, dict(CLASS_NAMES)

    terrain = section.get("terrain")
    if not isinstance(terrain, dict) or "elevation" not in terrain:
        raise doc.error("world needs 'procedural' or 'terrain.elevation'", "world")
    if "labels" not in section:
        raise doc.error("world needs a 'labels' grid", "world")
    elevation = _array(
        doc, terrain["elevation"], base, float, "world", "terrain", "elevation"
    )
    labels = _array(doc, section["labels"], base, int, "world", "labels")
    class_names = {
        int(k): str(v) for k, v in (section.get("classes") or {}).items()
    }
    ids = sorted(set(np.unique(labels).tolist()) | set(class_names))
    class_names = {c: class_names.get(c, str(c)) for c in ids}
    try:
        dictionary = make_dictionary(
            ids,
            int(section.get("feature_dim", 16)),
            int(section.get("dictionary_seed", 0)),
        )
        world = SemanticWorld(
            Heightfield(
                elevation,
                float(terrain.get("resolution", 2.0)),
                tuple(terrain.get("origin", (0.0, 0.0))),
            ),
            labels,
            dictionary,
            {k: [tuple(c) for c in v] for k, v in (section.get("goals") or {}).items()},
        )
    except AerialExploreError as exc:
        raise doc.error(str(exc), "world") from None
    return world, class_names


def _class_id(doc, key, class_names, *path) -> int:
    by_name = {v: k for k, v in class_names.items()}
    if isinstance(key, str) and key in by_name:
        return by_name[key]
    try:
        class_id = int(key)
    except (TypeError, ValueError):
        raise doc.error(f"unknown class {key!r}", *path) from None
    if class_id not in class_names:
        raise doc.error(f"unknown class id {class_id}", *path)
    return class_id


def _tasks(doc: _Document, world: SemanticWorld, class_names) -> List[TaskSpec]:
    raw = doc.data.get("tasks")
    if not isinstance(raw, list) or not raw:
        raise doc.error("scenario needs a non-empty 'tasks' list", "tasks")
    tasks = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or "id" not in item:
            raise doc.error("each task needs an 'id'", "tasks", k)
        doc.check_keys(item, TASK_KEYS, "tasks", k)
        task_id = str(item["id"])
        mix_raw = item.get("embedding")
        if not isinstance(mix_raw, dict) or not mix_raw:
            raise doc.error(
                f"task {task_id!r} needs an 'embedding' class mix", "tasks", k
            )
        mix = {
            _class_id(doc, c, class_names, "tasks", k, "embedding"): float(w)
            for c, w in mix_raw.items()
        }
        termination = item.get("termination", "goal_observed")
        goal_key = str(item.get("goal", task_id))
        goal_points = None
        if goal_key in world.goals:
            goal_points = world.goal_points(goal_key)
        elif termination == "goal_observed":
            raise doc.error(
                f"task {task_id!r}: world has no goal {goal_key!r}", "tasks", k
            )
        try:
            embedding = TaskEmbedding(
                task_id,
                task_embedding(world.dictionary, mix),
                str(item.get("description", "")),
            )
            tasks.append(
                TaskSpec(
                    task_id,
                    embedding,
                    goal_points,
                    embedding.description,
                    termination,
                )
            )
        except AerialExploreError as exc:
            raise doc.error(str(exc), "tasks", k) from None
    return tasks


def parse_scenario(text: str, source: str = "<scenario>", base: Path = None) -> Scenario:
    doc = _Document(text, source)
    doc.check_keys(doc.data, TOP_LEVEL)
    base = Path(base) if base is not None else Path(".")

    world, class_names = _world(doc, base)
    tasks = _tasks(doc, world, class_names)

    mission = doc.section("mission")
    doc.check_keys(mission, MISSION_KEYS, "mission")
    if "start" not in mission:
        raise doc.error("mission needs a 'start' position", "mission")

    configs = dict(
        noise=_config(doc, "noise", NoiseSpec, drop=("seed",)),
        camera=_config(doc, "camera", CameraModel),
        slam=_config(doc, "slam", SlamConfig),
        mapping=_config(doc, "mapping", MappingConfig),
        planner=_config(doc, "planner", PlannerConfig),
        frontier=_config(doc, "frontier", FrontierParams),
    )
    name = str(doc.data.get("name", Path(source).stem))
    try:
        spec = MissionSpec(world=world, tasks=tasks, name=name, **mission, **configs)
    except (AerialExploreError, TypeError, ValueError) as exc:
        raise doc.error(f"mission: {exc}", "mission") from None

    seeds = doc.data.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise doc.error("'seeds' must be a list of integers", "seeds")
    planners = doc.data.get("planners", list(PLANNER_NAMES))
    unknown = [p for p in planners if p not in PLANNER_NAMES]
    if unknown:
        raise doc.error(f"unknown planners {unknown}", "planners")

    logger.info(
        "loaded scenario %s: %d task(s), world %dx%d cells",
        name,
        len(tasks),
        world.terrain.width_cells,
        world.terrain.height_cells,
    )
    return Scenario(name, spec, list(seeds), list(planners), class_names)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError("scenario file not found", str(path))
    scenario = parse_scenario(path.read_text(), str(path), path.parent)
    scenario.source = path
    return scenario


def bundled_scenarios() -> Dict[str, Path]:
    """Example scenarios shipped with the package, by name"""

    root = Path(__file__).resolve().parent.parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}
