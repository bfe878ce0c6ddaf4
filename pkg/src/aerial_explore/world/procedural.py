"""Deterministic synthetic worlds for desk-scale experiments"""

import logging
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..errors import BadConfig
from .terrain import Heightfield, SemanticWorld, make_dictionary

logger = logging.getLogger(__name__)

GRASS, FOREST, TRAIL, HOUSE, WATER, BRIDGE, ROAD, CAR, BENCH, STADIUM = range(10)
CLASS_NAMES = {
    GRASS: "grass",
    FOREST: "forest",
    TRAIL: "trail",
    HOUSE: "house",
    WATER: "water",
    BRIDGE: "bridge",
    ROAD: "road",
    CAR: "car",
    BENCH: "bench",
    STADIUM: "stadium",
}


def smooth_terrain(
    shape: Tuple[int, int], relief: float, rng: np.random.Generator
) -> np.ndarray:
    """Gaussian-filtered noise rescaled to ``[0, relief]`` meters"""

    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=8.0)
    span = noise.max() - noise.min()
    if span == 0 or relief == 0:
        return np.zeros(shape)
    return (noise - noise.min()) / span * relief


def _paint_disc(labels, center_cell, radius_cells, class_id):
    ix, iy = np.ogrid[: labels.shape[0], : labels.shape[1]]
    cx, cy = center_cell
    mask = (ix - cx) ** 2 + (iy - cy) ** 2 <= radius_cells**2
    labels[mask] = class_id
    return mask


def _paint_trail(labels, start, end, width_cells, meander, rng, class_id):
    """Meandering polyline of cells from ``start`` to ``end`` (cell coords)"""

    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = np.linalg.norm(end - start)
    n = max(int(length * 2), 2)
    s = np.linspace(0.0, 1.0, n)
    normal = np.array([-(end - start)[1], (end - start)[0]]) / max(length, 1e-9)
    phase = rng.uniform(0, 2 * np.pi)
    offset = meander * np.sin(2 * np.pi * 1.5 * s + phase) * np.sin(np.pi * s)
    pts = start[None] + s[:, None] * (end - start)[None] + offset[:, None] * normal
    cells = set()
    half = width_cells // 2
    for px, py in np.round(pts).astype(int):
        for dx in range(-half, half + 1):
            for dy in range(-half, half + 1):
                cx, cy = px + dx, py + dy
                if 0 <= cx < labels.shape[0] and 0 <= cy < labels.shape[1]:
                    labels[cx, cy] = class_id
                    cells.add((cx, cy))
    return cells


def _scatter_patches(labels, rng, class_id, fraction):
    blobs = ndimage.gaussian_filter(rng.standard_normal(labels.shape), 4.0)
    threshold = np.quantile(blobs, 1.0 - fraction)
    labels[blobs > threshold] = class_id


def _cell(point, resolution):
    return (int(point[0] // resolution), int(point[1] // resolution))


def corridor_world(params: Mapping[str, Any], seed: int) -> SemanticWorld:
    """A trail of a partially relevant class leading from the start to a hidden goal"""

    size = float(params.get("size", 400.0))
    res = float(params.get("resolution", 2.0))
    start = params.get("start", (60.0, 60.0))
    goal = params.get("goal", (340.0, 330.0))
    n = int(round(size / res))
    rng = np.random.default_rng(seed)

    elevation = smooth_terrain((n, n), float(params.get("relief", 6.0)), rng)
    labels = np.full((n, n), GRASS, dtype=int)
    _scatter_patches(labels, rng, FOREST, float(params.get("forest", 0.3)))
    _scatter_patches(labels, rng, WATER, float(params.get("water", 0.05)))
    _paint_trail(
        labels,
        _cell(start, res),
        _cell(goal, res),
        width_cells=int(params.get("trail_width_cells", 3)),
        meander=float(params.get("meander_cells", 12.0)),
        rng=rng,
        class_id=TRAIL,
    )
    goal_mask = _paint_disc(labels, _cell(goal, res), 2, HOUSE)

    dictionary = make_dictionary(
        CLASS_NAMES, int(params.get("feature_dim", 16)), seed
    )
    goals = {"task1": set(zip(*np.nonzero(goal_mask)))}
    return SemanticWorld(Heightfield(elevation, res), labels, dictionary, goals)


def two_task_world(params: Mapping[str, Any], seed: int) -> SemanticWorld:
    """Task 1 goal far from the start, task 2 goal inside the start region"""

    size = float(params.get("size", 400.0))
    res = float(params.get("resolution", 2.0))
    goal1 = params.get("goal1", (300.0, 290.0))
    goal2 = params.get("goal2", (70.0, 70.0))
    start = params.get("start", (59.0, 59.0))
    n = int(round(size / res))
    rng = np.random.default_rng(seed)

    elevation = smooth_terrain((n, n), float(params.get("relief", 2.0)), rng)
    labels = np.full((n, n), GRASS, dtype=int)
    _scatter_patches(labels, rng, FOREST, float(params.get("forest", 0.3)))
    _paint_trail(
        labels,
        _cell(start, res),
        _cell(goal1, res),
        width_cells=3,
        meander=float(params.get("meander_cells", 12.0)),
        rng=rng,
        class_id=TRAIL,
    )
    mask1 = _paint_disc(labels, _cell(goal1, res), 3, WATER)
    mask2 = _paint_disc(labels, _cell(goal2, res), 1, BRIDGE)

    dictionary = make_dictionary(
        CLASS_NAMES, int(params.get("feature_dim", 16)), seed
    )
    goals = {
        "task1": set(zip(*np.nonzero(mask1))),
        "task2": set(zip(*np.nonzero(mask2))),
    }
    return SemanticWorld(Heightfield(elevation, res), labels, dictionary, goals)


def _three_task_relevant(labels, params, res, rng):
    # lake at the end of a trail, a river leaving it eastward with a bridge,
    # a house on the lake shore
    start = params.get("start", (60.0, 60.0))
    lake = params.get("lake", (290.0, 300.0))
    lake_cell = _cell(lake, res)
    _paint_trail(
        labels,
        _cell(start, res),
        lake_cell,
        width_cells=3,
        meander=float(params.get("meander_cells", 12.0)),
        rng=rng,
        class_id=TRAIL,
    )
    lake_mask = _paint_disc(labels, lake_cell, 6, WATER)
    river_end = (labels.shape[0] - 1, lake_cell[1])
    _paint_trail(labels, lake_cell, river_end, 3, 0.0, rng, WATER)
    bridge = (lake[0] + float(params.get("bridge_offset", 40.0)), lake[1])
    bridge_mask = _paint_disc(labels, _cell(bridge, res), 2, BRIDGE)
    house = params.get("house", (lake[0] - 10.0, lake[1] + 30.0))
    house_mask = _paint_disc(labels, _cell(house, res), 2, HOUSE)
    return [lake_mask, bridge_mask, house_mask]


def _three_task_irrelevant(labels, params, res, rng):
    # a road to a car, a trail to a bench, a stadium with no lead-in
    start = params.get("start", (200.0, 60.0))
    car = params.get("car", (340.0, 330.0))
    bench = params.get("bench", (60.0, 300.0))
    stadium = params.get("stadium", (330.0, 90.0))
    meander = float(params.get("meander_cells", 12.0))
    _paint_trail(labels, _cell(start, res), _cell(car, res), 3, meander, rng, ROAD)
    _paint_trail(labels, _cell(start, res), _cell(bench, res), 3, meander, rng, TRAIL)
    car_mask = _paint_disc(labels, _cell(car, res), 2, CAR)
    bench_mask = _paint_disc(labels, _cell(bench, res), 1, BENCH)
    stadium_mask = _paint_disc(labels, _cell(stadium, res), 8, STADIUM)
    return [car_mask, bench_mask, stadium_mask]


THREE_TASK_VARIANTS = {
    "relevant": _three_task_relevant,
    "irrelevant": _three_task_irrelevant,
}


def three_task_world(params: Mapping[str, Any], seed: int) -> SemanticWorld:
    """Three goals in sequence.

    The ``relevant`` variant puts goals 2 and 3 next to goal 1, so most of
    what they need is mapped while task 1 runs. The ``irrelevant`` variant
    scatters them over the map with separate lead-ins of their own.
    """

    variant = str(params.get("variant", "relevant"))
    if variant not in THREE_TASK_VARIANTS:
        raise BadConfig(
            f"unknown three_task variant {variant!r}; "
            f"expected one of {sorted(THREE_TASK_VARIANTS)}"
        )
    size = float(params.get("size", 400.0))
    res = float(params.get("resolution", 2.0))
    n = int(round(size / res))
    rng = np.random.default_rng(seed)

    elevation = smooth_terrain((n, n), float(params.get("relief", 4.0)), rng)
    labels = np.full((n, n), GRASS, dtype=int)
    _scatter_patches(labels, rng, FOREST, float(params.get("forest", 0.2)))
    masks = THREE_TASK_VARIANTS[variant](labels, params, res, rng)

    dictionary = make_dictionary(
        CLASS_NAMES, int(params.get("feature_dim", 16)), seed
    )
    goals = {
        f"task{k + 1}": set(zip(*np.nonzero(mask))) for k, mask in enumerate(masks)
    }
    return SemanticWorld(Heightfield(elevation, res), labels, dictionary, goals)


def flat_world(params: Mapping[str, Any], seed: int) -> SemanticWorld:
    """Flat single-class terrain with optional goal cells"""

    size = params.get("size", (100.0, 100.0))
    if np.isscalar(size):
        size = (size, size)
    res = float(params.get("resolution", 2.0))
    shape = (int(round(size[0] / res)), int(round(size[1] / res)))
    elevation = np.full(shape, float(params.get("elevation", 0.0)))
    labels = np.full(shape, GRASS, dtype=int)
    goals: Dict[str, Sequence] = {}
    for task_id, point in dict(params.get("goals", {})).items():
        cell = _cell(point, res)
        labels[cell] = HOUSE
        goals[str(task_id)] = {cell}
    dictionary = make_dictionary(
        CLASS_NAMES, int(params.get("feature_dim", 16)), seed
    )
    return SemanticWorld(Heightfield(elevation, res), labels, dictionary, goals)


BUILDERS = {
    "corridor": corridor_world,
    "two_task": two_task_world,
    "three_task": three_task_world,
    "flat": flat_world,
}


def build_procedural_world(
    kind: str, params: Mapping[str, Any] = None, seed: int = 0
) -> SemanticWorld:
    if kind not in BUILDERS:
        raise BadConfig(
            f"unknown procedural world {kind!r}; expected one of {sorted(BUILDERS)}"
        )
    world = BUILDERS[kind](params or {}, seed)
    logger.info(
        "built %s world: %dx%d cells at %.1f m",
        kind,
        world.terrain.width_cells,
        world.terrain.height_cells,
        world.terrain.resolution,
    )
    return world
