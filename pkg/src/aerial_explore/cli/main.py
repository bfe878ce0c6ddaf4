"""Command-line entry point: single missions, planner sweeps and
reconstruction benchmarks driven by one scenario file."""

import argparse
import json
import logging
import os
import shlex
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import dask
import numpy as np
import pandas as pd

from .. import __version__
from ..baselines.baselines import PLANNER_NAMES
from ..errors import AerialExploreError
from ..io.export import (
    export_clusters,
    export_feature_grid,
    export_map_images,
    export_occupancy,
    export_relevancy,
    heightfield_cloud,
    load_feature_grid,
    load_occupancy,
    load_relevancy,
    read_ply,
    write_ply,
)
from ..io.scenario import Scenario, bundled_scenarios, load_scenario
from ..mission.metrics import METRIC_COLUMNS
from ..mission.runner import SimRun, fly_reconstruction, simulate
from ..posegraph.graph import export_world_cloud, save_graph

logger = logging.getLogger(__name__)

OUT_ENV = "AERIAL_EXPLORE_OUT"
DEFAULT_OUT_ROOT = "aerial_explore_runs"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCOMPLETE = 2

# numerical failures inside one run become an error row, not a failed sweep
SWEEP_ERRORS = (
    AerialExploreError,
    np.linalg.LinAlgError,
    FloatingPointError,
    ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scenario",
        required=True,
        help="scenario YAML file or the name of a bundled scenario",
    )
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--force", action="store_true", help="write into an existing output directory"
    )
    parser.add_argument(
        "--no-gps", action="store_true", help="disable GPS priors in the pose graph"
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="aerial-explore",
        description="Monocular aerial mapping and language-conditioned exploration.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="run one mission")
    _add_common(run)
    run.add_argument("--planner", default="halo", help="|".join(PLANNER_NAMES))
    run.add_argument("--seed", type=int, default=None)
    run.add_argument(
        "--export-maps", action="store_true", help="write grids, clusters and clouds"
    )

    sweep = sub.add_parser("sweep", help="planners x seeds comparison")
    _add_common(sweep)
    sweep.add_argument(
        "--planners", default=None, help="comma-separated planner names"
    )
    sweep.add_argument("--seeds", default=None, help="comma-separated seeds")
    sweep.add_argument("--workers", type=int, default=1)

    recon = sub.add_parser("recon-bench", help="scripted flight, reconstruction metrics")
    _add_common(recon)
    recon.add_argument("--trajectory", default="coverage", choices=["coverage", "line"])
    recon.add_argument("--seed", type=int, default=None)

    inspect = sub.add_parser("inspect", help="summarize exported maps")
    inspect.add_argument("directory", help="output directory of run --export-maps")
    inspect.add_argument("-v", "--verbose", action="count", default=0)
    return parser


## helpers


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def _resolve_scenario(name: str) -> Scenario:
    path = Path(name)
    if not path.exists():
        bundled = bundled_scenarios()
        if name in bundled:
            path = bundled[name]
    return load_scenario(path)


def _with_gps(scenario: Scenario, use_gps: bool) -> Scenario:
    if use_gps:
        return scenario
    mission = replace(scenario.mission, slam=replace(scenario.mission.slam, use_gps=False))
    return replace(scenario, mission=mission)


def _prepare_out(args, scenario: Scenario, label: str, argv: Sequence[str]) -> Path:
    if args.out is not None:
        out = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ENV, DEFAULT_OUT_ROOT))
        out = root / f"{scenario.name}-{label}"
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    (out / "command.txt").write_text(
        "aerial-explore " + " ".join(shlex.quote(a) for a in argv) + "\n"
    )
    return out


def _int_list(text: Optional[str], default: List[int]) -> List[int]:
    if text is None:
        return list(default)
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"seeds must be integers, got {text!r}") from None


def _check_planner(name: str) -> None:
    if name not in PLANNER_NAMES:
        raise UsageError(
            f"unknown planner {name!r}; choose from {', '.join(PLANNER_NAMES)}"
        )


def _export_maps(run: SimRun, out: Path) -> None:
    export_occupancy(run.occ, out / "occupancy.txt")
    export_feature_grid(run.feat, out / "features.bin")
    export_relevancy(run.rel, out / "relevancy.bin")
    export_clusters(run.clusters, out / "clusters.txt")
    export_map_images(run.occ, run.rel, out)
    write_ply(heightfield_cloud(run.world.terrain), out / "terrain.ply")
    if run.mapper is not None and run.mapper.graph.nodes:
        write_ply(export_world_cloud(run.mapper.graph), out / "reconstruction.ply")
        save_graph(run.mapper.graph, out / "graph.txt")


## commands


def cmd_run(args, argv: Sequence[str]) -> int:
    _check_planner(args.planner)
    scenario = _with_gps(_resolve_scenario(args.scenario), not args.no_gps)
    seed = scenario.seeds[0] if args.seed is None else args.seed
    out = _prepare_out(args, scenario, f"{args.planner}-s{seed}", argv)

    run = simulate(scenario.mission, args.planner, seed)
    metrics = run.metrics()
    run.events.write(out / "events.jsonl")
    metrics.to_csv(out / "metrics.csv")
    (out / "summary.json").write_text(
        json.dumps(metrics.summary(), indent=2, default=float) + "\n"
    )
    if args.export_maps:
        _export_maps(run, out)

    print(metrics.to_frame().to_string(index=False))
    print(f"status: {metrics.status}  ->  {out}")
    return EXIT_OK if metrics.complete else EXIT_INCOMPLETE


def _sweep_cell(scenario: Scenario, planner: str, seed: int) -> List[Dict]:
    """Per-task rows of one run; a failed run yields a single error row"""

    try:
        metrics = simulate(scenario.mission, planner, seed).metrics()
    except SWEEP_ERRORS as exc:
        logger.warning("sweep cell %s/%d failed: %r", planner, seed, exc)
        status = f"error: {type(exc).__name__}: {exc}"
        return [{"planner": planner, "seed": seed, "status": status}]
    rows = metrics.to_frame(with_totals=False).to_dict("records")
    for row in rows:
        row.update(planner=planner, seed=seed, status=metrics.status)
    return rows


def summarize_sweep(rows: pd.DataFrame) -> pd.DataFrame:
    """Per-planner means over completed tasks plus run counts"""

    runs = rows.groupby(["planner", "seed"])["status"].first().reset_index()
    counts = runs.groupby("planner").agg(
        runs=("seed", "size"),
        complete_runs=("status", lambda s: int((s == "complete").sum())),
    )
    done = rows[rows["complete"].fillna(False).astype(bool)]
    means = done.groupby("planner")[["time_s", "distance_m", "cr"]].mean()
    summary = counts.join(means, how="left").reset_index()
    return summary.rename(
        columns={
            "time_s": "mean_time_s",
            "distance_m": "mean_distance_m",
            "cr": "mean_cr",
        }
    )


def cmd_sweep(args, argv: Sequence[str]) -> int:
    scenario = _with_gps(_resolve_scenario(args.scenario), not args.no_gps)
    planners = scenario.planners
    if args.planners is not None:
        planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    for name in planners:
        _check_planner(name)
    seeds = _int_list(args.seeds, scenario.seeds)
    if not seeds or not planners:
        raise UsageError("sweep needs at least one planner and one seed")
    out = _prepare_out(args, scenario, "sweep", argv)

    cells = [
        dask.delayed(_sweep_cell)(scenario, planner, seed)
        for planner in planners
        for seed in seeds
    ]
    results = dask.compute(*cells, scheduler="threads", num_workers=args.workers)
    rows = pd.DataFrame(
        [row for cell in results for row in cell],
        columns=["planner", "seed", "status"] + METRIC_COLUMNS,
    )
    rows.to_csv(out / "runs.csv", index=False, float_format="%.6f")
    summary = summarize_sweep(rows)
    summary.to_csv(out / "summary.csv", index=False, float_format="%.6f")

    print(summary.to_string(index=False))
    print(f"{len(planners)} planner(s) x {len(seeds)} seed(s)  ->  {out}")
    return EXIT_OK


def cmd_recon_bench(args, argv: Sequence[str]) -> int:
    scenario = _resolve_scenario(args.scenario)
    seed = scenario.seeds[0] if args.seed is None else args.seed
    out = _prepare_out(args, scenario, f"recon-{args.trajectory}", argv)

    rows = []
    for use_gps in ([False] if args.no_gps else [True, False]):
        result = fly_reconstruction(scenario.mission, args.trajectory, seed, use_gps)
        tag = "gps" if use_gps else "nogps"
        write_ply(result.recon, out / f"reconstruction_{tag}.ply")
        save_graph(result.mapper.graph, out / f"graph_{tag}.txt")
        rows.append(
            {
                "trajectory": args.trajectory,
                "gps": use_gps,
                "nodes": len(result.mapper.graph.nodes),
                "scale": result.mapper.graph.scale,
                **result.metrics,
            }
        )
    write_ply(result.gt, out / "ground_truth.ply")
    table = pd.DataFrame(rows)
    table.to_csv(out / "recon_metrics.csv", index=False, float_format="%.6f")

    print(table.to_string(index=False))
    return EXIT_OK


def cmd_inspect(args, argv: Sequence[str]) -> int:
    """Summarize a directory written by ``run --export-maps``"""

    directory = Path(args.directory)
    if not (directory / "features.bin").is_file():
        raise UsageError(f"{directory} holds no exported maps")
    feat = load_feature_grid(directory / "features.bin")
    occ = load_occupancy(directory / "occupancy.txt", feat.spec)
    rel = load_relevancy(directory / "relevancy.bin")

    scores = rel.score[rel.observed]
    rows = [
        {"item": "occupancy", "value": occ.known_fraction(), "unit": "known fraction"},
        {"item": "features", "value": int(feat.observed.sum()), "unit": "cells"},
        {
            "item": "relevancy",
            "value": float(scores.max()) if scores.size else float("nan"),
            "unit": "max score",
        },
    ]
    for path in sorted(directory.glob("*.ply")):
        rows.append({"item": path.stem, "value": len(read_ply(path)), "unit": "points"})
    table = pd.DataFrame(rows)
    print(f"grid: {feat.spec.dims[0]} x {feat.spec.dims[1]} @ {feat.spec.resolution} m")
    print(table.to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "recon-bench": cmd_recon_bench,
    "inspect": cmd_inspect,
}


def main(argv: Sequence[str] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        _configure_logging(args.verbose)
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aerial-explore: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except AerialExploreError as exc:
        print(f"aerial-explore: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
