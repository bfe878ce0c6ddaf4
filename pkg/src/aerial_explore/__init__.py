__version__ = "0.1.0"
from .baselines.baselines import make_planner
from .io.scenario import load_scenario
from .mission.metrics import competitive_ratio, recon_metrics
from .mission.runner import MissionSpec, TaskSpec, run_mission, simulate
from .planner.hierarchical import HierarchicalPlanner
from .posegraph.pipeline import SubmapMapper

__all__ = (
    "HierarchicalPlanner",
    "MissionSpec",
    "SubmapMapper",
    "TaskSpec",
    "competitive_ratio",
    "load_scenario",
    "make_planner",
    "recon_metrics",
    "run_mission",
    "simulate",
)
