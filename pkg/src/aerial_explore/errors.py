"""Exceptions raised by the aerial exploration stack"""


class AerialExploreError(Exception):
    """Base class for every error raised by this package"""


# world


class PoseBelowTerrain(AerialExploreError):
    """Camera is at or below the terrain somewhere under its footprint"""


class TooFewFrames(AerialExploreError):
    """A submap prediction needs at least two frames"""


# posegraph


class DegenerateMotion(AerialExploreError):
    """Predicted displacements are too small to estimate a scale"""


class EmptyCloud(AerialExploreError):
    """A point cloud is empty or too small for the requested operation"""


class NoCorrespondences(AerialExploreError):
    """No source point has a target neighbour within the gate"""


class NoOverlap(AerialExploreError):
    """A submap shares no frames with the previous submap"""


class GraphPreconditionError(AerialExploreError):
    """The pose graph is not in a state that allows the operation"""


# mapping / taskinfo


class DegenerateBlend(AerialExploreError):
    """An EMA blend cancelled out to the zero vector"""


class DegenerateCluster(AerialExploreError):
    """All cells of a cluster coincide and it cannot be split"""


# planner / baselines


class BadConfig(AerialExploreError):
    """A configuration value is outside its valid range"""


class NoCandidates(AerialExploreError):
    """No exploration or exploitation region is available"""


class EmptyRegion(AerialExploreError):
    """An exploration region has no assigned frontier cluster"""


class NoFrontiers(AerialExploreError):
    """The frontier set is empty"""


# mission / cli


class PlannerStalled(AerialExploreError):
    """The planner has nothing left to do but the task is not complete"""


class BadDistance(AerialExploreError):
    """A path length used for the competitive ratio is not positive"""


class ScenarioError(AerialExploreError):
    """A scenario file failed to load or validate"""

    def __init__(self, message: str, source: str = None, line: int = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)
