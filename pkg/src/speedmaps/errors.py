"""Exception types shared across the package."""


class SpeedMapsError(Exception):
    """Base class for all errors raised by speedmaps."""


class DegenerateInput(SpeedMapsError, ValueError):
    pass


class DegenerateProjection(SpeedMapsError, ValueError):
    """Robot body x-axis is (near) vertical, so no planar heading exists."""


class MalformedGrid(SpeedMapsError, ValueError):
    pass


class MalformedZone(SpeedMapsError, ValueError):
    pass


class MalformedPayload(SpeedMapsError, ValueError):
    pass


class MalformedScenario(SpeedMapsError, ValueError):
    pass


class UnknownLabel(SpeedMapsError, KeyError):
    def __str__(self):
        return f"unknown label: {self.args[0]!r}" if self.args else "unknown label"


class UnreachableGoal(SpeedMapsError):
    pass


class TooFewPoints(SpeedMapsError, ValueError):
    pass


class DegenerateFit(SpeedMapsError, ValueError):
    pass


class PlanningError(SpeedMapsError):
    pass


class NoPath(PlanningError):
    pass


class StartOccupied(PlanningError):
    pass


class GoalOccupied(PlanningError):
    pass


class NoFreeCell(PlanningError):
    pass
