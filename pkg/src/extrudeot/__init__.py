"""Extended object tracking with an extruded B-spline side profile."""

from .bspline import BSplineCurve, evaluate, project_point
from .filter import Frame, TrackerConfig, TrackState, track
from .scenario import PRESETS
from .shape import ExtrudedShape, Pose

__all__ = [
    "BSplineCurve", "ExtrudedShape", "Frame", "PRESETS", "Pose",
    "TrackState", "TrackerConfig", "evaluate", "project_point", "track",
]
__version__ = "0.1.0"
