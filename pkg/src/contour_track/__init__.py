"""Region tracking by level-set descent of composable energy functionals.

Typical use::

    from contour_track import synthgen, tracker
    frames, masks = synthgen.render(synthgen.disk_scene())
    report = tracker.track_sequence(frames[0], masks[0], frames[1:],
                                    tracker.TrackConfig("1b"), ground_truth=masks[1:])
"""
from . import errors, functionals, imagecore, levelset, metrics, statistics, synthgen, tracker
from .errors import ContourTrackError
from .functionals import make_design, total_energy, total_speed
from .metrics import CoverageScore, coverage
from .tracker import TrackConfig, TrackReport, build_reference, track_frame, track_sequence

__version__ = "0.1.0"

__all__ = [
    "errors", "functionals", "imagecore", "levelset", "metrics", "statistics", "synthgen",
    "tracker", "ContourTrackError", "make_design", "total_energy", "total_speed",
    "CoverageScore", "coverage", "TrackConfig", "TrackReport", "build_reference",
    "track_frame", "track_sequence",
]
