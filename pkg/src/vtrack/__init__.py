"""Particle-filter object tracking with swappable features, observation models and update rules."""

from .geometry import Box, Trajectory, overlap
from .imaging import Frame
from .pipeline import Tracker, TrackerConfig, track_frames, track_sequence

__version__ = "0.1.0"

__all__ = ["Box", "Trajectory", "overlap", "Frame", "Tracker", "TrackerConfig", "track_frames",
           "track_sequence", "__version__"]
