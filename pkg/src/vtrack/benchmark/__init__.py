"""Datasets, one-pass evaluation metrics and the synthetic sequence generator."""

from .dataset import (DirectoryFrames, FrameSource, MemoryFrames, Sequence, list_sequences,
                      load_sequence, read_trajectory, write_trajectory)
from .metrics import EvalCurves, aggregate, evaluate
from .synth import MotionLaw, SynthSpec, generate_synthetic, render_synthetic

__all__ = [
    "DirectoryFrames", "FrameSource", "MemoryFrames", "Sequence", "list_sequences",
    "load_sequence", "read_trajectory", "write_trajectory", "EvalCurves", "aggregate",
    "evaluate", "MotionLaw", "SynthSpec", "generate_synthetic", "render_synthetic",
]
