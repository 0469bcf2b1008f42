"""Throughput micro-benchmark of the basic model on a rendered sequence."""

from __future__ import annotations

import time

from .benchmark import SynthSpec, render_synthetic
from .pipeline import Tracker, TrackerConfig


def basic_model_fps(n_frames: int = 100, seed: int = 0, cfg: TrackerConfig | None = None) -> dict:
    """Track a 320x240 constant-velocity sequence; frames are rendered up front.

    Reports frames per second over the whole run (initial training included)
    and over the per-frame steps only.
    """
    cfg = cfg or TrackerConfig()
    spec = SynthSpec(motion="ConstantVelocity", velocity=(2.5, 1.0), start=(20.0, 60.0),
                     length=n_frames, name="bench")
    seq = render_synthetic(spec, seed)
    frames = list(seq.iter_frames())
    tracker = Tracker(cfg)
    t0 = time.perf_counter()
    tracker.init(frames[0], seq.ground_truth[0])
    t1 = time.perf_counter()
    for frame in frames[1:]:
        tracker.step(frame)
    t2 = time.perf_counter()
    return {"frames": n_frames, "seconds": t2 - t0, "fps": n_frames / (t2 - t0),
            "step_fps": (n_frames - 1) / max(1e-9, t2 - t1), "init_seconds": t1 - t0}
