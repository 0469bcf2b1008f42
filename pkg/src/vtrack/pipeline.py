"""The per-frame tracking loop: motion -> features -> observation -> updater."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .errors import TrackerError
from .features import FeatureKind, HAAR_DEFAULT_SEED, make_extractor
from .geometry import Box, Trajectory, scale_box
from .imaging import Frame, resize
from .motion import MotionConfig, MotionKind, MotionModel, normalization_factor
from .observation import ObservationConfig, ObservationKind, make_model
from .updater import SamplerConfig, UpdateKind, UpdatePolicy, collect_samples, should_update

log = logging.getLogger(__name__)

# Threshold used when UpdatePolicy.theta is None, by (policy, observation model).
# Logistic scores are probabilities; the others are margins (ridge regresses onto {0, 1}).
DEFAULT_THETA = {
    UpdateKind.SCORE_THRESHOLD: {
        ObservationKind.LR: 0.9, ObservationKind.RIDGE: 0.8,
        ObservationKind.SVM: 1.0, ObservationKind.SOSVM: 1.0,
    },
    UpdateKind.MARGIN_THRESHOLD: {
        ObservationKind.LR: 0.5, ObservationKind.RIDGE: 0.5,
        ObservationKind.SVM: 2.0, ObservationKind.SOSVM: 1.0,
    },
}


@dataclass
class TrackerConfig:
    feature: FeatureKind = FeatureKind.RAW_GRAY
    observation: ObservationKind = ObservationKind.LR
    motion: MotionKind = MotionKind.PARTICLE_FILTER
    motion_cfg: MotionConfig = field(default_factory=MotionConfig)
    update: UpdatePolicy = field(default_factory=UpdatePolicy)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    observation_cfg: ObservationConfig = field(default_factory=ObservationConfig)
    rng_seed: int = 0
    haar_seed: int = HAAR_DEFAULT_SEED
    update_enabled: bool = True

    def __post_init__(self):
        self.feature = FeatureKind(self.feature)
        self.observation = ObservationKind(self.observation)
        self.motion = MotionKind(self.motion)
        # nested sections may be given as plain dicts
        for name, kind in (("motion_cfg", MotionConfig), ("update", UpdatePolicy),
                           ("sampler", SamplerConfig), ("observation_cfg", ObservationConfig)):
            value = getattr(self, name)
            if isinstance(value, dict):
                setattr(self, name, kind(**value))

    @property
    def theta(self) -> float:
        if self.update.theta is not None:
            return self.update.theta
        return DEFAULT_THETA[self.update.kind][self.observation]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.value,
            "observation": self.observation.value,
            "motion": self.motion.value,
            "motion_cfg": self.motion_cfg.to_dict(),
            "update": self.update.to_dict(),
            "sampler": self.sampler.to_dict(),
            "observation_cfg": self.observation_cfg.to_dict(),
            "rng_seed": self.rng_seed,
            "haar_seed": self.haar_seed,
            "update_enabled": self.update_enabled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        d = dict(d)
        kw = {}
        for key in ("feature", "observation", "motion", "rng_seed", "haar_seed", "update_enabled"):
            if key in d:
                kw[key] = d.pop(key)
        for key in ("motion_cfg", "update", "sampler", "observation_cfg"):
            if key in d:
                kw[key] = dict(d.pop(key))
        if d:
            raise ValueError(f"unknown tracker config keys: {sorted(d)}")
        return cls(**kw)


class Tracker:
    """One tracker instance; strictly sequential, owns its rng and model."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.rng = np.random.default_rng(self.cfg.rng_seed)
        self.extractor = make_extractor(self.cfg.feature, self.cfg.haar_seed)
        self.model = make_model(self.cfg.observation, self.cfg.observation_cfg, self.rng)
        self.motion = MotionModel(self.cfg.motion, self.cfg.motion_cfg, self.rng)
        self.rho = 1.0
        self.frame_size: tuple[int, int] | None = None
        self.estimate: Box | None = None
        self.frame_index = -1
        self.n_updates = 0
        self.warnings: list[str] = []
        self.last_scores: np.ndarray | None = None
        # hook for tests: maps raw candidate scores before the argmax
        self.score_transform = None

    # ------------------------------------------------------------ helpers

    def _working(self, frame: Frame) -> Frame:
        if self.rho == 1.0:
            return frame
        w = max(1, int(round(frame.width * self.rho)))
        h = max(1, int(round(frame.height * self.rho)))
        return resize(frame, w, h)

    @property
    def _radius_scale(self) -> float:
        return self.rho if self.cfg.sampler.radii_at_native else 1.0

    def _train(self, work: Frame, prepared, target: Box, epochs: int, batch=None):
        if batch is None:
            batch = collect_samples(work, target, self.cfg.sampler, self.rng, self.extractor,
                                    prepared, self._radius_scale)
        self.model.fit(batch, epochs, self.rng)
        self.n_updates += 1
        return batch

    # ------------------------------------------------------------ public API

    def init(self, frame0: Frame, b0: Box) -> Box:
        self.frame_size = frame0.size
        self.rho = normalization_factor(frame0.width, frame0.height, self.cfg.motion_cfg)
        work = self._working(frame0)
        b0n = scale_box(b0, self.rho)
        prepared = self.extractor.prepare(work)
        self.init_batch = self._train(work, prepared, b0n, self.cfg.observation_cfg.init_epochs)
        self.motion.init(b0n)
        self.estimate = b0
        self.frame_index = 0
        return b0

    def step(self, frame: Frame) -> Box:
        if self.estimate is None:
            raise RuntimeError("tracker used before init()")
        if frame.size != self.frame_size:
            raise ValueError(f"frame size {frame.size} differs from sequence size {self.frame_size}")
        self.frame_index += 1
        work = self._working(frame)
        prepared = self.extractor.prepare(work)
        try:
            cands = self.motion.propose(work.size)
            scores = self.model.score(self.extractor.extract(prepared, cands.boxes))
        except TrackerError as exc:
            msg = f"frame {self.frame_index}: candidate generation failed ({exc}); keeping previous box"
            log.warning(msg)
            self.warnings.append(msg)
            return self.estimate
        self.last_scores = scores
        ranked = scores if self.score_transform is None else self.score_transform(scores)
        best = self.motion.observe(cands, ranked)
        est_n = cands.box(best)
        if self.cfg.update_enabled:
            self._maybe_update(work, prepared, est_n, float(scores[best]))
        self.estimate = scale_box(est_n, 1.0 / self.rho)
        return self.estimate

    def _maybe_update(self, work, prepared, est_n: Box, target_score: float):
        policy = UpdatePolicy(self.cfg.update.kind, self.cfg.theta)
        try:
            if policy.kind is UpdateKind.SCORE_THRESHOLD:
                if should_update(policy, target_score):
                    self._train(work, prepared, est_n, self.cfg.observation_cfg.update_epochs)
                return
            batch = collect_samples(work, est_n, self.cfg.sampler, self.rng, self.extractor,
                                    prepared, self._radius_scale)
            if should_update(policy, target_score, self.model.score(batch.negatives)):
                self._train(work, prepared, est_n, self.cfg.observation_cfg.update_epochs, batch)
        except TrackerError as exc:
            msg = f"frame {self.frame_index}: model update skipped ({exc})"
            log.warning(msg)
            self.warnings.append(msg)


def track_frames(cfg: TrackerConfig, frames: Iterable[Frame], b0: Box, sequence_id: str = "",
                 tracker: Tracker | None = None) -> Trajectory:
    """One-pass evaluation: init on the first frame, then step through the rest."""
    tracker = tracker or Tracker(cfg)
    it = iter(frames)
    boxes = [tracker.init(next(it), b0)]
    for frame in it:
        boxes.append(tracker.step(frame))
    return Trajectory(boxes, sequence_id)


def track_sequence(cfg: TrackerConfig, seq) -> Trajectory:
    """Run a tracker over a benchmark Sequence from its first ground-truth box."""
    return track_frames(cfg, seq.iter_frames(), seq.ground_truth[0], seq.name)
