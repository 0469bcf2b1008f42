"""Candidate generation: particle filter and (square / radius) sliding windows.

All coordinates here live at the normalised resolution, i.e. after the frame
has been rescaled so its long side equals ``MotionConfig.norm_long_side``.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateWeights
from .geometry import Box, clip_boxes

WEIGHT_FLOOR = 1e-12


class MotionKind(str, enum.Enum):
    PARTICLE_FILTER = "ParticleFilter"
    SLIDING_WINDOW = "SlidingWindow"
    RADIUS_WINDOW = "RadiusWindow"


@dataclass
class MotionConfig:
    n_particles: int = 300
    sigma_xy: float = 6.0
    sigma_s: float = 0.03
    window_radius: int = 20
    window_stride: int = 2
    norm_long_side: int = 320
    weight_power: float = 4.0

    def __post_init__(self):
        if self.n_particles < 1 or self.window_stride < 1 or self.norm_long_side < 1:
            raise ValueError(f"motion parameters must be positive: {self}")
        if self.sigma_xy < 0 or self.sigma_s < 0 or self.window_radius < 0:
            raise ValueError(f"motion spreads must be non-negative: {self}")

    def to_dict(self):
        return asdict(self)


def normalization_factor(frame_w: int, frame_h: int, cfg: MotionConfig) -> float:
    if frame_w < 1 or frame_h < 1:
        raise ValueError(f"frame size must be positive, got {frame_w}x{frame_h}")
    return cfg.norm_long_side / max(frame_w, frame_h)


@dataclass
class ParticleSet:
    """Particle states as parallel arrays; scale is relative to the initial box."""

    cx: np.ndarray
    cy: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    base_w: float
    base_h: float

    def __len__(self):
        return len(self.cx)

    def boxes(self) -> np.ndarray:
        w = self.s * self.base_w
        h = self.s * self.base_h
        return np.stack([self.cx - w / 2, self.cy - h / 2, w, h], axis=1)

    def box(self, i: int) -> Box:
        return Box.from_array(self.boxes()[i])

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.cx.copy(), self.cy.copy(), self.s.copy(),
                           self.weights.copy(), self.base_w, self.base_h)


@dataclass
class CandidateSet:
    boxes: np.ndarray  # (N, 4) x, y, w, h
    origin: MotionKind
    particles: ParticleSet | None = None

    def __len__(self):
        return len(self.boxes)

    def box(self, i: int) -> Box:
        return Box.from_array(self.boxes[i])


def pf_init(b0: Box, cfg: MotionConfig) -> ParticleSet:
    n = cfg.n_particles
    cx, cy = b0.center()
    return ParticleSet(np.full(n, cx), np.full(n, cy), np.ones(n),
                       np.full(n, 1.0 / n), b0.w, b0.h)


def _check_weights(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
        raise DegenerateWeights("particle weights are empty, negative, non-finite or all zero")
    return w / w.sum()


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices of resampled particles using one uniform offset for all strata."""
    w = _check_weights(weights)
    n = len(w)
    positions = (rng.random() + np.arange(n)) / n
    cumsum = np.cumsum(w)
    cumsum[-1] = 1.0
    return np.searchsorted(cumsum, positions, side="right")


def _keep_in_frame(cx, cy, frame_size):
    # a candidate must intersect the frame; pinning its centre inside guarantees that
    if frame_size is None:
        return cx, cy
    fw, fh = frame_size
    return np.clip(cx, 0.0, fw - 1e-6), np.clip(cy, 0.0, fh - 1e-6)


def pf_propose(particles: ParticleSet, cfg: MotionConfig, rng: np.random.Generator,
               frame_size: tuple[int, int] | None = None) -> CandidateSet:
    """Resample by weight, diffuse, and emit one candidate box per particle.

    Particle centres are pinned inside the frame, so every clipped box is non-empty.
    """
    idx = systematic_resample(particles.weights, rng)
    n = len(idx)
    cx = particles.cx[idx].copy()
    cy = particles.cy[idx].copy()
    s = particles.s[idx].copy()
    if cfg.sigma_xy > 0:
        cx += rng.normal(0.0, cfg.sigma_xy, n)
        cy += rng.normal(0.0, cfg.sigma_xy, n)
    if cfg.sigma_s > 0:
        s *= np.exp(rng.normal(0.0, cfg.sigma_s, n))
    cx, cy = _keep_in_frame(cx, cy, frame_size)
    new = ParticleSet(cx, cy, s, np.full(n, 1.0 / n), particles.base_w, particles.base_h)
    boxes = new.boxes()
    if frame_size is not None:
        boxes = clip_boxes(boxes, *frame_size)
    return CandidateSet(boxes, MotionKind.PARTICLE_FILTER, new)


def score_weights(scores, power: float = 1.0) -> np.ndarray:
    """Shifted weights: w_i proportional to max(score_i - min(score), 1e-12) ** power.

    Invariant to any positive affine rescaling of the scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0 or not np.all(np.isfinite(scores)):
        raise DegenerateWeights("particle scores must be finite and non-empty")
    shifted = scores - scores.min()
    top = shifted.max()
    if top > 0:
        shifted = shifted / top  # keeps the power well-conditioned
    w = np.maximum(shifted, WEIGHT_FLOOR) ** power
    return w / w.sum()


def pf_update(particles: ParticleSet, scores, power: float = 1.0) -> tuple[ParticleSet, int]:
    """Reweight particles by score; returns the new set and the argmax index."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) != len(particles):
        raise DegenerateWeights(f"{len(scores)} scores for {len(particles)} particles")
    weights = score_weights(scores, power)
    out = particles.copy()
    out.weights = weights
    return out, int(np.argmax(scores))


def window_offsets(radius: int, stride: int, circular: bool) -> np.ndarray:
    steps = np.arange(-radius, radius + 1, stride)
    dx, dy = np.meshgrid(steps, steps, indexing="xy")
    dx, dy = dx.ravel(), dy.ravel()
    if circular:
        keep = dx * dx + dy * dy <= radius * radius
        dx, dy = dx[keep], dy[keep]
    return np.stack([dx, dy], axis=1).astype(np.float64)


def sliding_window(b_prev: Box, cfg: MotionConfig, shape: MotionKind | str = MotionKind.SLIDING_WINDOW,
                   frame_size: tuple[int, int] | None = None) -> CandidateSet:
    shape = MotionKind(shape)
    if shape is MotionKind.PARTICLE_FILTER:
        raise ValueError("sliding_window needs a SlidingWindow or RadiusWindow shape")
    off = window_offsets(cfg.window_radius, cfg.window_stride, shape is MotionKind.RADIUS_WINDOW)
    cx0, cy0 = b_prev.center()
    cx, cy = _keep_in_frame(cx0 + off[:, 0], cy0 + off[:, 1], frame_size)
    boxes = np.stack([cx - b_prev.w / 2, cy - b_prev.h / 2,
                      np.full(len(cx), b_prev.w), np.full(len(cx), b_prev.h)], axis=1)
    return CandidateSet(boxes, shape)


class MotionModel:
    """Per-tracker motion state; proposes candidates and absorbs their scores."""

    def __init__(self, kind, cfg: MotionConfig, rng: np.random.Generator):
        self.kind = MotionKind(kind)
        self.cfg = cfg
        self.rng = rng
        self.particles: ParticleSet | None = None
        self.estimate: Box | None = None

    def init(self, b0: Box):
        self.estimate = b0
        if self.kind is MotionKind.PARTICLE_FILTER:
            self.particles = pf_init(b0, self.cfg)

    def propose(self, frame_size) -> CandidateSet:
        if self.kind is MotionKind.PARTICLE_FILTER:
            return pf_propose(self.particles, self.cfg, self.rng, frame_size)
        return sliding_window(self.estimate, self.cfg, self.kind, frame_size)

    def observe(self, cands: CandidateSet, scores) -> int:
        if self.kind is MotionKind.PARTICLE_FILTER:
            self.particles, best = pf_update(cands.particles, scores, self.cfg.weight_power)
        else:
            best = int(np.argmax(scores))
        self.estimate = cands.box(best)
        return best
