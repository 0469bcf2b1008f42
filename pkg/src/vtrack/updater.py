"""Training-sample collection and the two update-trigger rules."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MissingNegatives, SamplingExhausted
from .geometry import Box, pairwise_center_distance, overlap_many
from .observation.base import TrainingBatch

MAX_REJECTIONS = 10_000


@dataclass
class SamplerConfig:
    pos_radius: float = 5.0
    neg_radius: float = 100.0
    neg_max_overlap: float = 0.3
    n_pos: int = 20
    n_neg: int = 80
    rng_seed: int = 0
    # radii are in working (normalised) pixels unless this is set
    radii_at_native: bool = False

    def __post_init__(self):
        if not 0 < self.pos_radius < self.neg_radius:
            raise ValueError("need 0 < pos_radius < neg_radius")
        if not 0 <= self.neg_max_overlap < 1:
            raise ValueError("need 0 <= neg_max_overlap < 1")

    def to_dict(self):
        return asdict(self)


class UpdateKind(str, enum.Enum):
    SCORE_THRESHOLD = "ScoreThreshold"
    MARGIN_THRESHOLD = "MarginThreshold"


@dataclass
class UpdatePolicy:
    kind: UpdateKind = UpdateKind.SCORE_THRESHOLD
    theta: float | None = None  # None: per-observation-model default

    def __post_init__(self):
        self.kind = UpdateKind(self.kind)

    def to_dict(self):
        return {"kind": self.kind.value, "theta": self.theta}


def should_update(policy: UpdatePolicy, target_score: float, negative_scores=None) -> bool:
    theta = policy.theta
    if theta is None:
        raise ValueError("update policy has no threshold")
    if policy.kind is UpdateKind.SCORE_THRESHOLD:
        return bool(target_score < theta)
    if negative_scores is None or len(negative_scores) == 0:
        raise MissingNegatives("margin-threshold updates need background scores")
    return bool(target_score - float(np.max(negative_scores)) < theta)


def _disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    phi = rng.random(n) * 2 * np.pi
    return r * np.cos(phi), r * np.sin(phi)


def _clip(boxes, fw, fh):
    x1 = np.maximum(boxes[:, 0], 0.0)
    y1 = np.maximum(boxes[:, 1], 0.0)
    x2 = np.minimum(boxes[:, 0] + boxes[:, 2], float(fw))
    y2 = np.minimum(boxes[:, 1] + boxes[:, 3], float(fh))
    ok = (x2 > x1) & (y2 > y1)
    return np.stack([x1, y1, x2 - x1, y2 - y1], axis=1), ok


def _draw(target: Box, n: int, radius: float, accept, frame_size, rng, what: str) -> np.ndarray:
    """Rejection-sample n clipped boxes around ``target`` satisfying ``accept``."""
    fw, fh = frame_size
    cx, cy = target.center()
    out = []
    have = rejected = 0
    while have < n:
        m = max(2 * (n - have), 16)
        dx, dy = _disk(rng, m, radius)
        raw = np.stack([cx + dx - target.w / 2, cy + dy - target.h / 2,
                        np.full(m, target.w), np.full(m, target.h)], axis=1)
        boxes, ok = _clip(raw, fw, fh)
        ok[ok] &= accept(boxes[ok])
        idx = np.flatnonzero(ok)[: n - have]
        take = boxes[idx]
        # draws after the last needed acceptance are discarded, not rejected
        considered = idx[-1] + 1 if len(idx) == n - have else m
        rejected += int(considered - len(idx))
        if rejected > MAX_REJECTIONS:
            raise SamplingExhausted(
                f"gave up drawing {what} samples after {rejected} rejections around {target!r}")
        out.append(take)
        have += len(take)
    return np.vstack(out) if out else np.zeros((0, 4))


def sample_boxes(target: Box, frame_size: tuple[int, int], cfg: SamplerConfig,
                 rng: np.random.Generator, radius_scale: float = 1.0):
    """Positive and negative sample boxes (same size as the target, clipped to the frame)."""
    pos_r = cfg.pos_radius * radius_scale
    neg_r = cfg.neg_radius * radius_scale
    t = target.as_array()[None]

    def near(boxes):
        return pairwise_center_distance(boxes, t) <= pos_r

    def background(boxes):
        return ((pairwise_center_distance(boxes, t) <= neg_r)
                & (overlap_many(target, boxes) < cfg.neg_max_overlap))

    pos = _draw(target, cfg.n_pos, pos_r, near, frame_size, rng, "positive")
    neg = _draw(target, cfg.n_neg, neg_r, background, frame_size, rng, "negative")
    return pos, neg


def collect_samples(frame, target: Box, cfg: SamplerConfig, rng: np.random.Generator,
                    extractor, prepared=None, radius_scale: float = 1.0) -> TrainingBatch:
    """Sample around ``target`` and featurize with ``extractor``.

    ``prepared`` is the extractor's per-frame preprocessing of ``frame`` and is
    recomputed when not given.
    """
    if prepared is None:
        prepared = extractor.prepare(frame)
    pos, neg = sample_boxes(target, frame.size, cfg, rng, radius_scale)
    t = target.as_array()[None]
    feats = extractor.extract(prepared, np.vstack([t, pos, neg]))
    return TrainingBatch(feats[1:1 + len(pos)], feats[1 + len(pos):], pos, neg, feats[0], t[0])
