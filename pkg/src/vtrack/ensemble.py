"""Fusing the boxes of several blackbox trackers into one trajectory.

Three fusers share one voting rule. ``vote_frame`` picks, from the input boxes
plus their coordinate-wise weighted median, the box with the least weighted
disagreement (1 - IoU) to the inputs, optionally plus a continuity penalty
against the previous fused box.

``fuse_reliability`` stands in for factorial-HMM inference with a small EM-like
loop: per frame, vote with the current tracker weights, score each tracker by
its overlap with the vote, and blend that agreement into the weights with
exponential smoothing. The weights carry over to the next frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateWeights, EmptyInput, LengthMismatch
from .geometry import Box, Trajectory, cross_overlap, overlap_many

DEFAULT_LAMBDA_C = 0.3
DEFAULT_ALPHA = 0.5
DEFAULT_ITERATIONS = 3


@dataclass
class EnsembleInput:
    trajectories: list[Trajectory]
    names: list[str]

    def __post_init__(self):
        if len(self.trajectories) < 2:
            raise EmptyInput(f"an ensemble needs at least 2 trajectories, got {len(self.trajectories)}")
        if len(self.names) != len(self.trajectories):
            raise LengthMismatch("one name per trajectory is required")
        lengths = {len(t) for t in self.trajectories}
        if len(lengths) != 1:
            raise LengthMismatch(f"trajectories differ in length: {sorted(lengths)}")
        if 0 in lengths:
            raise EmptyInput("trajectories are empty")

    @classmethod
    def of(cls, trajectories: Sequence[Trajectory], names: Sequence[str] | None = None):
        trajectories = list(trajectories)
        if names is None:
            names = [t.sequence_id or f"tracker{i}" for i, t in enumerate(trajectories)]
        return cls(trajectories, list(names))

    @property
    def stacked(self) -> np.ndarray:
        """(T, N, 4) array of boxes."""
        return np.stack([t.as_array() for t in self.trajectories], axis=1)

    def __len__(self):
        return len(self.trajectories[0])


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Lower weighted median: the smallest value whose cumulative weight reaches half."""
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    i = int(np.searchsorted(cum, 0.5 * cum[-1] - 1e-12 * cum[-1]))
    return float(values[order][min(i, len(values) - 1)])


def median_box(boxes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Coordinate-wise weighted median of (x, y, w, h)."""
    return np.array([weighted_median(boxes[:, k], weights) for k in range(4)])


def _check_weights(weights, n) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise LengthMismatch(f"{n} boxes but {w.shape[0]} weights")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
        raise DegenerateWeights("weights must be finite, non-negative and not all zero")
    return w


def _vote(boxes: np.ndarray, w: np.ndarray, prev: np.ndarray | None, lam_c: float) -> np.ndarray:
    pool = np.vstack([boxes, median_box(boxes, w)[None]])
    loss = (1.0 - cross_overlap(pool, boxes)) @ w
    if prev is not None and lam_c > 0:
        loss = loss + lam_c * (1.0 - cross_overlap(pool, prev[None])[:, 0])
    return pool[int(np.argmin(loss))]  # argmin returns the lowest index on ties


def vote_frame(boxes: Sequence[Box], weights=None, prev: Box | None = None,
               lam_c: float = 0.0) -> Box:
    """Weighted majority vote over one frame's boxes.

    With uniform weights and no ``prev`` this is the plain voting rule. The
    continuity term is dropped when ``prev`` is None.
    """
    boxes = list(boxes)
    if not boxes:
        raise EmptyInput("no boxes to vote over")
    arr = np.array([b.as_array() for b in boxes])
    w = _check_weights(np.ones(len(boxes)) if weights is None else weights, len(boxes))
    p = None if prev is None else prev.as_array()
    return Box.from_array(_vote(arr, w, p, lam_c))


def fuse_basic(inp: EnsembleInput) -> Trajectory:
    """Uniform-weight vote per frame, no temporal term."""
    return fuse_trajectory(inp, 0.0)


def fuse_trajectory(inp: EnsembleInput, lam_c: float = DEFAULT_LAMBDA_C) -> Trajectory:
    """Uniform-weight vote with continuity to the previous fused box."""
    if lam_c < 0:
        raise ValueError("lam_c must be non-negative")
    stacked = inp.stacked
    w = np.ones(stacked.shape[1])
    out, prev = [], None
    for boxes in stacked:
        prev = _vote(boxes, w, prev, lam_c)
        out.append(Box.from_array(prev))
    return Trajectory(out, "fused")


def reliability_step(boxes: np.ndarray, r: np.ndarray, alpha: float, iterations: int):
    """One frame of the reliability loop; returns (fused box, new weights)."""
    for _ in range(iterations):
        fused = _vote(boxes, r, None, 0.0)
        agreement = overlap_many(Box.from_array(fused), boxes)
        blended = alpha * r + (1.0 - alpha) * agreement
        total = blended.sum()
        if total > 0:  # otherwise nobody agrees with anything; keep the old weights
            r = blended / total
    return fused, r


def fuse_reliability(inp: EnsembleInput, alpha: float = DEFAULT_ALPHA,
                     iterations: int = DEFAULT_ITERATIONS, weights_out: list | None = None) -> Trajectory:
    """Vote with per-tracker reliabilities inferred on the fly.

    Per frame, ``iterations`` rounds alternate a weighted vote and the update
    r <- normalize(alpha * r + (1 - alpha) * overlap(box_i, fused)). The box of
    the last round is emitted. Pass a list as ``weights_out`` to receive the
    weights after every frame.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    stacked = inp.stacked
    r = np.full(stacked.shape[1], 1.0 / stacked.shape[1])
    out = []
    for boxes in stacked:
        fused, r = reliability_step(boxes, r, alpha, iterations)
        out.append(Box.from_array(fused))
        if weights_out is not None:
            weights_out.append(r.copy())
    return Trajectory(out, "fused")


FUSERS = ("basic", "trajectory", "reliability")


def fuse(inp: EnsembleInput, method: str, lam_c: float = DEFAULT_LAMBDA_C,
         alpha: float = DEFAULT_ALPHA, iterations: int = DEFAULT_ITERATIONS) -> Trajectory:
    if method == "basic":
        return fuse_basic(inp)
    if method == "trajectory":
        return fuse_trajectory(inp, lam_c)
    if method == "reliability":
        return fuse_reliability(inp, alpha, iterations)
    raise ValueError(f"unknown fusion method {method!r}; expected one of {FUSERS}")


# ---------------------------------------------------------------- corruption suite

@dataclass
class CorruptionSpec:
    """Six noisy copies of a ground-truth path, each with drift-failure episodes.

    With ``diverse`` the trackers fail independently; otherwise they share one
    failure schedule and most of their jitter (near-duplicates). Each tracker's
    marginal behaviour is the same in both settings.
    """

    n_trackers: int = 6
    length: int = 200
    frame_w: int = 320
    frame_h: int = 240
    target: float = 40.0
    jitter: float = 2.0
    scale_jitter: float = 0.05
    episode_rate: float = 0.02  # failure onsets per frame while healthy
    episode_length: tuple[int, int] = (10, 30)
    drift_speed: float = 4.0
    private_jitter: float = 0.5  # independent part of near-duplicate jitter
    diverse: bool = True


def _gt_path(spec: CorruptionSpec, rng) -> np.ndarray:
    t = spec.target
    x = np.empty(spec.length)
    y = np.empty(spec.length)
    x[0], y[0] = (spec.frame_w - t) / 2, (spec.frame_h - t) / 2
    for i in range(1, spec.length):
        x[i] = np.clip(x[i - 1] + rng.normal(0, 2.0), 0, spec.frame_w - t)
        y[i] = np.clip(y[i - 1] + rng.normal(0, 2.0), 0, spec.frame_h - t)
    return np.stack([x, y, np.full_like(x, t), np.full_like(x, t)], axis=1)


def _failure_offsets(spec: CorruptionSpec, rng) -> np.ndarray:
    """(T, 2) centre offsets: zero while healthy, a linear drift during an episode."""
    off = np.zeros((spec.length, 2))
    t = 1
    while t < spec.length:
        if rng.random() < spec.episode_rate:
            n = int(rng.integers(spec.episode_length[0], spec.episode_length[1] + 1))
            phi = rng.random() * 2 * np.pi
            steps = np.arange(1, min(n, spec.length - t) + 1)
            off[t:t + len(steps)] = spec.drift_speed * steps[:, None] * [np.cos(phi), np.sin(phi)]
            t += len(steps)
        t += 1
    return off


def _jitter(spec: CorruptionSpec, rng, scale: float) -> np.ndarray:
    return np.concatenate([rng.normal(0, spec.jitter * scale, (spec.length, 2)),
                           rng.normal(0, spec.scale_jitter * scale, (spec.length, 1))], axis=1)


def corruption_suite(spec: CorruptionSpec, seed: int) -> tuple[Trajectory, EnsembleInput]:
    """Ground truth plus ``n_trackers`` corrupted trajectories."""
    rng = np.random.default_rng(seed)
    gt = _gt_path(spec, rng)
    shared_fail = _failure_offsets(spec, rng)
    priv = spec.private_jitter / spec.jitter
    shared_jit = _jitter(spec, rng, np.sqrt(max(0.0, 1.0 - priv ** 2)))
    trajectories = []
    for _ in range(spec.n_trackers):
        if spec.diverse:
            fail, jit = _failure_offsets(spec, rng), _jitter(spec, rng, 1.0)
        else:
            fail, jit = shared_fail, shared_jit + _jitter(spec, rng, priv)
        s = np.exp(jit[:, 2])
        w, h = gt[:, 2] * s, gt[:, 3] * s
        cx = gt[:, 0] + gt[:, 2] / 2 + fail[:, 0] + jit[:, 0]
        cy = gt[:, 1] + gt[:, 3] / 2 + fail[:, 1] + jit[:, 1]
        boxes = np.stack([cx - w / 2, cy - h / 2, w, h], axis=1)
        trajectories.append(Trajectory.from_array(boxes))
    names = [f"tracker{i}" for i in range(spec.n_trackers)]
    return Trajectory.from_array(gt, "groundtruth"), EnsembleInput(trajectories, names)
