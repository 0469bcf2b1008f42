"""Bounding boxes, trajectories and the two per-frame error measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidBox, NonPositiveScale, OutOfFrame


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: top-left corner plus width/height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidBox(f"non-finite {name} in {self!r}")
        if not (self.w > 0 and self.h > 0):
            raise InvalidBox(f"box needs w > 0 and h > 0, got {self!r}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        return cls(cx - w / 2, cy - h / 2, w, h)

    @classmethod
    def from_array(cls, a) -> "Box":
        x, y, w, h = (float(v) for v in a)
        return cls(x, y, w, h)

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2, self.y + self.h / 2)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)

    def __iter__(self):
        return iter((self.x, self.y, self.w, self.h))


@dataclass
class Trajectory:
    """Per-frame boxes for one sequence."""

    boxes: list[Box]
    sequence_id: str = ""

    def __len__(self) -> int:
        return len(self.boxes)

    def __getitem__(self, i):
        return self.boxes[i]

    def __iter__(self):
        return iter(self.boxes)

    def as_array(self) -> np.ndarray:
        if not self.boxes:
            return np.zeros((0, 4))
        return np.array([b.as_array() for b in self.boxes])

    @classmethod
    def from_array(cls, arr, sequence_id: str = "") -> "Trajectory":
        return cls([Box.from_array(r) for r in np.asarray(arr, dtype=np.float64)], sequence_id)

    def scaled(self, rho: float) -> "Trajectory":
        return Trajectory([scale_box(b, rho) for b in self.boxes], self.sequence_id)


def _intersection(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def overlap(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes (continuous area)."""
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def center_distance(a: Box, b: Box) -> float:
    (ax, ay), (bx, by) = a.center(), b.center()
    return math.hypot(ax - bx, ay - by)


def clip_to_frame(b: Box, frame_w: int, frame_h: int) -> Box:
    """Intersect ``b`` with the frame rectangle [0, frame_w] x [0, frame_h]."""
    if frame_w < 1 or frame_h < 1:
        raise ValueError(f"frame size must be positive, got {frame_w}x{frame_h}")
    if b.x >= 0 and b.y >= 0 and b.x2 <= frame_w and b.y2 <= frame_h:
        return b
    x1, y1 = max(b.x, 0.0), max(b.y, 0.0)
    x2, y2 = min(b.x2, float(frame_w)), min(b.y2, float(frame_h))
    if x2 <= x1 or y2 <= y1:
        raise OutOfFrame(f"{b!r} does not intersect the {frame_w}x{frame_h} frame")
    return Box(x1, y1, x2 - x1, y2 - y1)


def scale_box(b: Box, rho: float) -> Box:
    if not rho > 0:
        raise NonPositiveScale(f"scale factor must be positive, got {rho}")
    return Box(b.x * rho, b.y * rho, b.w * rho, b.h * rho)


# Vectorised variants over (N, 4) arrays of [x, y, w, h]; used in inner loops.

def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    arr = np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def overlap_many(ref: Box, boxes: np.ndarray) -> np.ndarray:
    """IoU of ``ref`` against every row of ``boxes``."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(ref.x2, boxes[:, 0] + boxes[:, 2]) - np.maximum(ref.x, boxes[:, 0])
    ih = np.minimum(ref.y2, boxes[:, 1] + boxes[:, 3]) - np.maximum(ref.y, boxes[:, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = ref.area + boxes[:, 2] * boxes[:, 3] - inter
    return np.minimum(1.0, inter / union)


def pairwise_overlap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise IoU between two equally shaped (N, 4) arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    return np.minimum(1.0, inter / union)


def cross_overlap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(M, N) IoU matrix between the rows of ``a`` (M, 4) and ``b`` (N, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)[:, None, :]
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)[None, :, :]
    iw = np.minimum(a[..., 0] + a[..., 2], b[..., 0] + b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 1] + a[..., 3], b[..., 1] + b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    return np.minimum(1.0, inter / union)


def pairwise_center_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ca = a[:, :2] + a[:, 2:] / 2
    cb = b[:, :2] + b[:, 2:] / 2
    return np.hypot(*(ca - cb).T)


def clip_boxes(boxes: np.ndarray, frame_w: int, frame_h: int) -> np.ndarray:
    """Clip every row to the frame. Rows disjoint from the frame raise OutOfFrame."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    x1 = np.maximum(boxes[:, 0], 0.0)
    y1 = np.maximum(boxes[:, 1], 0.0)
    x2 = np.minimum(boxes[:, 0] + boxes[:, 2], float(frame_w))
    y2 = np.minimum(boxes[:, 1] + boxes[:, 3], float(frame_h))
    if np.any(x2 <= x1) or np.any(y2 <= y1):
        raise OutOfFrame("candidate box does not intersect the frame")
    return np.stack([x1, y1, x2 - x1, y2 - y1], axis=1)


def mean_overlap(pred: Sequence[Box], gt: Sequence[Box]) -> float:
    return float(np.mean(pairwise_overlap(boxes_to_array(pred), boxes_to_array(gt))))
