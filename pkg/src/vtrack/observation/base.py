from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, NonFiniteGradient


class ObservationKind(str, enum.Enum):
    LR = "LR"
    RIDGE = "Ridge"
    SVM = "SVM"
    SOSVM = "SOSVM"


@dataclass
class TrainingBatch:
    """Features of collected samples for one update.

    ``target`` is the feature of the current estimate itself; the structured
    SVM needs it as the ground-truth output, the binary models ignore it.
    Box arrays are (n, 4) x, y, w, h at the tracker's working resolution.
    """

    positives: np.ndarray
    negatives: np.ndarray
    pos_boxes: np.ndarray | None = None
    neg_boxes: np.ndarray | None = None
    target: np.ndarray | None = None
    target_box: np.ndarray | None = None

    def __post_init__(self):
        self.positives = np.atleast_2d(np.asarray(self.positives, dtype=np.float64))
        self.negatives = np.asarray(self.negatives, dtype=np.float64)
        if self.negatives.size == 0:
            self.negatives = self.negatives.reshape(0, self.positives.shape[1])
        self.negatives = np.atleast_2d(self.negatives)

    @property
    def dim(self) -> int:
        return self.positives.shape[1]

    def xy(self, neg_label: float = 0.0):
        """Stacked (X, y) with label 1 for positives, ``neg_label`` for negatives."""
        X = np.vstack([self.positives, self.negatives])
        y = np.concatenate([np.ones(len(self.positives)),
                            np.full(len(self.negatives), neg_label)])
        return X, y

    def __len__(self):
        return len(self.positives) + len(self.negatives)


def check_dim(expected: int | None, x: np.ndarray) -> None:
    got = x.shape[-1]
    if expected is not None and got != expected:
        raise DimensionMismatch(f"model has dimension {expected}, input has {got}")


def check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteGradient("update produced non-finite parameters")


# Flat checkpoint format: magic, then little-endian uint64 counts and float64 payloads.

def pack(magic: bytes, header: list[int], payload: list[np.ndarray]) -> bytes:
    parts = [magic, struct.pack(f"<{len(header)}Q", *header)]
    parts += [np.ascontiguousarray(p, dtype="<f8").tobytes() for p in payload]
    return b"".join(parts)


class Reader:
    def __init__(self, data: bytes, magic: bytes):
        if data[:len(magic)] != magic:
            raise ValueError(f"not a {magic!r} checkpoint")
        self.data = data
        self.pos = len(magic)

    def ints(self, n: int) -> tuple[int, ...]:
        out = struct.unpack_from(f"<{n}Q", self.data, self.pos)
        self.pos += 8 * n
        return out

    def floats(self, n: int) -> np.ndarray:
        out = np.frombuffer(self.data, dtype="<f8", count=n, offset=self.pos).astype(np.float64)
        self.pos += 8 * n
        return out
