"""One-pass evaluation curves: success (overlap) and precision (centre error)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import EmptySelection, LengthMismatch
from ..geometry import Trajectory, pairwise_center_distance, pairwise_overlap

OVERLAP_THRESHOLDS = np.linspace(0.0, 1.0, 101)
PIXEL_THRESHOLDS = np.arange(0, 51, dtype=np.float64)


@dataclass
class EvalCurves:
    success: np.ndarray
    precision: np.ndarray

    @property
    def auc(self) -> float:
        return float(np.mean(self.success))

    @property
    def precision_at_20(self) -> float:
        return float(self.precision[20])

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "precision_at_20": self.precision_at_20,
            "success": self.success.tolist(),
            "precision": self.precision.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalCurves":
        return cls(np.asarray(d["success"], dtype=np.float64),
                   np.asarray(d["precision"], dtype=np.float64))


def frame_errors(pred: Trajectory, gt: Trajectory):
    """Per-frame (overlap, centre distance)."""
    if len(pred) != len(gt):
        raise LengthMismatch(f"prediction has {len(pred)} frames, ground truth {len(gt)}")
    if len(gt) == 0:
        raise LengthMismatch("cannot evaluate an empty trajectory")
    p, g = pred.as_array(), gt.as_array()
    return pairwise_overlap(p, g), pairwise_center_distance(p, g)


def curves_from_errors(overlaps, distances) -> EvalCurves:
    overlaps = np.asarray(overlaps)[None, :]
    distances = np.asarray(distances)[None, :]
    # strict "overlap > threshold", except that an exact match also passes at threshold 1,
    # so a perfect trajectory scores an AUC of exactly 1
    success = ((overlaps > OVERLAP_THRESHOLDS[:, None]) | (overlaps >= 1.0)).mean(axis=1)
    precision = (distances <= PIXEL_THRESHOLDS[:, None]).mean(axis=1)
    return EvalCurves(success, precision)


def evaluate(pred: Trajectory, gt: Trajectory) -> EvalCurves:
    return curves_from_errors(*frame_errors(pred, gt))


def aggregate(results: Sequence[EvalCurves], attributes: Sequence[Iterable[str]] | None = None,
              tag: str | None = None) -> EvalCurves:
    """Per-sequence-weighted mean of curves, optionally restricted to sequences holding ``tag``."""
    chosen = list(results)
    if tag is not None:
        if attributes is None:
            raise EmptySelection(f"no attribute sets given to filter on {tag!r}")
        chosen = [r for r, attrs in zip(results, attributes) if tag in set(attrs)]
    if not chosen:
        raise EmptySelection(f"no sequence matches filter {tag!r}" if tag else "no results to aggregate")
    return EvalCurves(np.mean([r.success for r in chosen], axis=0),
                      np.mean([r.precision for r in chosen], axis=0))
