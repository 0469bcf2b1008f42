"""Structured-output SVM with overlap loss, trained online by pairwise SMO steps.

Each *pattern* is one training frame: a set of candidate boxes with their
features, the first of which (index ``y_star``) is the true box.  Every pattern
carries dual coefficients beta over its candidates with

    sum_y beta(y) = 0,   beta(y_star) in [0, C],   beta(y != y_star) <= 0.

The kernel is linear, so the primal weight vector
``w = sum_p sum_y beta_p(y) x_p(y)`` is kept explicitly and scoring is a dot
product.  Per update: one ProcessNew step on the new pattern, then a number of
reprocessing rounds, each a ProcessOld step followed by an Optimize step on a
randomly chosen stored pattern.  The loss between outputs is
``1 - overlap(box_y, box_y_star)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, TrueBoxMissing
from ..geometry import Box, overlap_many
from .base import Reader, TrainingBatch, check_dim, check_finite, pack

ZERO_BETA = 1e-12


@dataclass
class Pattern:
    X: np.ndarray       # (m, d) candidate features
    boxes: np.ndarray   # (m, 4)
    loss: np.ndarray    # (m,) 1 - overlap with the true box
    beta: np.ndarray    # (m,)
    y_star: int = 0

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta != 0.0)


def structured_loss(boxes: np.ndarray, y_star: int) -> np.ndarray:
    true = Box.from_array(boxes[y_star])
    loss = 1.0 - overlap_many(true, boxes)
    loss[y_star] = 0.0
    return np.clip(loss, 0.0, 1.0)


class StructuredSVM:
    kind = "SOSVM"

    def __init__(self, C: float = 100.0, budget: int = 100, n_reprocess: int = 10,
                 rng: np.random.Generator | None = None):
        self.C = C
        self.budget = budget
        self.n_reprocess = n_reprocess
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.patterns: list[Pattern] = []
        self.w: np.ndarray | None = None
        self.trace: list[tuple[str, float]] | None = None

    @property
    def dim(self) -> int | None:
        return None if self.w is None else len(self.w)

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        check_dim(self.dim, X)
        if self.w is None:
            return np.zeros(X.shape[:-1])
        return X @ self.w

    def dual_objective(self) -> float:
        """-sum Delta * beta - 1/2 ||w||^2, with w recomputed from the coefficients."""
        if not self.patterns:
            return 0.0
        w = self.recompute_w()
        lin = sum(float(p.loss @ p.beta) for p in self.patterns)
        return -lin - 0.5 * float(w @ w)

    def recompute_w(self) -> np.ndarray:
        w = np.zeros(self.dim)
        for p in self.patterns:
            sv = p.support()
            w += p.beta[sv] @ p.X[sv]
        return w

    # ------------------------------------------------------------ SMO machinery

    def _grad(self, p: Pattern, idx=None) -> np.ndarray:
        if idx is None:
            return -p.loss - p.X @ self.w
        return -p.loss[idx] - p.X[idx] @ self.w

    def _upper(self, p: Pattern, y: int) -> float:
        return self.C if y == p.y_star else 0.0

    def _smo(self, p: Pattern, y_pos: int, y_neg: int) -> bool:
        if y_pos == y_neg:
            return False
        diff = p.X[y_pos] - p.X[y_neg]
        k = float(diff @ diff)
        if k <= 0.0:
            return False
        g_pos, g_neg = self._grad(p, [y_pos, y_neg])
        step = (g_pos - g_neg) / k
        step = min(max(step, 0.0), self._upper(p, y_pos) - p.beta[y_pos])
        if step <= 0.0:
            return False
        p.beta[y_pos] += step
        p.beta[y_neg] -= step
        self.w += step * diff
        for y in (y_pos, y_neg):
            if abs(p.beta[y]) < ZERO_BETA:
                p.beta[y] = 0.0
        return True

    def _y_pos_candidates(self, p: Pattern) -> np.ndarray:
        cand = np.union1d(p.support(), [p.y_star])
        upper = np.where(cand == p.y_star, self.C, 0.0)
        return cand[p.beta[cand] < upper]

    def _process_new(self, p: Pattern):
        y_neg = int(np.argmin(self._grad(p)))
        self._smo(p, p.y_star, y_neg)

    def _process_old(self, p: Pattern):
        cand = self._y_pos_candidates(p)
        if len(cand) == 0:
            return
        y_pos = int(cand[np.argmax(self._grad(p, cand))])
        y_neg = int(np.argmin(self._grad(p)))
        self._smo(p, y_pos, y_neg)

    def _optimize(self, p: Pattern):
        cand = self._y_pos_candidates(p)
        sv = p.support()
        if len(cand) == 0 or len(sv) == 0:
            return
        y_pos = int(cand[np.argmax(self._grad(p, cand))])
        y_neg = int(sv[np.argmin(self._grad(p, sv))])
        self._smo(p, y_pos, y_neg)

    def _prune(self):
        self.patterns = [p for p in self.patterns if p.beta[p.y_star] > 0.0]

    def _enforce_budget(self):
        while len(self.patterns) > self.budget:
            ww = float(self.w @ self.w)
            best, best_change = 0, np.inf
            for i, p in enumerate(self.patterns):
                sv = p.support()
                dw = p.beta[sv] @ p.X[sv]
                change = abs(float((self.w - dw) @ (self.w - dw)) - ww)
                if change < best_change:
                    best, best_change = i, change
            p = self.patterns.pop(best)
            sv = p.support()
            self.w -= p.beta[sv] @ p.X[sv]

    def _record(self, tag: str):
        if self.trace is not None:
            self.trace.append((tag, self.dual_objective()))

    # ------------------------------------------------------------ public API

    def add_pattern(self, X, boxes, y_star: int = 0, rounds: int = 1):
        X = np.asarray(X, dtype=np.float64)
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        if len(X) != len(boxes):
            raise DimensionMismatch(f"{len(X)} feature rows for {len(boxes)} boxes")
        if not 0 <= y_star < len(boxes):
            raise TrueBoxMissing(f"true-box index {y_star} not in the candidate set")
        check_dim(self.dim, X)
        if self.w is None:
            self.w = np.zeros(X.shape[1])
        p = Pattern(X, boxes, structured_loss(boxes, y_star), np.zeros(len(X)), y_star)
        self.patterns.append(p)
        self._process_new(p)
        self._prune()
        self._enforce_budget()
        self._record("new")
        for _ in range(rounds * self.n_reprocess):
            if not self.patterns:
                break
            q = self.patterns[int(self.rng.integers(len(self.patterns)))]
            self._process_old(q)
            self._record("old")
            q = self.patterns[int(self.rng.integers(len(self.patterns)))]
            self._optimize(q)
            self._record("optimize")
            self._prune()
        check_finite(self.w)
        return self

    def fit(self, batch: TrainingBatch, epochs: int = 1, rng=None) -> "StructuredSVM":
        X, boxes, y_star = structured_inputs(batch)
        return self.add_pattern(X, boxes, y_star, rounds=max(1, epochs))

    _MAGIC = b"VTSS"

    def to_bytes(self) -> bytes:
        d = self.dim or 0
        header = [d, len(self.patterns), self.budget, self.n_reprocess]
        payload = [np.array([self.C])]
        if self.w is not None:
            payload.append(self.w)
        for p in self.patterns:
            header += [len(p.X), p.y_star]
            payload += [p.X, p.boxes, p.beta]
        return pack(self._MAGIC, header, payload)

    @classmethod
    def from_bytes(cls, data: bytes, rng=None) -> "StructuredSVM":
        r = Reader(data, cls._MAGIC)
        d, n_pat, budget, n_rep = r.ints(4)
        shapes = [r.ints(2) for _ in range(n_pat)]
        (C,) = r.floats(1)
        m = cls(float(C), int(budget), int(n_rep), rng)
        if d:
            m.w = r.floats(d)
        for n, y_star in shapes:
            X = r.floats(n * d).reshape(n, d)
            boxes = r.floats(n * 4).reshape(n, 4)
            beta = r.floats(n)
            m.patterns.append(Pattern(X, boxes, structured_loss(boxes, y_star), beta, y_star))
        return m


def structured_inputs(batch: TrainingBatch):
    """Candidate matrix for one frame: true box first, then positives, then negatives."""
    if batch.target is None or batch.target_box is None:
        raise TrueBoxMissing("structured update needs the true box and its feature")
    X = np.vstack([np.atleast_2d(batch.target), batch.positives, batch.negatives])
    parts = [np.asarray(batch.target_box, dtype=np.float64).reshape(1, 4)]
    for b in (batch.pos_boxes, batch.neg_boxes):
        if b is not None and len(b):
            parts.append(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    boxes = np.vstack(parts)
    if len(boxes) != len(X):
        raise DimensionMismatch("structured batch needs one box per feature row")
    return X, boxes, 0


def sosvm_score(m: StructuredSVM, x):
    return m.score(x)


def sosvm_update(m: StructuredSVM, X, boxes, true_box: Box) -> StructuredSVM:
    """Add one frame; ``true_box`` must be among ``boxes``."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    match = np.flatnonzero(np.all(np.isclose(boxes, true_box.as_array(), rtol=0, atol=1e-9), axis=1))
    if len(match) == 0:
        raise TrueBoxMissing(f"{true_box!r} is not in the candidate set")
    return m.add_pattern(X, boxes, int(match[0]))
