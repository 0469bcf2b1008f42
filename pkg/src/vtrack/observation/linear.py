"""Binary linear observation models: logistic regression, ridge regression, online SVM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import DimensionMismatch, SolverFailure
from .base import Reader, TrainingBatch, check_dim, check_finite, pack


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass
class LinearModel:
    """Weights shared by the logistic and hinge-loss models."""

    w: np.ndarray | None = None
    b: float = 0.0
    lam: float = 1e-2
    eta0: float = 0.1
    t: int = 0

    @property
    def dim(self) -> int | None:
        return None if self.w is None else len(self.w)

    def _ensure(self, d: int):
        if self.w is None:
            self.w = np.zeros(d)
        elif len(self.w) != d:
            raise DimensionMismatch(f"model has dimension {len(self.w)}, input has {d}")

    def margin(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        check_dim(self.dim, X)
        if self.w is None:
            return np.full(X.shape[:-1], self.b)
        return X @ self.w + self.b

    def copy(self):
        return type(self)(None if self.w is None else self.w.copy(), self.b, self.lam, self.eta0, self.t)

    _MAGIC = b"VTLM"

    def to_bytes(self) -> bytes:
        w = np.zeros(0) if self.w is None else self.w
        return pack(self._MAGIC, [len(w), self.t],
                    [w, np.array([self.b, self.lam, self.eta0])])

    @classmethod
    def from_bytes(cls, data: bytes):
        r = Reader(data, cls._MAGIC)
        d, t = r.ints(2)
        w = r.floats(d)
        b, lam, eta0 = r.floats(3)
        return cls(w if d else None, float(b), float(lam), float(eta0), int(t))


# ---------------------------------------------------------------- logistic regression

def lr_loss(w, b, X, y, lam) -> float:
    """Mean cross-entropy plus (lam/2)||w||^2."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * w @ w)


def lr_gradient(w, b, X, y, lam):
    r = sigmoid(X @ w + b) - y
    return X.T @ r / len(y) + lam * w, float(r.mean())


class LogisticRegression(LinearModel):
    kind = "LR"
    _MAGIC = b"VTLR"

    def __init__(self, w=None, b=0.0, lam=1e-2, eta0=0.1, t=0, batch_size: int | None = None):
        super().__init__(w, b, lam, eta0, t)
        self.batch_size = batch_size

    def copy(self):
        m = super().copy()
        m.batch_size = self.batch_size
        return m

    def score(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def to_bytes(self) -> bytes:
        # batch size 0 encodes full-batch steps
        return super().to_bytes() + pack(b"", [self.batch_size or 0], [])

    @classmethod
    def from_bytes(cls, data: bytes):
        m = super().from_bytes(data[:-8])
        (size,) = Reader(data[-8:], b"").ints(1)
        m.batch_size = size or None
        return m

    def fit(self, batch: TrainingBatch, epochs: int, rng=None) -> "LogisticRegression":
        """Mini-batch gradient descent with eta_t = eta0 / (1 + lam t), t counting steps.

        Examples are shuffled each epoch when ``rng`` is given; ``batch_size``
        of None uses the whole batch for every step.
        """
        X, y = batch.xy(neg_label=0.0)
        self._ensure(X.shape[1])
        w, b = self.w.copy(), self.b
        n = len(y)
        size = n if self.batch_size is None else min(self.batch_size, n)
        for _ in range(epochs):
            order = rng.permutation(n) if rng is not None else np.arange(n)
            for start in range(0, n, size):
                idx = order[start:start + size]
                gw, gb = lr_gradient(w, b, X[idx], y[idx], self.lam)
                eta = self.eta0 / (1.0 + self.lam * self.t)
                w -= eta * gw
                b -= eta * gb
                self.t += 1
        check_finite(w, b)
        self.w, self.b = w, b
        return self


def lr_score(m: LinearModel, x) -> float | np.ndarray:
    return sigmoid(m.margin(x))


def lr_update(m: LogisticRegression, batch: TrainingBatch, epochs: int) -> LogisticRegression:
    return m.copy().fit(batch, epochs)


# ---------------------------------------------------------------- online SVM

def hinge_objective(w, b, X, y, lam) -> float:
    return float(0.5 * lam * w @ w + np.mean(np.maximum(0.0, 1.0 - y * (X @ w + b))))


class OnlineSVM(LinearModel):
    """Primal hinge-loss SVM trained by per-example subgradient steps, eta = 1/(lam t)."""

    kind = "SVM"
    _MAGIC = b"VTSV"

    def score(self, X) -> np.ndarray:
        return self.margin(X)

    def fit(self, batch: TrainingBatch, epochs: int = 1, rng: np.random.Generator | None = None):
        X, y = batch.xy(neg_label=-1.0)
        self._ensure(X.shape[1])
        w, b, lam = self.w.copy(), self.b, self.lam
        for _ in range(epochs):
            order = rng.permutation(len(y)) if rng is not None else range(len(y))
            for i in order:
                self.t += 1
                eta = 1.0 / (lam * self.t)
                xi, yi = X[i], y[i]
                violated = yi * (xi @ w + b) < 1.0
                w *= 1.0 - eta * lam
                if violated:
                    w += eta * yi * xi
                    b += eta * yi
        check_finite(w, b)
        self.w, self.b = w, b
        return self


def svm_score(m: LinearModel, x):
    return m.margin(x)


def svm_update(m: OnlineSVM, batch: TrainingBatch, epochs: int = 1, rng=None) -> OnlineSVM:
    return m.copy().fit(batch, epochs, rng)


# ---------------------------------------------------------------- ridge regression

@dataclass
class RidgeStats:
    """Running sufficient statistics A = sum x x^T and c = sum y x.

    With ``fit_intercept`` each x is augmented by a trailing constant 1 so the
    bias is the last solved coefficient (and is regularised like the rest).
    """

    A: np.ndarray | None = None
    c: np.ndarray | None = None
    n: int = 0
    lam: float = 1.0
    fit_intercept: bool = True

    def augment(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.fit_intercept:
            X = np.hstack([X, np.ones((len(X), 1))])
        return X

    @property
    def dim(self) -> int | None:
        if self.A is None:
            return None
        return len(self.A) - (1 if self.fit_intercept else 0)


def ridge_update(stats: RidgeStats, batch: TrainingBatch) -> RidgeStats:
    X, y = batch.xy(neg_label=0.0)
    check_dim(stats.dim, X)
    Xa = stats.augment(X)
    A = Xa.T @ Xa
    c = Xa.T @ y
    if stats.A is not None:
        A = stats.A + A
        c = stats.c + c
    return RidgeStats(A, c, stats.n + len(y), stats.lam, stats.fit_intercept)


def ridge_solve(stats: RidgeStats) -> LinearModel:
    if stats.A is None:
        raise SolverFailure("no statistics accumulated yet")
    M = stats.A + stats.lam * np.eye(len(stats.A))
    try:
        coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(M, check_finite=True), stats.c)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverFailure(f"A + lam I is not numerically positive definite: {exc}") from exc
    if stats.fit_intercept:
        return LinearModel(coef[:-1].copy(), float(coef[-1]), stats.lam)
    return LinearModel(coef, 0.0, stats.lam)


class RidgeRegression:
    kind = "Ridge"

    def __init__(self, lam: float = 1.0, fit_intercept: bool = True):
        self.stats = RidgeStats(lam=lam, fit_intercept=fit_intercept)
        self.model = LinearModel(lam=lam)

    @property
    def dim(self):
        return self.stats.dim

    @property
    def w(self):
        return self.model.w

    @property
    def b(self):
        return self.model.b

    def score(self, X) -> np.ndarray:
        return self.model.margin(X)

    def fit(self, batch: TrainingBatch, epochs: int = 1, rng=None) -> "RidgeRegression":
        self.stats = ridge_update(self.stats, batch)
        self.model = ridge_solve(self.stats)
        return self

    _MAGIC = b"VTRR"

    def to_bytes(self) -> bytes:
        s = self.stats
        k = 0 if s.A is None else len(s.A)
        payload = [np.array([s.lam])]
        if k:
            payload += [s.A, s.c]
        return pack(self._MAGIC, [k, s.n, int(s.fit_intercept)], payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RidgeRegression":
        r = Reader(data, cls._MAGIC)
        k, n, fi = r.ints(3)
        (lam,) = r.floats(1)
        m = cls(float(lam), bool(fi))
        if k:
            m.stats = RidgeStats(r.floats(k * k).reshape(k, k), r.floats(k), int(n), float(lam), bool(fi))
            m.model = ridge_solve(m.stats)
        return m


def ridge_score(m: LinearModel, x):
    return m.margin(x)
