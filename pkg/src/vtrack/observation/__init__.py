"""Discriminative observation models scoring candidate features."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .base import ObservationKind, TrainingBatch
from .linear import (LinearModel, LogisticRegression, OnlineSVM, RidgeRegression, RidgeStats,
                     hinge_objective, lr_gradient, lr_loss, lr_score, lr_update, ridge_score,
                     ridge_solve, ridge_update, sigmoid, svm_score, svm_update)
from .sosvm import StructuredSVM, sosvm_score, sosvm_update, structured_loss

__all__ = [
    "ObservationConfig", "ObservationKind", "TrainingBatch", "LinearModel", "LogisticRegression",
    "OnlineSVM", "RidgeRegression", "RidgeStats", "StructuredSVM", "make_model", "load_model",
    "hinge_objective", "lr_gradient", "lr_loss", "lr_score", "lr_update", "ridge_score",
    "ridge_solve", "ridge_update", "sigmoid", "svm_score", "svm_update", "sosvm_score",
    "sosvm_update", "structured_loss",
]


@dataclass
class ObservationConfig:
    lam: float = 1e-2
    ridge_lam: float = 1.0
    eta0: float = 0.1
    init_epochs: int = 20
    update_epochs: int = 5
    batch_size: int | None = 10
    svm_C: float = 100.0
    svm_budget: int = 100
    svm_reprocess: int = 10

    def to_dict(self):
        return asdict(self)


def make_model(kind, cfg: ObservationConfig | None = None, rng: np.random.Generator | None = None):
    cfg = cfg or ObservationConfig()
    kind = ObservationKind(kind)
    if kind is ObservationKind.LR:
        return LogisticRegression(lam=cfg.lam, eta0=cfg.eta0, batch_size=cfg.batch_size)
    if kind is ObservationKind.SVM:
        return OnlineSVM(lam=cfg.lam, eta0=cfg.eta0)
    if kind is ObservationKind.RIDGE:
        return RidgeRegression(lam=cfg.ridge_lam)
    return StructuredSVM(cfg.svm_C, cfg.svm_budget, cfg.svm_reprocess, rng)


def load_model(data: bytes, rng=None):
    magic = data[:4]
    for cls in (LogisticRegression, OnlineSVM, LinearModel):
        if magic == cls._MAGIC:
            return cls.from_bytes(data)
    if magic == RidgeRegression._MAGIC:
        return RidgeRegression.from_bytes(data)
    if magic == StructuredSVM._MAGIC:
        return StructuredSVM.from_bytes(data, rng)
    raise ValueError(f"unknown checkpoint magic {magic!r}")
