"""L-infinity projected gradient descent with a reflective boundary.

Each step ascends the sign of the input gradient, clamps the deviation from
the original sample back into the attack ball, then folds every coordinate
into [0,1] by mirror reflection instead of clipping, so the iterate keeps its
momentum when it hits the boundary of the pixel cube.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as _model
from ._reflect import reflect_project

__all__ = ["AttackConfig", "reflect_project", "pgd", "pgd_batch"]

_ROW_CHUNK = 256


@dataclass
class AttackConfig:
    radius: float = 0.3
    steps: int = 40
    step_size: float = 0.01
    target: int | None = None
    seed: int = 0
    aware_extra: bool = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")


def pgd_batch(c: "_model.Classifier", X, y, cfg: AttackConfig) -> np.ndarray:
    """Attack a batch of pixel-space samples; rows are independent.

    Untargeted: ascend the true-label cross-entropy.  Targeted: descend the
    target-label cross-entropy.  `aware_extra` controls whether the attacked
    softmax includes the zero-class logit.
    """
    X0 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if np.any(X0 < 0.0) or np.any(X0 > 1.0):
        raise ValueError("attack inputs must lie in [0,1]^n")
    rng = np.random.default_rng(cfg.seed)
    r = cfg.radius
    start = reflect_project(X0 + rng.uniform(-r, r, X0.shape))
    if cfg.target is None:
        labels, sign = y, 1.0
    else:
        labels = np.full_like(y, cfg.target)
        sign = -1.0
    out = np.empty_like(X0)
    # rows are independent; chunking bounds the design-matrix memory
    for lo in range(0, X0.shape[0], _ROW_CHUNK):
        sl = slice(lo, lo + _ROW_CHUNK)
        Xa, Xb, lab = start[sl], X0[sl], labels[sl]
        for _ in range(cfg.steps):
            g = _model.input_gradient(c, Xa, lab, aware_extra=cfg.aware_extra)
            Xa = Xa + sign * cfg.step_size * np.sign(g)
            Xa = Xb + np.clip(Xa - Xb, -r, r)
            Xa = reflect_project(Xa)
        out[sl] = Xa
    return out


def pgd(c: "_model.Classifier", x, label, cfg: AttackConfig) -> np.ndarray:
    """Single-sample attack; returns a vector in [0,1]^n."""
    out = pgd_batch(c, np.atleast_2d(x), [label], cfg)
    return out[0]
