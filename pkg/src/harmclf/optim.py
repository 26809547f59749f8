"""Mini-batch SGD with momentum and L2-coupled weight decay.

Decay on whitened coefficients is exactly gradient descent on half the
Dirichlet energy of the represented function, so the training objective is
the energy-regularized empirical loss.  Decay never touches the bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model as _model


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch} step {step}")
        self.epoch = epoch
        self.step = step
        self.loss = loss


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1.0
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainResult:
    classifier: "_model.Classifier"
    steps: list[tuple[int, int, float, float]]  # (epoch, step, loss, energy)
    epoch_mean_loss: list[float] = field(default_factory=list)


def sgd_step(weights, bias, vel_w, vel_b, grad_w, grad_b, cfg: TrainConfig):
    """One classical L2-coupled momentum update, in place.

    velocity = momentum * velocity + (grad + decay * w);  w -= lr * velocity.
    """
    vel_w *= cfg.momentum
    vel_w += grad_w + cfg.weight_decay * weights
    weights -= cfg.learning_rate * vel_w
    vel_b *= cfg.momentum
    vel_b += grad_b
    bias -= cfg.learning_rate * vel_b


def _train_loop(c, X, targets, cfg, grad_fn) -> TrainResult:
    c = c.copy()
    N = X.shape[0]
    if N == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    vel_w = np.zeros_like(c.weights)
    vel_b = np.zeros_like(c.bias)
    steps: list[tuple[int, int, float, float]] = []
    epoch_means: list[float] = []
    global_step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(N)
        losses = []
        for lo in range(0, N, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            loss, gw, gb = grad_fn(c, X[idx], targets[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, global_step, loss)
            sgd_step(c.weights, c.bias, vel_w, vel_b, gw, gb, cfg)
            steps.append((epoch, global_step, loss,
                          _model.dirichlet_energy(c)))
            losses.append(loss)
            global_step += 1
        epoch_means.append(float(np.mean(losses)))
    return TrainResult(classifier=c, steps=steps, epoch_mean_loss=epoch_means)


def train(c, data, cfg: TrainConfig) -> TrainResult:
    """Cross-entropy training on a labeled set; returns the trained classifier
    and the loss trace.  Shuffling is per-epoch from the seeded generator and
    the last partial batch is kept."""
    X = np.asarray(data.images, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    if np.any(y < 0) or np.any(y >= c.num_labels):
        raise ValueError("labels must lie in [0, num_labels)")
    return _train_loop(c, X, y, cfg, _model.loss_and_gradient)


def train_regression(c, X, t, cfg: TrainConfig) -> TrainResult:
    """Squared-error training of raw scores against real targets."""
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    return _train_loop(c, X, t, cfg, _model.squared_loss_and_gradient)
