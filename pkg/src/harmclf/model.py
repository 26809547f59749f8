"""Linear classifiers over a feature bank.

Cosine-kind classifiers score with the real series b + sum w phi*(x).
Holomorphic-kind classifiers form the complex series h_j(x) and use the real
part of its complex logarithm, log|h_j(x)|, as the logit, so softmax
probabilities are exactly magnitude-proportional: |h_j| / sum_k |h_k|.

An optional zero class appends a constant 0 logit with no parameters; it wins
the argmax precisely where every class magnitude is below 1.

Inputs are pixel-space vectors; forward folds them into [0,1] by reflection
and rescales to [0, pi] internally, which makes cosine-kind logits exactly
invariant across reflected pre-images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._reflect import reflect_project
from .features import FeatureBank, FeatureKind

LOGMAG_FLOOR = -30.0


class ModelError(ValueError):
    pass


@dataclass
class Classifier:
    bank: FeatureBank
    weights: np.ndarray  # (num_labels, K); float64 or complex128
    bias: np.ndarray     # (num_labels,)
    num_labels: int
    has_zero_class: bool = False

    @property
    def kind(self) -> FeatureKind:
        return self.bank.kind

    @property
    def num_outputs(self) -> int:
        return self.num_labels + (1 if self.has_zero_class else 0)

    def copy(self) -> "Classifier":
        return replace(self, weights=self.weights.copy(), bias=self.bias.copy())


def init_classifier(bank: FeatureBank, num_labels: int, seed: int,
                    init_scale: float | None = None) -> Classifier:
    """Uniform [-s, s] coefficients (independent real/imag parts for the
    holomorphic kind), zero biases; s defaults to 1/sqrt(K)."""
    if num_labels < 1:
        raise ModelError("need at least one label")
    K = len(bank)
    s = 1.0 / math.sqrt(K) if init_scale is None else float(init_scale)
    rng = np.random.default_rng(seed)
    if bank.kind is FeatureKind.HOLOMORPHIC:
        w = rng.uniform(-s, s, (num_labels, K)) + 1j * rng.uniform(-s, s, (num_labels, K))
        b = np.zeros(num_labels, dtype=np.complex128)
    else:
        w = rng.uniform(-s, s, (num_labels, K))
        b = np.zeros(num_labels, dtype=np.float64)
    return Classifier(bank=bank, weights=w, bias=b, num_labels=num_labels)


def attach_zero_class(c: Classifier) -> Classifier:
    """Add the parameterless constant-zero logit as an extra output label."""
    if c.has_zero_class:
        raise ModelError("zero class already attached")
    return replace(c, has_zero_class=True)


def _domain_points(c: Classifier, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != c.bank.n:
        raise ModelError("input dimension does not match bank")
    return math.pi * reflect_project(X)


def _series(c: Classifier, X):
    """(design matrix, complex/real class scores) at pixel-space inputs."""
    Xdom = _domain_points(c, X)
    phi = c.bank.design(Xdom)
    scores = phi @ c.weights.T + c.bias
    return phi, scores


_EVAL_CHUNK = 512  # rows per design-matrix block during inference


def forward(c: Classifier, X) -> np.ndarray:
    """Logits at pixel-space input(s); (N, num_outputs), zero class last."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] <= _EVAL_CHUNK:
        _, scores = _series(c, X)
        return _logits_from_scores(c, scores)
    blocks = [
        _logits_from_scores(c, _series(c, X[lo:lo + _EVAL_CHUNK])[1])
        for lo in range(0, X.shape[0], _EVAL_CHUNK)
    ]
    return np.concatenate(blocks, axis=0)


def _logits_from_scores(c: Classifier, scores: np.ndarray) -> np.ndarray:
    if c.kind is FeatureKind.HOLOMORPHIC:
        with np.errstate(divide="ignore"):
            logits = np.log(np.abs(scores))
        logits = np.maximum(logits, LOGMAG_FLOOR)
    else:
        logits = scores
    if c.has_zero_class:
        logits = np.concatenate(
            [logits, np.zeros((logits.shape[0], 1))], axis=1)
    return logits


def probabilities(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax; for log-magnitude logits this is |h_j| / sum|h_k|."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict(c: Classifier, X) -> np.ndarray:
    """Argmax labels; ties break toward the lowest index, so an exact tie at
    the zero-class boundary goes to the true class."""
    return np.argmax(forward(c, X), axis=1)


def accuracy(c: Classifier, X, y) -> float:
    return float(np.mean(predict(c, X) == np.asarray(y)))


def cross_entropy(c: Classifier, x, label: int) -> float:
    """-log P(label | x); the label is always a true class."""
    if not 0 <= label < c.num_labels:
        raise ModelError("label out of range (zero class has no samples)")
    p = probabilities(forward(c, x))[0, label]
    return float(-np.log(p))


def batch_cross_entropy(c: Classifier, X, y) -> float:
    logits = forward(c, X)
    return _mean_ce(logits, np.asarray(y, dtype=np.int64))


def _mean_ce(logits: np.ndarray, y: np.ndarray) -> float:
    p = probabilities(logits)
    rows = np.arange(len(y))
    return float(np.mean(-np.log(p[rows, y])))


def gradient(c: Classifier, X, y):
    """Mean cross-entropy gradient over a batch: (dW, db), complex parameters
    packed as d/dRe + i d/dIm.  Matches central finite differences."""
    _, dW, db = loss_and_gradient(c, X, y)
    return dW, db


def loss_and_gradient(c: Classifier, X, y):
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ModelError("empty batch")
    if np.any(y < 0) or np.any(y >= c.num_labels):
        raise ModelError("label out of range (zero class has no samples)")
    phi, scores = _series(c, X)
    logits = _logits_from_scores(c, scores)
    N = phi.shape[0]
    P = probabilities(logits)
    D = P[:, :c.num_labels].copy()
    D[np.arange(N), y] -= 1.0
    if c.kind is FeatureKind.HOLOMORPHIC:
        mag2 = np.abs(scores) ** 2
        live = np.abs(scores) > math.exp(LOGMAG_FLOOR)  # clamp zone gets no grad
        coef = np.where(live, D * scores / np.maximum(mag2, 1e-300), 0.0)
        dW = coef.T @ np.conj(phi) / N
        db = coef.mean(axis=0)
    else:
        dW = D.T @ phi / N
        db = D.mean(axis=0)
    return _mean_ce(logits, y), dW, db


def squared_loss_and_gradient(c: Classifier, X, t):
    """Mean squared error of the raw scores against real targets (regression
    path; cosine kind only)."""
    if c.kind is not FeatureKind.COSINE:
        raise ModelError("squared loss applies to the cosine kind")
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    if t.shape[0] == 1 and c.num_labels == 1:
        t = t.reshape(-1, 1)
    phi, scores = _series(c, X)
    r = scores - t
    N = phi.shape[0]
    loss = float(np.mean(np.sum(r * r, axis=1)))
    dW = 2.0 * r.T @ phi / N
    db = 2.0 * r.mean(axis=0)
    return loss, dW, db


def predict_value(c: Classifier, X) -> np.ndarray:
    """Raw scores for regression use."""
    _, scores = _series(c, X)
    return scores


def input_gradient(c: Classifier, X, y, aware_extra: bool = True) -> np.ndarray:
    """d(mean-free per-sample CE)/d(pixel x): one gradient row per sample.

    `aware_extra=False` drops the zero-class logit from the softmax, modeling
    an attacker unaware of the extra label.
    """
    y = np.asarray(y, dtype=np.int64)
    Xdom = _domain_points(c, X)
    phi = c.bank.design(Xdom)
    scores = phi @ c.weights.T + c.bias
    logits = _logits_from_scores(c, scores)
    if not aware_extra and c.has_zero_class:
        logits = logits[:, :c.num_labels]
    N = phi.shape[0]
    P = probabilities(logits)
    D = P[:, :c.num_labels].copy()
    D[np.arange(N), y] -= 1.0
    if c.kind is FeatureKind.HOLOMORPHIC:
        mag2 = np.abs(scores) ** 2
        live = np.abs(scores) > math.exp(LOGMAG_FLOOR)
        q = np.where(live, D * np.conj(scores) / np.maximum(mag2, 1e-300), 0.0)
        grad_dom = c.bank.holo_grad_scatter(q @ c.weights, phi)
    else:
        coeff = (D @ c.weights) * (c.bank.amps / c.bank.scales)
        grad_dom = c.bank.input_grad(Xdom, coeff)
    return math.pi * grad_dom


def dirichlet_energy(c: Classifier) -> float:
    """sum over classes and features of |w|^2; biases excluded.  Equals the
    domain integral of the squared gradient norm when the bank is whitened."""
    return float(np.sum(np.abs(c.weights) ** 2))


# ---------------------------------------------------------------------------
# portable text checkpoints

def save_checkpoint(c: Classifier, path) -> None:
    """Header `kind num_labels K n has_zero_class`, then one decimal line per
    coefficient (two columns for complex), weights row-major then biases."""
    complex_kind = c.kind is FeatureKind.HOLOMORPHIC
    lines = [f"{c.kind.value} {c.num_labels} {len(c.bank)} {c.bank.n} "
             f"{1 if c.has_zero_class else 0}"]

    def fmt(v):
        if complex_kind:
            return f"{float(v.real)!r} {float(v.imag)!r}"
        return repr(float(v))

    for j in range(c.num_labels):
        lines.extend(fmt(v) for v in c.weights[j])
    lines.extend(fmt(v) for v in c.bias)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path, bank: FeatureBank) -> Classifier:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    kind_s, m_s, k_s, n_s, z_s = lines[0].split()
    kind = FeatureKind(kind_s)
    m, K, n = int(m_s), int(k_s), int(n_s)
    if kind is not bank.kind or K != len(bank) or n != bank.n:
        raise ModelError("checkpoint does not match the feature bank")
    complex_kind = kind is FeatureKind.HOLOMORPHIC

    def parse(ln):
        parts = ln.split()
        if complex_kind:
            return complex(float(parts[0]), float(parts[1]))
        return float(parts[0])

    body = [parse(ln) for ln in lines[1:]]
    if len(body) != m * K + m:
        raise ModelError("checkpoint truncated")
    dtype = np.complex128 if complex_kind else np.float64
    w = np.array(body[:m * K], dtype=dtype).reshape(m, K)
    b = np.array(body[m * K:], dtype=dtype)
    return Classifier(bank=bank, weights=w, bias=b, num_labels=m,
                      has_zero_class=z_s == "1")
