"""Continuity-bias measurement and the one-sided Student-t test.

Each trial trains three real cosine-kind classifiers, one per region of the
adversarial/natural partition and one on the union, and records the gap
between the union model's test loss and the loss of the pair that switches
by region of origin.  The gap samples feed a one-sided t test of "the gap is
positive"; a regression control with random in-space continuous targets is
expected to fail the same test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import model as _model
from . import optim as _optim
from .data import LabeledSet
from .features import FeatureBank, FeatureKind


class StatsError(ValueError):
    pass


class DegenerateSampleError(StatsError):
    pass


# ---------------------------------------------------------------------------
# Student-t distribution via the regularized incomplete beta function

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise StatsError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise StatsError("x must lie in [0,1]")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                     + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(nu: int, t: float) -> float:
    if nu < 1:
        raise StatsError("degrees of freedom must be >= 1")
    if t == 0.0:
        return 0.5
    x = nu / (nu + t * t)
    tail = 0.5 * regularized_incomplete_beta(nu / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_inverse_cdf(nu: int, p: float) -> float:
    """Student-t quantile by bisection on the CDF; |error| < 1e-8."""
    if nu < 1:
        raise StatsError("degrees of freedom must be >= 1")
    if not 0.0 < p < 1.0:
        raise StatsError("p must lie in (0,1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_inverse_cdf(nu, 1.0 - p)
    lo, hi = 0.0, 1.0
    while t_cdf(nu, hi) < p:
        hi *= 2.0
        if hi > 1e300:
            raise StatsError("quantile bracket overflow")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(nu, mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def t_statistic(samples) -> float:
    """Sample mean over the unbiased standard deviation, times sqrt(n)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise StatsError("need at least two samples")
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise DegenerateSampleError("zero sample standard deviation")
    return float(np.mean(arr) / sd * math.sqrt(arr.size))


# ---------------------------------------------------------------------------
# bias samples and reports

@dataclass(frozen=True)
class BiasSample:
    epsilon: float


class Decision(str, Enum):
    ACCEPT_H1 = "accepted"
    REJECT_H1 = "rejected"


@dataclass
class BiasTestReport:
    samples: tuple[float, ...]
    mean: float
    sd: float
    T: float
    critical: float
    confidence: float
    decision: Decision
    loss_kind: str = "zero-one"

    @classmethod
    def from_samples(cls, samples, confidence: float = 0.01,
                     loss_kind: str = "zero-one") -> "BiasTestReport":
        arr = np.asarray([s.epsilon if isinstance(s, BiasSample) else float(s)
                          for s in samples], dtype=np.float64)
        if arr.size < 2:
            raise StatsError("need at least two trials")
        mean = float(np.mean(arr))
        sd = float(np.std(arr, ddof=1))
        if sd == 0.0:
            # tie guard: identical samples carry no evidence scale; only a
            # strictly positive mean can still accept
            T = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
        else:
            T = t_statistic(arr)
        critical = t_inverse_cdf(arr.size - 1, 1.0 - confidence)
        decision = Decision.ACCEPT_H1 if T > critical else Decision.REJECT_H1
        return cls(tuple(float(v) for v in arr), mean, sd, T, critical,
                   confidence, decision, loss_kind)


# ---------------------------------------------------------------------------
# switching classifiers and the continuity-bias trial

def _check_same_bank(a: "_model.Classifier", b: "_model.Classifier") -> None:
    if a.bank is not b.bank and (
            len(a.bank) != len(b.bank)
            or a.bank.n != b.bank.n
            or a.bank.kind is not b.bank.kind):
        raise StatsError("classifiers must share a feature bank")
    if a.num_labels != b.num_labels:
        raise StatsError("classifiers must share the label set")


def zero_one_loss(c: "_model.Classifier", s: LabeledSet) -> float:
    return float(np.mean(_model.predict(c, s.images) != s.labels))


def switching_loss(h: "_model.Classifier", f: "_model.Classifier",
                   test_nat: LabeledSet, test_adv: LabeledSet) -> float:
    """Mean 0-1 loss with natural-pool samples scored by h and
    adversarial-pool samples by f, routed by pool of origin."""
    _check_same_bank(h, f)
    n_nat, n_adv = len(test_nat), len(test_adv)
    if n_nat + n_adv == 0:
        raise StatsError("empty test pools")
    errs = 0.0
    if n_nat:
        errs += zero_one_loss(h, test_nat) * n_nat
    if n_adv:
        errs += zero_one_loss(f, test_adv) * n_adv
    return errs / (n_nat + n_adv)


def switching_mse(h, f, nat_X, nat_t, adv_X, adv_t) -> float:
    _check_same_bank(h, f)
    r_nat = _model.predict_value(h, nat_X)[:, 0] - nat_t
    r_adv = _model.predict_value(f, adv_X)[:, 0] - adv_t
    err = np.concatenate([r_nat, r_adv])
    return float(np.mean(err * err))


def random_bipartition(num_labels: int, rng: np.random.Generator) -> np.ndarray:
    """Balanced random split of the labels into two superclasses."""
    perm = rng.permutation(num_labels)
    out = np.zeros(num_labels, dtype=np.int64)
    out[perm[num_labels // 2:]] = 1
    return out


@dataclass
class HarmonicTarget:
    """Random continuous function in the span of a whitened cosine bank:
    coefficients ~ Normal(0, (1 + ||a||^2)^-2), zero bias."""

    bank: FeatureBank
    coeffs: np.ndarray

    @classmethod
    def draw(cls, bank: FeatureBank, seed: int) -> "HarmonicTarget":
        if bank.kind is not FeatureKind.COSINE:
            raise StatsError("random continuous targets use the cosine bank")
        rng = np.random.default_rng(seed)
        std = 1.0 / (1.0 + bank.scales ** 2)
        return cls(bank=bank, coeffs=rng.normal(0.0, 1.0, len(bank)) * std)

    def __call__(self, X_pixels) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X_pixels, dtype=np.float64))
        phi = self.bank.design(math.pi * X)
        return phi @ self.coeffs

    def energy(self) -> float:
        return float(np.sum(self.coeffs ** 2))


def random_harmonic_target(bank: FeatureBank, seed: int) -> HarmonicTarget:
    return HarmonicTarget.draw(bank, seed)


@dataclass
class TrialPools:
    """Per-trial training and test pools, already subsampled and tagged."""

    train_nat: LabeledSet
    train_adv: LabeledSet
    test_nat: LabeledSet
    test_adv: LabeledSet


def _subsample(s: LabeledSet, cap: int | None, rng: np.random.Generator) -> LabeledSet:
    if cap is None or cap >= len(s):
        return s
    idx = rng.choice(len(s), size=cap, replace=False)
    return s.subset(np.sort(idx))


def make_trial_pools(part_train, part_test, seed: int,
                     train_cap: int | None = None,
                     test_cap: int | None = None) -> TrialPools:
    rng = np.random.default_rng(seed)
    return TrialPools(
        train_nat=_subsample(part_train.s_nat, train_cap, rng),
        train_adv=_subsample(part_train.s_adv, train_cap, rng),
        test_nat=_subsample(part_test.s_nat, test_cap, rng),
        test_adv=_subsample(part_test.s_adv, test_cap, rng),
    )


def _train_three(bank, make_data, num_labels, cfg: _optim.TrainConfig,
                 seed: int, regression: bool):
    """Fresh-seeded h on the natural pool, f on the adversarial pool, g on
    the union; returns the three trained classifiers."""
    out = []
    for i, key in enumerate(("nat", "adv", "union")):
        c = _model.init_classifier(bank, num_labels, seed=seed + 17 * i + 1)
        tcfg = _optim.TrainConfig(
            learning_rate=cfg.learning_rate, momentum=cfg.momentum,
            weight_decay=cfg.weight_decay, batch_size=cfg.batch_size,
            epochs=cfg.epochs, seed=seed + 17 * i + 2)
        if regression:
            X, t = make_data(key)
            out.append(_optim.train_regression(c, X, t, tcfg).classifier)
        else:
            out.append(_optim.train(c, make_data(key), tcfg).classifier)
    return out


def classification_bias_trial(bank: FeatureBank, pools: TrialPools,
                              superclass: np.ndarray,
                              cfg: _optim.TrainConfig, seed: int) -> BiasSample:
    """One gap sample for a binary task built from a label bipartition."""
    def relabel(s: LabeledSet) -> LabeledSet:
        return LabeledSet(s.images, superclass[s.labels], s.origin_tags,
                          dict(s.meta))

    tr_nat, tr_adv = relabel(pools.train_nat), relabel(pools.train_adv)
    te_nat, te_adv = relabel(pools.test_nat), relabel(pools.test_adv)
    union = LabeledSet(
        np.concatenate([tr_nat.images, tr_adv.images]),
        np.concatenate([tr_nat.labels, tr_adv.labels]))
    data = {"nat": tr_nat, "adv": tr_adv, "union": union}
    h, f, g = _train_three(bank, data.__getitem__, 2, cfg, seed,
                           regression=False)
    union_test = LabeledSet(
        np.concatenate([te_nat.images, te_adv.images]),
        np.concatenate([te_nat.labels, te_adv.labels]))
    eps = zero_one_loss(g, union_test) - switching_loss(h, f, te_nat, te_adv)
    return BiasSample(float(eps))


def regression_bias_trial(bank: FeatureBank, pools: TrialPools,
                          target: HarmonicTarget,
                          cfg: _optim.TrainConfig, seed: int) -> BiasSample:
    """Control trial: same pools, random continuous regression target."""
    Xn, Xa = pools.train_nat.images, pools.train_adv.images
    tn, ta = target(Xn), target(Xa)
    Xu, tu = np.concatenate([Xn, Xa]), np.concatenate([tn, ta])
    data = {"nat": (Xn, tn), "adv": (Xa, ta), "union": (Xu, tu)}
    h, f, g = _train_three(bank, data.__getitem__, 1, cfg, seed,
                           regression=True)
    Xtn, Xta = pools.test_nat.images, pools.test_adv.images
    ttn, tta = target(Xtn), target(Xta)
    ru = _model.predict_value(g, np.concatenate([Xtn, Xta]))[:, 0] \
        - np.concatenate([ttn, tta])
    mse_union = float(np.mean(ru * ru))
    eps = mse_union - switching_mse(h, f, Xtn, ttn, Xta, tta)
    return BiasSample(float(eps))


def run_bias_test(trial_fn, trials: int = 20,
                  confidence: float = 0.01, loss_kind: str = "zero-one") -> BiasTestReport:
    """Collect `trials` gap samples from trial_fn(trial_index) and test
    H1: the mean gap is positive, at the given confidence."""
    if trials < 2:
        raise StatsError("need at least two trials")
    samples = [trial_fn(i) for i in range(trials)]
    return BiasTestReport.from_samples(samples, confidence, loss_kind)
