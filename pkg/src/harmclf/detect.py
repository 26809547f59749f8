"""Adversarial-example detection by analytic-polyhedron membership.

A sample is flagged when every class magnitude |h_j(x)| is below 1, which by
the tie rule is the same event as the zero class winning the argmax.  The
flagged attacks form the adversarial side of the dataset partition used by
the infeasibility and continuity-bias experiments.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import model as _model
from .attack import AttackConfig, pgd_batch
from .data import LabeledSet, Origin, concat_sets, load_set, persist_set
from .features import FeatureKind


class DetectError(ValueError):
    pass


@dataclass
class DetectionReport:
    precision: float
    recall: float
    f1: float
    counts: tuple[int, int, int, int]  # (tp, fp, fn, tn)
    degenerate: bool = False           # nothing flagged: precision reported as 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "DetectionReport":
        degenerate = (tp + fp) == 0
        precision = 0.0 if degenerate else tp / (tp + fp)
        recall = 0.0 if (tp + fn) == 0 else tp / (tp + fn)
        f1 = (0.0 if precision + recall == 0
              else 2 * precision * recall / (precision + recall))
        return cls(precision, recall, f1, (tp, fp, fn, tn), degenerate)


def in_polyhedron(c: "_model.Classifier", X) -> np.ndarray:
    """True where max_j |h_j(x)| < 1 (all true-class log-magnitudes negative).

    Requires a holomorphic classifier with the zero class attached, where the
    event coincides with predicting the zero class.
    """
    if c.kind is not FeatureKind.HOLOMORPHIC:
        raise DetectError("analytic polyhedron is defined for holomorphic "
                          "classifiers")
    if not c.has_zero_class:
        raise DetectError("detector needs the zero class attached")
    logits = _model.forward(c, X)
    return np.max(logits[:, :c.num_labels], axis=1) < 0.0


def attack_config_hash(cfg: AttackConfig) -> str:
    return hashlib.sha256(
        json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def _attack_pool(c, benign: LabeledSet, cfg: AttackConfig):
    """One adversarial example per benign sample; targeted attacks skip
    samples already labeled with the target."""
    X = benign.images
    y = benign.labels
    if cfg.target is not None:
        keep = y != cfg.target
        X, y = X[keep], y[keep]
    if X.shape[0] == 0:
        raise DetectError("empty benign pool")
    adv = pgd_batch(c, X, y, cfg)
    return X, y, adv


def detect_run(c, benign: LabeledSet, attack_cfg: AttackConfig) -> DetectionReport:
    """Attack every benign sample once and score polyhedron membership as the
    detector (positives = adversarial)."""
    if len(benign) == 0:
        raise DetectError("empty benign pool")
    X, y, adv = _attack_pool(c, benign, attack_cfg)
    flag_adv = in_polyhedron(c, adv)
    flag_ben = in_polyhedron(c, X)
    tp = int(flag_adv.sum())
    fn = int(flag_adv.size - tp)
    fp = int(flag_ben.sum())
    tn = int(flag_ben.size - fp)
    return DetectionReport.from_counts(tp, fp, fn, tn)


@dataclass
class Partition:
    s_nat: LabeledSet
    s_adv: LabeledSet
    s_union: LabeledSet

    @classmethod
    def build(cls, s_nat: LabeledSet, s_adv: LabeledSet) -> "Partition":
        return cls(s_nat=s_nat, s_adv=s_adv,
                   s_union=concat_sets(s_nat, s_adv, s_nat.meta))

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        persist_set(self.s_nat, directory / "s_nat.bin")
        persist_set(self.s_adv, directory / "s_adv.bin")

    @classmethod
    def load(cls, directory) -> "Partition":
        directory = Path(directory)
        return cls.build(load_set(directory / "s_nat.bin"),
                         load_set(directory / "s_adv.bin"))


def build_partition(c, benign: LabeledSet, attack_cfg: AttackConfig) -> Partition:
    """S_nat = the benign samples; S_adv = attacked samples that landed inside
    the polyhedron, keeping their true labels."""
    if len(benign) == 0:
        raise DetectError("empty benign pool")
    X, y, adv = _attack_pool(c, benign, attack_cfg)
    inside = in_polyhedron(c, adv)
    if not inside.any():
        raise DetectError("no adversarial example fell inside the polyhedron")
    provenance = {"attack_seed": str(attack_cfg.seed),
                  "attack_cfg": attack_config_hash(attack_cfg)}
    s_nat = LabeledSet(benign.images, benign.labels,
                       np.full(len(benign), Origin.NATURAL, np.uint8),
                       {**benign.meta, **provenance})
    s_adv = LabeledSet(adv[inside], y[inside],
                       np.full(int(inside.sum()), Origin.ADVERSARIAL, np.uint8),
                       {**benign.meta, **provenance})
    return Partition.build(s_nat, s_adv)
