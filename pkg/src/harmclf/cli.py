"""Experiment driver: train / attack / detect / partition / infeasibility /
bias-test / quantile subcommands over a JSON config.

Every command is a pure function of (config, root seed): reruns write
bit-identical outputs, and every emitted table carries a provenance footer
(config hash, seed, library version).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import data as _data
from . import detect as _detect
from . import model as _model
from . import optim as _optim
from . import stats as _stats
from .attack import AttackConfig, pgd_batch
from .features import enumerate_bank, parse_template_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: dict
    template_config: str
    output_dir: str
    seed: int = 0
    stats_template_config: str | None = None
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    attack: dict = field(default_factory=dict)
    subsets: dict = field(default_factory=dict)
    repeats: dict = field(default_factory=dict)
    bias: dict = field(default_factory=dict)
    config_hash: str = ""

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__ if f != "config_hash"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"dataset", "template_config", "output_dir"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        cfg = cls(**raw)
        cfg.config_hash = hashlib.sha256(
            json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]
        base = Path(path).parent
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if key not in cfg.dataset:
                raise ConfigError(f"dataset.{key} missing")
            cfg.dataset[key] = str((base / cfg.dataset[key]).resolve())
            if not Path(cfg.dataset[key]).exists():
                raise ConfigError(f"dataset file not found: {cfg.dataset[key]}")
        cfg.template_config = str((base / cfg.template_config).resolve())
        if not Path(cfg.template_config).exists():
            raise ConfigError(f"template config not found: {cfg.template_config}")
        if cfg.stats_template_config is not None:
            cfg.stats_template_config = str(
                (base / cfg.stats_template_config).resolve())
            if not Path(cfg.stats_template_config).exists():
                raise ConfigError(
                    f"stats template config not found: {cfg.stats_template_config}")
        cfg.output_dir = str((base / cfg.output_dir).resolve())
        return cfg

    # --- derived pieces -----------------------------------------------
    def out(self) -> Path:
        p = Path(self.output_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p

    def train_config(self, seed: int) -> _optim.TrainConfig:
        return _optim.TrainConfig(
            learning_rate=self.train.get("learning_rate", 0.001),
            momentum=self.train.get("momentum", 0.9),
            weight_decay=self.train.get("weight_decay", 1.0),
            batch_size=self.train.get("batch_size", 32),
            epochs=self.train.get("epochs", 5),
            seed=seed)

    def attack_config(self, seed: int, target=None, aware=None) -> AttackConfig:
        return AttackConfig(
            radius=self.attack.get("radius", 0.3),
            steps=self.attack.get("steps", 40),
            step_size=self.attack.get("step_size", 0.01),
            target=target,
            seed=seed,
            aware_extra=self.attack.get("aware_extra", True)
            if aware is None else aware)


def derive_seed(root: int, *tags) -> int:
    text = str(root) + "/" + "/".join(str(t) for t in tags)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def _subset(s: _data.LabeledSet, count, seed: int) -> _data.LabeledSet:
    if count is None or count >= len(s):
        return s
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(s), size=int(count), replace=False))
    return s.subset(idx)


def _write_csv(path, header, rows, cfg: ExperimentConfig) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    lines.append(f"# provenance: config_sha256={cfg.config_hash} "
                 f"seed={cfg.seed} harmclf={__version__}")
    Path(path).write_text("\n".join(lines) + "\n")


def _load_train_subset(cfg: ExperimentConfig) -> _data.LabeledSet:
    full = _data.load_idx(cfg.dataset["train_images"], cfg.dataset["train_labels"])
    return _subset(full, cfg.subsets.get("train", 10000),
                   derive_seed(cfg.seed, "train_subset"))


def _load_eval_pool(cfg: ExperimentConfig) -> _data.LabeledSet:
    full = _data.load_idx(cfg.dataset["test_images"], cfg.dataset["test_labels"])
    return _subset(full, cfg.subsets.get("eval_benign", 1000),
                   derive_seed(cfg.seed, "eval_pool"))


def _load_detect_pool(cfg: ExperimentConfig) -> _data.LabeledSet:
    full = _data.load_idx(cfg.dataset["test_images"], cfg.dataset["test_labels"])
    return _subset(full, cfg.subsets.get("detect_pool", 200),
                   derive_seed(cfg.seed, "detect_pool"))


def _bank(cfg: ExperimentConfig):
    tpl = parse_template_config(cfg.template_config)
    return enumerate_bank((28, 28), tpl)


def _checkpoint_path(cfg: ExperimentConfig) -> Path:
    return cfg.out() / "checkpoint.txt"


def _load_model(cfg: ExperimentConfig):
    bank = _bank(cfg)
    path = _checkpoint_path(cfg)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path} (run `train` first)")
    return _model.load_checkpoint(path, bank)


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(cfg: ExperimentConfig, args) -> int:
    bank = _bank(cfg)
    train_set = _load_train_subset(cfg)
    num_labels = cfg.model.get("num_labels", 10)
    c = _model.init_classifier(bank, num_labels,
                               seed=derive_seed(cfg.seed, "init"))
    if cfg.model.get("attach_zero_class", True):
        c = _model.attach_zero_class(c)
    result = _optim.train(c, train_set,
                          cfg.train_config(derive_seed(cfg.seed, "train")))
    _model.save_checkpoint(result.classifier, _checkpoint_path(cfg))
    _write_csv(cfg.out() / "trace.csv",
               ["epoch", "step", "loss", "energy"], result.steps, cfg)
    eval_pool = _load_eval_pool(cfg)
    acc = _model.accuracy(result.classifier, eval_pool.images, eval_pool.labels)
    _write_csv(cfg.out() / "train_summary.csv",
               ["train_count", "bank_size", "benign_accuracy"],
               [(len(train_set), len(bank), float(acc))], cfg)
    print(f"trained on {len(train_set)} samples, bank {len(bank)}; "
          f"benign accuracy {acc:.3f}")
    return EXIT_OK


def cmd_attack(cfg: ExperimentConfig, args) -> int:
    c = _load_model(cfg)
    pool = _load_detect_pool(cfg)
    base = cfg.attack_config(
        seed=args.seed if args.seed is not None else derive_seed(cfg.seed, "attack"),
        target=args.target,
        aware=args.aware_extra)
    acfg = AttackConfig(
        radius=base.radius if args.radius is None else args.radius,
        steps=base.steps if args.steps is None else args.steps,
        step_size=base.step_size if args.step_size is None else args.step_size,
        target=base.target, seed=base.seed, aware_extra=base.aware_extra)
    X, y = pool.images, pool.labels
    if acfg.target is not None:
        keep = y != acfg.target
        X, y = X[keep], y[keep]
    adv = pgd_batch(c, X, y, acfg)
    out = _data.LabeledSet(
        adv, y, np.full(len(y), _data.Origin.ADVERSARIAL, np.uint8),
        {"attack_seed": str(acfg.seed),
         "attack_cfg": _detect.attack_config_hash(acfg)})
    _data.persist_set(out, cfg.out() / "attacked.bin")
    flipped = float(np.mean(_model.predict(c, adv) != y))
    inside = float(np.mean(_detect.in_polyhedron(c, adv)))
    linf = float(np.max(np.abs(adv - X)))
    _write_csv(cfg.out() / "attack_summary.csv",
               ["count", "flip_rate", "inside_polyhedron", "max_linf"],
               [(len(y), flipped, inside, linf)], cfg)
    print(f"attacked {len(y)} samples: flip rate {flipped:.3f}, "
          f"inside polyhedron {inside:.3f}")
    return EXIT_OK


def cmd_partition(cfg: ExperimentConfig, args) -> int:
    c = _load_model(cfg)
    train_set = _load_train_subset(cfg)
    eval_pool = _load_eval_pool(cfg)
    part_train = _detect.build_partition(
        c, train_set,
        cfg.attack_config(seed=derive_seed(cfg.seed, "partition", "train")))
    part_test = _detect.build_partition(
        c, eval_pool,
        cfg.attack_config(seed=derive_seed(cfg.seed, "partition", "test")))
    part_train.save(cfg.out() / "part_train")
    part_test.save(cfg.out() / "part_test")
    _write_csv(cfg.out() / "partition_summary.csv",
               ["split", "natural", "adversarial"],
               [("train", len(part_train.s_nat), len(part_train.s_adv)),
                ("test", len(part_test.s_nat), len(part_test.s_adv))], cfg)
    print(f"partition: train {len(part_train.s_adv)}/{len(part_train.s_nat)} adv/nat, "
          f"test {len(part_test.s_adv)}/{len(part_test.s_nat)}")
    return EXIT_OK


def cmd_detect(cfg: ExperimentConfig, args) -> int:
    c = _load_model(cfg)
    pool = _load_detect_pool(cfg)
    repeats = cfg.repeats.get("detection", 10)
    targets = ["untargeted"] + list(range(c.num_labels))
    rows = []
    for target in targets:
        tgt = None if target == "untargeted" else int(target)
        cells = []
        for aware in (True, False):
            reports = []
            for run in range(repeats):
                acfg = cfg.attack_config(
                    seed=derive_seed(cfg.seed, "detect", target, aware, run),
                    target=tgt, aware=aware)
                reports.append(_detect.detect_run(c, pool, acfg))
            cells.extend([
                float(np.mean([r.precision for r in reports])),
                float(np.mean([r.recall for r in reports])),
                float(np.mean([r.f1 for r in reports])),
            ])
        rows.append((target, *cells))
    _write_csv(cfg.out() / "table1.csv",
               ["target", "aware_precision", "aware_recall", "aware_f1",
                "unaware_precision", "unaware_recall", "unaware_f1"],
               rows, cfg)
    print(f"detection table written ({len(rows)} rows x 2 awareness blocks)")
    return EXIT_OK


def cmd_infeasibility(cfg: ExperimentConfig, args) -> int:
    c = _load_model(cfg)
    part_dir = cfg.out()
    try:
        part_train = _detect.Partition.load(part_dir / "part_train")
        part_test = _detect.Partition.load(part_dir / "part_test")
    except OSError as exc:
        raise ConfigError(f"partitions not found (run `partition`): {exc}")
    bank = c.bank
    num_labels = c.num_labels

    def fresh(tag):
        cc = _model.init_classifier(bank, num_labels,
                                    seed=derive_seed(cfg.seed, "infeas", tag))
        return _model.attach_zero_class(cc)

    f_res = _optim.train(fresh("f"), part_train.s_adv,
                         cfg.train_config(derive_seed(cfg.seed, "infeas", "f", "t")))
    g_res = _optim.train(fresh("g"), part_train.s_union,
                         cfg.train_config(derive_seed(cfg.seed, "infeas", "g", "t")))
    rows = []
    for name, clf in (("h", c), ("f", f_res.classifier), ("g", g_res.classifier)):
        adv_acc = _model.accuracy(clf, part_test.s_adv.images, part_test.s_adv.labels)
        ben_acc = _model.accuracy(clf, part_test.s_nat.images, part_test.s_nat.labels)
        rows.append((name, float(adv_acc), float(ben_acc)))
    _write_csv(cfg.out() / "table2.csv",
               ["classifier", "adversarial", "benign"], rows, cfg)
    for name, a, b in rows:
        print(f"{name}: adversarial {a:.3f} benign {b:.3f}")
    return EXIT_OK


def cmd_bias_test(cfg: ExperimentConfig, args) -> int:
    part_dir = cfg.out()
    try:
        part_train = _detect.Partition.load(part_dir / "part_train")
        part_test = _detect.Partition.load(part_dir / "part_test")
    except OSError as exc:
        raise ConfigError(f"partitions not found (run `partition`): {exc}")
    tpl_path = cfg.stats_template_config or cfg.template_config
    tpl = parse_template_config(tpl_path)
    bank = enumerate_bank((28, 28), tpl)
    trials = cfg.repeats.get("bias_trials", 20)
    confidence = cfg.bias.get("confidence", 0.01)
    train_cap = cfg.bias.get("train_cap")
    test_cap = cfg.bias.get("test_cap")
    num_labels = int(part_train.s_nat.labels.max()) + 1

    def class_trial(i: int) -> _stats.BiasSample:
        seed = derive_seed(cfg.seed, "bias", "class", i)
        pools = _stats.make_trial_pools(part_train, part_test, seed,
                                        train_cap, test_cap)
        superclass = _stats.random_bipartition(
            num_labels, np.random.default_rng(seed + 1))
        return _stats.classification_bias_trial(
            bank, pools, superclass, cfg.train_config(seed), seed)

    def regr_trial(i: int) -> _stats.BiasSample:
        seed = derive_seed(cfg.seed, "bias", "regr", i)
        pools = _stats.make_trial_pools(part_train, part_test, seed,
                                        train_cap, test_cap)
        target = _stats.random_harmonic_target(bank, seed + 1)
        return _stats.regression_bias_trial(
            bank, pools, target, cfg.train_config(seed), seed)

    rep_class = _stats.run_bias_test(class_trial, trials, confidence, "zero-one")
    rep_regr = _stats.run_bias_test(regr_trial, trials, confidence, "mse")
    rows = [
        ("discontinuous", trials, float(rep_class.critical), float(rep_class.T),
         rep_class.decision.value),
        ("continuous", trials, float(rep_regr.critical), float(rep_regr.T),
         rep_regr.decision.value),
    ]
    _write_csv(cfg.out() / "table3.csv",
               ["target_family", "trials", "critical_value", "test_statistic",
                "h1"], rows, cfg)
    for fam, _, crit, T, dec in rows:
        print(f"{fam}: T={T:.2f} critical={crit:.2f} -> H1 {dec}")
    return EXIT_OK


def cmd_quantile(args) -> int:
    try:
        value = _stats.t_inverse_cdf(args.df, args.p)
    except _stats.StatsError as exc:
        raise ConfigError(str(exc)) from exc
    print(repr(value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="harmclf",
        description="harmonic/holomorphic classifier experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="experiment JSON")
        return p

    with_config(sub.add_parser("train", help="train the classifier"))
    pa = with_config(sub.add_parser("attack", help="attack a test pool"))
    pa.add_argument("--radius", type=float, default=None)
    pa.add_argument("--steps", type=int, default=None)
    pa.add_argument("--step-size", type=float, default=None, dest="step_size")
    pa.add_argument("--target", type=int, default=None)
    pa.add_argument("--aware-extra", dest="aware_extra", default=None,
                    action=argparse.BooleanOptionalAction)
    pa.add_argument("--seed", type=int, default=None)
    with_config(sub.add_parser("partition", help="build S_nat/S_adv partitions"))
    with_config(sub.add_parser("detect", help="detection table (Table I analogue)"))
    with_config(sub.add_parser(
        "infeasibility", help="specialist/generalist accuracy grid (Table II)"))
    with_config(sub.add_parser("bias-test", help="continuity-bias test (Table III)"))
    pq = sub.add_parser("quantile", help="Student-t inverse CDF")
    pq.add_argument("--df", type=int, required=True)
    pq.add_argument("--p", type=float, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "quantile":
            return cmd_quantile(args)
        cfg = ExperimentConfig.from_json(args.config)
        handler = {
            "train": cmd_train,
            "attack": cmd_attack,
            "partition": cmd_partition,
            "detect": cmd_detect,
            "infeasibility": cmd_infeasibility,
            "bias-test": cmd_bias_test,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
