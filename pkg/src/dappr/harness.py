"""Experiment harness: configuration, runners, reports, CSV emitters.

Runs are deterministic for a given config: datasets, splits, shuffles and
weight init all derive from explicit seeds, and reports are serialized with
sorted keys.  The only non-reproducible content (timestamp, wall-clock
runtime) is isolated under the single top-level key ``run_info`` so reports
from identical configs are byte-identical outside that key.

Metric values in reports are on the 0-100 scale; the metric functions
themselves return raw [0, 1] values.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import gradcheck
from .datasets import (LabeledDataset, SplitSpec, gaussian_blobs, load_csv,
                       long_tail_resample, ood_generator, split,
                       stratified_subsample, two_moons)
from .errors import VerificationFailure
from .loss import (LossConfig, closed_form_maximiser, dappr_loss, one_hot,
                   softmax, softplus_plus_one)
from .metrics import (aleatoric_uncertainty, aupr, auroc, ece,
                      epistemic_uncertainty, reliability_bins,
                      softmax_entropy)
from .nn import (NetworkParams, TrainConfig, _Adam, _forward_cached, backward,
                 forward, init_network, save_checkpoint, train)
from .possibility import (DirichletParams, PossibilityTable, SimplexPoint,
                          default_grid_resolution, dirichlet_mode,
                          grid_argmax_surrogate, log_dirichlet_possibility,
                          maxitive_divergence, possibilistic_posterior,
                          pushforward_possibility, simplex_grid)

log = logging.getLogger("dappr")

HISTOGRAM_BINS = 30


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian_blobs"
    n_classes: int = 3
    n_per_class: int = 400
    n_features: int = 2
    spread: float = 1.0
    n: int = 600
    noise: float = 0.1
    seed: int = 7
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian_blobs", "two_moons", "csv"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "csv" and not self.path:
            raise ValueError("csv dataset needs a path")


@dataclass(frozen=True)
class OodSpec:
    kind: str = "uniform_box"
    n: int | None = None  # None: match the ID test-split size
    offset: float = 12.0
    seed: int = 11


@dataclass(frozen=True)
class ModelSpec:
    hidden: tuple[int, ...] = (32, 32)
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 32
    optimizer: str = "adam"
    loss_kind: str = "dappr"
    early_stopping: bool = False
    weight_decay: float = 0.0


@dataclass(frozen=True)
class ProbeSpec:
    n_probed: int = 20
    n_perturbations: int = 3
    finetune_epochs: int = 3
    finetune_lr: float = 1e-4
    seed: int = 17


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "standard"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 3
    model: ModelSpec = field(default_factory=ModelSpec)
    loss: LossConfig = field(default_factory=lambda: LossConfig(lam=2e-3, schedule="warmup"))
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    ood: tuple[OodSpec, ...] = (OodSpec(kind="uniform_box"),
                                OodSpec(kind="shifted_blobs"))
    out: str = "runs/out"
    scaling_sizes: tuple[int, ...] = (50, 100, 200, 400, 800)
    longtail_rho: float = 0.1
    sweep_lambdas: tuple[float, ...] = (0.0, 2e-4, 2e-3, 5e-3)
    probe: ProbeSpec = field(default_factory=ProbeSpec)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")


_SECTION_TYPES = {
    "dataset": DatasetSpec,
    "model": ModelSpec,
    "probe": ProbeSpec,
}


def _build_section(cls, data, context: str):
    if not isinstance(data, dict):
        raise ValueError(f"{context} must be an object, got {type(data).__name__}")
    known = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {context} keys: {sorted(unknown)}")
    coerced = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    return cls(**coerced)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config from a parsed JSON object."""
    if not isinstance(data, dict):
        raise ValueError("config root must be a JSON object")
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key == "loss":
            kwargs[key] = _build_section(LossConfig, value, key)
        elif key == "ood":
            if not isinstance(value, list):
                raise ValueError("ood must be a list of objects")
            kwargs[key] = tuple(_build_section(OodSpec, o, "ood") for o in value)
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)


def apply_overrides(cfg: ExperimentConfig, *, seed: int | None = None,
                    out: str | None = None, lam: float | None = None,
                    schedule: str | None = None,
                    eps: float | None = None) -> ExperimentConfig:
    """CLI flags override the corresponding config fields."""
    if seed is not None:
        cfg = replace(cfg, seeds=(seed,))
    if out is not None:
        cfg = replace(cfg, out=out)
    loss = cfg.loss
    if lam is not None:
        loss = replace(loss, lam=lam)
    if schedule is not None:
        loss = replace(loss, schedule=schedule)
    if eps is not None:
        loss = replace(loss, eps=eps)
    return replace(cfg, loss=loss)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


# ---------------------------------------------------------------------------
# Data and training plumbing


def build_dataset(spec: DatasetSpec) -> LabeledDataset:
    if spec.kind == "gaussian_blobs":
        return gaussian_blobs(spec.n_classes, spec.n_per_class, spec.n_features,
                              spec.spread, spec.seed)
    if spec.kind == "two_moons":
        return two_moons(spec.n, spec.noise, spec.seed)
    return load_csv(spec.path)


def make_splits(cfg: ExperimentConfig):
    ds = build_dataset(cfg.dataset)
    return split(ds, SplitSpec(cfg.split_fractions, cfg.split_seed))


def train_config(cfg: ExperimentConfig, seed: int, n_features: int,
                 n_classes: int) -> TrainConfig:
    return TrainConfig(
        layer_sizes=(n_features, *cfg.model.hidden, n_classes),
        epochs=cfg.model.epochs,
        batch_size=cfg.model.batch_size,
        seed=seed,
        learning_rate=cfg.model.learning_rate,
        optimizer=cfg.model.optimizer,
        loss_kind=cfg.model.loss_kind,
        loss=cfg.loss,
        early_stopping=cfg.model.early_stopping,
        weight_decay=cfg.model.weight_decay,
    )


def generate_ood(cfg: ExperimentConfig, spec: OodSpec, n_default: int) -> np.ndarray:
    n = spec.n if spec.n is not None else n_default
    return ood_generator(
        spec.kind, n, cfg.dataset.n_features if cfg.dataset.kind == "gaussian_blobs" else 2,
        spec.seed, offset=spec.offset,
        n_classes=cfg.dataset.n_classes if cfg.dataset.kind == "gaussian_blobs" else 2,
        spread=cfg.dataset.spread if cfg.dataset.kind == "gaussian_blobs" else 1.0,
    )


def ood_names(cfg: ExperimentConfig) -> list[str]:
    names = []
    seen: dict[str, int] = {}
    for spec in cfg.ood:
        count = seen.get(spec.kind, 0)
        names.append(spec.kind if count == 0 else f"{spec.kind}_{count + 1}")
        seen[spec.kind] = count + 1
    return names


def model_uncertainties(params: NetworkParams, x: np.ndarray):
    """Per-row (aleatoric, epistemic, confidence, alpha0) under the model's head.

    Concentration-head models decompose via the Dirichlet parameters;
    cross-entropy models fall back to 1 - max softmax (aleatoric, with max
    softmax as confidence) and softmax entropy (epistemic).  alpha0 is
    reported for both so concentration histograms stay comparable.
    """
    logits = forward(params, x)
    n = logits.shape[0]
    alea = np.empty(n)
    epi = np.empty(n)
    alpha0 = np.empty(n)
    if params.loss_kind == "dappr":
        for i in range(n):
            d = softplus_plus_one(logits[i])
            alea[i] = aleatoric_uncertainty(d)
            epi[i] = epistemic_uncertainty(d)
            alpha0[i] = d.alpha0
        conf = 1.0 - alea
    else:
        probs = softmax(logits)
        for i in range(n):
            p = SimplexPoint(probs[i])
            epi[i] = softmax_entropy(p)
            alpha0[i] = softplus_plus_one(logits[i]).alpha0
        alea = 1.0 - probs.max(axis=1)
        conf = probs.max(axis=1)
    return alea, epi, conf, alpha0


def evaluate_seed(params: NetworkParams, test: LabeledDataset,
                  ood_sets: dict[str, np.ndarray]) -> dict:
    """ID metrics plus OOD detection numbers for one trained model."""
    logits = forward(params, test.features)
    predictions = np.argmax(logits, axis=1)
    correct = (predictions == test.labels).astype(np.int64)
    alea, epi, conf, alpha0 = model_uncertainties(params, test.features)

    result = {
        "accuracy": 100.0 * float(np.mean(correct)),
        "ece": 100.0 * ece(conf, correct),
        "mean_alpha0_id": float(np.mean(alpha0)),
        "ood": {},
    }
    # Confidence ranking: correct predictions should outrank mistakes.
    if 0 < int(correct.sum()) < correct.size:
        result["confidence_aupr"] = 100.0 * aupr(correct, -alea)
    else:
        result["confidence_aupr"] = None  # all right or all wrong: undefined
    raw = {"confidences": conf, "correct": correct, "alpha0_id": alpha0,
           "alpha0_ood": {}}

    for name, features in ood_sets.items():
        _, epi_ood, _, alpha0_ood = model_uncertainties(params, features)
        labels = np.concatenate([np.ones(test.n, dtype=np.int64),
                                 np.zeros(features.shape[0], dtype=np.int64)])
        scores = np.concatenate([-epi, -epi_ood])
        result["ood"][name] = {
            "aupr": 100.0 * aupr(labels, scores),
            "auroc": 100.0 * auroc(labels, scores),
            "mean_alpha0": float(np.mean(alpha0_ood)),
        }
        raw["alpha0_ood"][name] = alpha0_ood
    return result, raw


# ---------------------------------------------------------------------------
# Report helpers


def _aggregate(per_seed: list[dict], keys: list[str]) -> tuple[dict, dict]:
    mean: dict = {}
    std: dict = {}
    for key in keys:
        values = [s[key] for s in per_seed if s.get(key) is not None]
        if not values:
            continue
        mean[key] = float(np.mean(values))
        # std needs two defined values; confidence_aupr can be None per seed
        if len(per_seed) > 1 and len(values) > 1:
            std[key] = float(np.std(values, ddof=1))
    return mean, std


def _aggregate_ood(per_seed: list[dict]) -> tuple[dict, dict]:
    mean: dict = {}
    std: dict = {}
    if not per_seed or not per_seed[0]["ood"]:
        return mean, std
    for name in per_seed[0]["ood"]:
        mean[name] = {}
        std[name] = {}
        for key in ("aupr", "auroc", "mean_alpha0"):
            values = [s["ood"][name][key] for s in per_seed]
            mean[name][key] = float(np.mean(values))
            if len(per_seed) > 1:
                std[name][key] = float(np.std(values, ddof=1))
    return mean, std


def write_report(report: dict, outdir: Path, runtime: float,
                 name: str = "report.json") -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    report = dict(report)
    report["run_info"] = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "runtime_seconds": runtime,
    }
    path = outdir / name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def emit_alpha0_histogram(id_values, ood_values, path,
                          n_bins: int = HISTOGRAM_BINS) -> dict:
    """Joint min-max normalised histogram of total concentration.

    Both samples are normalised with the same (min, max) taken over their
    union, so the two count columns share the [0, 1] axis.
    """
    id_values = np.asarray(id_values, dtype=np.float64)
    ood_values = np.asarray(ood_values, dtype=np.float64)
    if id_values.size == 0 or ood_values.size == 0:
        raise ValueError("need non-empty ID and OOD samples")
    joint = np.concatenate([id_values, ood_values])
    lo, hi = float(joint.min()), float(joint.max())
    if hi == lo:
        log.warning("alpha0 histogram: degenerate range, all values equal %r", lo)
        hi = lo + 1.0
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    id_counts, _ = np.histogram((id_values - lo) / (hi - lo), bins=edges)
    ood_counts, _ = np.histogram((ood_values - lo) / (hi - lo), bins=edges)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count_id,count_ood\n")
        for b in range(n_bins):
            fh.write(f"{edges[b]!r},{edges[b + 1]!r},{id_counts[b]},{ood_counts[b]}\n")
    return {
        "min": lo, "max": hi,
        "id_counts": id_counts.tolist(),
        "ood_counts": ood_counts.tolist(),
    }


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


# ---------------------------------------------------------------------------
# Experiment runners


def run_train(cfg: ExperimentConfig) -> dict:
    """Train one model (first configured seed); write checkpoint and history."""
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds, _ = make_splits(cfg)
    seed = cfg.seeds[0]
    tc = train_config(cfg, seed, train_ds.dim, train_ds.n_classes)
    params, history = train(train_ds.features, train_ds.labels,
                            val_ds.features, val_ds.labels, tc)
    save_checkpoint(params, outdir / "checkpoint.json")
    _write_csv(outdir / "history.csv", "epoch,train_loss,val_accuracy,val_mean_alpha0",
               [(e, history.train_loss[e], history.val_accuracy[e],
                 history.val_mean_alpha0[e]) for e in range(len(history.train_loss))])
    report = {
        "experiment": "train",
        "config": config_to_dict(cfg),
        "seed": seed,
        "epochs_run": len(history.train_loss),
        "final_train_loss": history.train_loss[-1] if history.train_loss else None,
        "final_val_accuracy": (100.0 * history.val_accuracy[-1]
                               if history.val_accuracy else None),
        "checkpoint": "checkpoint.json",
    }
    write_report(report, outdir, time.perf_counter() - started)
    return report


def run_eval(cfg: ExperimentConfig, checkpoint_path) -> dict:
    """Evaluate a saved checkpoint on the config's test split (ID only)."""
    from .nn import load_checkpoint

    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    params = load_checkpoint(checkpoint_path)
    _, _, test_ds = make_splits(cfg)
    if params.layer_sizes[0] != test_ds.dim or params.layer_sizes[-1] < test_ds.n_classes:
        raise ValueError("checkpoint shape does not match the configured dataset")
    result, raw = evaluate_seed(params, test_ds, {})
    bins = reliability_bins(raw["confidences"], raw["correct"])
    bins.save_csv(outdir / "reliability.csv")
    report = {
        "experiment": "eval",
        "config": config_to_dict(cfg),
        "checkpoint": str(checkpoint_path),
        "metrics": {k: result[k] for k in
                    ("accuracy", "confidence_aupr", "ece", "mean_alpha0_id")},
    }
    write_report(report, outdir, time.perf_counter() - started)
    return report


def run_standard(cfg: ExperimentConfig) -> dict:
    """Train per seed, evaluate ID metrics and OOD detection, write report."""
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds, test_ds = make_splits(cfg)

    names = ood_names(cfg)
    ood_sets = {name: generate_ood(cfg, spec, test_ds.n)
                for name, spec in zip(names, cfg.ood)}

    per_seed = []
    pooled_conf, pooled_correct = [], []
    pooled_alpha0_id, pooled_alpha0_ood = [], []
    for seed in cfg.seeds:
        tc = train_config(cfg, seed, train_ds.dim, train_ds.n_classes)
        params, _ = train(train_ds.features, train_ds.labels,
                          val_ds.features, val_ds.labels, tc)
        save_checkpoint(params, outdir / f"checkpoint_seed{seed}.json")
        result, raw = evaluate_seed(params, test_ds, ood_sets)
        result["seed"] = seed
        per_seed.append(result)
        pooled_conf.append(raw["confidences"])
        pooled_correct.append(raw["correct"])
        pooled_alpha0_id.append(raw["alpha0_id"])
        if names:
            pooled_alpha0_ood.append(raw["alpha0_ood"][names[0]])

    bins = reliability_bins(np.concatenate(pooled_conf),
                            np.concatenate(pooled_correct))
    bins.save_csv(outdir / "reliability.csv")

    histogram = None
    if pooled_alpha0_ood:
        histogram = emit_alpha0_histogram(np.concatenate(pooled_alpha0_id),
                                          np.concatenate(pooled_alpha0_ood),
                                          outdir / "alpha0_histogram.csv")

    mean, std = _aggregate(per_seed, ["accuracy", "confidence_aupr", "ece",
                                      "mean_alpha0_id"])
    ood_mean, ood_std = _aggregate_ood(per_seed)
    mean["ood"] = ood_mean
    report = {
        "experiment": "standard",
        "config": config_to_dict(cfg),
        "per_seed": per_seed,
        "mean": mean,
        "alpha0_histogram": histogram,
    }
    if len(cfg.seeds) > 1:
        std["ood"] = ood_std
        report["std"] = std
    write_report(report, outdir, time.perf_counter() - started)
    return report


def run_scaling(cfg: ExperimentConfig) -> dict:
    """Training-set size sweep; epistemic uncertainty on a fixed test split."""
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds, test_ds = make_splits(cfg)

    rows = []
    curve: list[dict] = []
    for size in cfg.scaling_sizes:
        if size > train_ds.n:
            raise ValueError(f"scaling size {size} exceeds train split ({train_ds.n})")
        subset = stratified_subsample(train_ds, size, cfg.split_seed)
        for seed in cfg.seeds:
            tc = train_config(cfg, seed, train_ds.dim, train_ds.n_classes)
            params, _ = train(subset.features, subset.labels,
                              val_ds.features, val_ds.labels, tc)
            _, epi, _, _ = model_uncertainties(params, test_ds.features)
            acc = 100.0 * float(np.mean(np.argmax(forward(params, test_ds.features), axis=1)
                                        == test_ds.labels))
            rows.append((size, seed, float(np.mean(epi)), acc))
        values = [r[2] for r in rows if r[0] == size]
        accs = [r[3] for r in rows if r[0] == size]
        curve.append({"size": size,
                      "mean_epistemic": float(np.mean(values)),
                      "mean_accuracy": float(np.mean(accs))})

    _write_csv(outdir / "scaling.csv", "size,seed,mean_epistemic,accuracy", rows)
    report = {
        "experiment": "scaling",
        "config": config_to_dict(cfg),
        "per_run": [{"size": s, "seed": seed, "mean_epistemic": e, "accuracy": a}
                    for s, seed, e, a in rows],
        "curve": curve,
    }
    write_report(report, outdir, time.perf_counter() - started)
    return report


def run_longtail(cfg: ExperimentConfig) -> dict:
    """Long-tail resampled training, balanced-test evaluation."""
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds, test_ds = make_splits(cfg)
    tail_train = long_tail_resample(train_ds, cfg.longtail_rho, cfg.split_seed)
    counts = tail_train.class_counts()

    per_seed = []
    per_class_alpha0 = np.zeros(test_ds.n_classes)
    per_class_acc = np.zeros(test_ds.n_classes)
    for seed in cfg.seeds:
        tc = train_config(cfg, seed, train_ds.dim, train_ds.n_classes)
        params, _ = train(tail_train.features, tail_train.labels,
                          val_ds.features, val_ds.labels, tc)
        logits = forward(params, test_ds.features)
        predictions = np.argmax(logits, axis=1)
        _, _, _, alpha0 = model_uncertainties(params, test_ds.features)
        per_seed.append({
            "seed": seed,
            "accuracy": 100.0 * float(np.mean(predictions == test_ds.labels)),
        })
        for k in range(test_ds.n_classes):
            members = test_ds.labels == k
            per_class_alpha0[k] += float(np.mean(alpha0[members]))
            per_class_acc[k] += 100.0 * float(np.mean(predictions[members] == k))
    per_class_alpha0 /= len(cfg.seeds)
    per_class_acc /= len(cfg.seeds)

    _write_csv(outdir / "longtail.csv",
               "class,train_count,test_accuracy,mean_alpha0",
               [(k, int(counts[k]), float(per_class_acc[k]), float(per_class_alpha0[k]))
                for k in range(test_ds.n_classes)])
    mean, std = _aggregate(per_seed, ["accuracy"])
    report = {
        "experiment": "longtail",
        "config": config_to_dict(cfg),
        "train_counts": counts.tolist(),
        "per_seed": per_seed,
        "mean": mean,
        "per_class": [{"class": k, "train_count": int(counts[k]),
                       "test_accuracy": float(per_class_acc[k]),
                       "mean_alpha0": float(per_class_alpha0[k])}
                      for k in range(test_ds.n_classes)],
    }
    if len(cfg.seeds) > 1:
        report["std"] = std
    write_report(report, outdir, time.perf_counter() - started)
    return report


def run_lambda_sweep(cfg: ExperimentConfig) -> dict:
    """Regulariser-weight sweep: accuracy and OOD detection per lambda."""
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds, test_ds = make_splits(cfg)
    names = ood_names(cfg)
    if not names:
        raise ValueError("lambda sweep needs at least one ood entry")
    ood_sets = {name: generate_ood(cfg, spec, test_ds.n)
                for name, spec in zip(names, cfg.ood)}
    first = names[0]

    rows = []
    curve = []
    for lam in cfg.sweep_lambdas:
        sweep_cfg = replace(cfg, loss=replace(cfg.loss, lam=lam))
        accs, auprs = [], []
        for seed in cfg.seeds:
            tc = train_config(sweep_cfg, seed, train_ds.dim, train_ds.n_classes)
            params, _ = train(train_ds.features, train_ds.labels,
                              val_ds.features, val_ds.labels, tc)
            result, _ = evaluate_seed(params, test_ds, ood_sets)
            rows.append((float(lam), seed, result["accuracy"],
                         result["ood"][first]["aupr"]))
            accs.append(result["accuracy"])
            auprs.append(result["ood"][first]["aupr"])
        curve.append({"lambda": float(lam),
                      "mean_accuracy": float(np.mean(accs)),
                      "mean_ood_aupr": float(np.mean(auprs))})

    _write_csv(outdir / "sweep.csv", "lambda,seed,accuracy,ood_aupr", rows)
    report = {
        "experiment": "sweep",
        "config": config_to_dict(cfg),
        "ood_set": first,
        "per_run": [{"lambda": lam, "seed": seed, "accuracy": acc, "ood_aupr": ap}
                    for lam, seed, acc, ap in rows],
        "curve": curve,
    }
    write_report(report, outdir, time.perf_counter() - started)
    return report


# ---------------------------------------------------------------------------
# Leave-one-out probe


def _soft_label_finetune(params: NetworkParams, rest_x, rest_y, forced_x,
                         forced_target, probe: ProbeSpec, batch_size: int):
    """Fine-tune a copy of params on rest + the forced sample in every batch."""
    tuned = copy.deepcopy(params)
    flat = tuned.weights + tuned.biases
    opt = _Adam(flat, probe.finetune_lr)
    n = rest_x.shape[0]
    k = tuned.layer_sizes[-1]
    rest_targets = one_hot(rest_y, k)
    for epoch in range(probe.finetune_epochs):
        perm = np.random.default_rng([probe.seed, 2, epoch]).permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            xb = np.vstack([rest_x[idx], forced_x[None, :]])
            targets = np.vstack([rest_targets[idx], forced_target[None, :]])
            pre, acts = _forward_cached(tuned, xb)
            grad = (softmax(pre[-1]) - targets) / xb.shape[0]
            grads_w, grads_b = backward(tuned, pre, acts, grad)
            opt.step(flat, grads_w + grads_b)
    return tuned


def _total_cross_entropy(params: NetworkParams, x, y) -> float:
    logits = forward(params, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    return float(-np.sum(log_probs[np.arange(x.shape[0]), y]))


def run_probe(cfg: ExperimentConfig) -> dict:
    """Leave-one-out sensitivity probe.

    Trains a cross-entropy base model on the full dataset, then for each
    probed sample fine-tunes one copy with the true label forced into every
    batch and several copies with random soft labels instead.  S_x is the
    largest shift of the leave-one-out loss (sum of cross-entropies over the
    other samples) caused by the label swap; small S_x / L_true justifies the
    one-term approximation of the posterior around the observed labels.
    """
    started = time.perf_counter()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg.dataset)
    if cfg.probe.n_probed > ds.n:
        raise ValueError("cannot probe more samples than the dataset has")

    tc = replace(train_config(cfg, cfg.seeds[0], ds.dim, ds.n_classes),
                 loss_kind="cross_entropy")
    base, _ = train(ds.features, ds.labels, ds.features, ds.labels, tc)

    rng = np.random.default_rng(cfg.probe.seed)
    probed = np.sort(rng.choice(ds.n, size=cfg.probe.n_probed, replace=False))
    rows = []
    for x_idx in probed:
        mask = np.ones(ds.n, dtype=bool)
        mask[x_idx] = False
        rest_x, rest_y = ds.features[mask], ds.labels[mask]
        forced_x = ds.features[x_idx]
        true_target = one_hot(np.array([ds.labels[x_idx]]), ds.n_classes)[0]

        tuned = _soft_label_finetune(base, rest_x, rest_y, forced_x, true_target,
                                     cfg.probe, cfg.model.batch_size)
        l_true = _total_cross_entropy(tuned, rest_x, rest_y)
        worst = 0.0
        for _ in range(cfg.probe.n_perturbations):
            soft = rng.dirichlet(np.ones(ds.n_classes))
            tuned_p = _soft_label_finetune(base, rest_x, rest_y, forced_x, soft,
                                           cfg.probe, cfg.model.batch_size)
            worst = max(worst, abs(_total_cross_entropy(tuned_p, rest_x, rest_y) - l_true))
        rows.append((int(x_idx), l_true, worst, worst / l_true))

    ratios = sorted(r[3] for r in rows)
    median_ratio = float(np.median(ratios))
    _write_csv(outdir / "probe.csv", "sample,loo_loss_true,s_x,ratio", rows)
    report = {
        "experiment": "probe",
        "config": config_to_dict(cfg),
        "per_sample": [{"sample": i, "loo_loss_true": lt, "s_x": sx, "ratio": r}
                       for i, lt, sx, r in rows],
        "median_ratio": median_ratio,
    }
    write_report(report, outdir, time.perf_counter() - started)
    return report


# ---------------------------------------------------------------------------
# Verification gate


@dataclass(frozen=True)
class VerifyReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def run_verify() -> VerifyReport:
    """Oracle battery over the possibility and loss layers.

    Covers: closed form vs grid argmax, mode optimality, grid supremum
    normalisation, divergence non-negativity and domination, posterior
    normalisation, pushforward identity and empty pre-image, frozen scalar
    values, and finite-difference gradient checks (loss-level and through a
    small network).
    """
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    rng = np.random.default_rng(20240817)

    # Closed form vs grid argmax, K in {2, 3}.
    worst = 0.0
    for k in (2, 3):
        grid = simplex_grid(k, default_grid_resolution(k))
        for _ in range(10):
            d = DirichletParams(rng.uniform(1.1, 6.0, size=k))
            y = int(rng.integers(k))
            gap = np.max(np.abs(closed_form_maximiser(d, y).probs
                                - grid_argmax_surrogate(d, y, grid).probs))
            worst = max(worst, float(gap))
    check("closed_form_vs_grid", worst <= 2.0 / 200, f"max gap {worst:.3e}")

    # Mode optimality: exactly zero log possibility at the mode.
    worst = 0.0
    for _ in range(20):
        d = DirichletParams(rng.uniform(0.2, 5.0, size=int(rng.integers(2, 6))))
        worst = max(worst, abs(log_dirichlet_possibility(d, dirichlet_mode(d))))
    check("mode_optimality_exact", worst == 0.0, f"max |log g(mode)| {worst:.3e}")

    # Grid supremum close to 1.
    grid3 = simplex_grid(3, 200)
    lo = 1.0
    for _ in range(10):
        d = DirichletParams(rng.uniform(0.5, 5.0, size=3))
        vals = [math.exp(log_dirichlet_possibility(d, SimplexPoint(row)))
                for row in grid3.points_array if np.all(row > 0)]
        lo = min(lo, max(vals))
    check("grid_sup_normalised", 1 - 5.0 / 200 <= lo <= 1 + 1e-6, f"min sup {lo:.6f}")

    # Divergence properties.
    ok = True
    detail = ""
    for _ in range(20):
        raw = rng.uniform(0.0, 1.0, size=8)
        g = PossibilityTable(raw / raw.max())
        # f dominated by g with a shared maximum point:
        u = rng.uniform(0.0, 1.0, size=8)
        u[int(np.argmax(g.values))] = 1.0
        f = PossibilityTable(g.values * u)
        d_fg = maxitive_divergence(f, g)
        d_gf = maxitive_divergence(g, f) if np.all(f.values > 0) else 0.0
        if d_fg != 0.0 or d_gf < -1e-12:
            ok = False
            detail = f"D(f||g)={d_fg!r}, D(g||f)={d_gf!r}"
            break
    check("divergence_domination_zero", ok, detail)

    # Posterior normalisation.
    losses = rng.uniform(0.0, 10.0, size=12)
    post = possibilistic_posterior(losses)
    check("posterior_max_one",
          post.values.max() == 1.0 and post.values[int(np.argmin(losses))] == 1.0)

    # Pushforward: identity mapping and empty pre-image.
    table = possibilistic_posterior(rng.uniform(0.0, 3.0, size=6))
    ident = pushforward_possibility(table, np.arange(6), 6)
    padded = pushforward_possibility(table, np.arange(6), 7)
    check("pushforward_identity",
          np.array_equal(ident.values, table.values) and padded.values[6] == 0.0)

    # Frozen scalar values.
    val = log_dirichlet_possibility(DirichletParams([2.0, 1.0, 1.0]),
                                    SimplexPoint([0.25, 0.5, 0.25]))
    check("frozen_log_possibility", abs(val - (-0.6931471805599453)) < 1e-12,
          f"got {val!r}")
    out = dappr_loss(np.zeros((1, 2)), np.array([0]), LossConfig(lam=0.0), 0)
    check("frozen_unit_logits_loss", abs(out.value - (-0.326968552235965)) < 1e-12,
          f"got {out.value!r}")

    # Gradient fidelity, loss level.
    worst = 0.0
    for lam in (0.0, 2e-3):
        cfg = LossConfig(lam=lam)
        z = rng.normal(0.0, 2.0, size=(4, 3))
        labels = rng.integers(0, 3, size=4)
        analytic = dappr_loss(z, labels, cfg, 0).grad_logits
        fd = gradcheck.dappr_loss_fd_gradient(z, labels, cfg, 0)
        worst = max(worst, gradcheck.relative_error(analytic, fd))
    check("gradient_loss_level", worst < 1e-5, f"max rel err {worst:.3e}")

    # Gradient fidelity, end to end through a small network.
    params = init_network((2, 8, 8, 3), seed=5)
    x = rng.normal(0.0, 1.0, size=(6, 2))
    labels = rng.integers(0, 3, size=6)
    cfg = LossConfig(lam=2e-3)
    pre, acts = _forward_cached(params, x)
    out = dappr_loss(pre[-1], labels, cfg, 0)
    grads_w, grads_b = backward(params, pre, acts, out.grad_logits)
    analytic = gradcheck.flatten_network_grads(grads_w, grads_b)
    p0 = gradcheck.base_p_star(pre[-1], labels, cfg)
    fd = gradcheck.network_fd_gradient(
        params, x, labels,
        lambda logits: gradcheck.frozen_pstar_value(logits, labels, cfg, 0, p0))
    err = gradcheck.relative_error(analytic, fd)
    check("gradient_end_to_end", err < 1e-4, f"rel err {err:.3e}")

    # Ranking metric frozen examples.
    check("metric_examples",
          abs(aupr([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) - 5.0 / 6.0) < 1e-12
          and auroc([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) == 0.75)

    return VerifyReport(checks)


def verify_or_raise() -> VerifyReport:
    report = run_verify()
    if not report.all_passed:
        failed = [name for name, ok, _ in report.checks if not ok]
        exc = VerificationFailure(f"verification failed: {failed}")
        exc.checks = report.checks
        raise exc
    return report
