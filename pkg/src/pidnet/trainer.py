"""Mini-batch training, evaluation metrics and the dropout comparison."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .data import Dataset, SplitSpec, split_indices
from .errors import ParameterError, PidnetError, ShapeError, TrainingError
from .linalg import Rng
from .network import ModelParams, NetworkSpec, default_spec, forward, backward
from .optim import AdadeltaConfig, SgdConfig, mse_grad, mse_loss

# sub-streams of the run seed; stream 0 belongs to the validation split
INIT_STREAM = 1
TRAIN_STREAM = 2


@dataclass(frozen=True)
class GlorotUniform:
    """Weights ~ U(-l, l) with ``l = sqrt(6 / (fan_in + fan_out))``."""

    name: str = field(default="glorot", init=False)

    def bounds(self, fan_in: int, fan_out: int) -> tuple[float, float]:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return -limit, limit


@dataclass(frozen=True)
class FixedUniform:
    """Weights ~ U(lo, hi) regardless of layer size."""

    lo: float = -0.05
    hi: float = 0.05
    name: str = field(default="fixed", init=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParameterError(f"fixed init needs lo < hi, got ({self.lo}, {self.hi})")

    def bounds(self, fan_in: int, fan_out: int) -> tuple[float, float]:
        return self.lo, self.hi


InitRule = Union[GlorotUniform, FixedUniform]
OptimizerConfig = Union[AdadeltaConfig, SgdConfig]


def init_params(spec: NetworkSpec, rule: InitRule, rng: Rng) -> ModelParams:
    """Uniform weights per ``rule`` (row-major, layer by layer); zero biases."""
    params = ModelParams.zeros(spec)
    for w in params.weights:
        fan_out, fan_in = w.shape
        lo, hi = rule.bounds(fan_in, fan_out)
        w[...] = rng.uniform_array(w.size, lo, hi).reshape(w.shape)
    return params


@dataclass(frozen=True)
class TrainConfig:
    spec: NetworkSpec = field(default_factory=default_spec)
    epochs: int = 500
    batch_size: int = 64
    optimizer: OptimizerConfig = field(default_factory=AdadeltaConfig)
    init: InitRule = field(default_factory=FixedUniform)
    seed: int = 0
    validation_fraction: float = 0.1
    classification_threshold: float = 0.5
    stratified: bool = False

    def validate(self) -> None:
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ParameterError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ParameterError(f"batch_size must be an integer >= 1, got {self.batch_size!r}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ParameterError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )
        if not math.isfinite(self.classification_threshold):
            raise ParameterError("classification_threshold must be finite")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.validation_fraction, self.seed, self.stratified)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    sensitivity: float
    specificity: float
    mse: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int, mse: float = math.nan):
        """Derived rates are NaN when their denominator is zero."""
        total = tp + fp + tn + fn
        if total == 0:
            raise ParameterError("metrics need at least one evaluated row")
        sens = tp / (tp + fn) if tp + fn else math.nan
        spec = tn / (tn + fp) if tn + fp else math.nan
        return cls(tp, fp, tn, fn, (tp + tn) / total, sens, spec, float(mse))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    optimizer_steps: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    @property
    def last(self) -> EpochRecord:
        return self.records[-1]


def _scores(spec: NetworkSpec, params: ModelParams, features: np.ndarray) -> np.ndarray:
    score, _ = forward(spec, params, features, training=False)
    return score


def evaluate(
    spec: NetworkSpec, params: ModelParams, data: Dataset, threshold: float = 0.5
) -> Metrics:
    """Inference-mode confusion counts, rates and MSE of the raw scores."""
    if len(data) == 0:
        raise ParameterError("cannot evaluate an empty dataset")
    scores = _scores(spec, params, data.features)
    pred = scores >= threshold
    truth = data.labels == 1.0
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    tn = int(np.sum(~pred & ~truth))
    fn = int(np.sum(~pred & truth))
    return Metrics.from_counts(tp, fp, tn, fn, mse_loss(scores, data.labels))


def predict(
    spec: NetworkSpec, params: ModelParams, features, threshold: float = 0.5
) -> tuple[float, int]:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1 or x.size != spec.input_width:
        raise ShapeError(f"expected {spec.input_width} features, got shape {x.shape}")
    score, _ = forward(spec, params, x, training=False)
    return score, int(score >= threshold)


def _epoch_stats(spec, params, data: Dataset, threshold: float) -> tuple[float, float]:
    scores = _scores(spec, params, data.features)
    loss = mse_loss(scores, data.labels)
    acc = float(np.mean((scores >= threshold) == (data.labels == 1.0)))
    return loss, acc


def train(config: TrainConfig, data: Dataset) -> tuple[ModelParams, TrainHistory]:
    """Train a model; a pure function of ``(config, data)``.

    The validation rows are chosen by ``config.split_spec()``. Each epoch
    reshuffles the training rows, takes one optimizer step per mini-batch
    (the last batch may be short; its gradient is averaged over its true
    size) and then records inference-mode loss and accuracy on both parts.
    """
    config.validate()
    if len(data) == 0:
        raise ParameterError("cannot train on an empty dataset")
    spec = config.spec
    if spec.input_width != data.features.shape[1]:
        raise ShapeError(
            f"spec expects {spec.input_width} inputs but data has {data.features.shape[1]}"
        )
    train_idx, val_idx = split_indices(len(data), config.split_spec(), data.labels)
    train_set, val_set = data.subset(train_idx), data.subset(val_idx)
    x_train, y_train = train_set.features, train_set.labels
    n_train = len(train_set)
    batch_size = min(config.batch_size, n_train)

    params = init_params(spec, config.init, Rng.stream(config.seed, INIT_STREAM))
    rng = Rng.stream(config.seed, TRAIN_STREAM)
    opt = config.optimizer
    state = opt.make_state(params)
    history = TrainHistory()
    thr = config.classification_threshold

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        steps = 0
        for start in range(0, n_train, batch_size):
            idx = order[start : start + batch_size]
            score, tape = forward(spec, params, x_train[idx], rng, training=True)
            grads = backward(spec, params, tape, mse_grad(score, y_train[idx], idx.size))
            opt.step(state, params, grads)
            steps += 1
        train_loss, train_acc = _epoch_stats(spec, params, train_set, thr)
        val_loss, val_acc = _epoch_stats(spec, params, val_set, thr)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")
        history.records.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc))
        history.optimizer_steps.append(steps)
    return params, history


@dataclass(frozen=True)
class ComparisonRow:
    seed: int
    variant: str
    train_acc: float
    val_acc: float

    @property
    def gap(self) -> float:
        return self.train_acc - self.val_acc


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    failures: list[tuple[int, str]] = field(default_factory=list)

    VARIANTS = ("dropout", "no_dropout")

    def variant_rows(self, variant: str) -> list[ComparisonRow]:
        return [r for r in self.rows if r.variant == variant]

    def mean(self, variant: str) -> ComparisonRow:
        """Mean row for ``variant``; its ``seed`` is -1."""
        rows = self.variant_rows(variant)
        if not rows:
            raise ParameterError(f"no successful runs for variant {variant!r}")
        return ComparisonRow(
            -1,
            variant,
            float(np.mean([r.train_acc for r in rows])),
            float(np.mean([r.val_acc for r in rows])),
        )

    @property
    def gap_difference(self) -> float:
        """Mean gap without dropout minus mean gap with dropout."""
        return self.mean("no_dropout").gap - self.mean("dropout").gap

    @property
    def gap_reduced(self) -> bool:
        return self.mean("dropout").gap <= self.mean("no_dropout").gap


def _train_pair(base: TrainConfig, data: Dataset, seed: int):
    try:
        out = []
        for variant, spec in (
            ("dropout", base.spec),
            ("no_dropout", base.spec.without_dropout()),
        ):
            _, hist = train(replace(base, spec=spec, seed=seed), data)
            out.append(ComparisonRow(seed, variant, hist.last.train_acc, hist.last.val_acc))
        return out, None
    except PidnetError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_comparison(
    base: TrainConfig, data: Dataset, seeds: Sequence[int], workers: int = 1
) -> ComparisonReport:
    """Train with and without dropout for every seed and collect final accuracies.

    A seed whose training fails is recorded in ``failures`` and skipped.
    ``workers > 1`` trains seeds in separate processes; results are the same
    as a serial run and are ordered by the given seeds.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ParameterError(f"comparison needs at least 2 seeds, got {len(seeds)}")
    base.validate()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_pair, [base] * len(seeds), [data] * len(seeds), seeds))
    else:
        results = [_train_pair(base, data, s) for s in seeds]
    report = ComparisonReport(rows=[])
    for seed, (rows, err) in zip(seeds, results):
        if err is not None:
            report.failures.append((seed, err))
        else:
            report.rows.extend(rows)
    return report
