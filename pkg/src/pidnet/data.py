"""Loading, summarising and splitting the Pima Indians Diabetes table.

Features are kept exactly as read: no scaling, imputation, or removal of
the zero placeholders the raw file uses for missing measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError, SchemaError
from .linalg import Rng

N_FEATURES = 8

COLUMN_NAMES = (
    "pregnancies",
    "glucose",
    "blood_pressure",
    "skin_thickness",
    "insulin",
    "bmi",
    "pedigree",
    "age",
)

COLUMN_LABELS = (
    "Pregnancy count",
    "Plasma glucose concentration",
    "Diastolic blood pressure (mm Hg)",
    "Triceps skin fold thickness (mm)",
    "2-hour serum insulin (uU/ml)",
    "Body mass index",
    "Diabetes pedigree function",
    "Age (years)",
)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    column_names: tuple = COLUMN_NAMES

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != N_FEATURES:
            raise SchemaError(f"expected an (n, {N_FEATURES}) feature matrix, got {f.shape}")
        if y.shape != (f.shape[0],):
            raise SchemaError(f"{f.shape[0]} feature rows but {y.size} labels")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise SchemaError("features must be finite and nonnegative")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise SchemaError("labels must be 0 or 1")
        f.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    def __len__(self):
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.intp)
        return Dataset(self.features[index], self.labels[index], self.column_names)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_pid(lines, source: str = "<input>") -> Dataset:
    """Parse PID records from an iterable of text lines."""
    rows, labels = [], []
    first = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if first:
            first = False
            if not _is_number(fields[0]):
                continue
        if len(fields) != N_FEATURES + 1:
            raise SchemaError(
                f"{source}: expected {N_FEATURES + 1} fields, found {len(fields)}",
                line=lineno,
            )
        values = []
        for col, text in enumerate(fields, start=1):
            try:
                v = float(text)
            except ValueError:
                raise ParseError(f"{source}: not a number: {text!r}", lineno, col) from None
            if not math.isfinite(v):
                raise ParseError(f"{source}: non-finite value {text!r}", lineno, col)
            values.append(v)
        label = values.pop()
        if label not in (0.0, 1.0):
            raise SchemaError(
                f"{source}: label must be 0 or 1, got {fields[-1]!r}", lineno, N_FEATURES + 1
            )
        for col, v in enumerate(values, start=1):
            if v < 0:
                raise SchemaError(f"{source}: negative feature value {v}", lineno, col)
        rows.append(values)
        labels.append(label)
    if not rows:
        raise SchemaError(f"{source}: no data records")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.float64))


def load_pid(path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return parse_pid(fh, source=str(path))


@dataclass(frozen=True)
class ColumnStats:
    name: str
    mean: float
    std: float
    min: float
    max: float


def column_stats(d: Dataset) -> list[ColumnStats]:
    """Population statistics (variance divided by n) of every feature column."""
    if len(d) == 0:
        raise ParameterError("column_stats needs a nonempty dataset")
    f = d.features
    mean = f.mean(axis=0)
    std = f.std(axis=0, ddof=0)
    lo = f.min(axis=0)
    hi = f.max(axis=0)
    # mean of a constant column can drift by an ulp; keep min <= mean <= max
    mean = np.clip(mean, lo, hi)
    return [
        ColumnStats(name, float(m), float(s), float(a), float(b))
        for name, m, s, a, b in zip(d.column_names, mean, std, lo, hi)
    ]


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float = 0.1
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ParameterError(
                f"validation fraction must be in (0, 1), got {self.validation_fraction}"
            )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def validation_size(n: int, fraction: float) -> int:
    return max(1, _round_half_up(n * fraction))


def split_indices(n: int, spec: SplitSpec, labels=None) -> tuple[np.ndarray, np.ndarray]:
    """Row indices ``(train, validation)`` for a seeded holdout split.

    Rows are shuffled by a permutation drawn from ``Rng(spec.seed)`` and the
    last ``round(n * fraction)`` shuffled rows form the validation set. With
    ``stratified`` each class is split separately with the same rule.
    """
    n_val = validation_size(n, spec.validation_fraction)
    if n_val >= n:
        raise ParameterError(
            f"validation fraction {spec.validation_fraction} leaves no training rows out of {n}"
        )
    rng = Rng(spec.seed)
    if not spec.stratified:
        perm = rng.permutation(n)
        return np.sort(perm[: n - n_val]), np.sort(perm[n - n_val :])
    if labels is None:
        raise ParameterError("stratified split needs labels")
    labels = np.asarray(labels)
    train, val = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        k = validation_size(idx.size, spec.validation_fraction) if idx.size > 1 else 0
        perm = idx[rng.permutation(idx.size)]
        train.append(perm[: idx.size - k])
        val.append(perm[idx.size - k :])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    train_idx, val_idx = split_indices(len(d), spec, d.labels)
    return d.subset(train_idx), d.subset(val_idx)
