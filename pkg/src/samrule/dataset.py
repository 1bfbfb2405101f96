"""Binary datasets: loading, binarization, replication and uniform sampling."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Malformed input data (bad cell, missing column, empty file, ...)."""


def bits_from_bool(column: np.ndarray) -> int:
    """Pack a boolean vector into a Python int, bit i set iff column[i]."""
    packed = np.packbits(np.asarray(column, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def bool_from_bits(bits: int, n: int) -> np.ndarray:
    raw = bits.to_bytes((n + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=n, bitorder="little").astype(bool)


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """n instances over d binary features with binary labels.

    ``features`` is stored row-major as uint8; the per-feature coverage bitsets
    used by the solver (``column_bits``) are built lazily and cached.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.uint8)
        y = np.ascontiguousarray(self.labels, dtype=np.uint8).reshape(-1)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1:
            raise DatasetError("dataset is empty")
        if d < 1:
            raise DatasetError("dataset has no features")
        if y.shape[0] != n:
            raise DatasetError(f"{y.shape[0]} labels for {n} instances")
        if X.max(initial=0) > 1 or y.max(initial=0) > 1:
            raise DatasetError("features and labels must be 0/1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != d:
            raise DatasetError(f"{len(names)} feature names for {d} features")
        if len(set(names)) != d:
            raise DatasetError("feature names must be distinct")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @cached_property
    def column_bits(self) -> tuple[int, ...]:
        """Coverage bitset of every feature (bit i = instance i has the feature)."""
        cols = np.asfortranarray(self.features)
        return tuple(bits_from_bool(cols[:, j]) for j in range(self.d))

    @cached_property
    def label_bits(self) -> int:
        return bits_from_bool(self.labels)

    @property
    def all_bits(self) -> int:
        return (1 << self.n) - 1

    @cached_property
    def constant_features(self) -> tuple[int, ...]:
        """Indices of all-0 or all-1 columns (kept, but flagged)."""
        sums = self.features.sum(axis=0, dtype=np.int64)
        return tuple(int(j) for j in np.flatnonzero((sums == 0) | (sums == self.n)))

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown feature name {name!r}") from None

    def subset(self, rows: np.ndarray) -> "BinaryDataset":
        return BinaryDataset(self.features[rows], self.labels[rows], self.feature_names)

    def equals(self, other: "BinaryDataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def to_csv(self, path, label_column: str = "label") -> None:
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame[label_column] = self.labels
        frame.to_csv(path, index=False)


def load_binary_csv(path, label_column: str) -> BinaryDataset:
    """Read a 0/1 CSV with a header row; ``label_column`` becomes the labels."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DatasetError(f"{path}: no such file")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, engine="c")
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path}: empty file") from None
    except pd.errors.ParserError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if label_column not in frame.columns:
        raise DatasetError(f"{path}: label column {label_column!r} not in header")
    if len(frame) == 0:
        raise DatasetError(f"{path}: dataset is empty")
    names = [c for c in frame.columns if c != label_column]
    if not names:
        raise DatasetError(f"{path}: no feature columns")
    cells = frame[names + [label_column]].to_numpy()
    ones = cells == "1"
    bad = ~(ones | (cells == "0"))
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        colname = (names + [label_column])[col]
        # +2: header is line 1, rows are 0-based
        raise DatasetError(
            f"{path}: line {row + 2}, column {colname!r}: non-binary value {cells[row, col]!r}"
        )
    ones = ones.astype(np.uint8)
    return BinaryDataset(ones[:, :-1], ones[:, -1], tuple(names))


@dataclass(frozen=True)
class ContinuousTable:
    """Mixed numeric/categorical table with a designated label column."""

    frame: pd.DataFrame
    label_column: str
    positive_label: object = None

    def __post_init__(self):
        if self.label_column not in self.frame.columns:
            raise DatasetError(f"label column {self.label_column!r} not in table")
        if len(self.frame) == 0:
            raise DatasetError("table is empty")

    @classmethod
    def from_csv(cls, path, label_column: str, positive_label=None) -> "ContinuousTable":
        path = os.fspath(path)
        if not os.path.exists(path):
            raise DatasetError(f"{path}: no such file")
        try:
            frame = pd.read_csv(path, skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise DatasetError(f"{path}: empty file") from None
        except pd.errors.ParserError as exc:
            raise DatasetError(f"{path}: {exc}") from None
        return cls(frame, label_column, positive_label)

    def label_vector(self) -> np.ndarray:
        col = self.frame[self.label_column]
        if col.isna().any():
            raise DatasetError(f"label column {self.label_column!r} has missing values")
        if self.positive_label is not None:
            return (col.astype(str) == str(self.positive_label)).to_numpy(np.uint8)
        values = pd.to_numeric(col, errors="coerce")
        if values.isna().any() or not set(values.unique()) <= {0, 1}:
            raise DatasetError(
                f"label column {self.label_column!r} is not 0/1 "
                "(pass a positive label to map it)"
            )
        return values.to_numpy().astype(np.uint8)


def format_threshold(t: float) -> str:
    return np.format_float_positional(float(t), trim="-")


def quantile_thresholds(values: np.ndarray, thresholds: int) -> list[float]:
    """Split points for one numeric column.

    Linear-interpolation quantiles at i/(thresholds+1), deduplicated.  A
    threshold at or below the column minimum would yield a constant feature and
    is dropped; a two-valued column gets the single split at its larger value.
    """
    values = np.asarray(values, dtype=float)
    distinct = np.unique(values)
    if distinct.size == 2:
        return [float(distinct[1])]
    qs = np.arange(1, thresholds + 1) / (thresholds + 1)
    cuts = np.unique(np.quantile(values, qs, method="linear"))
    return [float(t) for t in cuts if t > distinct[0]]


def binarize(table: ContinuousTable, thresholds: int = 4) -> BinaryDataset:
    """Turn a mixed table into binary features.

    Numeric column f with split t gives "f>=t" and "f<t"; categorical column
    f gives one "f=v" indicator per distinct value v.
    """
    if thresholds < 1:
        raise DatasetError("thresholds must be >= 1")
    labels = table.label_vector()
    frame = table.frame.drop(columns=[table.label_column])
    if frame.shape[1] == 0:
        raise DatasetError("no numeric or categorical columns")
    columns: list[np.ndarray] = []
    names: list[str] = []
    for name in frame.columns:
        col = frame[name]
        if col.isna().any():
            raise DatasetError(f"column {name!r} has missing values")
        if pd.api.types.is_bool_dtype(col):
            col = col.astype(np.int64)
        if pd.api.types.is_numeric_dtype(col):
            values = col.to_numpy(dtype=float)
            if np.unique(values).size < 2:
                log.warning("column %r is constant; skipped", name)
                continue
            for t in quantile_thresholds(values, thresholds):
                label = format_threshold(t)
                columns.append(values >= t)
                names.append(f"{name}>={label}")
                columns.append(values < t)
                names.append(f"{name}<{label}")
        else:
            values = col.astype(str).to_numpy()
            for v in sorted(set(values)):
                columns.append(values == v)
                names.append(f"{name}={v}")
    if not columns:
        raise DatasetError("binarization produced no features")
    X = np.column_stack(columns).astype(np.uint8)
    return BinaryDataset(X, labels, tuple(names))


def replicate(ds: BinaryDataset, r: int) -> BinaryDataset:
    """Copy every instance r times (copies adjacent); rule-list losses are unchanged."""
    if r < 1:
        raise DatasetError(f"replication factor must be >= 1, got {r}")
    if r == 1:
        return ds
    return BinaryDataset(np.repeat(ds.features, r, axis=0), np.repeat(ds.labels, r), ds.feature_names)


@dataclass(frozen=True)
class SampleSpec:
    m: int
    seed: int = 0
    with_replacement: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise DatasetError(f"sample size must be >= 1, got {self.m}")


def sample_indices(n: int, spec: SampleSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    if spec.with_replacement:
        return rng.integers(0, n, size=spec.m)
    if spec.m > n:
        raise DatasetError(f"cannot draw {spec.m} of {n} instances without replacement")
    return np.sort(rng.choice(n, size=spec.m, replace=False))


def draw_sample(ds: BinaryDataset, spec: SampleSpec) -> BinaryDataset:
    """m instances drawn uniformly (i.i.d. with replacement by default)."""
    return ds.subset(sample_indices(ds.n, spec))


def planted_dataset(
    n: int = 10_000,
    d: int = 16,
    noise: float = 0.05,
    seed: int = 0,
    density: Sequence[float] | None = None,
) -> tuple[BinaryDataset, list[tuple[int, int]], int]:
    """Synthetic data labelled by a planted 3-rule list plus label noise.

    Returns the dataset, the generating rules as (feature, prediction) pairs
    and the generating default prediction.
    """
    if d < 3:
        raise DatasetError("planted dataset needs d >= 3")
    rng = np.random.default_rng(seed)
    if density is None:
        density = rng.uniform(0.15, 0.6, size=d)
    X = (rng.random((n, d)) < np.asarray(density)).astype(np.uint8)
    rules = [(1, 1), (4 % d, 0), (7 % d, 1)]
    default = 0
    y = np.full(n, default, dtype=np.uint8)
    done = np.zeros(n, dtype=bool)
    for feature, prediction in rules:
        fire = (X[:, feature] == 1) & ~done
        y[fire] = prediction
        done |= fire
    flip = rng.random(n) < noise
    y[flip] ^= 1
    names = tuple(f"x{j}" for j in range(d))
    return BinaryDataset(X, y, names), rules, default
