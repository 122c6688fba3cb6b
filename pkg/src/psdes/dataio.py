"""Dataset loading, stratified holdout splits and z-score scaling."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.5, 0.25, 0.25)


class DataError(ValueError):
    """Raised when a dataset file or split request is unusable."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    name: str = "dataset"
    # original row positions, used to check that splits partition the input
    row_ids: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if y.shape != (X.shape[0],):
            raise DataError("labels length must match feature rows")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("duplicate class names")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError("label index out of range")
        if np.isnan(X).any():
            raise DataError("features contain NaN")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(X.shape[0]))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_dims(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_names, self.name, self.row_ids[idx])

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.class_names, self.name, self.row_ids)


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    rows_dropped: int
    class_counts: dict[str, int]

    def __str__(self) -> str:
        hist = ", ".join(f"{k}: {v}" for k, v in self.class_counts.items())
        return f"rows read: {self.rows_read}; rows dropped: {self.rows_dropped}; classes: {{{hist}}}"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _has_header(first: Sequence[str]) -> bool:
    return not _is_number(first[-1]) and any(not _is_number(c) for c in first[:-1])


def load_csv_with_report(path: str | Path, name: str | None = None) -> tuple[Dataset, LoadReport]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    if _has_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: empty file")
    n_cols = len(rows[0])
    if n_cols < 2:
        raise DataError(f"{path}: zero feature columns")

    feats, label_strs, dropped = [], [], 0
    for r in rows:
        if len(r) != n_cols or r[-1] == "":
            dropped += 1
            continue
        try:
            x = [float(c) for c in r[:-1]]
        except ValueError:
            dropped += 1
            continue
        if any(np.isnan(v) for v in x):
            dropped += 1
            continue
        feats.append(x)
        label_strs.append(r[-1])

    class_names = list(dict.fromkeys(label_strs))
    if len(class_names) < 2:
        raise DataError(f"{path}: fewer than 2 classes after cleaning")
    index = {c: i for i, c in enumerate(class_names)}
    ds = Dataset(
        np.array(feats, dtype=float),
        np.array([index[s] for s in label_strs], dtype=np.int64),
        tuple(class_names),
        name or path.stem,
    )
    report = LoadReport(len(rows), dropped, dict(Counter(label_strs)))
    return ds, report


def load_csv(path: str | Path, name: str | None = None) -> Dataset:
    """Load a CSV whose last column is the class label.

    Labels are indexed by order of first appearance. Rows with a missing or
    non-numeric feature are dropped; the load report is logged at INFO.
    """
    ds, report = load_csv_with_report(path, name)
    logger.info("%s: %s", ds.name, report)
    return ds


@dataclass(frozen=True)
class SplitTriple:
    train: Dataset
    dsel: Dataset
    test: Dataset


def _largest_remainder(n: int, fractions: Sequence[float], rotate: int) -> list[int]:
    exact = [n * f for f in fractions]
    counts = [int(np.floor(e + 1e-9)) for e in exact]
    short = n - sum(counts)
    p = len(fractions)
    # ties rotate with the class index so no single part absorbs every leftover
    order = sorted(range(p), key=lambda j: (-(exact[j] - counts[j]), (j - rotate) % p))
    for j in order[:short]:
        counts[j] += 1
    return counts


def stratified_split(
    ds: Dataset,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    rng: np.random.Generator | None = None,
) -> SplitTriple:
    """Shuffle each class and deal it into train / DSEL / test proportionally."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError("fractions must be three values summing to 1")
    rng = rng if rng is not None else np.random.default_rng()
    parts: list[list[np.ndarray]] = [[], [], []]
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size < 4:
            raise DataError(f"class {ds.class_names[c]!r} has {members.size} samples; at least 4 required")
        members = rng.permutation(members)
        counts = _largest_remainder(members.size, fractions, c)
        if min(counts) < 1:
            raise DataError(f"class {ds.class_names[c]!r} too small for fractions {tuple(fractions)}")
        bounds = np.cumsum([0] + counts)
        for j in range(3):
            parts[j].append(members[bounds[j]:bounds[j + 1]])
    train, dsel, test = (ds.subset(np.sort(np.concatenate(p))) for p in parts)
    return SplitTriple(train, dsel, test)


@dataclass(frozen=True)
class ZScoreScaler:
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_dims(self) -> int:
        return self.means.shape[0]


def fit_scaler(train: Dataset) -> ZScoreScaler:
    if train.n_samples == 0:
        raise DataError("cannot fit scaler on an empty dataset")
    X = train.features
    stds = X.std(axis=0)
    stds[np.ptp(X, axis=0) == 0] = 0.0
    return ZScoreScaler(X.mean(axis=0), stds)


def apply_scaler(scaler: ZScoreScaler, ds: Dataset) -> Dataset:
    if ds.n_dims != scaler.n_dims:
        raise DataError(f"scaler expects {scaler.n_dims} features, dataset has {ds.n_dims}")
    return ds.with_features(scale_matrix(scaler, ds.features))


def scale_matrix(scaler: ZScoreScaler, X: np.ndarray) -> np.ndarray:
    safe = np.where(scaler.stds > 0, scaler.stds, 1.0)
    Z = (X - scaler.means) / safe
    Z[:, scaler.stds == 0] = 0.0
    return Z
