"""Bagged heterogeneous classifier pool and its cached outputs over DSEL."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .baseclf import DEFAULT_SPECS, ClassifierSpec, Kind, TrainedClassifier, fit, from_parameters
from .dataio import Dataset
from .seeding import derive_rng

POOL_FORMAT_HEADER = "psdes-pool v1"
MAX_REDRAWS = 10


class PoolError(RuntimeError):
    pass


@dataclass(frozen=True)
class Provenance:
    bootstrap: int
    kind: Kind


@dataclass(frozen=True)
class Pool:
    classifiers: tuple[TrainedClassifier, ...]
    provenance: tuple[Provenance, ...]
    n_classes: int
    dsel_votes: np.ndarray | None = None      # (M, |DSEL|)
    dsel_correct: np.ndarray | None = None    # (M, |DSEL|) bool
    dsel_profiles: np.ndarray | None = None   # (|DSEL|, M*L)
    dsel_labels: np.ndarray | None = None
    dsel_proba: np.ndarray | None = None      # (M, |DSEL|, L)

    @property
    def size(self) -> int:
        return len(self.classifiers)

    @property
    def n_dims(self) -> int:
        return self.classifiers[0].n_dims

    @property
    def cached(self) -> bool:
        return self.dsel_votes is not None

    def proba(self, X: np.ndarray) -> np.ndarray:
        """Posteriors of every member: array of shape (M, n, L)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_dims:
            raise ValueError(f"expected {self.n_dims} features, got {X.shape[1]}")
        return np.stack([c.predict_proba(X) for c in self.classifiers])

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Predicted labels of every member: (M, n)."""
        return np.argmax(self.proba(X), axis=2)


def bootstrap_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("bootstrap needs at least one sample")
    return rng.integers(0, n, size=n)


def _stratified_bootstrap(y: np.ndarray, L: int, rng: np.random.Generator) -> np.ndarray:
    # resample within each class so every class keeps its original count
    parts = []
    for c in range(L):
        members = np.flatnonzero(y == c)
        if members.size:
            parts.append(rng.choice(members, size=members.size, replace=True))
    return rng.permutation(np.concatenate(parts))


def draw_bootstrap(y: np.ndarray, L: int, rng: np.random.Generator) -> np.ndarray:
    """Bootstrap that contains every class present in ``y``: redraw, then stratified fallback."""
    present = np.unique(y).size
    for _ in range(MAX_REDRAWS):
        idx = bootstrap_indices(y.size, rng)
        if np.unique(y[idx]).size == present:
            return idx
    return _stratified_bootstrap(y, L, rng)


def build_pool(
    train: Dataset,
    b: int,
    specs: Sequence[ClassifierSpec] = DEFAULT_SPECS,
    seed: int = 0,
) -> Pool:
    """Fit every spec on each of ``b`` bootstraps, bootstrap-major order.

    Bootstrap ``i`` draws from stream ``(seed, "bootstrap", i)`` and member
    ``(i, j)`` trains with stream ``(seed, "fit", i, j)``, so results do not
    depend on training order.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    if not specs:
        raise ValueError("at least one classifier spec is required")
    L = train.n_classes
    classifiers, provenance = [], []
    for i in range(b):
        idx = draw_bootstrap(train.labels, L, derive_rng(seed, "bootstrap", i))
        X, y = train.features[idx], train.labels[idx]
        for j, spec in enumerate(specs):
            try:
                clf = fit(spec, X, y, derive_rng(seed, "fit", i, j), n_classes=L)
            except Exception as exc:
                raise PoolError(f"training failed for bootstrap {i}, {spec.kind.value}: {exc}") from exc
            classifiers.append(clf)
            provenance.append(Provenance(i, spec.kind))
    return Pool(tuple(classifiers), tuple(provenance), L)


def cache_dsel_outputs(pool: Pool, dsel: Dataset) -> Pool:
    if dsel.n_dims != pool.n_dims:
        raise ValueError(f"DSEL has {dsel.n_dims} features, pool expects {pool.n_dims}")
    P = pool.proba(dsel.features)
    votes = np.argmax(P, axis=2)
    profiles = P.transpose(1, 0, 2).reshape(dsel.n_samples, -1)
    return replace(
        pool,
        dsel_votes=votes,
        dsel_correct=votes == dsel.labels[None, :],
        dsel_profiles=profiles,
        dsel_labels=dsel.labels.copy(),
        dsel_proba=P,
    )


# --------------------------------------------------------------------------- text serialization


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_pool(pool: Pool, path: str | Path) -> None:
    """Write one record per classifier: kind, bootstrap, then ``name shape values`` lines."""
    lines = [POOL_FORMAT_HEADER, f"n_classes {pool.n_classes}", f"members {pool.size}"]
    for clf, prov in zip(pool.classifiers, pool.provenance):
        params = clf.parameters()
        lines.append(f"classifier {prov.kind.value} bootstrap {prov.bootstrap}")
        for key, value in params.items():
            if key == "n_classes":
                continue
            arr = np.asarray(value, dtype=float)
            shape = "x".join(str(s) for s in arr.shape) or "scalar"
            lines.append(f"  {key} {shape} {_fmt(arr)}")
        lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_pool(path: str | Path) -> Pool:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != POOL_FORMAT_HEADER:
        raise PoolError(f"{path}: not a {POOL_FORMAT_HEADER!r} file")
    L = int(lines[1].split()[1])
    classifiers, provenance = [], []
    params: dict = {}
    kind = boot = None
    for line in lines[3:]:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "classifier":
            kind, boot, params = Kind(tok[1]), int(tok[3]), {"n_classes": L}
        elif tok[0] == "end":
            classifiers.append(from_parameters(kind, params))
            provenance.append(Provenance(boot, kind))
        else:
            shape = () if tok[1] == "scalar" else tuple(int(s) for s in tok[1].split("x"))
            params[tok[0]] = np.array([float(v) for v in tok[2:]]).reshape(shape)
    return Pool(tuple(classifiers), tuple(provenance), L)
