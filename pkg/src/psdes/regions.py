"""Neighbourhoods shared by the DES techniques.

The region of competence (RoC) is the k nearest DSEL samples of a query in
feature space; KNOP and META-DES additionally look for neighbours in the
space of pool output profiles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import Dataset
from .pool import Pool


@dataclass(frozen=True)
class Neighborhood:
    indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]


class RegionOfCompetence(Neighborhood):
    """k nearest DSEL rows in feature space, nearest first."""


class ProfileNeighborhood(Neighborhood):
    """Kp nearest DSEL rows in output-profile space, nearest first."""


def nearest(query: np.ndarray, reference: np.ndarray, k: int, exclude: int | None = None):
    """Exact k-NN by Euclidean distance; ties go to the lower reference index."""
    n = reference.shape[0] - (exclude is not None)
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    d = cdist(np.atleast_2d(query), reference)[0]
    if exclude is not None:
        d[exclude] = np.inf
    order = np.argsort(d, kind="stable")[:k]
    return order, d[order]


def nearest_batch(queries: np.ndarray, reference: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`nearest` for a matrix of queries."""
    if k < 1 or k > reference.shape[0]:
        raise ValueError(f"k={k} must lie in [1, {reference.shape[0]}]")
    D = cdist(np.atleast_2d(queries), reference)
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(D, order, axis=1)


def compute_roc(x_q: np.ndarray, dsel: Dataset, k: int, exclude: int | None = None) -> RegionOfCompetence:
    if k > dsel.n_samples:
        raise ValueError(f"k={k} exceeds DSEL size {dsel.n_samples}")
    return RegionOfCompetence(*nearest(x_q, dsel.features, k, exclude))


@dataclass(frozen=True)
class QueryOutputs:
    """Pool posteriors for one query; votes and the output profile derive from them."""

    x: np.ndarray
    proba: np.ndarray  # (M, L)

    @property
    def votes(self) -> np.ndarray:
        return np.argmax(self.proba, axis=1)

    @property
    def profile(self) -> np.ndarray:
        return self.proba.reshape(-1)


def query_outputs(pool: Pool, x: np.ndarray) -> QueryOutputs:
    x = np.asarray(x, dtype=float)
    return QueryOutputs(x, pool.proba(x[None, :])[:, 0, :])


def output_profile(pool: Pool, x: np.ndarray) -> np.ndarray:
    """Concatenated posterior vectors of every pool member, in pool order (length M*L)."""
    return query_outputs(pool, x).profile


def profile_neighbors(profile: np.ndarray, pool: Pool, kp: int, exclude: int | None = None) -> ProfileNeighborhood:
    if pool.dsel_profiles is None:
        raise ValueError("pool DSEL outputs are not cached")
    if kp > pool.dsel_profiles.shape[0]:
        raise ValueError(f"kp={kp} exceeds DSEL size {pool.dsel_profiles.shape[0]}")
    return ProfileNeighborhood(*nearest(profile, pool.dsel_profiles, kp, exclude))
