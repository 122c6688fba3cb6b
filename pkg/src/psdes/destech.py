"""Selection criteria of the four DES techniques: KNORA-U, KNOP, DES-P and META-DES.

Every selector returns a non-empty :class:`SelectedEnsemble`; when a criterion
keeps no classifier the whole pool is used instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dataio import Dataset
from .pool import Pool
from .regions import (
    ProfileNeighborhood,
    QueryOutputs,
    RegionOfCompetence,
    compute_roc,
    profile_neighbors,
)


class Technique(str, Enum):
    KNORA_U = "knora_u"
    KNOP = "knop"
    DES_P = "des_p"
    META_DES = "meta_des"


@dataclass
class SelectedEnsemble:
    technique: Technique | str
    member_indices: np.ndarray
    votes: np.ndarray
    potential: float | None = None
    fallback: bool = False
    # per-member hit counts (KNORA-U / KNOP); kept for provenance only, never used to weight votes
    hits: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.member_indices) == 0:
            raise ValueError("ensemble must have at least one member")
        if len(self.votes) != len(self.member_indices):
            raise ValueError("one vote per member required")


def _ensemble(technique, mask: np.ndarray, query: QueryOutputs, hits=None) -> SelectedEnsemble:
    fallback = not mask.any()
    members = np.arange(mask.size) if fallback else np.flatnonzero(mask)
    return SelectedEnsemble(
        technique,
        members,
        query.votes[members],
        fallback=fallback,
        hits=None if hits is None else hits[members],
    )


def _require_cache(pool: Pool):
    if not pool.cached:
        raise ValueError("pool DSEL outputs are not cached")


def knora_u_select(pool: Pool, roc: RegionOfCompetence, query: QueryOutputs) -> SelectedEnsemble:
    """Keep every classifier that is correct on at least one RoC sample."""
    _require_cache(pool)
    hits = pool.dsel_correct[:, roc.indices].sum(axis=1)
    return _ensemble(Technique.KNORA_U, hits > 0, query, hits)


def knop_select(pool: Pool, query: QueryOutputs, nbhd: ProfileNeighborhood) -> SelectedEnsemble:
    """KNORA-U rule applied to the nearest DSEL samples in output-profile space."""
    _require_cache(pool)
    hits = pool.dsel_correct[:, nbhd.indices].sum(axis=1)
    return _ensemble(Technique.KNOP, hits > 0, query, hits)


def desp_select(pool: Pool, roc: RegionOfCompetence, query: QueryOutputs, n_classes: int) -> SelectedEnsemble:
    """Keep classifiers whose local accuracy strictly beats random guessing (1/L)."""
    _require_cache(pool)
    if n_classes < 2:
        raise ValueError("need at least two classes")
    local_acc = pool.dsel_correct[:, roc.indices].mean(axis=1)
    return _ensemble(Technique.DES_P, local_acc > 1.0 / n_classes, query)


# --------------------------------------------------------------------------- META-DES


def meta_feature_length(k: int, kp: int) -> int:
    return 2 * k + kp + 2


def meta_features_all(
    pool: Pool, query: QueryOutputs, roc: RegionOfCompetence, nbhd: ProfileNeighborhood
) -> np.ndarray:
    """Meta-feature rows for every pool member, shape (M, 2K + Kp + 2).

    Column blocks: RoC correctness bits, posterior of each RoC sample's true
    class, mean RoC correctness, correctness on profile neighbours, and the
    member's confidence in its own prediction for the query.
    """
    _require_cache(pool)
    ridx = roc.indices
    f1 = pool.dsel_correct[:, ridx].astype(float)
    f2 = pool.dsel_proba[:, ridx, pool.dsel_labels[ridx]]
    f3 = f1.mean(axis=1, keepdims=True)
    f4 = pool.dsel_correct[:, nbhd.indices].astype(float)
    f5 = query.proba.max(axis=1, keepdims=True)
    return np.hstack([f1, f2, f3, f4, f5])


def metades_meta_features(
    pool: Pool, i: int, query: QueryOutputs, roc: RegionOfCompetence, nbhd: ProfileNeighborhood
) -> np.ndarray:
    return meta_features_all(pool, query, roc, nbhd)[i]


@dataclass(frozen=True)
class MetaModel:
    """Naive Bayes over binarised meta-features predicting "classifier is competent"."""

    log_prior: np.ndarray        # (2,)
    log_p_on: np.ndarray         # (2, F): log P(feature bin = 1 | meta-class)
    log_p_off: np.ndarray        # (2, F)
    threshold: float = 0.5
    bin_threshold: float = 0.5
    degenerate: bool = False
    n_examples: int = 0

    def competence(self, features: np.ndarray) -> np.ndarray:
        if self.degenerate:
            return np.full(features.shape[0], np.nan)
        on = features > self.bin_threshold
        jll = self.log_prior + on.astype(float) @ self.log_p_on.T + (~on).astype(float) @ self.log_p_off.T
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p[:, 1] / p.sum(axis=1)


def fit_meta_model(
    features: np.ndarray,
    labels: np.ndarray,
    alpha: float = 1.0,
    threshold: float = 0.5,
    bin_threshold: float = 0.5,
) -> MetaModel:
    labels = np.asarray(labels, dtype=bool)
    F = features.shape[1] if features.ndim == 2 else 0
    counts = np.array([np.sum(~labels), np.sum(labels)], dtype=float)
    if counts.min() == 0:
        return MetaModel(np.zeros(2), np.zeros((2, F)), np.zeros((2, F)), threshold, bin_threshold, True, labels.size)
    on = features > bin_threshold
    on_counts = np.vstack([on[~labels].sum(axis=0), on[labels].sum(axis=0)]).astype(float)
    p_on = (on_counts + alpha) / (counts[:, None] + 2 * alpha)
    return MetaModel(
        np.log(counts / counts.sum()),
        np.log(p_on),
        np.log1p(-p_on),
        threshold,
        bin_threshold,
        False,
        labels.size,
    )


def consensus_ratio(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Fraction of the pool voting for the plurality class, per column of ``votes`` (M, n)."""
    counts = np.stack([(votes == c).sum(axis=0) for c in range(n_classes)])
    return counts.max(axis=0) / votes.shape[0]


def metades_training_set(pool: Pool, dsel: Dataset, hc: float, k: int, kp: int):
    """Meta-examples from DSEL using leave-one-out neighbourhoods.

    Samples on which the pool consensus reaches ``hc`` are skipped.
    """
    _require_cache(pool)
    keep = np.flatnonzero(consensus_ratio(pool.dsel_votes, pool.n_classes) < hc)
    feats, labels = [], []
    for j in keep:
        q = QueryOutputs(dsel.features[j], pool.dsel_proba[:, j, :])
        roc = compute_roc(dsel.features[j], dsel, k, exclude=j)
        nbhd = profile_neighbors(pool.dsel_profiles[j], pool, kp, exclude=j)
        feats.append(meta_features_all(pool, q, roc, nbhd))
        labels.append(pool.dsel_correct[:, j])
    F = meta_feature_length(k, kp)
    if not feats:
        return np.zeros((0, F)), np.zeros(0, dtype=bool)
    return np.vstack(feats), np.concatenate(labels)


def metades_train(
    pool: Pool,
    dsel: Dataset,
    hc: float = 1.0,
    k: int = 7,
    kp: int = 5,
    threshold: float = 0.5,
) -> MetaModel:
    X, y = metades_training_set(pool, dsel, hc, k, kp)
    return fit_meta_model(X, y, threshold=threshold)


def metades_select(
    model: MetaModel,
    pool: Pool,
    query: QueryOutputs,
    roc: RegionOfCompetence,
    nbhd: ProfileNeighborhood,
) -> SelectedEnsemble:
    if model.degenerate:
        return _ensemble(Technique.META_DES, np.zeros(pool.size, dtype=bool), query)
    competence = model.competence(meta_features_all(pool, query, roc, nbhd))
    return _ensemble(Technique.META_DES, competence > model.threshold, query)
