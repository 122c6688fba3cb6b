"""Post-selection over the ensembles proposed by several DES techniques.

For a query, every technique in ``des_set`` proposes an ensemble. Each
ensemble's *potential* scores how well its members agree with the ensemble's
own majority vote (the query label is unknown, so the majority vote stands in
for it). The highest-potential ensemble is kept, later techniques winning
ties, and its members are combined by majority vote.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .dataio import Dataset
from .destech import (
    MetaModel,
    SelectedEnsemble,
    Technique,
    desp_select,
    knop_select,
    knora_u_select,
    metades_select,
)
from .evalstats import accuracy, f1_for_label, mcc
from .pool import Pool
from .regions import QueryOutputs, RegionOfCompetence, compute_roc, profile_neighbors, query_outputs
from .seeding import derive_rng

DEFAULT_DES_SET = (Technique.KNORA_U, Technique.KNOP, Technique.DES_P, Technique.META_DES)


class PotentialKind(str, Enum):
    ACCURACY = "accuracy"
    F_SCORE = "f_score"
    MCC = "mcc"
    RANDOM = "random"


class FConvention(str, Enum):
    MAJORITY_LABEL = "majority_label"
    FIXED_LABEL_ONE = "fixed_label_one"


@dataclass(frozen=True)
class PotentialMetric:
    kind: PotentialKind = PotentialKind.ACCURACY
    f_positive_convention: FConvention = FConvention.MAJORITY_LABEL

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        object.__setattr__(self, "f_positive_convention", FConvention(self.f_positive_convention))


def majority_vote(votes: Sequence[int]) -> int:
    """Plurality label; ties go to the lowest class index."""
    v = np.asarray(votes, dtype=np.int64)
    if v.size == 0:
        raise ValueError("cannot take a majority of zero votes")
    return int(np.argmax(np.bincount(v)))


def potential(votes: Sequence[int], metric: PotentialMetric, rng: np.random.Generator | None = None) -> float:
    """Score an ensemble by comparing each member's vote with the ensemble's majority vote."""
    v = np.asarray(votes, dtype=np.int64)
    winner = majority_vote(v)
    truth = np.full_like(v, winner)
    kind = metric.kind
    if kind is PotentialKind.ACCURACY:
        return accuracy(truth, v)
    if kind is PotentialKind.F_SCORE:
        positive = winner if metric.f_positive_convention is FConvention.MAJORITY_LABEL else 1
        return f1_for_label(truth, v, positive)
    if kind is PotentialKind.MCC:
        return mcc(truth, v)
    if rng is None:
        raise ValueError("random potential requires a seeded generator")
    return float(rng.random())


def combine(ensemble: SelectedEnsemble) -> int:
    return majority_vote(ensemble.votes)


def post_select(
    candidates: Sequence[SelectedEnsemble],
    metric: PotentialMetric,
    rng: np.random.Generator | None = None,
) -> SelectedEnsemble:
    """Keep the candidate with the highest potential; ``>=`` lets later candidates win ties.

    Candidates are scored on copies, so the same proposals can be post-selected
    under several metrics.
    """
    if not candidates:
        raise ValueError("no candidate ensembles")
    pot_max = 0.0
    chosen = None
    for cand in candidates:
        pot = potential(cand.votes, metric, rng)
        if pot >= pot_max:
            pot_max = pot
            chosen = cand
    if chosen is None:  # only reachable if every potential were negative
        raise RuntimeError("no ensemble reached the initial potential")
    return SelectedEnsemble(
        chosen.technique, chosen.member_indices, chosen.votes, pot_max, chosen.fallback, chosen.hits
    )


def random_post_select(ensembles: Sequence[SelectedEnsemble], rng: np.random.Generator) -> SelectedEnsemble:
    if not ensembles:
        raise ValueError("no candidate ensembles")
    return ensembles[int(rng.integers(len(ensembles)))]


@dataclass
class PsDesSystem:
    """Everything needed to classify a query: the cached pool, DSEL, and technique setup."""

    pool: Pool
    dsel: Dataset
    des_set: tuple[Technique, ...] = DEFAULT_DES_SET
    potential_metric: PotentialMetric = field(default_factory=PotentialMetric)
    k: int = 7
    kp_knop: int = 7
    kp_meta: int = 5
    meta_model: MetaModel | None = None
    seed: int = 0

    def __post_init__(self):
        self.des_set = tuple(Technique(t) for t in self.des_set)
        if not self.des_set:
            raise ValueError("des_set must not be empty")
        if not self.pool.cached:
            raise ValueError("pool DSEL outputs must be cached")
        if Technique.META_DES in self.des_set and self.meta_model is None:
            raise ValueError("META-DES requires a trained meta model")

    def query_rng(self, query_index: int, stream: str) -> np.random.Generator:
        return derive_rng(self.seed, stream, query_index)


def candidate_ensembles(
    x_q: np.ndarray,
    system: PsDesSystem,
    techniques: Sequence[Technique] | None = None,
    roc: RegionOfCompetence | None = None,
    query: QueryOutputs | None = None,
) -> tuple[RegionOfCompetence, dict[Technique, SelectedEnsemble]]:
    """One RoC for the query, shared by every technique; returns it with each proposal."""
    techniques = system.des_set if techniques is None else tuple(Technique(t) for t in techniques)
    pool = system.pool
    query = query if query is not None else query_outputs(pool, x_q)
    roc = roc if roc is not None else compute_roc(query.x, system.dsel, system.k)
    out: dict[Technique, SelectedEnsemble] = {}
    profile_nbhds: dict[int, object] = {}

    def nbhd(kp):
        if kp not in profile_nbhds:
            profile_nbhds[kp] = profile_neighbors(query.profile, pool, kp)
        return profile_nbhds[kp]

    for tech in techniques:
        if tech is Technique.KNORA_U:
            out[tech] = knora_u_select(pool, roc, query)
        elif tech is Technique.KNOP:
            out[tech] = knop_select(pool, query, nbhd(system.kp_knop))
        elif tech is Technique.DES_P:
            out[tech] = desp_select(pool, roc, query, pool.n_classes)
        else:
            out[tech] = metades_select(system.meta_model, pool, query, roc, nbhd(system.kp_meta))
    return roc, out


def ps_des_select(x_q: np.ndarray, system: PsDesSystem, query_index: int = 0) -> SelectedEnsemble:
    _, cands = candidate_ensembles(x_q, system)
    rng = system.query_rng(query_index, "potential") if system.potential_metric.kind is PotentialKind.RANDOM else None
    return post_select([cands[t] for t in system.des_set], system.potential_metric, rng)


def classify(x_q: np.ndarray, system: PsDesSystem, query_index: int = 0) -> int:
    return combine(ps_des_select(x_q, system, query_index))
