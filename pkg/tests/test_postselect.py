import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psdes.destech import SelectedEnsemble, Technique
from psdes.postselect import (
    FConvention,
    PotentialKind,
    PotentialMetric,
    PsDesSystem,
    candidate_ensembles,
    classify,
    combine,
    majority_vote,
    post_select,
    potential,
    ps_des_select,
    random_post_select,
)

ACC = PotentialMetric(PotentialKind.ACCURACY)
F = PotentialMetric(PotentialKind.F_SCORE)
MCC = PotentialMetric(PotentialKind.MCC)
WORKED = [0, 1, 0, 0, 1, 1, 1]


def ens(votes, tech="knora_u"):
    votes = np.asarray(votes)
    return SelectedEnsemble(Technique(tech), np.arange(votes.size), votes)


def test_majority_vote_examples():
    assert majority_vote(WORKED) == 1
    assert majority_vote([0, 0, 1, 1]) == 0
    assert majority_vote([2, 2, 2]) == 2
    with pytest.raises(ValueError):
        majority_vote([])


def test_worked_example_potentials():
    assert potential(WORKED, ACC) == pytest.approx(4 / 7, abs=1e-15)
    assert potential(WORKED, F) == pytest.approx(8 / 11, abs=1e-15)
    assert potential(WORKED, MCC) == 0.0
    assert potential([3, 3, 3], ACC) == 1.0


def test_fixed_label_one_convention():
    metric = PotentialMetric(PotentialKind.F_SCORE, FConvention.FIXED_LABEL_ONE)
    assert potential(WORKED, metric) == pytest.approx(8 / 11)
    # majority is class 0: nothing in the truth vector is positive
    assert potential([0, 0, 1], metric) == 0.0


def test_random_potential_needs_generator():
    with pytest.raises(ValueError):
        potential([0, 1], PotentialMetric(PotentialKind.RANDOM))
    p = potential([0, 1], PotentialMetric(PotentialKind.RANDOM), np.random.default_rng(0))
    assert 0 <= p < 1


vote_lists = st.lists(st.integers(0, 4), min_size=1, max_size=40)


@settings(max_examples=300, deadline=None)
@given(votes=vote_lists)
def test_potential_closed_forms(votes):
    n = len(votes)
    a = max(votes.count(c) for c in set(votes))
    assert potential(votes, ACC) == pytest.approx(a / n, abs=1e-12)
    assert potential(votes, F) == pytest.approx(2 * a / (n + a), abs=1e-12)
    assert potential(votes, MCC) == 0.0


@settings(max_examples=300, deadline=None)
@given(votes=vote_lists)
def test_potential_ranges(votes):
    acc, f = potential(votes, ACC), potential(votes, F)
    present = len(set(votes))
    assert 1 / present - 1e-12 <= acc <= 1
    assert 0 < f <= 1
    unanimous = present == 1
    assert (acc == 1) == unanimous and (f == 1) == unanimous


@settings(max_examples=300, deadline=None)
@given(a=vote_lists, b=vote_lists)
def test_accuracy_and_f_potentials_order_identically(a, b):
    da = potential(a, ACC) - potential(b, ACC)
    df = potential(a, F) - potential(b, F)
    assert np.sign(round(da, 12)) == np.sign(round(df, 12))


def test_post_select_ties_go_to_later_candidate():
    first, second = ens([0, 0, 1], "knora_u"), ens([1, 1, 0], "knop")
    assert post_select([first, second], ACC).technique is Technique.KNOP
    only = post_select([ens([0, 1, 2, 3])], ACC)
    assert only.technique is Technique.KNORA_U and only.potential == 0.25
    with pytest.raises(ValueError):
        post_select([], ACC)


def test_post_select_does_not_mutate_candidates():
    c = ens([0, 0, 1])
    out = post_select([c], ACC)
    assert c.potential is None and out.potential == pytest.approx(2 / 3)


def brute_force_argmax(cands, metric):
    scores = [potential(c.votes, metric) for c in cands]
    best = max(scores)
    return max(i for i, s in enumerate(scores) if s == best)


@settings(max_examples=200, deadline=None)
@given(lists=st.lists(vote_lists, min_size=1, max_size=4))
def test_post_select_is_last_argmax(lists):
    techs = list(Technique)
    cands = [ens(v, techs[i]) for i, v in enumerate(lists)]
    got = post_select(cands, ACC)
    assert got.technique is cands[brute_force_argmax(cands, ACC)].technique
    assert post_select(cands, MCC).technique is cands[-1].technique
    assert post_select(cands, F).technique is got.technique


@settings(max_examples=200, deadline=None)
@given(lists=st.lists(vote_lists, min_size=2, max_size=4), seed=st.integers(0, 2**32 - 1))
def test_argmax_permutation_invariant_with_distinct_potentials(lists, seed):
    techs = list(Technique)
    cands = [ens(v, techs[i]) for i, v in enumerate(lists)]
    pots = [round(potential(c.votes, ACC), 12) for c in cands]
    if len(set(pots)) < len(pots):
        return
    perm = np.random.default_rng(seed).permutation(len(cands))
    assert post_select([cands[i] for i in perm], ACC).technique is post_select(cands, ACC).technique


def test_random_post_select_uniform_within_three_sigma():
    cands = [ens([i]) for i in range(4)]
    rng = np.random.default_rng(2024)
    n = 10_000
    picks = [int(random_post_select(cands, rng).votes[0]) for _ in range(n)]
    freq = np.bincount(picks, minlength=4) / n
    sigma = np.sqrt(0.25 * 0.75 / n)
    assert np.all(np.abs(freq - 0.25) <= 3 * sigma)


def test_random_post_select_replay_and_single():
    cands = [ens([i]) for i in range(4)]
    a = [random_post_select(cands, np.random.default_rng(5)).votes[0] for _ in range(3)]
    assert len(set(a)) == 1
    assert random_post_select(cands[:1], np.random.default_rng(0)) is cands[0]
    with pytest.raises(ValueError):
        random_post_select([], np.random.default_rng(0))


def test_combine_examples():
    assert combine(ens(WORKED)) == 1
    assert combine(ens([4])) == 4
    assert combine(ens([2, 1])) == 1


def test_system_validation(system3):
    with pytest.raises(ValueError):
        replace(system3, des_set=())
    with pytest.raises(ValueError):
        PsDesSystem(system3.pool, system3.dsel, meta_model=None)
    PsDesSystem(system3.pool, system3.dsel, des_set=("knora_u", "des_p"))


def test_single_technique_returns_its_ensemble(system3, prepared3):
    test = prepared3[2]
    system = replace(system3, des_set=(Technique.DES_P,))
    for x in test.features[:10]:
        _, cands = candidate_ensembles(x, system)
        got = ps_des_select(x, system)
        assert np.array_equal(got.member_indices, cands[Technique.DES_P].member_indices)


def test_shared_roc_identity(system3, prepared3, monkeypatch):
    import psdes.postselect as ps

    seen = []
    for name in ("knora_u_select", "desp_select"):
        real = getattr(ps, name)

        def spy(pool, roc, *rest, _real=real):
            seen.append(roc)
            return _real(pool, roc, *rest)

        monkeypatch.setattr(ps, name, spy)
    real_meta = ps.metades_select

    def meta_spy(model, pool, query, roc, nbhd):
        seen.append(roc)
        return real_meta(model, pool, query, roc, nbhd)

    monkeypatch.setattr(ps, "metades_select", meta_spy)
    roc, _ = candidate_ensembles(prepared3[2].features[0], system3)
    assert len(seen) == 3 and all(r is roc for r in seen)


def test_identical_members_always_agree(blobs3):
    from psdes.baseclf import ClassifierSpec, Kind
    from psdes.pool import build_pool, cache_dsel_outputs
    from psdes.destech import metades_train

    train, dsel, test = blobs3.subset(np.arange(100)), blobs3.subset(np.arange(100, 150)), blobs3.subset(np.arange(150, 200))
    base = build_pool(train, 1, [ClassifierSpec(Kind.GAUSSIAN_NB)], seed=0)
    pool = replace(base, classifiers=base.classifiers * 6, provenance=base.provenance * 6)
    pool = cache_dsel_outputs(pool, dsel)
    meta = metades_train(pool, dsel)
    for kind in PotentialKind:
        system = PsDesSystem(pool, dsel, potential_metric=PotentialMetric(kind), meta_model=meta, seed=1)
        for q, x in enumerate(test.features[:15]):
            assert classify(x, system, q) == base.classifiers[0].predict(x)


def test_classify_deterministic(system3, prepared3):
    test = prepared3[2]
    system = replace(system3, potential_metric=PotentialMetric(PotentialKind.RANDOM))
    a = [classify(x, system, q) for q, x in enumerate(test.features[:20])]
    b = [classify(x, system, q) for q, x in enumerate(test.features[:20])]
    assert a == b


def test_never_empty_on_real_system(system3, prepared3):
    for x in prepared3[2].features:
        for kind in (PotentialKind.ACCURACY, PotentialKind.MCC):
            sel = ps_des_select(x, replace(system3, potential_metric=PotentialMetric(kind)))
            assert len(sel.member_indices) >= 1


def test_des_set_order_matters_only_via_ties(system3, prepared3):
    for x in prepared3[2].features[:30]:
        _, cands = candidate_ensembles(x, system3)
        for order in itertools.permutations(system3.des_set):
            pots = [potential(cands[t].votes, ACC) for t in order]
            chosen = ps_des_select(x, replace(system3, des_set=order))
            expected = order[max(i for i, p in enumerate(pots) if p == max(pots))]
            assert chosen.technique is expected
