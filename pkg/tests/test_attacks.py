from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphamix.attacks import (
    Origin,
    SearchConfig,
    ThresholdSide,
    alpha_mammals,
    best_alpha_wolf,
    cross_attack,
    enumerate_alpha_wolves,
    evaluate_mixtures,
    hill_climb,
    passes_density,
    remix,
)
from alphamix.errors import ArityError, SearchError
from alphamix.menagerie import coverage
from alphamix.popio import Population
from alphamix.templates import BitGrid, IrisTemplate, MaskPolicy, Op, bitwise_mix

from conftest import random_template
from oracles import all_subsets, naive_coverage, naive_hamming


def pop(rng, n_ident, per, rows=2, cols=32, mask_p=0.85, prefix=""):
    return Population(tuple(
        random_template(rng, rows, cols, mask_p=mask_p, sid=f"{prefix}{i}_{s}", ident=f"{prefix}{i}")
        for i in range(n_ident) for s in range(per)
    ))


def oracle_reward(train, members, op, tau, sr):
    t = members[0] if len(members) == 1 else bitwise_mix(op, members)
    scores = [naive_hamming(t, x, sr) for x in train]
    return naive_coverage(scores, [x.identity_id for x in train], tau)[0]


def test_enumeration_count_and_order(rng):
    wolves = list(pop(rng, 6, 1))
    mixes = enumerate_alpha_wolves(wolves)
    assert len(mixes) == 150
    assert [m.k for m in mixes[:3]] == [2, 2, 2]
    assert [m.operator for m in mixes[:3]] == [Op.AND, Op.OR, Op.XOR]
    assert [m.order for m in mixes] == list(range(150))
    assert mixes[0].seed_ids == (("0", "0_0"), ("1", "1_0"))
    assert all(m.origin is Origin.ALPHA_WOLF for m in mixes)


@pytest.mark.parametrize("n", [4, 5, 8, 12])
def test_enumeration_count_formula(rng, n):
    wolves = list(pop(rng, n, 1, cols=8))
    mixes = enumerate_alpha_wolves(wolves)
    assert len(mixes) == 3 * sum(comb(n, k) for k in (2, 3, 4))


def test_enumeration_bit_exact_remix(rng):
    p = pop(rng, 6, 1)
    for m in enumerate_alpha_wolves(list(p), mask_policy="intersection"):
        again = remix(m, p)
        assert again.same_bits(m.template)


def test_enumeration_errors(rng):
    wolves = list(pop(rng, 3, 1))
    with pytest.raises(ArityError):
        enumerate_alpha_wolves(wolves, [1, 2])
    with pytest.raises(SearchError):
        enumerate_alpha_wolves(wolves, [2, 5])
    with pytest.raises(SearchError):
        enumerate_alpha_wolves(wolves, [4])
    with pytest.raises(SearchError):
        enumerate_alpha_wolves(wolves, [2], operators=[])


def test_best_alpha_wolf_matches_exhaustive_scan(rng):
    wolves = list(pop(rng, 5, 1, prefix="w"))
    test = pop(rng, 8, 2)
    mixes = enumerate_alpha_wolves(wolves, [2, 3])
    rec, rep = best_alpha_wolf(mixes, test, 0.42, shift_range=2)
    ids = [t.identity_id for t in test]
    scan = []
    for m in mixes:
        scores = [naive_hamming(m.template, t, 2) for t in test]
        scan.append(naive_coverage(scores, ids, 0.42)[1])
    best = max(scan)
    assert rep.identity_matches == best
    assert rec.order == scan.index(best)


def test_best_alpha_wolf_invariant_under_wolf_permutation(rng):
    wolves = list(pop(rng, 5, 1, prefix="w"))
    test = pop(rng, 8, 2)
    a = best_alpha_wolf(enumerate_alpha_wolves(wolves, [2]), test, 0.42, shift_range=1)[1]
    b = best_alpha_wolf(enumerate_alpha_wolves(wolves[::-1], [2]), test, 0.42, shift_range=1)[1]
    assert a.identity_matches == b.identity_matches


def test_seed_identities_excluded_from_evaluation(rng):
    p = pop(rng, 4, 2)
    mixes = enumerate_alpha_wolves([p[0], p[2]], [2])
    ev = evaluate_mixtures(mixes, p, {0.1: 1.0}, shift_range=0)
    for e in ev:
        rep = e.reports[0.1]
        assert rep.identity_total == 2 and not ({"0", "1"} & rep.matched_identities)
    ev = evaluate_mixtures(mixes, p, {0.1: 1.0}, shift_range=0, exclude_seeds=False)
    assert ev[0].reports[0.1].identity_total == 4


def test_density_filter():
    hi = IrisTemplate.full_mask(BitGrid.from_bits([[1, 1, 1, 0]]))
    mid = IrisTemplate.full_mask(BitGrid.from_bits([[1, 0, 1, 0]]))
    assert not passes_density(hi, (0.3, 0.7))
    assert passes_density(mid, (0.3, 0.7))
    assert passes_density(hi, None)
    assert passes_density(mid, (0.5, 0.7))


def test_evaluate_marks_filtered_mixtures():
    a = IrisTemplate.full_mask(BitGrid.from_bits([[1, 1, 0, 0]]), "a", "A")
    b = IrisTemplate.full_mask(BitGrid.from_bits([[1, 0, 1, 0]]), "b", "B")
    test = Population((IrisTemplate.full_mask(BitGrid.zeros(1, 4), "t", "T"),))
    mixes = enumerate_alpha_wolves([a, b], [2])
    ev = evaluate_mixtures(mixes, test, {0.1: 0.5}, density_filter=(0.3, 0.7), shift_range=0)
    # AND -> 0.25, OR -> 0.75, XOR -> 0.5
    assert [e.admitted for e in ev] == [False, False, True]
    assert ev[1].code_density == 0.75 and not ev[1].reports


def test_hill_climb_trace_monotone_and_unique(rng):
    p = pop(rng, 6, 2, rows=3, cols=32)
    for op in Op:
        r = hill_climb(p, 0.4, op, SearchConfig(), shift_range=1)
        covs = [s.coverage for s in r.trace]
        assert covs == sorted(covs)
        states = [frozenset(s.state) for s in r.trace]
        assert len(states) == len(set(states))
        assert r.reward == covs[-1]
        assert set(r.trace[-1].state) == {sid for _, sid in r.seed_ids}
        assert remix(r, p).same_bits(r.template)


def test_hill_climb_identical_population_stops_at_once(rng):
    t = random_template(rng, 2, 32, mask_p=1.0)
    p = Population(tuple(IrisTemplate(t.code, t.mask, f"{i}_0", str(i)) for i in range(5)))
    r = hill_climb(p, 0.1, Op.AND, shift_range=0)
    assert len(r.trace) == 1 and r.reward == 5 and r.k == 1


def test_hill_climb_respects_iteration_cap(rng):
    p = pop(rng, 6, 2)
    r = hill_climb(p, 0.45, Op.OR, SearchConfig(max_iterations=2), shift_range=1)
    assert len(r.trace) <= 2


def test_hill_climb_density_fallback():
    # every single sample is too dense for the filter
    p = Population(tuple(
        IrisTemplate.full_mask(BitGrid.ones(1, 8), f"{i}_0", str(i)) for i in range(3)
    ))
    r = hill_climb(p, 0.2, Op.XOR, SearchConfig(density_filter=(0.2, 0.8)), shift_range=0)
    assert r.k >= 1 and r.trace[0].action == "append"


def test_alpha_mammals_one_per_operator(rng):
    p = pop(rng, 5, 2)
    out = alpha_mammals(p, 0.4, SearchConfig(operators=("XOR", "AND")), shift_range=1)
    assert [m.operator for m in out] == [Op.AND, Op.XOR]
    assert all(m.origin is Origin.ALPHA_MAMMAL for m in out)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(max_iterations=-1)
    with pytest.raises(ValueError):
        SearchConfig(density_filter=(0.7, 0.3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(list(Op)), st.floats(0.2, 0.5))
def test_hill_climb_within_oracle_bounds(seed, op, tau):
    rng = np.random.default_rng(seed)
    p = pop(rng, 4, 2, rows=2, cols=16)
    r = hill_climb(p, tau, op, SearchConfig(), shift_range=1)
    single = max(oracle_reward(p, [t], op, tau, 1) for t in p)
    assert r.reward >= single
    assert r.reward == oracle_reward(p, [p.find(sid) for _, sid in r.seed_ids], op, tau, 1)
    if r.k <= 4:
        opt = max(oracle_reward(p, [p[i] for i in s], op, tau, 1) for s in all_subsets(len(p), 4))
        assert r.reward <= opt


def test_cross_attack_rows(rng):
    src = pop(rng, 4, 1, prefix="s")
    tgt = pop(rng, 6, 2)
    mixes = enumerate_alpha_wolves(list(src), [2])
    rows = cross_attack(mixes, tgt, 0.38, 0.38, source="src", shift_range=1)
    assert len(rows) == 2 * len(mixes)
    for a, b in zip(rows[::2], rows[1::2]):
        assert a.mixture is b.mixture
        assert (a.side, b.side) == (ThresholdSide.ATTACK, ThresholdSide.TARGET)
        assert a.report.identity_matches == b.report.identity_matches
        direct = coverage(a.mixture.template, tgt, 0.38, a.mixture.seed_identities, shift_range=1)
        assert direct.identity_matches == a.report.identity_matches


def test_cross_attack_threshold_monotone(rng):
    src = pop(rng, 3, 1, prefix="s")
    tgt = pop(rng, 6, 2)
    rows = cross_attack(enumerate_alpha_wolves(list(src), [2]), tgt, 0.3, 0.45, shift_range=1)
    for a, b in zip(rows[::2], rows[1::2]):
        assert a.report.identity_matches <= b.report.identity_matches
    only = cross_attack(enumerate_alpha_wolves(list(src), [2]), tgt, 0.3, 0.45, sides=["target"])
    assert {r.side for r in only} == {ThresholdSide.TARGET}


def test_mask_policy_recorded(rng):
    wolves = list(pop(rng, 3, 1))
    by_id = {t.sample_id: t for t in wolves}
    for m in enumerate_alpha_wolves(wolves, [2], mask_policy=MaskPolicy.INTERSECTION):
        assert m.mask_policy is MaskPolicy.INTERSECTION
        a, b = (by_id[sid].mask.to_bits() for _, sid in m.seed_ids)
        assert np.array_equal(m.template.mask.to_bits(), a & b)
