import numpy as np
import pytest

from alphamix.calibration import imposter_scores, score_matrix, threshold_at_fmr
from alphamix.errors import SpecError
from alphamix.synthgen import (
    HmmParams,
    SimPopulationSpec,
    hmm_code,
    hmm_codes,
    hmm_population,
    majority_vote,
    synth_population,
)


def adjacent_agreement(bits):
    return float((bits[:, 1:] == bits[:, :-1]).mean())


def small_spec(**kw):
    base = dict(n_identities=12, samples_per_identity=3, intra_flip_rate=0.05, wolf_count=2,
                wolf_blend_arity=3, mask_density=0.85, seed=7, rows=4, cols=128)
    base.update(kw)
    return SimPopulationSpec(**base)


def test_alpha_one_rows_constant():
    bits = hmm_code(HmmParams(alpha=1.0, rows=20, cols=512, seed=3)).to_bits()
    assert all(len(set(row.tolist())) == 1 for row in bits)


def test_alpha_zero_alternates():
    bits = hmm_code(HmmParams(alpha=0.0, rows=3, cols=64, seed=3)).to_bits()
    assert adjacent_agreement(bits) == 0.0


def test_alpha_half_is_fair():
    codes = hmm_codes(20, alpha=0.5, seed=1)
    dens = np.mean([c.count() / (20 * 512) for c in codes])
    agree = np.mean([adjacent_agreement(c.to_bits()) for c in codes])
    assert abs(dens - 0.5) < 0.01 and abs(agree - 0.5) < 0.01


def test_hmm_statistics_at_default_alpha():
    codes = hmm_codes(100, alpha=0.9, seed=0)
    agree = np.mean([adjacent_agreement(c.to_bits()) for c in codes])
    dens = np.mean([c.count() / c.to_bits().size for c in codes])
    assert 0.885 <= agree <= 0.915
    assert 0.47 <= dens <= 0.53


def test_hmm_deterministic_and_seed_sensitive():
    assert hmm_codes(3, seed=4) == hmm_codes(3, seed=4)
    assert hmm_codes(3, seed=4) != hmm_codes(3, seed=5)
    assert hmm_code(HmmParams(seed=9)) == hmm_code(HmmParams(seed=9))


def test_hmm_params_validation():
    with pytest.raises(SpecError):
        HmmParams(alpha=1.5)
    with pytest.raises(SpecError):
        HmmParams(rows=0)


def test_hmm_population_full_masks():
    p = hmm_population(5, rows=2, cols=64, seed=2)
    assert len(p) == 5 and len(p.identities) == 5
    assert all(t.mask.count() == 128 for t in p)


def test_majority_vote():
    bits = np.array([[1, 0, 1, 0], [1, 1, 0, 0], [0, 1, 1, 0]], dtype=bool)
    assert majority_vote(bits).tolist() == [True, True, True, False]
    # even arity ties fall back to the first input
    tie = np.array([[1, 0], [0, 1]], dtype=bool)
    assert majority_vote(tie).tolist() == [True, False]


def test_population_shape_and_ids():
    p = synth_population(small_spec())
    assert len(p) == 36 and len(p.identities) == 12
    assert p[0].sample_id == "00_0" and p[0].identity_id == "00"
    assert len(p.meta["wolf_identities"]) == 2
    for w, blend in p.meta["wolf_blends"].items():
        assert len(blend) == 3 and w not in blend


def test_zero_flip_samples_identical():
    p = synth_population(small_spec(intra_flip_rate=0.0))
    for ident in p.identities:
        codes = [t.code for t in p if t.identity_id == ident]
        assert all(c == codes[0] for c in codes)


def test_population_deterministic():
    a, b = synth_population(small_spec()), synth_population(small_spec())
    assert all(x == y for x, y in zip(a, b)) and a.meta == b.meta
    c = synth_population(small_spec(seed=8))
    assert any(x != y for x, y in zip(a, c))


def test_genuine_scores_below_imposter_scores():
    p = synth_population(small_spec(wolf_count=0))
    m = score_matrix(p, 2)
    ids = np.array([t.identity_id for t in p])
    same = ids[:, None] == ids[None, :]
    np.fill_diagonal(same, False)
    genuine = m[same]
    imposter = m[~same & ~np.eye(len(p), dtype=bool)]
    assert np.nanmax(genuine) < np.nanmin(imposter)


def test_wolves_sit_closer_to_foreign_identities():
    p = synth_population(small_spec(n_identities=20, wolf_count=2, wolf_blend_arity=5, cols=256))
    m = score_matrix(p, 1)
    ids = np.array([t.identity_id for t in p])
    wolves = set(p.meta["wolf_identities"])
    foreign = ids[:, None] != ids[None, :]
    per_sample = np.array([np.nanmean(m[i][foreign[i]]) for i in range(len(p))])
    is_wolf = np.array([i in wolves for i in ids])
    assert per_sample[is_wolf].max() < per_sample[~is_wolf].min()
    for w, blend in p.meta["wolf_blends"].items():
        to_blend = m[np.ix_(ids == w, np.isin(ids, blend))]
        assert np.nanmean(to_blend) < per_sample[~is_wolf].mean() - 0.1


def test_fnmr_sanity_at_one_percent():
    p = synth_population(small_spec(n_identities=20, wolf_count=0))
    tau = threshold_at_fmr(imposter_scores(p, 2), 0.01).tau
    m = score_matrix(p, 2)
    ids = np.array([t.identity_id for t in p])
    same = (ids[:, None] == ids[None, :]) & ~np.eye(len(p), dtype=bool)
    fnmr = float((m[same] > tau).mean())
    assert fnmr < 0.01


@pytest.mark.parametrize("kw", [
    dict(wolf_blend_arity=2),
    dict(wolf_count=13),
    dict(wolf_count=10, wolf_blend_arity=3),
    dict(intra_flip_rate=0.5),
    dict(mask_density=0.0),
    dict(n_identities=0),
])
def test_spec_violations(kw):
    with pytest.raises(SpecError):
        small_spec(**kw)
