import numpy as np
import pytest

from alphamix.errors import ManifestError, SplitError, TemplateFormatError
from alphamix.popio import (
    AdmissibilityPolicy,
    Population,
    SplitSpec,
    decode_template,
    encode_template,
    format_text_matrix,
    load_population,
    parse_text_matrix,
    read_template,
    read_text_template,
    save_population,
    save_template,
    split,
    write_manifest,
)
from alphamix.templates import BitGrid, IrisTemplate

from conftest import random_template


def make_population(rng, n_ident, per, rows=4, cols=16):
    return Population(tuple(
        random_template(rng, rows, cols, sid=f"{i:03d}_{s}", ident=f"{i:03d}")
        for i in range(n_ident) for s in range(per)
    ))


def test_round_trip_20x512(tmp_path, rng):
    t = random_template(rng, 20, 512, sid="x", ident="X")
    save_template(t, tmp_path / "t.airc")
    back = read_template(tmp_path / "t.airc", "x", "X")
    assert back == t
    raw = (tmp_path / "t.airc").read_bytes()
    assert raw[:4] == b"AIRC" and raw[4] == 1
    assert raw[5:9] == bytes([0, 20, 2, 0])
    assert len(raw) == 9 + 2 * 1280


def test_round_trip_odd_width_keeps_padding(rng):
    t = random_template(rng, 3, 13)
    assert decode_template(encode_template(t)).same_bits(t)


def test_bad_magic_names_file(tmp_path, rng):
    p = tmp_path / "bad.airc"
    p.write_bytes(b"XXXX" + encode_template(random_template(rng, 2, 8))[4:])
    with pytest.raises(TemplateFormatError, match="bad.airc"):
        read_template(p)


def test_zero_row_header_rejected():
    with pytest.raises(TemplateFormatError):
        decode_template(b"AIRC\x01\x00\x00\x00\x08")


def test_version_mismatch_rejected(rng):
    raw = bytearray(encode_template(random_template(rng, 2, 8)))
    raw[4] = 2
    with pytest.raises(TemplateFormatError, match="version"):
        decode_template(bytes(raw))


def test_truncated_payload_rejected(rng):
    raw = encode_template(random_template(rng, 2, 8))
    with pytest.raises(TemplateFormatError):
        decode_template(raw[:-1])


def test_text_matrix_import():
    g = parse_text_matrix("10\n01\n")
    assert g.shape == (2, 2)
    assert g.to_bits().tolist() == [[True, False], [False, True]]
    assert format_text_matrix(g) == "10\n01\n"


@pytest.mark.parametrize("text", ["1x\n01", "10\n0", ""])
def test_text_matrix_errors(text):
    with pytest.raises(TemplateFormatError):
        parse_text_matrix(text, "f.txt")


def test_text_template_with_mask(tmp_path):
    (tmp_path / "c.txt").write_text("1100\n")
    (tmp_path / "m.txt").write_text("1010\n")
    t = read_text_template(tmp_path / "c.txt", tmp_path / "m.txt")
    assert t.mask.to_bits().tolist() == [[True, False, True, False]]
    t2 = read_text_template(tmp_path / "c.txt")
    assert t2.mask.count() == 4


def _write_pop(tmp_path, rng, n_ident=3, per=2, zero_code=None):
    p = make_population(rng, n_ident, per, rows=20, cols=512)
    if zero_code is not None:
        s = list(p.samples)
        t = s[zero_code]
        s[zero_code] = IrisTemplate(BitGrid.zeros(20, 512), t.mask, t.sample_id, t.identity_id)
        p = Population(tuple(s))
    return p, save_population(p, tmp_path)


def test_load_counts_and_order(tmp_path, rng):
    p, manifest = _write_pop(tmp_path, rng)
    q = load_population(manifest)
    assert len(q) == 6 and len(q.identity_index) == 3
    assert [t.sample_id for t in q] == [t.sample_id for t in p]
    assert all(a == b for a, b in zip(p, q))


def test_load_threads_same_result(tmp_path, rng):
    _, manifest = _write_pop(tmp_path, rng)
    a, b = load_population(manifest, threads=1), load_population(manifest, threads=4)
    assert [t.sample_id for t in a] == [t.sample_id for t in b]
    assert np.array_equal(a.codes, b.codes)


def test_admissibility_rejects_all_zero(tmp_path, rng, caplog):
    _, manifest = _write_pop(tmp_path, rng, zero_code=2)
    q = load_population(manifest, AdmissibilityPolicy(min_code_density=0.05))
    assert len(q) == 5
    assert len(q.rejections) == 1 and "code density" in q.rejections[0].reason
    assert any("rejected" in r.message for r in caplog.records)


def test_manifest_errors(tmp_path, rng):
    _, manifest = _write_pop(tmp_path, rng)
    lines = manifest.read_text().splitlines()
    dup = tmp_path / "dup.tsv"
    dup.write_text("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(ManifestError, match="duplicate"):
        load_population(dup)
    missing = tmp_path / "missing.tsv"
    write_manifest([("a", "a1", "nope.airc")], missing)
    with pytest.raises(ManifestError, match="not found"):
        load_population(missing)
    bad = tmp_path / "bad.tsv"
    bad.write_text("who\twhat\n")
    with pytest.raises(ManifestError, match="header"):
        load_population(bad)
    with pytest.raises(ManifestError):
        load_population(tmp_path / "absent.tsv")


def test_manifest_shape_inconsistency(tmp_path, rng):
    save_template(random_template(rng, 2, 8), tmp_path / "a.airc")
    save_template(random_template(rng, 2, 16), tmp_path / "b.airc")
    m = tmp_path / "m.tsv"
    write_manifest([("A", "a", "a.airc"), ("B", "b", "b.airc")], m)
    with pytest.raises(ManifestError, match="inconsistent"):
        load_population(m)


def test_policy_bounds_validated():
    with pytest.raises(ValueError):
        AdmissibilityPolicy(0.6, 0.4)


def test_same_set_split(rng):
    p = make_population(rng, 4, 2)
    tr, te = split(p, SplitSpec("same"))
    assert tr is p and te is p


def test_disjoint_split_93_of_1000():
    p = Population(tuple(
        IrisTemplate.full_mask(BitGrid.zeros(1, 8), f"{i}_0", f"{i:04d}") for i in range(1000)
    ))
    tr, te = split(p, SplitSpec("disjoint", 0.093, seed=5))
    a, b = set(tr.identities), set(te.identities)
    assert len(a) == 93 and len(b) == 907
    assert a.isdisjoint(b) and a | b == set(p.identities)
    first, _ = split(p, SplitSpec("disjoint", 0.093, seed=None))
    assert first.identities == p.identities[:93]


def test_split_seed_determinism(rng):
    p = make_population(rng, 40, 1)
    a1, _ = split(p, SplitSpec("disjoint", 0.5, seed=1))
    a2, _ = split(p, SplitSpec("disjoint", 0.5, seed=1))
    b, _ = split(p, SplitSpec("disjoint", 0.5, seed=2))
    assert a1.identities == a2.identities
    assert set(a1.identities) != set(b.identities)


def test_split_keeps_sample_order(rng):
    p = make_population(rng, 10, 2)
    tr, te = split(p, SplitSpec("disjoint", 0.3, seed=3))
    pos = {t.sample_id: i for i, t in enumerate(p)}
    for part in (tr, te):
        idx = [pos[t.sample_id] for t in part]
        assert idx == sorted(idx)


@pytest.mark.parametrize("frac", [0.01, 1.0])
def test_split_empty_partition_errors(rng, frac):
    p = make_population(rng, 10, 1)
    with pytest.raises(SplitError):
        split(p, SplitSpec("disjoint", frac))


def test_population_rejects_duplicates_and_mixed_shapes(rng):
    a = random_template(rng, 2, 8, sid="a")
    with pytest.raises(ManifestError):
        Population((a, a))
    with pytest.raises(Exception):
        Population((a, random_template(rng, 2, 9, sid="b")))
