"""Permutation families, prefix sets, and the permutation file format."""

from fractions import Fraction

import pytest

from qperminv import (
    Permutation,
    apply_and_invert,
    build_permutation,
    permutation_from_text,
    permutation_to_text,
    prefix_membership_stats,
    prefix_set,
    stage_set,
    tagged_set,
)

FAMILY_CASES = [
    ("identity", {}),
    ("bit-reversal", {}),
    ("xor-mask", {"mask": 5}),
    ("affine-gf2", {"seed": 3}),
    ("random", {"seed": 7}),
]


def test_identity_table():
    perm = build_permutation("identity", 2)
    assert perm.table.tolist() == [0, 1, 2, 3]


def test_xor_mask_table():
    # each y XORed with the mask, enumerated by hand
    perm = build_permutation("xor-mask", 2, mask=0b01)
    assert perm.table.tolist() == [1, 0, 3, 2]
    assert perm.forward(2) == 3
    assert perm.inverse(3) == 2


def test_bit_reversal():
    perm = build_permutation("bit-reversal", 4)
    assert perm.forward(0b0001) == 0b1000
    assert perm.forward(0b1010) == 0b0101
    # reversing twice is the identity
    assert all(perm.forward(perm.forward(y)) == y for y in range(16))


def test_random_is_seed_deterministic():
    a = build_permutation("random", 4, seed=7)
    b = build_permutation("random", 4, seed=7)
    assert a.table.tolist() == b.table.tolist()
    c = build_permutation("random", 4, seed=8)
    assert a.table.tolist() != c.table.tolist()


def test_affine_explicit_matrix():
    # identity matrix with offset 1 is the xor-mask-1 permutation
    perm = build_permutation("affine-gf2", 2, matrix=[0b10, 0b01], offset=1)
    assert perm.table.tolist() == [1, 0, 3, 2]


def test_affine_rejects_singular_matrix():
    with pytest.raises(ValueError, match="singular"):
        build_permutation("affine-gf2", 2, matrix=[0b11, 0b11])


def test_affine_seeded_is_bijection():
    perm = build_permutation("affine-gf2", 6, seed=11)
    assert sorted(perm.table.tolist()) == list(range(64))
    again = build_permutation("affine-gf2", 6, seed=11)
    assert perm.table.tolist() == again.table.tolist()


def test_from_table_rejects_non_bijection():
    with pytest.raises(ValueError, match="bijection"):
        build_permutation("from-table", 2, table=[0, 0, 1, 2])


def test_odd_and_oversized_n_rejected():
    with pytest.raises(ValueError, match="even"):
        build_permutation("identity", 3)
    with pytest.raises(ValueError, match="cap"):
        build_permutation("identity", 18)
    build_permutation("identity", 18, max_bits=18)  # cap is configurable


def test_unknown_family_rejected():
    with pytest.raises(ValueError, match="unknown"):
        build_permutation("no-such-family", 2)


def test_apply_and_invert_directions():
    perm = build_permutation("identity", 2)
    assert apply_and_invert(perm, 3, "forward") == 3
    assert apply_and_invert(perm, 3, "inverse") == 3
    with pytest.raises(ValueError, match="direction"):
        apply_and_invert(perm, 0, "sideways")
    with pytest.raises(ValueError, match="range"):
        apply_and_invert(perm, 4, "forward")


@pytest.mark.parametrize("family,kwargs", FAMILY_CASES)
def test_roundtrip_is_identity(family, kwargs):
    perm = build_permutation(family, 6, **kwargs)
    for y in range(perm.size):
        assert perm.inverse(perm.forward(y)) == y


def test_prefix_set_empty_prefix_is_everything():
    perm = build_permutation("random", 4, seed=1)
    assert prefix_set(perm, 0b0110, 0).members == tuple(range(16))


def test_prefix_set_identity_example():
    # top two bits of y equal to 10
    perm = build_permutation("identity", 4)
    assert prefix_set(perm, 0b1010, 2).members == (8, 9, 10, 11)


@pytest.mark.parametrize("family,kwargs", FAMILY_CASES)
def test_prefix_set_sizes(family, kwargs):
    perm = build_permutation(family, 6, **kwargs)
    for x in (0, 13, 63):
        for prefix_len in (0, 2, 4, 6):
            assert prefix_set(perm, x, prefix_len).size == 2 ** (6 - prefix_len)


def test_prefix_set_rejects_bad_args():
    perm = build_permutation("identity", 4)
    with pytest.raises(ValueError, match="even"):
        prefix_set(perm, 0, 3)
    with pytest.raises(ValueError, match="range"):
        prefix_set(perm, 16, 2)
    with pytest.raises(ValueError):
        prefix_set(perm, 0, 6)


def test_nesting_and_quarter_ratio():
    perm = build_permutation("random", 8, seed=3)
    for x in (0, 77, 255):
        for j in range(4):
            stage = set(stage_set(perm, x, j).members)
            tagged = set(tagged_set(perm, x, j).members)
            assert tagged <= stage
            assert len(tagged) * 4 == len(stage)


def test_tagged_set_is_next_stage_set():
    perm = build_permutation("random", 6, seed=9)
    for x in (5, 40):
        for j in range(2):
            assert tagged_set(perm, x, j).members == stage_set(perm, x, j + 1).members


def test_prefix_sets_partition_domain():
    perm = build_permutation("random", 6, seed=4)
    for j in (1, 2, 3):
        seen = []
        for prefix in range(2 ** (2 * j)):
            x = prefix << (6 - 2 * j)
            seen.extend(prefix_set(perm, x, 2 * j).members)
        assert sorted(seen) == list(range(64))


@pytest.mark.parametrize("family,kwargs", FAMILY_CASES)
def test_membership_stats_exact(family, kwargs):
    perm = build_permutation(family, 4, **kwargs)
    for y in range(16):
        assert prefix_membership_stats(perm, y, 0) == Fraction(1)
        assert prefix_membership_stats(perm, y, 1) == Fraction(1, 4)
        assert prefix_membership_stats(perm, y, 2) == Fraction(1, 16)


def test_permutation_file_bytes():
    perm = build_permutation("identity", 2)
    assert permutation_to_text(perm) == "n=2\n0\n1\n2\n3\n"


def test_permutation_file_roundtrip():
    perm = build_permutation("random", 6, seed=12)
    text = permutation_to_text(perm)
    loaded = permutation_from_text(text)
    assert loaded.n == 6
    assert loaded.table.tolist() == perm.table.tolist()
    assert permutation_to_text(loaded) == text


@pytest.mark.parametrize(
    "text,match",
    [
        ("n=2\n0\n1\n2\n3", "newline"),
        ("m=2\n0\n1\n2\n3\n", "n=<int>"),
        ("n=2\n0\n1\n2\n", "rows"),
        ("n=2\n0\n1\n2\n3\n4\n", "rows"),
        ("n=2\n0\n1\nx\n3\n", "decimal"),
        ("n=2\n0\n1\n2\n7\n", "range"),
        ("n=2\n0\n0\n2\n3\n", "bijection"),
        ("n=3\n0\n", "even"),
    ],
)
def test_permutation_file_strictness(text, match):
    with pytest.raises(ValueError, match=match):
        permutation_from_text(text)


def test_direct_construction_checks_table_shape():
    with pytest.raises(ValueError, match="entries"):
        Permutation(2, [0, 1, 2])
