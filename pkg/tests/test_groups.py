import itertools

import pytest
from hypothesis import given, settings, strategies as st

from wordqfa.groups import (
    CapExceeded, CosetTableError, RadiusExceeded, abelian_group, build_coset_table, coset_rewrite,
    cyclic_group, direct_product_of_frees, enumerate_ball, enumerate_words, free_abelian_group,
    free_group, free_product_z_zr, free_reduce, identity_words, inverse_word, is_identity,
    trivial_group, validate_coset_table, virtual_overgroup, word_length,
)
from wordqfa.verify import dinf_identity, z_over_2z_identity

F2 = free_group(2)
A, B = 1, 2


def test_free_reduce_cancels_adjacent_pair():
    assert free_reduce((A, -A)) == ()


def test_free_reduce_single_cancellation():
    assert free_reduce((A, B, -B, A)) == (A, A)


def test_free_reduce_cascades():
    assert free_reduce((A, B, -B, -A, A)) == (A,)


def reduced_by_brute_force(max_len):
    letters = (1, -1, 2, -2)
    count = 0
    for n in range(max_len + 1):
        for w in itertools.product(letters, repeat=n):
            if all(w[i] != -w[i + 1] for i in range(n - 1)):
                count += 1
    return count


def test_reduced_word_count_matches_brute_force():
    assert reduced_by_brute_force(3) == 53
    assert len(enumerate_ball(F2, 3)) == 53


@pytest.mark.parametrize("group,word,expected", [
    (free_abelian_group(1), (1, -1, -1, 1), True),
    (free_abelian_group(1), (1, 1, -1), False),
    (F2, (A, B, -A, -B), False),
    (cyclic_group(4), (1, 1, 1, 1), True),
    (cyclic_group(4), (1, 1), False),
    (free_abelian_group(2), (1, 2, -1, -2), True),
    (trivial_group(), (), True),
])
def test_is_identity_examples(group, word, expected):
    assert is_identity(group, word) is expected


@given(st.lists(st.sampled_from([1, -1]), max_size=30))
def test_integer_word_problem_is_letter_balance(word):
    assert is_identity(free_abelian_group(1), word) == (word.count(1) == word.count(-1))


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=16))
@settings(max_examples=200)
def test_free_group_word_times_inverse_is_identity(word):
    w = tuple(word)
    assert is_identity(F2, w + inverse_word(w))
    assert is_identity(F2, w) == (free_reduce(w) == ())


@pytest.mark.parametrize("group,word,expected", [
    (F2, (A, B, -B), 1),
    (free_abelian_group(2), (1, 2, 1), 3),
    (cyclic_group(5), (1, 1, 1, 1), 1),
    (cyclic_group(6), (1, 1, 1, 1), 2),
])
def test_word_length_examples(group, word, expected):
    assert word_length(group, word) == expected


def test_word_length_radius_exceeded():
    over = virtual_overgroup(free_abelian_group(1), build_coset_table(free_abelian_group(1), "Z_in_Dinf"))
    with pytest.raises(RadiusExceeded):
        word_length(over, (1,) * 12, radius=3)


@pytest.mark.parametrize("group,radius,expected", [
    (F2, 2, 17),
    (trivial_group(), 5, 1),
    (free_abelian_group(1), 3, 7),
    (cyclic_group(5), 4, 5),
    (free_abelian_group(2), 2, 13),
])
def test_ball_sizes(group, radius, expected):
    assert len(enumerate_ball(group, radius)) == expected


def test_ball_lengths_agree_with_word_length():
    ball = enumerate_ball(free_abelian_group(2), 3)
    for word, n in ball:
        assert word_length(free_abelian_group(2), word) == n == len(word)


def test_ball_cap():
    with pytest.raises(CapExceeded):
        enumerate_ball(free_group(3), 8, cap=1000)


def test_free_sphere_sizes():
    ball = enumerate_ball(free_group(2), 5)
    for n in range(1, 6):
        assert sum(1 for _, k in ball if k == n) == 4 * 3 ** (n - 1)


def test_identity_words_are_exactly_the_identity_subset():
    group = free_abelian_group(1)
    listed = set(identity_words(group, 8))
    brute = {w for n in range(9) for w in enumerate_words(group, n) if is_identity(group, w)}
    assert listed == brute


def test_presentation_parse_and_format_roundtrip():
    word = F2.parse_word("a,b,-a")
    assert word == (1, 2, -1)
    assert F2.format_word(word) == "a,b,-a"


def test_presentation_json_roundtrip():
    for group in (F2, cyclic_group(7), abelian_group(1, (3,)), direct_product_of_frees((2, 1)),
                  free_product_z_zr(2)):
        assert type(group).from_json(group.to_json()) == group


def test_shalen_group_relations():
    group = free_product_z_zr(2)
    x1, x2, y = 1, 2, 3
    assert is_identity(group, (x1, x2, -x1, -x2))
    assert not is_identity(group, (x1, y, -x1, -y))


def test_index_two_integers_table():
    base = free_abelian_group(1, labels=("h",))
    table = build_coset_table(base, "2Z_in_Z")
    g = 2
    assert table.index == 2
    assert table.alpha[(g, 1)] == 2 and table.alpha[(g, 2)] == 1
    assert table.beta_hat[(g, 2)] == (1,) and table.beta_hat[(g, 1)] == ()
    validate_coset_table(table)


def test_identity_table():
    table = build_coset_table(F2, "identity")
    assert table.index == 1
    for code in F2.alphabet:
        assert table.alpha[(code, 1)] == 1 and table.beta_hat[(code, 1)] == (code,)


def test_dihedral_table():
    base = free_abelian_group(1, labels=("t",))
    table = build_coset_table(base, "Z_in_Dinf")
    t, s = 1, 2
    assert table.alpha[(s, 1)] == 2 and table.beta_hat[(s, 1)] == ()
    assert table.alpha[(t, 2)] == 2 and table.beta_hat[(t, 2)] == (-t,)


def test_broken_table_rejected():
    base = free_abelian_group(1)
    data = build_coset_table(base, "2Z_in_Z").to_json()
    data["alpha"] = [[1] * data["index"] for _ in data["alpha"]]
    with pytest.raises(CosetTableError):
        build_coset_table(base, data)


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=20))
@settings(max_examples=300)
def test_overgroup_word_problems_match_classical_oracles(word):
    base = free_abelian_group(1)
    for name, oracle in (("2Z_in_Z", z_over_2z_identity), ("Z_in_Dinf", dinf_identity)):
        over = virtual_overgroup(base, build_coset_table(base, name))
        assert is_identity(over, word) == oracle(word)


def test_coset_rewrite_tracks_integer_value():
    base = free_abelian_group(1)
    table = build_coset_table(base, "2Z_in_Z")
    for word in enumerate_words(virtual_overgroup(base, table), 5):
        coset, base_word, _ = coset_rewrite(table, word)
        value = sum((2 if abs(c) == 1 else 1) * (1 if c > 0 else -1) for c in word)
        assert coset == 1 + value % 2
        assert 2 * sum(1 if c > 0 else -1 for c in base_word) == value - value % 2
