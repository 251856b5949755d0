from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from tednet.trees import (
    Tree,
    decode_euler,
    entry_positions,
    euler_string,
    format_tree_text,
    is_valid_euler,
    pad_sentinels,
    parse_tree_text,
    random_tree,
    strip_sentinels,
)

# Worked base tree used throughout the golden tests: five edges, alphabet
# size 5, Euler string fixed below.
BASE = Tree((0, 3, 2, 2, 4, 4), (-1, 0, 1, 1, 3, 1))
BASE_EULER = (3, 2, 7, 2, 4, 9, 7, 4, 9, 8)


def test_base_tree_encoding():
    assert euler_string(BASE, 5) == BASE_EULER


def test_base_tree_decoding():
    t = decode_euler(BASE_EULER, 5)
    assert t == BASE


def test_entry_positions_base():
    pos_in, pos_out = entry_positions(BASE)
    assert pos_in == [0, 1, 2, 4, 5, 8]
    assert pos_out == [11, 10, 3, 7, 6, 9]


def test_alphabet_shift():
    # Same structure under a larger alphabet shifts only outward entries.
    assert euler_string(BASE, 10) == (3, 2, 12, 2, 4, 14, 12, 4, 14, 13)


def test_children_and_counts():
    assert BASE.children(1) == [2, 3, 5]
    assert BASE.child_count(0) == 1
    assert BASE.child_count(3) == 1
    assert BASE.child_count(4) == 0


@pytest.mark.parametrize(
    "bad",
    [
        (3, 2, 7),            # odd length
        (3, 2, 8, 7),         # mismatched close
        (6, 1),               # opens with an outward symbol
        (3, 2, 7, 2),         # ends inside an edge
        (3, 11, 16, 8),       # symbol out of range for m=5
    ],
)
def test_invalid_euler_strings(bad):
    assert not is_valid_euler(bad, 5)


def test_tree_validation_rejects_non_preorder():
    with pytest.raises(ValueError):
        Tree((0, 1, 1, 1), (-1, 0, 2, 1))  # vertex 3 attaches off the path
    with pytest.raises(ValueError):
        Tree((0, 0, 1), (-1, 0, 0))  # non-root label 0
    with pytest.raises(ValueError):
        Tree((0, 1), (-1, 1))  # self parent


def test_text_roundtrip():
    text = format_tree_text(BASE)
    assert parse_tree_text(text) == BASE
    assert text.splitlines()[0] == "6"


def test_parse_rejects_bad_counts():
    with pytest.raises(ValueError):
        parse_tree_text("3\n0 1\n-1 0\n")
    with pytest.raises(ValueError):
        parse_tree_text("2\n0 1\n")


def test_sentinel_helpers():
    padded = pad_sentinels((1, 6), 4, 99)
    assert padded == (1, 6, 99, 99, 99, 99)
    assert strip_sentinels((99, 1, 6, 99, 99), 99) == (1, 6)
    # Interior sentinels survive so validation can reject them.
    assert strip_sentinels((99, 1, 99, 6, 99), 99) == (1, 99, 6)


@given(st.integers(0, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_random_tree_roundtrip(n, m, seed):
    t = random_tree(n, m, random.Random(seed))
    assert t.n == n
    e = euler_string(t, m)
    assert len(e) == 2 * n
    assert decode_euler(e, m) == t


@given(st.integers(1, 10), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_corrupting_one_symbol_is_detected_or_decodes_differently(n, m, seed):
    rng = random.Random(seed)
    t = random_tree(n, m, rng)
    e = list(euler_string(t, m))
    i = rng.randrange(len(e))
    old = e[i]
    e[i] = 2 * m + 1  # out of alphabet, always invalid
    assert not is_valid_euler(e, m)
    e[i] = old
    assert decode_euler(e, m) == t
