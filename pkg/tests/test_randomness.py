from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fiid.errors import InvalidParameter
from fiid.randomness import (
    ExplicitField,
    LabelField,
    UniformLabel,
    bit_i,
    compare_labels,
    organize_families,
    stream_index,
    stream_words,
)
from fiid.tree_window import build_window


def test_bits_of_half():
    assert bit_i(Fraction(1, 2), 1) == 0
    assert bit_i(Fraction(1, 2), 2) == 1
    assert all(bit_i(Fraction(1, 2), i) == 1 for i in range(2, 40))


def test_bits_of_three_quarters():
    assert [bit_i(Fraction(3, 4), i) for i in (1, 2, 3, 4)] == [1, 0, 1, 1]


def test_bits_of_one_third():
    for k in range(1, 30):
        assert bit_i(Fraction(1, 3), k) == (0 if k % 2 else 1)


def test_bit_index_must_be_positive():
    with pytest.raises(InvalidParameter):
        bit_i(Fraction(1, 3), 0)
    with pytest.raises(InvalidParameter):
        UniformLabel(1, 2, 3).bit(0)


def test_stream_bits_match_words():
    lab = UniformLabel(7, 11, 3)
    w0 = int(stream_words(7, [11], 3, 0)[0])
    w1 = int(stream_words(7, [11], 3, 1)[0])
    bits = [lab.bit(i) for i in range(1, 129)]
    assert int("".join(map(str, bits)), 2) == (w0 << 64) | w1
    assert lab.prefix(70) == ((w0 << 64) | w1) >> 58


def test_stream_is_pure():
    a = stream_words(5, np.arange(100), 9, 2)
    b = stream_words(5, np.arange(100), 9, 2)
    assert np.array_equal(a, b)
    assert np.unique(a).size == 100


def test_families_deterministic_and_injective():
    w = build_window(3, 4)
    f1, f2 = organize_families(3, w), organize_families(3, w)
    assert np.array_equal(f1.U(2)[1].words(), f2.U(2)[1].words())
    streams = set()
    for step in range(6):
        for fam in (f1.U(step), f1.V(step), f1.B(step)):
            streams.update(f.stream for f in fam)
    assert len(streams) == 6 * 8
    assert f1.U(3)[1].stream != f1.V(3)[1].stream
    assert not np.array_equal(f1.U(3)[1].words(), f1.V(3)[1].words())


def test_stream_index_layout():
    assert stream_index("U", 0, 0) == 0
    assert stream_index("V", 1, 1) == 13
    assert stream_index("B", 2, 0) == 22
    with pytest.raises(InvalidParameter):
        stream_index("V", 0, 2)


def test_hamming_weight_tail():
    # P(weight of 32 fair bits outside [4, 28]), computed exactly
    tail = 2 * sum(comb(32, k) for k in range(4)) / 2 ** 32
    assert tail < 1e-5
    seeds = np.arange(1000)
    bad = 0
    for s in seeds:
        word = int(stream_words(int(s), [0], 0, 0)[0]) >> 32
        bad += not 4 <= bin(word).count("1") <= 28
    # expected count 1000 * tail < 0.01; allow a single outlier
    assert bad <= 1


def test_compare_examples():
    a, b = Fraction(1, 2), Fraction(5, 8)  # 0.0111..., 0.1001...
    assert compare_labels(a, b, (0, 1)) == -1
    assert compare_labels(b, a, (1, 0)) == 1
    x = Fraction(1, 3)
    assert compare_labels(x, x, (3, 7)) == -1
    assert compare_labels(x, x, (7, 3)) == 1
    lab = UniformLabel(1, 4, 0)
    assert compare_labels(lab, lab, (4, 4)) == 0


def test_compare_precision_is_configurable():
    a, b = Fraction(1, 3), Fraction(1, 3) + Fraction(1, 2 ** 70)
    assert compare_labels(a, b, (9, 1)) == 1  # equal in 64 bits, vertex 9 > 1
    assert compare_labels(a, b, (9, 1), precision=80) == -1


@given(st.integers(0, 2 ** 32), st.lists(st.integers(0, 10 ** 6), min_size=3, max_size=3, unique=True))
def test_compare_is_total_order(seed, vs):
    labs = [UniformLabel(seed, v, 0) for v in vs]
    for x in labs:
        for y in labs:
            assert compare_labels(x, y) == -compare_labels(y, x)
    srt = sorted(range(3), key=lambda i: labs[i].prefix(64))
    assert compare_labels(labs[srt[0]], labs[srt[1]]) == -1
    assert compare_labels(labs[srt[1]], labs[srt[2]]) == -1
    assert compare_labels(labs[srt[0]], labs[srt[2]]) == -1


def test_field_keys_and_bits():
    f = LabelField(3, 5, 50)
    assert np.array_equal(f.first_bits(), f.words() >> np.uint64(63))
    g = LabelField(3, 5, 50, precision=8)
    assert (g.keys() < 256).all()
    h = LabelField(3, 5, 50, precision=100)
    order = np.lexsort((np.arange(50), h.keys()))
    full = [f.label(v).prefix(100) for v in range(50)]
    assert [full[i] for i in order] == sorted(full)


def test_explicit_field_convention():
    f = ExplicitField([Fraction(1, 2), Fraction(3, 4), 1])
    assert f.first_bits().tolist() == [0, 1, 1]


def test_root_first_bit_fair():
    n = 10_000
    ones = sum(int(stream_words(s, [0], 0, 0)[0]) >> 63 for s in range(n))
    assert abs(ones / n - 0.5) <= 0.016
