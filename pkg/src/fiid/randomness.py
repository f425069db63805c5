"""Per-vertex infinite bit streams and their reorganisation into label families.

Bit ``i`` of stream ``(seed, vertex, stream)`` is a pure function of those four
integers: the 64-bit word ``(i - 1) // 64`` comes out of a counter-based mixer
(chained SplitMix64 finalisers) and bits are read most significant first.
For a fixed ``(seed, stream, block)`` the map vertex -> word is a bijection, so
two vertices never share a 64-bit prefix inside one field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameter

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

DEFAULT_PRECISION = 64

# stream index = family offset + 8 * step + position
FAMILY_OFFSETS = {"U": 0, "V": 4, "B": 6}
FAMILY_WIDTHS = {"U": 4, "V": 2, "B": 2}


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _block_key(seed: int, stream: int, block: int) -> int:
    k = _mix_int(seed + GAMMA)
    k = _mix_int(k ^ _mix_int((stream + 1) * GAMMA))
    return _mix_int(k ^ _mix_int((block + 1) * _M2))


def stream_words(seed: int, vertices, stream: int, block: int = 0) -> np.ndarray:
    """64-bit word ``block`` of the given stream for each vertex (uint64 array)."""
    key = np.uint64(_block_key(int(seed), int(stream), int(block)))
    v = np.asarray(vertices, dtype=np.uint64)
    h = _mix((v * np.uint64(GAMMA)) ^ key)
    return _mix(h + key)


def stream_index(family: str, step: int, position: int) -> int:
    """Stream allocated to component ``position`` (0-based) of ``family[step]``."""
    if family not in FAMILY_OFFSETS:
        raise InvalidParameter(f"unknown family {family!r}")
    if not 0 <= position < FAMILY_WIDTHS[family] or step < 0:
        raise InvalidParameter(f"bad position/step {position}/{step} for {family}")
    return FAMILY_OFFSETS[family] + 8 * step + position


@dataclass(frozen=True)
class UniformLabel:
    """One stream read as the binary expansion 0.b1 b2 b3 ... of a number in [0, 1]."""

    seed: int
    vertex: int
    stream: int

    def bit(self, i: int) -> int:
        if i < 1:
            raise InvalidParameter("bit positions start at 1")
        word = int(stream_words(self.seed, [self.vertex], self.stream, (i - 1) // 64)[0])
        return (word >> (63 - (i - 1) % 64)) & 1

    def prefix(self, nbits: int = DEFAULT_PRECISION) -> int:
        """The first ``nbits`` bits as an integer."""
        blocks = -(-nbits // 64)
        value = 0
        for b in range(blocks):
            value = (value << 64) | int(stream_words(self.seed, [self.vertex], self.stream, b)[0])
        return value >> (64 * blocks - nbits)


def _as_fraction(x) -> Fraction:
    frac = Fraction(x)
    if not 0 < frac <= 1:
        # 0 has no expansion with infinitely many 1s
        raise InvalidParameter(f"value {x} outside (0, 1]")
    return frac


def _value_prefix(x: Fraction, nbits: int) -> int:
    # ceil(2^n x) - 1 picks the ...0111 form for dyadic x
    return math.ceil(x * (1 << nbits)) - 1


def bit_i(label, i: int) -> int:
    """``i``-th binary digit (1-based), using the expansion with infinitely many 1s."""
    if i < 1:
        raise InvalidParameter("bit positions start at 1")
    if isinstance(label, UniformLabel):
        return label.bit(i)
    return _value_prefix(_as_fraction(label), i) & 1


def label_prefix(label, nbits: int = DEFAULT_PRECISION) -> int:
    if isinstance(label, UniformLabel):
        return label.prefix(nbits)
    return _value_prefix(_as_fraction(label), nbits)


def compare_labels(a, b, tiebreak=None, precision: int = DEFAULT_PRECISION) -> int:
    """Three-way comparison of the first ``precision`` bits, then of owner vertex ids.

    ``tiebreak`` is the pair of owning vertices; it defaults to the labels'
    own vertices for stream-backed labels.  Returns -1, 0 or 1.
    """
    pa, pb = label_prefix(a, precision), label_prefix(b, precision)
    if pa != pb:
        return -1 if pa < pb else 1
    if tiebreak is None:
        tiebreak = (getattr(a, "vertex", 0), getattr(b, "vertex", 0))
    va, vb = tiebreak
    return (va > vb) - (va < vb)


class LabelField:
    """A uniform label at every vertex of a window, backed by one stream index."""

    def __init__(self, seed: int, stream: int, n: int, precision: int = DEFAULT_PRECISION):
        self.seed = int(seed)
        self.stream = int(stream)
        self.n = int(n)
        self.precision = int(precision)
        self._words: dict[int, np.ndarray] = {}
        self._keys = None

    def words(self, block: int = 0) -> np.ndarray:
        if block not in self._words:
            w = stream_words(self.seed, np.arange(self.n), self.stream, block)
            w.flags.writeable = False
            self._words[block] = w
        return self._words[block]

    def label(self, v: int) -> UniformLabel:
        return UniformLabel(self.seed, int(v), self.stream)

    def first_bits(self) -> np.ndarray:
        return (self.words(0) >> np.uint64(63)).astype(np.uint8)

    def keys(self) -> np.ndarray:
        """Order keys per vertex; ties in keys are broken by vertex id."""
        if self._keys is None:
            self._keys = _prefix_keys(self.words, self.n, self.precision)
        return self._keys


class ExplicitField(LabelField):
    """A field with prescribed real values (tests and hand-built examples)."""

    def __init__(self, values, precision: int = DEFAULT_PRECISION):
        self.values = [_as_fraction(x) for x in values]
        super().__init__(0, -1, len(self.values), precision)

    def words(self, block: int = 0) -> np.ndarray:
        if block not in self._words:
            shift = 64 * (block + 1)
            w = [(_value_prefix(x, shift)) & MASK64 for x in self.values]
            self._words[block] = np.array(w, dtype=np.uint64)
        return self._words[block]

    def label(self, v: int):
        return self.values[v]


def _prefix_keys(words, n: int, precision: int) -> np.ndarray:
    if precision == 64:
        return words(0)
    if precision < 64:
        return words(0) >> np.uint64(64 - precision)
    blocks = -(-precision // 64)
    cols = [words(b) for b in range(blocks)]
    spare = 64 * blocks - precision
    if spare:
        cols[-1] = cols[-1] >> np.uint64(spare)
    order = np.lexsort(tuple(reversed(cols)))
    # dense keys: equal prefixes get equal keys, vertex ids break ties later
    stacked = np.stack([c[order] for c in cols], axis=1)
    new = np.ones(n, dtype=bool)
    new[1:] = (stacked[1:] != stacked[:-1]).any(axis=1)
    keys = np.empty(n, dtype=np.uint64)
    keys[order] = np.cumsum(new) - 1
    return keys


def order_keys(alpha) -> np.ndarray:
    """Comparable keys for a label field or a plain sequence of distinct-ish reals.

    Equal keys are broken by vertex id wherever keys are compared.
    """
    if isinstance(alpha, LabelField):
        return alpha.keys()
    values = np.asarray(alpha)
    _, inverse = np.unique(values, return_inverse=True)
    return inverse.astype(np.uint64)


class LabelFamilies:
    """The three i.i.d. families U_n (quadruples), V_m and B_k (pairs) on a window."""

    def __init__(self, seed: int, n: int, precision: int = DEFAULT_PRECISION):
        self.seed = int(seed)
        self.n = int(n)
        self.precision = precision

    def _fields(self, family: str, step: int) -> tuple[LabelField, ...]:
        return tuple(
            LabelField(self.seed, stream_index(family, step, p), self.n, self.precision)
            for p in range(FAMILY_WIDTHS[family])
        )

    def U(self, step: int) -> tuple[LabelField, ...]:
        return self._fields("U", step)

    def V(self, step: int) -> tuple[LabelField, ...]:
        return self._fields("V", step)

    def B(self, step: int) -> tuple[LabelField, ...]:
        return self._fields("B", step)


def organize_families(seed: int, window, precision: int = DEFAULT_PRECISION) -> LabelFamilies:
    return LabelFamilies(seed, window.n, precision)
