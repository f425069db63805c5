"""Connected-cell partitions, quotient trees and the elementary cell operations.

A :class:`Partition` is a per-vertex cell index.  Cell ids are canonical:
cells are numbered in the order of their minimal vertex, so two partitions
with the same cells are equal as arrays.  Operations that need the tree take
it (or a :class:`~fiid._forest.RootedForest` view of it) explicitly.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._forest import RootedForest
from .errors import ContractViolation
from .randomness import LabelField, order_keys
from .tree_window import Forest, Tree, as_mask

_KEY_MAX = np.iinfo(np.uint64).max


def canonical_labels(labels) -> np.ndarray:
    """Relabel classes 0..k-1 in the order of their minimal member."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.shape[0], dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.shape[0])
    return rank[inverse.reshape(-1)]


class Partition:
    def __init__(self, cell_of):
        self.cell_of = canonical_labels(cell_of)
        self.cell_of.flags.writeable = False
        self.n = int(self.cell_of.shape[0])
        self.n_cells = int(self.cell_of.max()) + 1 if self.n else 0
        self._cells = None

    @classmethod
    def from_cells(cls, cells, n: int | None = None) -> "Partition":
        cells = [list(c) for c in cells]
        if n is None:
            n = sum(len(c) for c in cells)
        labels = np.full(n, -1, dtype=np.int64)
        for i, c in enumerate(cells):
            if (labels[c] >= 0).any():
                raise ContractViolation("cells overlap")
            labels[c] = i
        if (labels < 0).any():
            raise ContractViolation("cells do not cover every vertex")
        return cls(labels)

    def cells(self) -> list[frozenset[int]]:
        if self._cells is None:
            order = np.argsort(self.cell_of, kind="stable")
            cuts = np.flatnonzero(np.diff(self.cell_of[order])) + 1
            self._cells = [frozenset(part.tolist()) for part in np.split(order, cuts)]
        return self._cells

    def cell(self, v: int) -> frozenset[int]:
        return self.cells()[int(self.cell_of[v])]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cell_of, minlength=self.n_cells)

    def to_json(self) -> str:
        return json.dumps({"cells": [sorted(c) for c in self.cells()]})

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls.from_cells(json.loads(text)["cells"])

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.cell_of, other.cell_of)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Partition(n={self.n}, cells={self.n_cells})"


def singleton_partition(tree: Tree) -> Partition:
    return Partition(np.arange(tree.n))


def _rooted(tree, forest=None) -> RootedForest:
    if isinstance(tree, RootedForest):
        return tree
    if isinstance(tree, QuotientTree):
        return tree.rooted()
    if forest is None:
        return tree.rooted()
    return forest.rooted() if isinstance(forest, Forest) else tree.rooted(forest)


def _tops(rooted: RootedForest, labels: np.ndarray) -> np.ndarray:
    par = rooted.parent
    is_top = par < 0
    inner = ~is_top
    is_top[inner] = labels[par[inner]] != labels[inner]
    return is_top


def classes_connected(rooted: RootedForest, labels) -> bool:
    """True iff every class of ``labels`` spans a connected piece of ``rooted``."""
    labels = canonical_labels(labels)
    counts = np.bincount(labels[_tops(rooted, labels)], minlength=int(labels.max()) + 1)
    return bool((counts == 1).all())


@dataclass
class QuotientForest:
    """All quotient trees of a compatible (forest, partition) pair at once."""

    rooted: RootedForest  # one node per cell
    tops: np.ndarray  # top vertex of each cell
    comp: np.ndarray  # ambient component of each cell


def quotient_forest(base: RootedForest, pi: Partition) -> QuotientForest:
    is_top = _tops(base, pi.cell_of)
    counts = np.bincount(pi.cell_of[is_top], minlength=pi.n_cells)
    if not (counts == 1).all():
        raise ContractViolation("partition has cells that are disconnected or straddle components")
    tops = np.empty(pi.n_cells, dtype=np.int64)
    tops[pi.cell_of[is_top]] = np.flatnonzero(is_top)
    above = base.parent[tops]
    cparent = np.where(above >= 0, pi.cell_of[np.maximum(above, 0)], -1)
    boundary = np.bincount(pi.cell_of, weights=base.boundary, minlength=pi.n_cells) > 0
    rooted = RootedForest(cparent, boundary, base.depth[tops])
    comp = base.component_ids()[tops]
    return QuotientForest(rooted, tops, comp)


@dataclass
class QuotientTree:
    """Quotient of one forest component: cells as vertices, adjacent at distance 1."""

    cells: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    members: dict[int, frozenset[int]] = field(repr=False)
    boundary: tuple[bool, ...] = field(repr=False, default=())

    def rooted(self) -> RootedForest:
        """Local view with nodes ``0..len(cells)-1`` in the order of ``cells``."""
        index = {c: i for i, c in enumerate(self.cells)}
        parent = np.full(len(self.cells), -1, dtype=np.int64)
        for a, b in self.edges:
            parent[index[b]] = index[a]
        return RootedForest(parent, self.boundary or None)

    def degree(self, cell: int) -> int:
        return sum(cell in e for e in self.edges)


def quotient_tree(window: Tree, forest: Forest, component: int, pi: Partition) -> QuotientTree:
    if not 0 <= component < forest.n_components:
        raise ContractViolation(f"no component {component}")
    q = quotient_forest(forest.rooted(), pi)
    cells = np.flatnonzero(q.comp == component)
    par = q.rooted.parent
    edges = tuple((int(par[c]), int(c)) for c in cells if par[c] >= 0)
    chosen = set(cells.tolist())
    # acyclic and connected: n - 1 edges, all reachable from the first cell
    adj: dict[int, list[int]] = {int(c): [] for c in cells}
    for a, b in edges:
        if a not in chosen:
            raise ContractViolation("quotient edge leaves its component")
        adj[a].append(b)
        adj[b].append(a)
    seen = {int(cells[0])}
    queue = deque(seen)
    while queue:
        for w in adj[queue.popleft()]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    if len(edges) != len(cells) - 1 or len(seen) != len(cells):
        raise ContractViolation("quotient is not a tree")
    all_cells = pi.cells()
    return QuotientTree(
        cells=tuple(int(c) for c in cells),
        edges=edges,
        members={int(c): all_cells[c] for c in cells},
        boundary=tuple(bool(b) for b in q.rooted.boundary[cells]),
    )


def down(xi, pi: Partition, tree=None) -> Partition:
    """Push a partition of the cells of ``pi`` down to the vertices.

    ``xi`` is a class label per cell, or a list of cell groups.  If the tree is
    given, connectivity of the resulting cells is asserted.
    """
    if not isinstance(xi, np.ndarray) and xi and not np.isscalar(next(iter(xi))):
        labels = np.full(pi.n_cells, -1, dtype=np.int64)
        for i, group in enumerate(xi):
            labels[list(group)] = i
        if (labels < 0).any():
            raise ContractViolation("xi does not cover every cell")
        xi = labels
    xi = np.asarray(xi)
    out = Partition(xi[pi.cell_of])
    if tree is not None and not classes_connected(_rooted(tree), out.cell_of):
        raise ContractViolation("down produced a disconnected cell")
    return out


def vor(tree, seeds, alpha) -> np.ndarray:
    """Nearest-seed assignment with ties broken by the alpha-minimal seed.

    ``tree`` is a :class:`Tree`, a :class:`QuotientTree` or a rooted forest;
    ``seeds`` a vertex set; ``alpha`` a label field or sequence of reals.
    Returns the chosen seed for every node (its own cell representative).
    """
    rooted = _rooted(tree)
    mask = as_mask(rooted, seeds) if not isinstance(seeds, np.ndarray) else seeds.astype(bool)
    if not mask.any():
        raise ContractViolation("vor needs a nonempty seed set")
    phi = assign_nearest(rooted, mask, key_ranks(order_keys(alpha)))
    if (phi < 0).any():
        raise ContractViolation("a component of the tree contains no seed")
    return phi


def key_ranks(keys, ids=None) -> np.ndarray:
    """Distinct integer ranks ordering by (key, id)."""
    keys = np.asarray(keys)
    if ids is None:
        ids = np.arange(keys.shape[0])
    order = np.lexsort((ids, keys))
    rank = np.empty(keys.shape[0], dtype=np.int64)
    rank[order] = np.arange(keys.shape[0])
    return rank


def assign_nearest(rooted: RootedForest, seeds: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    phi = rooted.nearest_seed(seeds, ranks)
    ok = phi >= 0
    if ok.any():
        if not (phi[seeds] == np.flatnonzero(seeds)).all():
            raise ContractViolation("a seed was not assigned to itself")
        if not classes_connected(rooted, np.where(ok, phi, -1 - np.arange(rooted.n))):
            raise ContractViolation("a Voronoi class is disconnected")
    return phi


@dataclass
class CellValues:
    """Per-cell labels: the value of ``field`` at each cell's ``owner`` vertex."""

    owner: np.ndarray
    field: LabelField | None

    def ranks(self) -> np.ndarray:
        keys = order_keys(self.field)[self.owner]
        return key_ranks(keys, self.owner)

    def bits(self) -> np.ndarray:
        return self.field.first_bits()[self.owner]

    def value(self, cell: int):
        return self.field.label(int(self.owner[cell]))


def argmin_owner(pi: Partition, beta1) -> np.ndarray:
    """Per cell, the vertex with minimal beta1 (ties to the smaller vertex id)."""
    keys = order_keys(beta1)
    best = np.full(pi.n_cells, _KEY_MAX, dtype=np.uint64)
    np.minimum.at(best, pi.cell_of, keys)
    hit = np.flatnonzero(keys == best[pi.cell_of])
    owner = np.full(pi.n_cells, pi.n, dtype=np.int64)
    np.minimum.at(owner, pi.cell_of[hit], hit)
    return owner


def lift(pi: Partition, beta1, beta2) -> CellValues:
    if not isinstance(beta2, LabelField):
        from .randomness import ExplicitField

        beta2 = ExplicitField(beta2)
    return CellValues(argmin_owner(pi, beta1), beta2)


def bit_pi(pi: Partition, b) -> np.ndarray:
    """Fair bit per cell: first digit of ``lift(pi, b[0], b[1])``."""
    return lift(pi, b[0], b[1]).bits()


def is_refinement(pi1: Partition, pi2: Partition) -> bool:
    lo = np.full(pi1.n_cells, pi2.n_cells, dtype=np.int64)
    hi = np.full(pi1.n_cells, -1, dtype=np.int64)
    np.minimum.at(lo, pi1.cell_of, pi2.cell_of)
    np.maximum.at(hi, pi1.cell_of, pi2.cell_of)
    return bool((lo == hi).all())


def is_compatible(forest: Forest, pi: Partition) -> bool:
    lo = np.full(pi.n_cells, forest.n_components, dtype=np.int64)
    hi = np.full(pi.n_cells, -1, dtype=np.int64)
    np.minimum.at(lo, pi.cell_of, forest.comp)
    np.maximum.at(hi, pi.cell_of, forest.comp)
    return bool((lo == hi).all())
