"""Finite balls of the d-regular tree and spanning forests on them."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable

import numpy as np

from ._forest import RootedForest
from .errors import InvalidParameter


class Tree:
    """A finite rooted tree with designated boundary vertices.

    Vertex ids are ``0..n-1`` and vertex 0 is the root.  ``parent[0] == -1``.
    Windows of the regular tree are the main instance; small hand-built trees
    (paths, stars) are used in tests.
    """

    def __init__(self, parent, boundary, depth=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.n = int(self.parent.shape[0])
        self.boundary = np.asarray(boundary, dtype=bool)
        full = RootedForest(self.parent, self.boundary, depth)
        self.depth = full.depth
        self._full = full
        for arr in (self.parent, self.boundary, self.depth):
            arr.flags.writeable = False

    @classmethod
    def from_edges(cls, n: int, edges, boundary=(), root: int = 0) -> "Tree":
        """Build from an undirected edge list; ``boundary`` lists boundary vertices."""
        if root != 0:
            raise InvalidParameter("the root must be vertex 0")
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        parent = np.full(n, -2, dtype=np.int64)
        parent[0] = -1
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if parent[w] == -2:
                    parent[w] = v
                    queue.append(w)
        if (parent == -2).any() or len(edges) != n - 1:
            raise InvalidParameter("edges do not form a spanning tree")
        mask = np.zeros(n, dtype=bool)
        mask[list(boundary)] = True
        return cls(parent, mask)

    def rooted(self, kept=None) -> RootedForest:
        """The forest of kept edges (edge ``v``-``parent[v]`` is indexed by ``v``)."""
        if kept is None:
            return self._full
        kept = np.asarray(kept, dtype=bool)
        return RootedForest(np.where(kept, self.parent, -1), self.boundary, self.depth)

    def edges(self) -> list[tuple[int, int]]:
        return [(int(self.parent[v]), v) for v in range(1, self.n)]

    def neighbors(self, v: int) -> list[int]:
        return self._full.neighbors(v)


class TreeWindow(Tree):
    """Radius-``radius`` ball of the ``degree``-regular tree, numbered breadth first."""

    def __init__(self, degree: int, radius: int, parent, boundary, depth):
        super().__init__(parent, boundary, depth)
        self.degree = degree
        self.radius = radius

    def __repr__(self) -> str:
        return f"TreeWindow(degree={self.degree}, radius={self.radius}, n={self.n})"


def window_size(degree: int, radius: int) -> int:
    return 1 + degree * ((degree - 1) ** radius - 1) // (degree - 2)


def build_window(degree: int, radius: int) -> TreeWindow:
    if degree < 3 or radius < 1:
        raise InvalidParameter(f"need degree >= 3 and radius >= 1, got {degree}, {radius}")
    parents = [np.array([-1], dtype=np.int64), np.zeros(degree, dtype=np.int64)]
    start = 1
    for _ in range(2, radius + 1):
        prev = np.arange(start, start + parents[-1].shape[0], dtype=np.int64)
        start += prev.shape[0]
        parents.append(np.repeat(prev, degree - 1))
    parent = np.concatenate(parents)
    depth = np.repeat(np.arange(radius + 1), [p.shape[0] for p in parents])
    return TreeWindow(degree, radius, parent, depth == radius, depth)


class Forest:
    """Spanning forest of a tree: a kept flag per edge plus component ids.

    Edge ``v``-``parent[v]`` is stored at index ``v``; ``kept[0]`` is always
    False.  Component ids are numbered by each component's minimal vertex.
    """

    def __init__(self, tree: Tree, kept):
        kept = np.array(kept, dtype=bool)
        kept &= tree.parent >= 0
        self.kept = kept
        self._rooted = tree.rooted(kept)
        self.comp = self._rooted.component_ids()
        self.kept.flags.writeable = False
        self.comp.flags.writeable = False

    @property
    def n_components(self) -> int:
        return int(self.comp.max()) + 1 if self.comp.size else 0

    def rooted(self) -> RootedForest:
        return self._rooted

    def members(self, component: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.comp == component).tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, Forest) and np.array_equal(self.kept, other.kept)

    __hash__ = None


def full_forest(tree: Tree) -> Forest:
    return Forest(tree, np.ones(tree.n, dtype=bool))


def as_mask(tree: Tree, vertices) -> np.ndarray:
    """Coerce a vertex set (iterable of ids or boolean mask) to a boolean mask."""
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        return vertices
    mask = np.zeros(tree.n, dtype=bool)
    ids = list(vertices) if isinstance(vertices, Iterable) else [vertices]
    if ids:
        mask[np.asarray(ids, dtype=np.int64)] = True
    return mask


def _kept(tree: Tree, within) -> np.ndarray:
    if within is None:
        return tree.parent >= 0
    if isinstance(within, Forest):
        return within.kept
    return np.asarray(within, dtype=bool) & (tree.parent >= 0)


def ball(window: Tree, center: int, r: int, restrict=None) -> frozenset[int]:
    """Closed ball around ``center``; distances use only ``restrict`` edges if given."""
    if not 0 <= center < window.n:
        raise InvalidParameter(f"vertex {center} not in window")
    if r < 0:
        raise InvalidParameter("radius must be non-negative")
    forest = window.rooted() if restrict is None else window.rooted(_kept(window, restrict))
    dist = forest.distances_from(center, limit=r)
    return frozenset(np.flatnonzero(dist >= 0).tolist())


def boundary_reaching_count(window: Tree, removed=(), within=None) -> int:
    """Components of the window minus ``removed`` (using ``within`` edges) touching the boundary."""
    gone = as_mask(window, removed)
    kept = _kept(window, within).copy()
    parent_gone = np.zeros(window.n, dtype=bool)
    has_parent = window.parent >= 0
    parent_gone[has_parent] = gone[window.parent[has_parent]]
    kept &= ~gone & ~parent_gone
    rooted = window.rooted(kept)
    live = window.boundary & ~gone
    return int(np.unique(rooted.root_of()[live]).shape[0])
