"""Vectorised passes over a rooted forest stored as a parent array.

Every tree-shaped object in the package (a window restricted to kept edges, a
quotient of a partition) is reduced to a :class:`RootedForest`.  Passes run
layer by layer over a depth key for which every parent is strictly shallower
than its children, so sibling updates inside a layer never conflict.
"""

from __future__ import annotations

from collections import deque

import numpy as np

INF = np.int64(1) << np.int64(60)


class RootedForest:
    """A forest given by ``parent`` (``-1`` at component roots).

    ``depth`` only needs to be strictly increasing along parent->child edges;
    the window depth works for any sub-forest of the window.
    """

    def __init__(self, parent, boundary=None, depth=None):
        parent = np.asarray(parent, dtype=np.int64)
        n = parent.shape[0]
        self.n = n
        self.parent = parent
        self.boundary = (
            np.zeros(n, dtype=bool) if boundary is None else np.asarray(boundary, dtype=bool)
        )
        if depth is None:
            depth = _depth_from_parent(parent)
        self.depth = np.asarray(depth, dtype=np.int64)
        # roots point at a dump slot n, which keeps scatter updates mask-free
        self._up = np.where(parent < 0, n, parent)
        self._nonroot = np.flatnonzero(parent >= 0)
        self._layers = _layers(self.depth)
        self._root_of = None
        self._adj = None

    # -- structure -------------------------------------------------------

    def root_of(self) -> np.ndarray:
        if self._root_of is None:
            top = np.arange(self.n + 1, dtype=np.int64)
            for layer in self._layers:
                p = self._up[layer]
                top[layer] = np.where(p < self.n, top[p], top[layer])
            self._root_of = top[: self.n]
        return self._root_of

    def component_ids(self) -> np.ndarray:
        """Component index per node, numbered by each component's minimal node."""
        root = self.root_of()
        first = np.full(self.n, self.n, dtype=np.int64)
        np.minimum.at(first, root, np.arange(self.n, dtype=np.int64))
        roots = np.flatnonzero(root == np.arange(self.n))
        order = roots[np.argsort(first[roots], kind="stable")]
        index = np.empty(self.n, dtype=np.int64)
        index[order] = np.arange(order.shape[0])
        return index[root]

    def degrees(self) -> np.ndarray:
        deg = np.bincount(self._up, minlength=self.n + 1)[: self.n]
        return deg + (self.parent >= 0)

    def neighbors(self, v: int) -> list[int]:
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in range(self.n)]
            for c in self._nonroot.tolist():
                p = int(self.parent[c])
                adj[p].append(c)
                adj[c].append(p)
            self._adj = adj
        return self._adj[v]

    def distances_from(self, source: int, limit: int | None = None) -> np.ndarray:
        """BFS distances from ``source``; ``-1`` where unreachable or beyond ``limit``."""
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            d = dist[v]
            if limit is not None and d >= limit:
                continue
            for w in self.neighbors(v):
                if dist[w] < 0:
                    dist[w] = d + 1
                    queue.append(w)
        return dist

    # -- passes ----------------------------------------------------------

    def subtree_sum(self, values) -> np.ndarray:
        acc = np.zeros(self.n + 1, dtype=np.int64)
        acc[: self.n] = values
        for layer in reversed(self._layers):
            np.add.at(acc, self._up[layer], acc[layer])
        return acc[: self.n]

    def boundary_branch_counts(self) -> np.ndarray:
        """Per node: number of boundary-reaching components left after deleting it."""
        sub = self.subtree_sum(self.boundary)
        total = sub[self.root_of()]
        reaching = (sub > 0).astype(np.int64)
        below = np.bincount(self._up, weights=reaching, minlength=self.n + 1)[: self.n]
        return below.astype(np.int64) + (total - sub > 0)

    def ball_min(self, keys, radius: int) -> np.ndarray:
        """Minimum of ``keys`` over each node's closed ball of the given radius."""
        m = np.asarray(keys, dtype=np.int64).copy()
        child = self._nonroot
        par = self.parent[child]
        for _ in range(radius):
            nxt = m.copy()
            nxt[child] = np.minimum(nxt[child], m[par])
            np.minimum.at(nxt, par, m[child])
            m = nxt
        return m

    def nearest_seed(self, seeds, ranks) -> np.ndarray:
        """Voronoi assignment: the rank-minimal seed among the nearest ones.

        ``ranks`` must be distinct non-negative integers on the seeds.
        Returns the chosen seed node per node, ``-1`` in seedless components.
        """
        seeds = np.asarray(seeds, dtype=bool)
        ranks = np.asarray(ranks, dtype=np.int64)
        if not seeds.any():
            return np.full(self.n, -1, dtype=np.int64)
        span = np.int64(ranks[seeds].max() + 1)
        key = np.full(self.n + 1, INF, dtype=np.int64)
        key[: self.n][seeds] = ranks[seeds]
        up = self._up
        # key encodes (distance, rank) as distance * span + rank
        for layer in reversed(self._layers):
            np.minimum.at(key, up[layer], key[layer] + span)
        key[self.n] = INF
        for layer in self._layers:
            key[layer] = np.minimum(key[layer], key[up[layer]] + span)
        key = key[: self.n]
        found = key < INF
        owner = np.full(int(span), -1, dtype=np.int64)
        owner[ranks[seeds]] = np.flatnonzero(seeds)
        return np.where(found, owner[np.where(found, key % span, 0)], -1)


def _depth_from_parent(parent: np.ndarray) -> np.ndarray:
    n = parent.shape[0]
    depth = np.full(n, -1, dtype=np.int64)
    children: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for v, p in enumerate(parent.tolist()):
        if p < 0:
            roots.append(v)
        else:
            children[p].append(v)
    queue = deque(roots)
    for r in roots:
        depth[r] = 0
    while queue:
        v = queue.popleft()
        for c in children[v]:
            depth[c] = depth[v] + 1
            queue.append(c)
    if (depth < 0).any():
        raise ValueError("parent array contains a cycle")
    return depth


def _layers(depth: np.ndarray) -> list:
    if depth.shape[0] == 0:
        return []
    if np.all(depth[1:] >= depth[:-1]):
        cuts = np.flatnonzero(np.diff(depth)) + 1
        bounds = [0, *cuts.tolist(), depth.shape[0]]
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    order = np.argsort(depth, kind="stable")
    cuts = np.flatnonzero(np.diff(depth[order])) + 1
    return np.split(order, cuts)
