"""Label clusters, the furcation proxy, the merging relabel and Fur / Sep.

"Infinite" is replaced throughout by "contains a window-boundary vertex": a
vertex is a furcation of its tree when deleting it leaves at least three
components that touch the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DegeneracyError
from .partition import (
    Partition,
    QuotientForest,
    assign_nearest,
    down,
    lift,
    quotient_forest,
)
from .tree_window import Forest, Tree, _kept


def _same_label(tree: Tree, labels: np.ndarray) -> np.ndarray:
    parent = np.maximum(tree.parent, 0)
    if labels.ndim == 1:
        same = labels == labels[parent]
    else:
        same = (labels == labels[parent]).all(axis=1)
    return same & (tree.parent >= 0)


def clust(window: Tree, labeling, within=None) -> Forest:
    """Keep exactly the ``within`` edges whose endpoints carry equal labels.

    ``labeling`` is one label per vertex, or an ``(n, k)`` array of k-bit words.
    """
    labels = np.asarray(labeling)
    return Forest(window, _kept(window, within) & _same_label(window, labels))


def furcations(window: Tree, forest: Forest, component: int) -> frozenset[int]:
    counts = forest.rooted().boundary_branch_counts()
    hit = (counts >= 3) & (forest.comp == component)
    return frozenset(np.flatnonzero(hit).tolist())


def _forking_roots(window: Tree, kept: np.ndarray):
    rooted = window.rooted(kept)
    root = rooted.root_of()
    forking = np.zeros(window.n, dtype=bool)
    forking[root[rooted.boundary_branch_counts() >= 3]] = True
    return root, forking


def r_plus(window: Tree, ambient: Forest, labeling, *, with_rounds: bool = False):
    """Flip non-forking clusters that touch a forking one, in synchronised rounds.

    Runs until no such cluster remains.  Raises :class:`DegeneracyError` if an
    ambient component touching the boundary has no forking cluster at all.
    """
    labels = np.array(labeling, dtype=np.uint8)
    parent = window.parent
    inner = np.flatnonzero(ambient.kept)
    rounds = 0
    while True:
        same = ambient.kept & _same_label(window, labels)
        root, forking = _forking_roots(window, same)
        if rounds == 0:
            touches = np.bincount(ambient.comp, weights=window.boundary,
                                  minlength=ambient.n_components) > 0
            has_fork = np.zeros(ambient.n_components, dtype=bool)
            has_fork[ambient.comp[forking]] = True
            bad = np.flatnonzero(touches & ~has_fork)
            if bad.size:
                raise DegeneracyError("no forking cluster", bad)
        cross = inner[~same[inner]]
        a, b = root[cross], root[parent[cross]]
        flip = np.zeros(window.n, dtype=bool)
        flip[b[forking[a] & ~forking[b]]] = True
        flip[a[forking[b] & ~forking[a]]] = True
        if not flip.any():
            break
        labels ^= flip[root].astype(np.uint8)
        rounds += 1
    return (labels, rounds) if with_rounds else labels


@dataclass
class CellStep:
    """Outcome of Fur or Sep with the intermediate data used by audits."""

    partition: Partition
    quotient: QuotientForest  # quotient of the input partition
    seeds: np.ndarray  # seed cells (furcations for Fur, the separated set for Sep)
    assignment: np.ndarray  # chosen seed cell per input cell


def furcation_cells(forest: Forest, pi: Partition, q: QuotientForest, rule: str) -> np.ndarray:
    """Seed cells for Fur.

    ``"quotient"``: cells that are furcations of the quotient tree.
    ``"vertex"``: cells containing a furcation of the underlying tree.  The
    two sets agree on infinite trees; on a window the second is nonempty in
    every forking component, the first need not be.
    """
    if rule == "quotient":
        return q.rooted.boundary_branch_counts() >= 3
    if rule == "vertex":
        hit = forest.rooted().boundary_branch_counts() >= 3
        return np.bincount(pi.cell_of, weights=hit, minlength=pi.n_cells) > 0
    raise ValueError(f"unknown furcation rule {rule!r}")


def fur_step(window: Tree, forest: Forest, pi: Partition, v_pair, seeds: str = "quotient") -> CellStep:
    q = quotient_forest(forest.rooted(), pi)
    chosen = furcation_cells(forest, pi, q, seeds)
    covered = np.zeros(forest.n_components, dtype=bool)
    covered[q.comp[chosen]] = True
    if not covered.all():
        raise DegeneracyError("quotient without furcation", np.flatnonzero(~covered))
    ranks = lift(pi, v_pair[0], v_pair[1]).ranks()
    phi = assign_nearest(q.rooted, chosen, ranks)
    return CellStep(down(phi, pi, forest.rooted()), q, chosen, phi)


def fur(window: Tree, forest: Forest, pi: Partition, v_pair, seeds: str = "quotient") -> Partition:
    """Coarsen ``pi`` into Voronoi cells around furcation cells, per component."""
    return fur_step(window, forest, pi, v_pair, seeds).partition


def sep_step(window: Tree, forest: Forest, pi: Partition, u_quad) -> CellStep:
    q = quotient_forest(forest.rooted(), pi)
    star = lift(pi, u_quad[0], u_quad[1]).ranks()
    seeds = q.rooted.ball_min(star, 3) == star
    square = lift(pi, u_quad[2], u_quad[3]).ranks()
    phi = assign_nearest(q.rooted, seeds, square)
    if (phi < 0).any():
        # every finite quotient tree has a global minimum, which is a seed
        raise ContractViolation("separated seed set missed a component")
    return CellStep(down(phi, pi, forest.rooted()), q, seeds, phi)


def sep(window: Tree, forest: Forest, pi: Partition, u_quad) -> Partition:
    """Coarsen ``pi`` around cells that are local minima within quotient distance 3."""
    return sep_step(window, forest, pi, u_quad).partition


@dataclass
class ClusterReport:
    forest: Forest
    size: np.ndarray
    reaches_boundary: np.ndarray
    forking: np.ndarray

    def to_records(self) -> list[dict]:
        return [
            {"size": int(s), "reaches_boundary": bool(b), "forking": bool(f)}
            for s, b, f in zip(self.size, self.reaches_boundary, self.forking)
        ]

    def to_json(self) -> str:
        return json.dumps({"clusters": self.to_records()})


def cluster_report(window: Tree, labeling, within=None) -> ClusterReport:
    forest = clust(window, labeling, within)
    k = forest.n_components
    size = np.bincount(forest.comp, minlength=k)
    reaches = np.bincount(forest.comp, weights=window.boundary, minlength=k) > 0
    forking = np.zeros(k, dtype=bool)
    forking[forest.comp[forest.rooted().boundary_branch_counts() >= 3]] = True
    return ClusterReport(forest, size, reaches, forking)
