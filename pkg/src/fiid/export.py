"""Graphviz DOT text for windows, labelings and partitions."""

from __future__ import annotations

import colorsys

import numpy as np

from .construction import LambdaResult
from .partition import Partition
from .tree_window import Tree


def palette(k: int) -> list[str]:
    """``k`` well-separated fill colours as ``#rrggbb``."""
    out = []
    for i in range(k):
        r, g, b = colorsys.hsv_to_rgb(i / max(k, 1), 0.45, 0.95)
        out.append("#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255)))
    return out


def _node_line(v: int, attrs: dict) -> str:
    body = ", ".join(f'{k}="{val}"' for k, val in attrs.items())
    return f'  {v} [{body}];'


def window_dot(tree: Tree, words=None, partition: Partition | None = None,
               furcations=(), name: str = "window", fills=None) -> str:
    """DOT for a tree: boundary vertices are squares, furcations stars.

    ``words`` (one string per vertex) colours vertices by word;
    ``partition`` draws every cell with two or more vertices as a subgraph cluster.
    ``fills`` overrides the fill colour per vertex.
    """
    starred = set(int(v) for v in furcations)
    colors = {}
    if words is not None:
        distinct = sorted(set(words))
        colors = dict(zip(distinct, palette(len(distinct))))
    lines = [f"graph {name} {{", '  node [style="filled", fillcolor="white", fontsize="8"];']
    for v in range(tree.n):
        attrs = {"label": str(v)}
        if tree.boundary[v]:
            attrs["shape"] = "square"
        if v in starred:
            attrs["shape"] = "star"
        if words is not None:
            attrs["fillcolor"] = colors[words[v]]
            attrs["tooltip"] = words[v] or "-"
        if fills is not None:
            attrs["fillcolor"] = fills[v]
        lines.append(_node_line(v, attrs))
    if partition is not None:
        for i, cell in enumerate(partition.cells()):
            if len(cell) < 2:
                continue
            lines.append(f"  subgraph cluster_{i} {{")
            lines.append('    style="rounded"; color="gray40";')
            lines.append("    " + " ".join(f"{v};" for v in sorted(cell)))
            lines.append("  }")
    for v in range(1, tree.n):
        lines.append(f"  {int(tree.parent[v])} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def result_dot(result: LambdaResult, step_overlay: int | None = None) -> str:
    """DOT for a finished run: colours by word, furcations of the final forest starred."""
    from .cluster_ops import cluster_report

    words = result.words()
    hit = []
    if result.bits.shape[1]:
        rep = cluster_report(result.window, result.bits)
        hit = np.flatnonzero(rep.forest.rooted().boundary_branch_counts() >= 3)
    pi = None
    if step_overlay is not None:
        if not 0 <= step_overlay < len(result.archive):
            raise IndexError(f"no partition for step {step_overlay}")
        pi = result.archive[step_overlay].partition
    return window_dot(result.window, words, pi, hit, name="labeling")


def partition_dot(tree: Tree, pi: Partition, name: str = "partition") -> str:
    """Cells as coloured blobs."""
    cols = palette(pi.n_cells)
    return window_dot(tree, partition=pi, name=name, fills=[cols[c] for c in pi.cell_of])
