from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import path_tree, random_tree
from fiid.errors import ContractViolation
from fiid.partition import (
    Partition,
    bit_pi,
    classes_connected,
    down,
    is_compatible,
    is_refinement,
    lift,
    quotient_forest,
    quotient_tree,
    singleton_partition,
    vor,
)
from fiid.randomness import ExplicitField, LabelField
from fiid.tree_window import Forest, build_window, full_forest


def test_singletons():
    w = build_window(3, 1)
    pi = singleton_partition(w)
    assert pi.n_cells == 4
    assert len(set(pi.cell_of.tolist())) == 4
    other = Partition([0, 0, 1, 1])
    assert is_refinement(pi, other)


def test_canonical_ids_and_json_roundtrip():
    pi = Partition([5, 5, 2, 9])
    assert pi.cell_of.tolist() == [0, 0, 1, 2]
    assert pi.cells() == [{0, 1}, {2}, {3}]
    assert Partition.from_json(pi.to_json()) == pi
    assert pi.to_json() == '{"cells": [[0, 1], [2], [3]]}'
    assert Partition.from_cells([[3], [2], [0, 1]]) == pi


def test_from_cells_rejects_overlap_and_gaps():
    with pytest.raises(ContractViolation):
        Partition.from_cells([[0, 1], [1, 2]])
    with pytest.raises(ContractViolation):
        Partition.from_cells([[0, 1], [3]], n=4)


def test_quotient_examples(path4):
    f = full_forest(path4)
    q = quotient_tree(path4, f, 0, singleton_partition(path4))
    assert len(q.cells) == 4 and len(q.edges) == 3
    g = nx.Graph(q.edges)
    assert nx.is_isomorphic(g, nx.path_graph(4))
    one = quotient_tree(path4, f, 0, Partition([0, 0, 0, 0]))
    assert one.cells == (0,) and one.edges == ()
    two = quotient_tree(path4, f, 0, Partition([0, 0, 1, 1]))
    assert two.edges == ((0, 1),)
    assert two.members == {0: {0, 1}, 1: {2, 3}}


def test_quotient_rejects_incompatible(path4):
    f = Forest(path4, [False, True, False, True])  # {0,1} {2,3}
    with pytest.raises(ContractViolation):
        quotient_tree(path4, f, 0, Partition([0, 1, 1, 2]))
    with pytest.raises(ContractViolation):
        quotient_forest(path4.rooted(), Partition([0, 1, 0, 1]))  # disconnected cells


def test_quotient_of_window_components():
    w = build_window(3, 4)
    rng = np.random.default_rng(0)
    f = Forest(w, rng.random(w.n) < 0.8)
    for c in range(f.n_components):
        q = quotient_tree(w, f, c, singleton_partition(w))
        assert set(q.cells) == f.members(c)


def test_down_examples(path4):
    pi = Partition([0, 0, 1, 2])
    assert down(np.arange(3), pi) == pi
    assert down(np.zeros(3, dtype=int), pi).n_cells == 1
    out = down([[0, 1], [2]], pi, path4)
    assert out.cells() == [{0, 1, 2}, {3}]
    with pytest.raises(ContractViolation):
        down([[0, 2], [1]], pi, path4)


def test_vor_examples(path4):
    phi = vor(path4, {0, 3}, [0.1, 0.2, 0.3, 0.4])
    assert phi.tolist() == [0, 0, 3, 3]
    path3 = path_tree(3)
    assert vor(path3, {0, 2}, [0.1, 0.5, 0.9]).tolist() == [0, 0, 2]
    assert vor(path3, {0, 2}, [0.9, 0.5, 0.1]).tolist() == [0, 2, 2]
    assert vor(path4, set(range(4)), [0.4, 0.3, 0.2, 0.1]).tolist() == [0, 1, 2, 3]
    with pytest.raises(ContractViolation):
        vor(path4, set(), [0.1] * 4)


def brute_vor(tree, kept, seeds, alpha):
    g = nx.Graph()
    g.add_nodes_from(range(tree.n))
    g.add_edges_from((int(tree.parent[v]), v) for v in range(1, tree.n) if kept[v])
    out = np.full(tree.n, -1)
    for v in range(tree.n):
        dist = nx.single_source_shortest_path_length(g, v)
        cands = [(d, alpha[s], s) for s, d in dist.items() if s in seeds]
        if cands:
            out[v] = min(cands)[2]
    return out


@given(st.integers(0, 10 ** 9), st.integers(2, 40))
def test_vor_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, n)
    kept = rng.random(n) < 0.85
    forest = Forest(tree, kept)
    seeds = set(np.flatnonzero(rng.random(n) < 0.3).tolist())
    # one seed per component so vor is defined everywhere
    for c in range(forest.n_components):
        members = sorted(forest.members(c))
        if not seeds & set(members):
            seeds.add(members[int(rng.integers(len(members)))])
    alpha = [float(a) for a in rng.permutation(n) + 1]
    phi = vor(forest.rooted(), seeds, alpha)
    assert np.array_equal(phi, brute_vor(tree, forest.kept, seeds, alpha))
    assert classes_connected(forest.rooted(), phi)
    assert all(phi[s] == s for s in seeds)


def test_vor_seedless_component_is_an_error(path4):
    f = Forest(path4, [False, True, False, True])
    with pytest.raises(ContractViolation):
        vor(f.rooted(), {0}, [0.1] * 4)


def test_lift_examples():
    pi = Partition([0, 0, 1])
    b1 = [Fraction(1, 4), Fraction(3, 4), Fraction(1, 2)]
    b2 = [Fraction(7, 8), Fraction(1, 8), Fraction(5, 8)]
    vals = lift(pi, b1, b2)
    assert vals.value(0) == Fraction(7, 8)
    assert vals.value(1) == Fraction(5, 8)
    const = lift(pi, b1, [Fraction(1, 3)] * 3)
    assert {const.value(c) for c in range(2)} == {Fraction(1, 3)}


def test_lift_ties_go_to_smaller_vertex():
    pi = Partition([0, 0, 0])
    vals = lift(pi, [Fraction(1, 2)] * 3, [Fraction(1, 8), Fraction(7, 8), Fraction(7, 8)])
    assert vals.owner.tolist() == [0]


def test_lift_ignores_cell_numbering():
    f1 = LabelField(1, 0, 6)
    f2 = LabelField(1, 1, 6)
    a = Partition([0, 0, 1, 1, 2, 2])
    b = Partition.from_cells([[4, 5], [0, 1], [2, 3]])
    assert a == b
    assert np.array_equal(lift(a, f1, f2).owner, lift(b, f1, f2).owner)


def test_bit_pi_examples():
    pi = Partition([0, 1])
    b1 = ExplicitField([Fraction(1, 3), Fraction(1, 3)])
    b2 = ExplicitField([Fraction(3, 4), Fraction(1, 2)])  # 0.10111..., 0.0111...
    assert bit_pi(pi, (b1, b2)).tolist() == [1, 0]


def test_bit_pi_is_first_digit_of_lift():
    w = build_window(3, 4)
    rng = np.random.default_rng(3)
    pi = Partition(vor(w, set(rng.choice(w.n, 8, replace=False).tolist()), rng.random(w.n) + 0.01))
    b = (LabelField(9, 6, w.n), LabelField(9, 7, w.n))
    vals = lift(pi, *b)
    expect = [vals.value(c).bit(1) for c in range(pi.n_cells)]
    assert bit_pi(pi, b).tolist() == expect


def test_root_cell_bit_fair():
    w = build_window(3, 3)
    pi = Partition(np.zeros(w.n, dtype=int))
    ones = 0
    for s in range(10_000):
        ones += int(bit_pi(pi, (LabelField(s, 6, w.n), LabelField(s, 7, w.n)))[0])
    assert abs(ones / 10_000 - 0.5) <= 0.016


def test_refinement_examples(path4):
    pi = Partition([0, 0, 1, 1])
    assert is_refinement(singleton_partition(path4), pi)
    assert is_refinement(pi, pi)
    assert not is_refinement(pi, Partition([0, 1, 0, 1]))


def test_compatibility_examples(path4):
    pi = Partition([0, 0, 1, 1])
    assert is_compatible(full_forest(path4), pi)
    split = Forest(path4, [False, True, False, True])
    assert is_compatible(split, singleton_partition(path4))
    assert not is_compatible(split, Partition([0, 1, 1, 2]))


@given(st.integers(0, 10 ** 9))
def test_down_preserves_refinement(seed):
    rng = np.random.default_rng(seed)
    w = build_window(3, 4)
    pi = Partition(vor(w, set(rng.choice(w.n, 12, replace=False).tolist()), rng.random(w.n) + 0.01))
    q = quotient_forest(w.rooted(), pi)
    seeds = np.zeros(pi.n_cells, dtype=bool)
    seeds[rng.choice(pi.n_cells, 3, replace=False)] = True
    xi = vor(q.rooted, seeds, rng.random(pi.n_cells) + 0.01)
    out = down(xi, pi, w)
    assert is_refinement(pi, out)
    assert down(np.arange(pi.n_cells), pi, w) == pi
