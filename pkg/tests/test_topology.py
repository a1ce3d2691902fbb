import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from crackle.errors import ParameterError, StructureError
from crackle.geometry import SimplicialComplex, brute_force_edges, cech_complex
from crackle.topology import (SmallGraph, betti_cycle, betti_numbers, complete_graph, connected, cycle_graph,
                              evaluate_h, evaluate_h_batch, evaluate_h_tilde, gamma_iso, graph_isomorphic,
                              path_graph, proximity_bound, star_graph)


def _closure(top):
    levels = {}
    for s in top:
        for p in range(1, len(s) + 1):
            for f in itertools.combinations(s, p):
                levels.setdefault(p - 1, set()).add(f)
    return SimplicialComplex([sorted(levels[p]) for p in range(len(levels))], len(levels) - 1)


def test_hollow_and_full_triangle():
    hollow = _closure([(0, 1), (1, 2), (0, 2)])
    assert betti_numbers(hollow).betti == (1, 1)
    assert betti_numbers(_closure([(0, 1, 2)])).betti == (1, 0, 0)


def test_hollow_octahedron():
    # vertices +-e1, +-e2, +-e3 as (0,1), (2,3), (4,5); faces pick one from each pair
    faces = [tuple(sorted(c)) for c in itertools.product((0, 1), (2, 3), (4, 5))]
    cx = _closure(faces)
    assert (cx.count(0), cx.count(1), cx.count(2)) == (6, 12, 8)
    assert betti_numbers(cx).betti == (1, 0, 1)


def test_missing_face_is_structural_error():
    cx = SimplicialComplex([[(0,), (1,), (2,)], [(0, 1), (1, 2)], [(0, 1, 2)]], 2)
    with pytest.raises(StructureError):
        betti_numbers(cx)
    with pytest.raises(StructureError):
        betti_numbers(SimplicialComplex([[(0,), (1,)], [(1, 0)]], 1))


def test_empty_complex_is_all_zero():
    assert betti_numbers(SimplicialComplex([[]], 2)).betti == (0, 0, 0)


def _gf2_rank_oracle(mat):
    m = mat.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = [r for r in range(rank, rows) if m[r, c]]
        if not piv:
            continue
        m[[rank, piv[0]]] = m[[piv[0], rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def test_boundary_rank_matches_dense_elimination():
    from crackle.topology import boundary_rank
    rng = np.random.default_rng(0)
    for _ in range(50):
        pts = rng.uniform(0, 2, (12, 2))
        cx = cech_complex(pts, rng.uniform(0.5, 1.5), 2)
        for p in (1, 2):
            if cx.count(p) == 0:
                continue
            faces, simp = cx.simplices_by_dim[p - 1], cx.simplices_by_dim[p]
            idx = {f: i for i, f in enumerate(faces)}
            mat = np.zeros((len(faces), len(simp)), dtype=np.uint8)
            for j, s in enumerate(simp):
                for i in range(len(s)):
                    mat[idx[s[:i] + s[i + 1:]], j] = 1
            assert boundary_rank(faces, simp) == _gf2_rank_oracle(mat)


def test_euler_and_cycle_rank_on_random_complexes():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pts = rng.uniform(0, 4, (int(rng.integers(1, 30)), 2))
        r = rng.uniform(0.2, 2.0)
        cx = cech_complex(pts, r, 3)
        assert betti_numbers(cx).euler_characteristic() == cx.euler_characteristic()
        g = cech_complex(pts, r, 1)
        b = betti_numbers(g, 1)
        assert b[1] == g.count(1) - g.count(0) + b[0]


def test_betti_zero_counts_components():
    rng = np.random.default_rng(2)
    for _ in range(30):
        pts = rng.uniform(0, 5, (25, 2))
        G = nx.Graph()
        G.add_nodes_from(range(25))
        G.add_edges_from(map(tuple, brute_force_edges(pts, 1.0)))
        assert betti_numbers(cech_complex(pts, 1.0, 2))[0] == nx.number_connected_components(G)


def test_isomorphism_examples():
    assert graph_isomorphic(cycle_graph(5), cycle_graph(5))
    assert not graph_isomorphic(path_graph(4), star_graph(3))
    rng = np.random.default_rng(3)
    base = sorted(cycle_graph(5).edges)
    for _ in range(10):
        p, q = rng.permutation(5), rng.permutation(5)
        g1 = SmallGraph.from_edges(5, [(p[i], p[j]) for i, j in base])
        g2 = SmallGraph.from_edges(5, [(q[i], q[j]) for i, j in base])
        assert graph_isomorphic(g1, g2)


@given(st.integers(2, 7), st.data())
def test_isomorphism_agrees_with_networkx(n, data):
    pairs = list(itertools.combinations(range(n), 2))
    e1 = data.draw(st.lists(st.sampled_from(pairs), unique=True))
    e2 = data.draw(st.lists(st.sampled_from(pairs), unique=True))
    g1, g2 = SmallGraph.from_edges(n, e1), SmallGraph.from_edges(n, e2)
    n1, n2 = nx.Graph(), nx.Graph()
    n1.add_nodes_from(range(n)); n1.add_edges_from(e1)
    n2.add_nodes_from(range(n)); n2.add_edges_from(e2)
    assert graph_isomorphic(g1, g2) == nx.is_isomorphic(n1, n2)


def test_isomorphism_size_cap():
    with pytest.raises(ParameterError):
        graph_isomorphic(path_graph(9), path_graph(9))


def test_evaluate_h_examples():
    assert evaluate_h(connected(2), [[0.0], [0.8]], 1.0) == 1
    side = 0.9
    tri = [[0, 0], [side, 0], [side / 2, side * math.sqrt(3) / 2]]
    assert evaluate_h(betti_cycle(3), tri, 1.0) == 1
    far = [[0.0], [1.0], [10 * proximity_bound(connected(3))]]
    for c in (connected(3), betti_cycle(3), gamma_iso(path_graph(3))):
        assert evaluate_h(c, far, 1.0) == 0
    with pytest.raises(ParameterError):
        evaluate_h(connected(3), [[0.0], [1.0]], 1.0)


def test_h_tilde_examples():
    assert evaluate_h_tilde(np.arange(6)[:, None] * 0.5, 1.0) == 1
    assert evaluate_h_tilde([[0.0], [0.5], [3.5], [4.0]], 1.0) == 0


def test_proximity_bounds():
    assert proximity_bound(connected(2)) == 1
    assert proximity_bound(gamma_iso(path_graph(4))) == 3
    assert proximity_bound(betti_cycle(3)) == 2


def test_betti_cycle_configurations_respect_bound():
    rng = np.random.default_rng(4)
    configs = rng.uniform(-2, 2, (4000, 3, 2))
    h = evaluate_h_batch(betti_cycle(3), configs, 1.0)
    assert h.sum() > 0
    for c in configs[h == 1]:
        diam = max(np.linalg.norm(a - b) for a in c for b in c)
        assert diam <= proximity_bound(betti_cycle(3)) + 1e-12


def test_betti_cycle_k2_equals_connected():
    configs = np.random.default_rng(5).uniform(-1.5, 1.5, (2000, 2, 2))
    assert np.array_equal(evaluate_h_batch(betti_cycle(2), configs, 1.0),
                          evaluate_h_batch(connected(2), configs, 1.0))


CONSTRAINTS = [connected(3), betti_cycle(3), gamma_iso(path_graph(3)), gamma_iso(complete_graph(3)),
               gamma_iso(star_graph(3)), connected(4)]


@given(st.sampled_from(CONSTRAINTS), st.data(), st.floats(-50, 50), st.floats(-50, 50), st.floats(0.25, 4.0))
def test_h_invariances(constraint, data, tx, ty, s):
    k = constraint.tuple_size
    pts = data.draw(arrays(np.float64, (k, 2), elements=st.floats(-1.5, 1.5, allow_nan=False)))
    perm = data.draw(st.permutations(range(k)))
    base = evaluate_h(constraint, pts, 1.0)
    # keep away from boundary ties, where rounding can flip closed comparisons
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    if np.any(np.abs(d - 1.0) < 1e-6):
        return
    assert evaluate_h(constraint, pts + np.array([tx, ty]), 1.0) == base
    assert evaluate_h(constraint, pts[list(perm)], 1.0) == base
    if constraint.kind.value != "betti_cycle":
        assert evaluate_h(constraint, pts * s, s) == base


def test_betti_cycle_scaling_exact_on_dyadic_scale():
    rng = np.random.default_rng(6)
    for c in rng.uniform(-1.5, 1.5, (300, 3, 2)):
        assert evaluate_h(betti_cycle(3), c * 4.0, 4.0) == evaluate_h(betti_cycle(3), c, 1.0)


def test_constraint_validation():
    with pytest.raises(ParameterError):
        gamma_iso(SmallGraph.from_edges(3, [(0, 1)]))
    with pytest.raises(ParameterError):
        betti_cycle(1)
