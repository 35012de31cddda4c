import math
from concurrent.futures import ThreadPoolExecutor

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from unitrod.errors import DimensionTooSmall, EdgeNotFound, InvalidInterval, LengthMismatch
from unitrod.gadgets import (Chord, DPow, Product, RodCache, RodCertificate, Unit, UnitEdgeTrace,
                             angular_index_search, angular_skeleton, chord_value, dimension_constants, lemma3_rod,
                             length_from_dict, lengths_equal, make_rod, moser_spindle, path_angle, plan_rod,
                             rebuild_rod, rod_length, rod_multiply, rod_power, substitute_edge, substitute_edges,
                             unit_edge_rod)
from unitrod.graph_core import WeightedGraph, build_graph, to_networkx


def edge_set(g):
    return sorted(map(tuple, g.edges.tolist()))


def scan_oracle(a, b, d, limit=2_000_000):
    """Plain loop over i = 2, 3, ... for the first angle inside the chord window"""
    const = dimension_constants(d)
    lo = 2 * math.asin(a / (2 * const.r0))
    hi = 2 * math.asin(b / (2 * const.r0))
    for i in range(2, limit):
        x = math.fmod((i - 1) * const.alpha, 2 * math.pi)
        if lo < x < hi:
            return i
    raise AssertionError("scan oracle found nothing")


def test_constants_d3():
    c = dimension_constants(3)
    assert c.h == pytest.approx(0.8164966, abs=1e-7)
    assert c.D == pytest.approx(1.6329932, abs=1e-7)
    assert c.r0 == pytest.approx(0.8660254, abs=1e-7)
    assert c.alpha == pytest.approx(1.2309594, abs=1e-7)
    assert 2 * c.r0 * math.sin(c.alpha / 2) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", range(3, 9))
def test_constant_identities(d):
    c = dimension_constants(d)
    assert c.D == pytest.approx(2 * c.h, abs=1e-12)
    assert c.h ** 2 == pytest.approx((d + 1) / (2 * d), abs=1e-12)
    assert math.cos(c.alpha) == pytest.approx(1 / d, abs=1e-12)
    assert chord_value(c.alpha, d) == pytest.approx(1.0, abs=1e-12)
    # the skip chord of the angular path is the spindle length
    assert 2 * c.r0 * math.sin(c.alpha) == pytest.approx(c.D, abs=1e-12)


def test_dimension_too_small():
    with pytest.raises(DimensionTooSmall):
        dimension_constants(2)
    with pytest.raises(DimensionTooSmall):
        moser_spindle(2)
    with pytest.raises(DimensionTooSmall):
        lemma3_rod(0.3, 0.4, 2)


def test_unit_edge_rod():
    rod = unit_edge_rod()
    assert (rod.graph.n, rod.graph.m) == (2, 1)
    assert rod.length_value == 1.0
    assert (rod.u, rod.v) == (0, 1)


@pytest.mark.parametrize("d,n,m", [(3, 9, 19), (4, 11, 29), (5, 13, 41)])
def test_spindle_counts(d, n, m):
    rod = moser_spindle(d)
    assert (rod.graph.n, rod.graph.m) == (n, m)
    assert rod.graph.is_unit()
    assert rod.length_value == pytest.approx(dimension_constants(d).D)
    assert (rod.u, rod.v) == (0, 1)


def test_substitute_spindle_into_triangle():
    spindle = moser_spindle(3)
    g = build_graph(3, [(0, 1, DPow(3, 1)), (1, 2, 1.0), (0, 2, 1.0)])
    out = substitute_edge(g, (0, 1), spindle)
    assert (out.n, out.m) == (10, 21)
    assert out.is_unit()
    assert out.find_edge(0, 1) is None
    # the spindle terminals landed on 0 and 1
    assert set(out.adjacency[0]) >= {2}
    assert len(out.adjacency[0]) == 1 + 2 * 3


def test_identity_substitution(k3):
    out = substitute_edge(k3, 0, unit_edge_rod())
    assert out.n == 3
    assert edge_set(out) == edge_set(k3)


def test_substitution_checks_lengths(k3):
    with pytest.raises(LengthMismatch):
        substitute_edge(k3, 0, moser_spindle(3))
    with pytest.raises(EdgeNotFound):
        substitute_edge(k3, 5, unit_edge_rod())
    with pytest.raises(EdgeNotFound):
        substitute_edge(build_graph(3, [(0, 1, 1.0)]), (1, 2), unit_edge_rod())


def test_symbolic_length_mismatch():
    D = dimension_constants(3).D
    g = build_graph(2, [(0, 1, Product((DPow(3, 1), Unit())))])
    assert substitute_edge(g, 0, moser_spindle(3)).n == 9
    # same float view, different exact expression
    g = WeightedGraph.from_arrays(2, np.array([[0, 1]]), np.array([D]), {0: Chord(3, 32)})
    with pytest.raises(LengthMismatch):
        substitute_edge(g, 0, moser_spindle(3))


def test_spindle_squared():
    rod = rod_multiply(moser_spindle(3), moser_spindle(3))
    assert rod.length_value == pytest.approx(8 / 3, abs=1e-12)
    assert (rod.graph.n, rod.graph.m) == (142, 361)
    assert rod.graph.is_unit()
    assert lengths_equal(rod.length, DPow(3, 2))


def test_multiply_by_unit_edge_is_identity():
    spindle = moser_spindle(3)
    right = rod_multiply(spindle, unit_edge_rod())
    left = rod_multiply(unit_edge_rod(), spindle)
    for rod in (right, left):
        assert rod.length_value == pytest.approx(spindle.length_value)
        assert nx.is_isomorphic(to_networkx(rod.graph), to_networkx(spindle.graph))


def test_multiply_needs_unit_outer_rod():
    weighted = RodCertificate(build_graph(2, [(0, 1, 2.0)]), 0, 1, Unit(), 2.0, UnitEdgeTrace(), 3, ("test",))
    with pytest.raises(LengthMismatch):
        rod_multiply(weighted, moser_spindle(3))


def test_rod_power():
    assert (rod_power(3, 0).graph.n, rod_power(3, 0).graph.m) == (2, 1)
    assert rod_power(3, 1).length_value == pytest.approx(1.6329932, abs=1e-7)
    assert rod_power(3, 1).graph.n == 9
    square = rod_power(3, 2)
    assert square.length_value == pytest.approx(8 / 3, abs=1e-12)
    assert square.graph.n == 142
    with pytest.raises(ValueError):
        rod_power(3, -1)


def test_angular_search_example():
    const = dimension_constants(3)
    n, x = angular_index_search(0.3, 0.4, 3)
    assert n == 32
    assert x == pytest.approx(math.fmod(31 * const.alpha, 2 * math.pi), abs=1e-12)
    assert x == pytest.approx(0.46063, abs=1e-5)
    assert chord_value(x, 3) == pytest.approx(2 * const.r0 * math.sin(x / 2), abs=1e-12)
    assert chord_value(x, 3) == pytest.approx(0.3954, abs=1e-5)
    assert path_angle(32, 3) == x


def test_angular_search_second_window():
    n, x = angular_index_search(0.5, 0.6, 3)
    assert n == scan_oracle(0.5, 0.6, 3)
    assert 0.5 < chord_value(x, 3) < 0.6


def test_angular_search_rejects_bad_interval():
    with pytest.raises(InvalidInterval):
        angular_index_search(0.4, 0.3, 3)
    with pytest.raises(InvalidInterval):
        angular_index_search(0.3, 1.2, 3)


def test_angular_search_matches_scan_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        width = rng.uniform(0.01, 0.2)
        a = rng.uniform(0.05, 0.95 - width)
        b = a + width
        n, x = angular_index_search(a, b, 3)
        assert n == scan_oracle(a, b, 3)
        assert a < chord_value(x, 3) < b


def test_angular_skeleton_layout():
    skeleton, skip = angular_skeleton(3, 32)
    assert skeleton.n == 34
    assert skeleton.m == 1 + 64 + 31 + 30
    assert len(skip) == 30
    assert np.allclose(skeleton.lengths[skip], dimension_constants(3).D)
    assert all(lengths_equal(skeleton.expr(e), DPow(3, 1)) for e in skip)


def test_angular_rod_counts():
    rod = lemma3_rod(0.3, 0.4, 3)
    assert (rod.graph.n, rod.graph.m) == (244, 666)
    assert rod.graph.is_unit()
    assert (rod.u, rod.v) == (2, 33)
    assert rod.length_value == pytest.approx(chord_value(path_angle(32, 3), 3), abs=1e-12)
    assert 0.3 < rod.length_value < 0.4
    assert rod.trace.n_path == 32


def test_plan_rod_scales():
    assert plan_rod(0.3, 0.4, 3).k == 0
    plan = plan_rod(1.2, 1.3, 3)
    D = dimension_constants(3).D
    assert plan.k == 1
    assert 1.2 / D == pytest.approx(1.2 / math.sqrt(8 / 3), abs=1e-12)
    assert plan.length_value == pytest.approx(D * rod_length(1.2 / D, 1.3 / D, 3), abs=1e-12)
    assert 1.2 < plan.length_value < 1.3
    tiny = plan_rod(0.0089582, 0.0134374, 3)
    assert tiny.k == 0
    assert 0.0089582 < rod_length(0.0089582, 0.0134374, 3) < 0.0134374
    with pytest.raises(InvalidInterval):
        plan_rod(0.4, 0.3, 3)


def test_make_rod_without_scaling():
    rod = make_rod(0.3, 0.4, 3)
    assert rod.length_value == pytest.approx(rod_length(0.3, 0.4, 3))
    assert rod.graph.same_as(lemma3_rod(0.3, 0.4, 3).graph)
    assert rod.recipe == ("make_rod", 0.3, 0.4, 3)


def test_rebuild_from_recipe():
    for rod in (unit_edge_rod(), moser_spindle(4), rod_power(3, 2), make_rod(0.3, 0.4, 3)):
        again = rebuild_rod(rod.recipe)
        assert again.graph.same_as(rod.graph)
        assert lengths_equal(again.length, rod.length)
    with pytest.raises(ValueError):
        rebuild_rod(("no_such_builder",))


def test_rod_cache_builds_once():
    cache = RodCache()
    with ThreadPoolExecutor(max_workers=8) as pool:
        rods = list(pool.map(lambda _: cache.get_or_build(0.3, 0.4, 3), range(16)))
    assert all(r is rods[0] for r in rods)
    assert len(cache) == 1
    assert (0.3, 0.4, 3) in cache
    assert cache.get(0.1, 0.2, 3) is None


@given(k=st.integers(0, 4), n=st.integers(2, 60))
def test_length_expressions_round_trip(k, n):
    expr = Product((DPow(3, k), Chord(3, n), Unit()))
    back = length_from_dict(expr.to_dict())
    assert lengths_equal(back, expr)
    assert back.value() == pytest.approx(expr.value(), rel=1e-12)
    assert lengths_equal(Product((Chord(3, n), DPow(3, k))), expr)


SMALL_RODS = {"unit": unit_edge_rod, "spindle3": lambda: moser_spindle(3),
              "spindle4": lambda: moser_spindle(4), "spindle5": lambda: moser_spindle(5)}


@given(n=st.integers(2, 9), seed=st.integers(0, 10_000), d=st.integers(3, 5), p=st.floats(0.1, 0.9))
def test_substitution_size_law(n, seed, d, p):
    rng = np.random.default_rng(seed)
    graph = nx.gnp_random_graph(n, p, seed=seed)
    long_edge = rng.random(graph.number_of_edges()) < 0.5
    g = build_graph(n, [(u, v, DPow(d, 1) if far else 1.0) for (u, v), far in zip(graph.edges(), long_edge)])
    assignments = {e: moser_spindle(d) for e in range(g.m) if g.expr(e) is not None}
    assignments.update({e: unit_edge_rod() for e in range(g.m) if e not in assignments and rng.random() < 0.5})
    out, plan = substitute_edges(g, assignments)
    assert out.n == g.n + sum(rod.graph.n - 2 for rod in assignments.values())
    assert out.m == g.m + sum(rod.graph.m - 1 for rod in assignments.values())
    assert out.is_unit()
    assert len(plan.blocks) == len(assignments)
    for block in plan.blocks:
        assert tuple(block.vertex_map[[block.rod.u, block.rod.v]]) == block.endpoints


@given(outer=st.sampled_from(sorted(SMALL_RODS)), inner=st.sampled_from(sorted(SMALL_RODS)))
def test_rod_multiply_counts(outer, inner):
    rod_a, rod_b = SMALL_RODS[outer](), SMALL_RODS[inner]()
    rod = rod_multiply(rod_a, rod_b)
    assert rod.graph.n == rod_a.graph.n + rod_a.graph.m * (rod_b.graph.n - 2)
    assert rod.graph.m == rod_a.graph.m * rod_b.graph.m
    assert rod.graph.is_unit()
    assert rod.length_value == pytest.approx(rod_a.length_value * rod_b.length_value, rel=1e-12)
    assert (rod.u, rod.v) == (rod_a.u, rod_a.v)
