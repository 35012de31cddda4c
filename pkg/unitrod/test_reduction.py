import math

import networkx as nx
import numpy as np
import pytest

from unitrod.errors import DimensionTooSmall, DomainError, InvalidInputGraph, RodUnavailable
from unitrod.gadgets import RodCache, lengths_equal
from unitrod.graph_core import from_networkx, simple_graph
from unitrod.reduction import (EPSILON, ROD_NAMES, UNBOUNDED, RoleKind, build_reduction, chord, expand_to_unit,
                               lemma4_bounds_check, measure_linear_size, predicted_sizes, reduction_counts,
                               reduction_params, rods_for)


def test_chord_examples():
    assert chord(0, 3) == 0.0
    assert chord(math.pi, 3) == pytest.approx(1.7320508, abs=1e-7)
    assert chord(2 * math.pi / 3, 3) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(DomainError):
        chord(-0.1, 3)
    with pytest.raises(DomainError):
        chord(7.0, 3)


def test_apex_bounds_examples():
    assert lemma4_bounds_check(0, 1, 1, 2, 1.0, 0.4)
    assert not lemma4_bounds_check(0, 1, 1, 2, 1.4, 0.4)
    assert not lemma4_bounds_check(0.5, 0.4, 1, 2, 1.0, 0.4)
    assert lemma4_bounds_check(0, 1, 1, UNBOUNDED, 1.0, 0.4)


def test_deltas_d3(params3):
    eps = EPSILON
    third = 2 * math.pi / 3
    expected_uu = min(chord(third, 3) - chord(third - eps / 2, 3), chord(third + eps / 2, 3) - chord(third, 3))
    assert params3.delta_uu == pytest.approx(expected_uu, abs=1e-12)
    assert params3.delta_uu == pytest.approx(0.027532, abs=1e-4)
    assert params3.delta_uv == pytest.approx(0.050410, abs=1e-4)
    assert params3.delta_vv == pytest.approx(1.158003, abs=1e-4)
    assert params3.epsilon == pytest.approx(math.pi / 24)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_rod_lengths_sit_inside_their_windows(d):
    params = reduction_params(d)
    for key, window in params.windows.items():
        a = getattr(params, f"a_{key}")
        b = getattr(params, f"b_{key}")
        a_lo, a_hi = window.a_interval
        b_lo, b_hi = window.b_interval
        assert a_lo < a < a_hi
        assert b_lo < b < b_hi
        assert window.chain_margin(a, b) > 1e-9
        assert lemma4_bounds_check(window.l, window.L, window.R, window.r, a, b)


def test_b_uu_interval(params3):
    lo, hi = params3.windows["uu"].b_interval
    # L = R for the uu window, so the b interval is (delta/3, delta/2)
    assert lo == pytest.approx(params3.delta_uu / 3, abs=1e-15)
    assert hi == pytest.approx(params3.delta_uu / 2, abs=1e-15)
    assert lo < params3.b_uu < hi
    assert params3.rods["b_uu"].k == 0


def test_params_document(params3):
    data = params3.to_dict()
    assert set(data["lengths"]) == set(ROD_NAMES)
    assert data["windows"]["vv"]["r"] == "+inf"


@pytest.mark.parametrize("graph,counts", [
    (simple_graph(3, [(0, 1), (1, 2), (0, 2)]), (23, 43)),
    (simple_graph(1, []), (12, 21)),
    (simple_graph(0, []), (8, 13)),
])
def test_reduction_counts_examples(graph, counts):
    inst = build_reduction(graph, 3)
    assert (inst.H.n, inst.H.m) == counts
    assert reduction_counts(graph.n, graph.m, 3) == counts


def test_reduction_counts_on_random_graphs():
    rng = np.random.default_rng(11)
    for trial in range(100):
        n = int(rng.integers(0, 13))
        m = int(rng.integers(0, n * (n - 1) // 2 + 1))
        g = from_networkx(nx.gnm_random_graph(n, m, seed=trial))
        for d in (3, 4):
            inst = build_reduction(g, d)
            assert (inst.H.n, inst.H.m) == reduction_counts(n, m, d)


def test_vertex_layout_and_degrees(k3):
    d = 3
    inst = build_reduction(k3, d)
    H = inst.H
    deg = H.degrees()
    assert inst.k_vertices.tolist() == [0, 1]
    assert inst.u_vertices.tolist() == [2, 3, 4]
    assert inst.v_vertices.tolist() == [5, 6, 7]
    assert all(deg[k] == (d - 2) + 3 + 3 for k in inst.k_vertices)
    assert all(deg[u] == (d - 1) + 2 + 3 for u in inst.u_vertices)
    assert all(deg[v] == (d - 1) + 3 + 2 for v in inst.v_vertices)
    assert np.all(deg[inst.base_size:] == 2)
    kinds = [role.kind for role in inst.roles]
    assert kinds[:2] == [RoleKind.K] * 2
    assert kinds[2:5] == [RoleKind.U] * 3
    assert kinds[5:8] == [RoleKind.V] * 3
    assert kinds[8:] == [RoleKind.AUX] * 15


def test_edge_lengths_follow_gadget_kind(k3, params3):
    inst = build_reduction(k3, 3)
    H = inst.H
    unit_edges = 1 + 3 * 2 + 3 * 2
    assert np.all(H.lengths[:unit_edges] == 1.0)
    assert len(inst.gadgets) == 3 + 9 + 3
    for gadget in inst.gadgets:
        a_name, b_name = inst.rod_name(gadget, "a"), inst.rod_name(gadget, "b")
        assert H.lengths[gadget.edge_a] == getattr(params3, a_name)
        assert H.lengths[gadget.edge_b] == getattr(params3, b_name)
        assert lengths_equal(H.expr(gadget.edge_a), params3.expr(a_name))
        assert H.find_edge(gadget.near, gadget.aux) == gadget.edge_a
        assert H.find_edge(gadget.aux, gadget.far) == gadget.edge_b
    assert [g.kind for g in inst.gadgets] == ["uu"] * 3 + ["uv"] * 9 + ["vv"] * 3
    vv = inst.gadgets[-3:]
    assert [(g.near, g.far) for g in vv] == [(5, 6), (6, 7), (5, 7)]


def test_build_reduction_input_checks(k3):
    with pytest.raises(DimensionTooSmall):
        build_reduction(k3, 2)
    looped = nx.Graph([(0, 1), (1, 1)])
    with pytest.raises(InvalidInputGraph):
        build_reduction(looped, 3)
    with pytest.raises(InvalidInputGraph):
        build_reduction([(0, 1)], 3)


def test_networkx_input_matches(k3):
    a = build_reduction(nx.complete_graph(3), 3)
    b = build_reduction(k3, 3)
    assert a.H.n == b.H.n and a.H.m == b.H.m


def test_rods_for_without_populating():
    with pytest.raises(RodUnavailable):
        rods_for(reduction_params(3), RodCache(), populate=False)


def test_expand_k3(k3):
    expanded = expand_to_unit(build_reduction(k3, 3))
    assert len(expanded.plan.blocks) == 30
    assert expanded.rod_shapes == 6
    assert expanded.graph.is_unit()
    sizes = predicted_sizes(3, 3, 3)
    assert (sizes["V_H_unit"], sizes["E_H_unit"]) == (expanded.graph.n, expanded.graph.m)


def test_linear_size_spread_is_reported():
    path = nx.path_graph(40)
    frame = measure_linear_size([simple_graph(1, []), from_networkx(path)], 3)
    ratio = frame["ratio"]
    assert frame.attrs["ratio_spread"] == pytest.approx((ratio.max() - ratio.min()) / ratio.mean())
    assert frame.attrs["ratio_spread"] > 0
    single = measure_linear_size([simple_graph(1, [])], 3)
    assert single.attrs["ratio_spread"] == 0.0
    assert "ratio_spread" not in measure_linear_size([], 3).attrs


@pytest.mark.slow
def test_expand_empty_graph():
    inst = build_reduction(simple_graph(0, []), 3)
    expanded = expand_to_unit(inst)
    assert len(expanded.plan.blocks) == 6
    assert expanded.graph.is_unit()
    assert expanded.provenance_of(0) == ("H", 0)
    last = expanded.graph.n - 1
    assert expanded.provenance_of(last)[0] == "rod"
    sizes = predicted_sizes(0, 0, 3)
    assert (sizes["V_H_unit"], sizes["E_H_unit"]) == (expanded.graph.n, expanded.graph.m)


@pytest.mark.slow
def test_expanded_size_is_affine():
    base = predicted_sizes(0, 0, 3)
    per_vertex = {k: predicted_sizes(1, 0, 3)[k] - base[k] for k in base}
    per_edge = {k: predicted_sizes(2, 1, 3)[k] - base[k] - 2 * per_vertex[k] for k in base}
    for n, m in [(3, 3), (5, 4), (10, 20)]:
        sizes = predicted_sizes(n, m, 3)
        for key in base:
            assert sizes[key] == base[key] + n * per_vertex[key] + m * per_edge[key]
    frame = measure_linear_size([simple_graph(4, [(0, 1), (2, 3)]), simple_graph(6, [])], 3)
    assert list(frame["n"]) == [4, 6]
    assert (frame["ratio"] > 0).all()
