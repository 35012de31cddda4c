import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from unitrod.config import SolveConfig
from unitrod.errors import InsufficientSuccesses, MissingVertexCoordinates
from unitrod.gadgets import dimension_constants, lemma3_rod, moser_spindle, rod_power, unit_edge_rod
from unitrod.graph_core import Embedding, build_graph, from_networkx, simple_graph
from unitrod.reduction import ROD_NAMES, reduction_params, rods_for
from unitrod.solver import HEURISTIC_LABEL, Verdict, energy, energy_gradient, rod_property_check, solve

K5 = from_networkx(nx.complete_graph(5))


def finite_difference(g, X, h=1e-6):
    grad = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        up, down = X.copy(), X.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (energy(g, up) - energy(g, down)) / (2 * h)
    return grad


def test_energy_examples():
    triangle = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, math.sqrt(3) / 2, 0.0]])
    assert energy(simple_graph(3, [(0, 1), (1, 2), (0, 2)]), triangle) < 1e-20
    edge = simple_graph(2, [(0, 1)])
    assert energy(edge, np.zeros((2, 3))) == 1.0
    assert energy(edge, np.array([[0.0, 0, 0], [1.1, 0, 0]])) == pytest.approx(0.0441, abs=1e-12)
    assert energy(build_graph(2, []), np.zeros((2, 3))) == 0.0


def test_energy_accepts_embeddings():
    edge = simple_graph(2, [(0, 1)])
    assert energy(edge, Embedding(2, [[0, 0], [2, 0]])) == pytest.approx(9.0)
    with pytest.raises(MissingVertexCoordinates):
        energy(edge, np.zeros((1, 3)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    for trial in range(20):
        n = int(rng.integers(3, 8))
        graph = nx.gnp_random_graph(n, 0.6, seed=trial)
        g = build_graph(n, [(u, v, float(rng.uniform(0.5, 2.0))) for u, v in graph.edges()])
        d = int(rng.choice([3, 4, 5]))
        X = rng.normal(size=(n, d))
        assert np.allclose(energy_gradient(g, X), finite_difference(g, X), rtol=1e-5, atol=1e-5)


@given(seed=st.integers(0, 10_000))
def test_energy_invariant_under_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 3))
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    moved = X @ (q * np.sign(np.diag(r))).T + rng.normal(size=3)
    assert energy(K5, moved) == pytest.approx(energy(K5, X), rel=1e-9, abs=1e-12)


def test_k4_embeds_in_three_dimensions(k4):
    report = solve(k4, 3, SolveConfig(restarts=20, seed=1))
    assert report.verdict is Verdict.EMBEDDING_FOUND
    assert report.best_residual < 1e-9
    assert report.successes
    assert "evidence" not in report.to_dict()


def test_k5_does_not_embed_in_three_dimensions():
    report = solve(K5, 3, SolveConfig(restarts=50, seed=2))
    assert report.verdict is Verdict.NO_EMBEDDING_FOUND_HEURISTIC
    assert report.min_energy > 1e-4
    assert report.to_dict()["evidence"] == HEURISTIC_LABEL
    assert len(report.to_frame()) == 50


def test_solve_is_reproducible(k4):
    serial = solve(k4, 3, SolveConfig(restarts=6, seed=9))
    again = solve(k4, 3, SolveConfig(restarts=6, seed=9))
    threaded = solve(k4, 3, SolveConfig(restarts=6, seed=9, threads=3))
    assert serial.energies == again.energies == threaded.energies
    assert serial.best == again.best == threaded.best


def test_perturbed_start_needs_reference(k4):
    with pytest.raises(ValueError):
        solve(k4, 3, SolveConfig(init="perturbed"))
    with pytest.raises(ValueError):
        solve(k4, 0)


def test_restart_batches_continue_the_stream(k4):
    whole = solve(k4, 3, SolveConfig(restarts=6, seed=9))
    tail = solve(k4, 3, SolveConfig(restarts=3, seed=9), first_restart=3)
    assert [r.index for r in tail.restarts] == [3, 4, 5]
    assert tail.energies == whole.energies[3:]


def test_spindle_rod_property():
    out = rod_property_check(moser_spindle(3), SolveConfig(restarts=100, seed=3))
    assert out.holds
    assert out.successes >= 20
    assert out.attempts % 100 == 0
    assert out.min_distance == pytest.approx(dimension_constants(3).D, abs=1e-6)
    assert out.max_distance == pytest.approx(dimension_constants(3).D, abs=1e-6)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_spindle_rod_property_with_default_batches(seed):
    out = rod_property_check(moser_spindle(3), SolveConfig(seed=seed))
    assert out.successes >= 20
    assert out.attempts >= 50
    assert out.holds


def test_unit_edge_rod_property():
    out = rod_property_check(unit_edge_rod(), SolveConfig(restarts=20, seed=4))
    assert out.d == 3
    assert out.max_deviation < 1e-9


def test_rod_property_needs_enough_successes():
    with pytest.raises(InsufficientSuccesses, match="of 40 restarts"):
        rod_property_check(unit_edge_rod(), SolveConfig(restarts=15, max_iters=1, polish_iters=0, seed=5),
                           min_successes=30, max_attempts=40)


@pytest.mark.slow
def test_angular_rod_property():
    rod = lemma3_rod(0.3, 0.4, 3)
    out = rod_property_check(rod, SolveConfig(restarts=20, seed=6))
    assert out.init == "perturbed"
    assert out.holds
    assert out.min_distance == pytest.approx(rod.length_value, abs=1e-6)
    assert out.max_distance == pytest.approx(rod.length_value, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2])
def test_rod_power_property(k):
    rod = rod_power(3, k)
    out = rod_property_check(rod, SolveConfig(restarts=100, seed=10 + k))
    assert out.holds
    assert out.min_distance == pytest.approx(dimension_constants(3).D ** k, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("name", ROD_NAMES)
def test_reduction_rod_property(name):
    rod = rods_for(reduction_params(3))[name]
    out = rod_property_check(rod, SolveConfig(restarts=20, seed=7))
    assert out.holds
    assert out.min_distance == pytest.approx(getattr(reduction_params(3), name), abs=1e-6)
