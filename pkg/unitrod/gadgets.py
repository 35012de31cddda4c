"""
Rod Gadgets for unitrod
Dimension constants, exact length expressions, the d-dimensional Moser
spindle, edge substitution, rod multiplication, D^k rods, the angular
rod and interval-targeted rods
"""

import logging
import math
import threading
from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .config import ANGULAR_CAP
from .errors import (DimensionTooSmall, EdgeNotFound, InvalidInterval,
                     IterationCapExceeded, LengthMismatch, UnitRodError)
from .graph_core import WeightedGraph

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
WINDOW_GUARD = 1e-12
LENGTH_MATCH_TOL = 1e-12
SCAN_CHUNK = 1 << 16


@dataclass(frozen=True)
class DimensionConstants:
    """Constants of the unit regular simplex geometry in R^d"""
    d: int
    h: float
    D: float
    r0: float
    alpha: float


def require_dimension(d: int):
    if int(d) != d or d < 3:
        raise DimensionTooSmall(f"constructions need d >= 3, got d={d}")


@lru_cache(maxsize=None)
def dimension_constants(d: int) -> DimensionConstants:
    """
    h is the altitude of the unit regular d-simplex and D = 2h the spindle
    length; r0 is the radius of the circle at unit distance from every vertex
    of a unit (d-1)-clique, and alpha the central angle of a unit chord on it.
    """
    require_dimension(d)
    h = math.sqrt((d + 1) / (2.0 * d))
    return DimensionConstants(d=d, h=h, D=2.0 * h, r0=math.sqrt(d / (2.0 * (d - 1))), alpha=math.acos(1.0 / d))


def path_angle(n: int, d: int) -> float:
    """x_n = (n - 1) * alpha mod 2pi"""
    return math.fmod((n - 1) * dimension_constants(d).alpha, TWO_PI)


def chord_value(theta: float, d: int) -> float:
    return 2.0 * dimension_constants(d).r0 * math.sin(theta / 2.0)


# ---------------------------------------------------------------------------
# Exact lengths
# ---------------------------------------------------------------------------

class LengthExpr:
    """Symbolic rod length; floats are derived views"""

    def value(self) -> float:
        raise NotImplementedError

    def canonical(self) -> Tuple[Tuple[Tuple[int, int], ...], Tuple[Tuple[int, int], ...]]:
        """((d, total D exponent) ..., (d, chord index) ...), sorted"""
        powers: Dict[int, int] = {}
        chords: List[Tuple[int, int]] = []
        self._collect(powers, chords)
        return (tuple(sorted((d, k) for d, k in powers.items() if k)), tuple(sorted(chords)))

    def _collect(self, powers: Dict[int, int], chords: List[Tuple[int, int]]):
        raise NotImplementedError


@dataclass(frozen=True)
class Unit(LengthExpr):
    def value(self) -> float:
        return 1.0

    def _collect(self, powers, chords):
        pass

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "unit"}

    def describe(self) -> str:
        return "1"


@dataclass(frozen=True)
class DPow(LengthExpr):
    d: int
    k: int

    def value(self) -> float:
        return dimension_constants(self.d).D ** self.k

    def _collect(self, powers, chords):
        powers[self.d] = powers.get(self.d, 0) + self.k

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "dpow", "d": self.d, "k": self.k}

    def describe(self) -> str:
        return f"D{self.d}^{self.k}"


@dataclass(frozen=True)
class Chord(LengthExpr):
    d: int
    n: int

    def value(self) -> float:
        return chord_value(path_angle(self.n, self.d), self.d)

    def _collect(self, powers, chords):
        chords.append((self.d, self.n))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "chord", "d": self.d, "n": self.n}

    def describe(self) -> str:
        return f"chord{self.d}(x_{self.n})"


@dataclass(frozen=True)
class Product(LengthExpr):
    factors: Tuple[LengthExpr, ...]

    def value(self) -> float:
        return math.prod(f.value() for f in self.factors)

    def _collect(self, powers, chords):
        for f in self.factors:
            f._collect(powers, chords)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}

    def describe(self) -> str:
        return " * ".join(f.describe() for f in self.factors)


def length_from_dict(data: Mapping[str, Any]) -> LengthExpr:
    kind = data["kind"]
    if kind == "unit":
        return Unit()
    if kind == "dpow":
        return DPow(int(data["d"]), int(data["k"]))
    if kind == "chord":
        return Chord(int(data["d"]), int(data["n"]))
    if kind == "product":
        return Product(tuple(length_from_dict(f) for f in data["factors"]))
    raise ValueError(f"unknown length expression kind '{kind}'")


def lengths_equal(a: LengthExpr, b: LengthExpr) -> bool:
    return a.canonical() == b.canonical()


# ---------------------------------------------------------------------------
# Rod certificates and construction traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubstitutedEdge:
    """One rod copy: base edge it replaced and where each rod vertex landed"""
    edge_index: int
    endpoints: Tuple[int, int]
    rod: "RodCertificate"
    vertex_map: np.ndarray


@dataclass(frozen=True, eq=False)
class SubstitutionPlan:
    base_n: int
    result_n: int
    blocks: Tuple[SubstitutedEdge, ...]

    def groups(self) -> List[Tuple["RodCertificate", List[SubstitutedEdge]]]:
        """Blocks grouped by rod object, in first-appearance order"""
        grouped: Dict[int, Tuple[RodCertificate, List[SubstitutedEdge]]] = {}
        for block in self.blocks:
            grouped.setdefault(id(block.rod), (block.rod, []))[1].append(block)
        return list(grouped.values())

    def provenance(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Per result vertex: (base vertex or -1, base edge or -1, rod-local id or -1)
        """
        origin_vertex = np.full(self.result_n, -1, dtype=np.int64)
        origin_edge = np.full(self.result_n, -1, dtype=np.int64)
        rod_vertex = np.full(self.result_n, -1, dtype=np.int64)
        origin_vertex[: self.base_n] = np.arange(self.base_n)
        for block in self.blocks:
            interior = block.rod.interior
            ids = block.vertex_map[interior]
            origin_edge[ids] = block.edge_index
            rod_vertex[ids] = interior
        return origin_vertex, origin_edge, rod_vertex


@dataclass(frozen=True)
class UnitEdgeTrace:
    def summary(self) -> Dict[str, Any]:
        return {"node": "UnitEdge"}


@dataclass(frozen=True)
class SpindleTrace:
    d: int

    def summary(self) -> Dict[str, Any]:
        return {"node": "Spindle", "d": self.d}


@dataclass(frozen=True, eq=False)
class SubstituteTrace:
    base: WeightedGraph
    plan: SubstitutionPlan

    def summary(self) -> Dict[str, Any]:
        rods = [{"rod": rod.length.describe(), "copies": len(blocks)} for rod, blocks in self.plan.groups()]
        return {"node": "Substitute", "base_vertices": self.base.n, "base_edges": self.base.m, "rods": rods}


@dataclass(frozen=True, eq=False)
class AngularTrace:
    d: int
    n_path: int
    x_n: float
    a: float
    b: float
    substitute: SubstituteTrace

    def summary(self) -> Dict[str, Any]:
        return {"node": "Angular", "d": self.d, "N": self.n_path, "x_N": self.x_n,
                "window": [self.a, self.b],
                "skeleton_vertices": self.substitute.base.n, "skeleton_edges": self.substitute.base.m,
                "substitute": self.substitute.summary()}


@dataclass(frozen=True, eq=False)
class MultiplyTrace:
    outer: "RodCertificate"
    inner: "RodCertificate"
    substitute: SubstituteTrace

    def summary(self) -> Dict[str, Any]:
        return {"node": "Multiply", "outer": self.outer.trace.summary(), "inner": self.inner.trace.summary()}


Trace = Union[UnitEdgeTrace, SpindleTrace, AngularTrace, MultiplyTrace]


@dataclass(frozen=True, eq=False)
class RodCertificate:
    """
    Weighted graph with terminals (u, v) whose distance is forced to
    ``length`` in every embedding, plus the trace it was built from.
    ``recipe`` is the builder call that reproduces it.
    """
    graph: WeightedGraph
    u: int
    v: int
    length: LengthExpr
    length_value: float
    trace: Trace
    d: Optional[int]
    recipe: Tuple

    def __post_init__(self):
        if self.u == self.v:
            raise UnitRodError("rod terminals must differ")
        if not (0 <= self.u < self.graph.n and 0 <= self.v < self.graph.n):
            raise UnitRodError(f"rod terminals ({self.u}, {self.v}) outside the graph")
        if self.length_value <= 0:
            raise UnitRodError("rod length must be positive")

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.graph.n, dtype=bool)
        mask[[self.u, self.v]] = False
        return np.nonzero(mask)[0]

    def summary(self) -> Dict[str, Any]:
        return {
            "terminals": [self.u, self.v],
            "length": self.length.describe(),
            "length_value": self.length_value,
            "vertices": self.graph.n,
            "edges": self.graph.m,
        }

    def __repr__(self) -> str:
        return f"RodCertificate({self.length.describe()} = {self.length_value:.9f}, n={self.graph.n}, m={self.graph.m})"


@lru_cache(maxsize=1)
def unit_edge_rod() -> RodCertificate:
    g = WeightedGraph.from_arrays(2, np.array([[0, 1]]), np.ones(1))
    return RodCertificate(g, 0, 1, Unit(), 1.0, UnitEdgeTrace(), None, ("unit_edge_rod",))


@lru_cache(maxsize=None)
def moser_spindle(d: int) -> RodCertificate:
    """
    Vertex layout: A=0, B=1, C=2, K1 = 3..d+2, K2 = d+3..2d+2.
    K1 and K2 are unit d-cliques; A, B see all of K1, A, C see all of K2,
    and B-C is a unit edge. The terminals are (A, B).
    """
    require_dimension(d)
    A, B, C = 0, 1, 2
    k1 = list(range(3, 3 + d))
    k2 = list(range(3 + d, 3 + 2 * d))
    edges = list(combinations(k1, 2)) + list(combinations(k2, 2))
    edges += [(A, k) for k in k1] + [(B, k) for k in k1]
    edges += [(A, k) for k in k2] + [(C, k) for k in k2]
    edges.append((B, C))
    g = WeightedGraph.from_arrays(2 * d + 3, np.array(edges), np.ones(len(edges)))
    length = DPow(d, 1)
    return RodCertificate(g, A, B, length, length.value(), SpindleTrace(d), d, ("moser_spindle", d))


def _check_length(g: WeightedGraph, e: int, rod: RodCertificate):
    w = float(g.lengths[e])
    if abs(rod.length_value - w) > LENGTH_MATCH_TOL * max(1.0, w):
        raise LengthMismatch(f"rod length {rod.length_value!r} does not match edge {e} length {w!r}")
    expr = g.expr(e)
    if expr is not None and not lengths_equal(expr, rod.length):
        raise LengthMismatch(f"edge {e} is {expr.describe()} but the rod is {rod.length.describe()}")


def substitute_edges(g: WeightedGraph,
                     assignments: Mapping[int, RodCertificate]) -> Tuple[WeightedGraph, SubstitutionPlan]:
    """
    Replace several edges by rods in one pass.

    Kept edges come first in their original order, followed by one block of
    rod edges per substituted edge in increasing edge index. Interior rod
    vertices get fresh ids n, n+1, ... in the same order; each rod's terminals
    (u, v) are identified with the edge's (smaller, larger) endpoint.

    Returns:
        (new graph, substitution plan)
    """
    order = sorted(int(e) for e in assignments)
    for e in order:
        if not 0 <= e < g.m:
            raise EdgeNotFound(f"edge index {e} not in graph with {g.m} edges")
        _check_length(g, e, assignments[e])

    sizes = np.array([assignments[e].graph.n - 2 for e in order], dtype=np.int64)
    offsets = g.n + np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if order else np.zeros(0, np.int64)
    result_n = g.n + int(sizes.sum())

    substituted = np.zeros(g.m, dtype=bool)
    substituted[order] = True
    kept = np.nonzero(~substituted)[0]
    kept_pos = {int(old): new for new, old in enumerate(kept)}
    exprs = {kept_pos[e]: x for e, x in g.exprs.items() if e in kept_pos}

    position = {e: p for p, e in enumerate(order)}
    grouped: Dict[int, Tuple[RodCertificate, List[int]]] = {}
    for e in order:
        grouped.setdefault(id(assignments[e]), (assignments[e], []))[1].append(e)

    block_edges: List[Optional[np.ndarray]] = [None] * len(order)
    block_lengths: List[Optional[np.ndarray]] = [None] * len(order)
    blocks: List[Optional[SubstitutedEdge]] = [None] * len(order)
    for rod, es in grouped.values():
        local = np.full(rod.graph.n, -1, dtype=np.int64)
        local[rod.interior] = np.arange(rod.graph.n - 2)
        es_arr = np.array(es, dtype=np.int64)
        offs = offsets[[position[e] for e in es]]
        maps = offs[:, None] + local[None, :]
        maps[:, rod.u] = g.edges[es_arr, 0]
        maps[:, rod.v] = g.edges[es_arr, 1]
        rod_edges = maps[:, rod.graph.edges]
        for row, e in enumerate(es):
            p = position[e]
            block_edges[p] = rod_edges[row]
            block_lengths[p] = rod.graph.lengths
            blocks[p] = SubstitutedEdge(e, (int(g.edges[e, 0]), int(g.edges[e, 1])), rod, maps[row])

    start = len(kept)
    for p, e in enumerate(order):
        rod = assignments[e]
        for local_e, x in rod.graph.exprs.items():
            exprs[start + local_e] = x
        start += rod.graph.m

    edges = np.concatenate([g.edges[kept]] + block_edges) if order else g.edges[kept]
    lengths = np.concatenate([g.lengths[kept]] + block_lengths) if order else g.lengths[kept]
    result = WeightedGraph.from_arrays(result_n, edges, lengths, exprs, validate=False)
    return result, SubstitutionPlan(g.n, result_n, tuple(blocks))


def substitute_edge(g: WeightedGraph, e: Union[int, Tuple[int, int]], rod: RodCertificate) -> WeightedGraph:
    """Replace edge ``e`` (index or endpoint pair) by ``rod``"""
    if isinstance(e, tuple):
        index = g.find_edge(*e)
        if index is None:
            raise EdgeNotFound(f"edge {e} not in graph")
        e = index
    return substitute_edges(g, {int(e): rod})[0]


def rod_multiply(rod_a: RodCertificate, rod_b: RodCertificate) -> RodCertificate:
    """
    Scale every edge of the unit-distance rod A to B's length and replace each
    by a copy of B. The result keeps A's terminals.
    """
    if not rod_a.graph.is_unit():
        raise LengthMismatch("the outer rod of a product must be unit-distance")
    ga = rod_a.graph
    scaled = WeightedGraph.from_arrays(ga.n, ga.edges, ga.lengths * rod_b.length_value,
                                       {i: rod_b.length for i in range(ga.m)}, validate=False)
    g, plan = substitute_edges(scaled, {i: rod_b for i in range(ga.m)})
    length = Product((rod_a.length, rod_b.length))
    trace = MultiplyTrace(rod_a, rod_b, SubstituteTrace(scaled, plan))
    rod = RodCertificate(g, rod_a.u, rod_a.v, length, length.value(), trace,
                         rod_a.d or rod_b.d, ("rod_multiply", rod_a.recipe, rod_b.recipe))
    logger.debug(f"multiplied rods into {rod!r}")
    return rod


@lru_cache(maxsize=None)
def rod_power(d: int, k: int) -> RodCertificate:
    """Unit-distance rod of length D^k: k-fold product of spindles"""
    require_dimension(d)
    if k < 0:
        raise ValueError(f"rod_power needs k >= 0, got {k}")
    length = DPow(d, k)
    if k == 0:
        return replace(unit_edge_rod(), length=length, length_value=length.value(), d=d, recipe=("rod_power", d, 0))
    rod = moser_spindle(d)
    for _ in range(k - 1):
        rod = rod_multiply(rod, moser_spindle(d))
    return replace(rod, length=length, length_value=length.value(), recipe=("rod_power", d, k))


def _validate_unit_window(a: float, b: float):
    if not (0 < a < b < 1):
        raise InvalidInterval(f"need 0 < a < b < 1, got ({a}, {b})")


def angular_index_search(a: float, b: float, d: int, cap: int = ANGULAR_CAP) -> Tuple[int, float]:
    """
    Smallest N >= 2 whose angle x_N = (N-1)*alpha mod 2pi lies strictly
    inside (2 asin(a/2r0), 2 asin(b/2r0)), with a 1e-12 guard band on both
    the angle and the resulting chord.

    Returns:
        (N, x_N)
    """
    require_dimension(d)
    _validate_unit_window(a, b)
    const = dimension_constants(d)
    lo = 2.0 * math.asin(a / (2.0 * const.r0))
    hi = 2.0 * math.asin(b / (2.0 * const.r0))
    start = 2
    while start <= cap:
        stop = min(cap, start + SCAN_CHUNK - 1)
        idx = np.arange(start, stop + 1, dtype=np.float64)
        x = np.mod((idx - 1.0) * const.alpha, TWO_PI)
        for hit in np.nonzero((x > lo + WINDOW_GUARD) & (x < hi - WINDOW_GUARD))[0]:
            n = start + int(hit)
            x_n = path_angle(n, d)
            c = chord_value(x_n, d)
            if lo + WINDOW_GUARD < x_n < hi - WINDOW_GUARD and a + WINDOW_GUARD < c < b - WINDOW_GUARD:
                return n, x_n
        start = stop + 1
    raise IterationCapExceeded(f"no index up to {cap} lands in the window for ({a}, {b}) at d={d}")


def angular_skeleton(d: int, n_path: int) -> Tuple[WeightedGraph, List[int]]:
    """
    Weighted skeleton of the angular rod.

    Vertex layout: K = 0..d-2, path vertex v_i (i = 1..N) has id d-2+i.
    Edge order: K clique, then v_i-K joins, N-1 unit path edges, and N-2
    skip edges v_i-v_{i+2} of length D.

    Returns:
        (skeleton, indices of the skip edges)
    """
    const = dimension_constants(d)
    k_ids = list(range(d - 1))
    path = [d - 2 + i for i in range(1, n_path + 1)]
    edges = list(combinations(k_ids, 2))
    edges += [(v, k) for v in path for k in k_ids]
    edges += [(path[i], path[i + 1]) for i in range(n_path - 1)]
    first_skip = len(edges)
    edges += [(path[i], path[i + 2]) for i in range(n_path - 2)]
    lengths = np.ones(len(edges))
    lengths[first_skip:] = const.D
    skip = list(range(first_skip, len(edges)))
    exprs = {e: DPow(d, 1) for e in skip}
    return WeightedGraph.from_arrays(d - 1 + n_path, np.array(edges), lengths, exprs), skip


@lru_cache(maxsize=None)
def lemma3_rod(a: float, b: float, d: int) -> RodCertificate:
    """Unit-distance rod with length chord(x_N) in (a, b) for 0 < a < b < 1"""
    require_dimension(d)
    n_path, x_n = angular_index_search(a, b, d)
    skeleton, skip = angular_skeleton(d, n_path)
    spindle = moser_spindle(d)
    g, plan = substitute_edges(skeleton, {e: spindle for e in skip})
    length = Chord(d, n_path)
    trace = AngularTrace(d, n_path, x_n, a, b, SubstituteTrace(skeleton, plan))
    rod = RodCertificate(g, d - 1, d - 2 + n_path, length, length.value(), trace, d, ("lemma3_rod", a, b, d))
    logger.info(f"angular rod for ({a:.6g}, {b:.6g}) at d={d}: N={n_path}, {g.n} vertices, {g.m} edges")
    return rod


@dataclass(frozen=True)
class RodPlan:
    """Parameters of make_rod(a, b, d) computed without building the graph"""
    a: float
    b: float
    d: int
    k: int
    n_path: int
    x_n: float
    length: LengthExpr
    length_value: float

    def certificate(self, cache: Optional["RodCache"] = None) -> RodCertificate:
        return (cache or get_rod_cache()).get_or_build(self.a, self.b, self.d)

    def to_dict(self) -> Dict[str, Any]:
        return {"interval": [self.a, self.b], "d": self.d, "k": self.k, "N": self.n_path,
                "length": self.length.to_dict(), "length_value": self.length_value}


@lru_cache(maxsize=None)
def plan_rod(a: float, b: float, d: int) -> RodPlan:
    require_dimension(d)
    if not (0 < a < b):
        raise InvalidInterval(f"need 0 < a < b, got ({a}, {b})")
    k = 0
    while DPow(d, k).value() <= b:
        k += 1
    scale = DPow(d, k).value()
    n_path, x_n = angular_index_search(a / scale, b / scale, d)
    length = Product((DPow(d, k), Chord(d, n_path)))
    return RodPlan(a, b, d, k, n_path, x_n, length, length.value())


def rod_length(a: float, b: float, d: int) -> float:
    """The realizable length in (a, b) that make_rod(a, b, d) produces"""
    return plan_rod(a, b, d).length_value


def make_rod(a: float, b: float, d: int) -> RodCertificate:
    """
    Unit-distance rod with length in (a, b): the angular rod for
    (a/D^k, b/D^k) with every edge replaced by a D^k rod, k minimal with D^k > b.
    """
    plan = plan_rod(a, b, d)
    scale = DPow(d, plan.k).value()
    rod = lemma3_rod(a / scale, b / scale, d)
    if plan.k:
        rod = rod_multiply(rod, rod_power(d, plan.k))
    rod = replace(rod, length=plan.length, length_value=plan.length_value, recipe=("make_rod", a, b, d))
    logger.info(f"rod for ({a:.6g}, {b:.6g}) at d={d}: k={plan.k}, N={plan.n_path}, "
                f"length {plan.length_value:.12g}, {rod.graph.n} vertices, {rod.graph.m} edges")
    return rod


def rebuild_rod(recipe: Tuple) -> RodCertificate:
    """Replay the builder call recorded in a rod's recipe"""
    name, args = recipe[0], recipe[1:]
    if name == "unit_edge_rod":
        return unit_edge_rod()
    if name == "moser_spindle":
        return moser_spindle(int(args[0]))
    if name == "rod_power":
        return rod_power(int(args[0]), int(args[1]))
    if name == "lemma3_rod":
        return lemma3_rod(float(args[0]), float(args[1]), int(args[2]))
    if name == "make_rod":
        return make_rod(float(args[0]), float(args[1]), int(args[2]))
    if name == "rod_multiply":
        return rod_multiply(rebuild_rod(tuple(args[0])), rebuild_rod(tuple(args[1])))
    raise ValueError(f"unknown rod recipe '{name}'")


class RodCache:
    """
    Rods keyed by the exact (a, b, d) they were requested for.
    Concurrent callers asking for the same key wait for one build.
    """

    def __init__(self):
        self._rods: Dict[Tuple[float, float, int], RodCertificate] = {}
        self._lock = threading.Lock()
        self._building: Dict[Tuple[float, float, int], threading.Lock] = {}

    @staticmethod
    def _key(a: float, b: float, d: int) -> Tuple[float, float, int]:
        return (float(a), float(b), int(d))

    def get(self, a: float, b: float, d: int) -> Optional[RodCertificate]:
        with self._lock:
            return self._rods.get(self._key(a, b, d))

    def get_or_build(self, a: float, b: float, d: int) -> RodCertificate:
        key = self._key(a, b, d)
        with self._lock:
            if key in self._rods:
                return self._rods[key]
            build_lock = self._building.setdefault(key, threading.Lock())
        with build_lock:
            with self._lock:
                if key in self._rods:
                    return self._rods[key]
            rod = make_rod(*key)
            with self._lock:
                self._rods[key] = rod
                self._building.pop(key, None)
        return rod

    def __contains__(self, key) -> bool:
        with self._lock:
            return self._key(*key) in self._rods

    def __len__(self) -> int:
        with self._lock:
            return len(self._rods)

    def clear(self):
        with self._lock:
            self._rods.clear()


_rod_cache: Optional[RodCache] = None
_rod_cache_lock = threading.Lock()


def get_rod_cache() -> RodCache:
    """Process-wide rod cache"""
    global _rod_cache
    with _rod_cache_lock:
        if _rod_cache is None:
            _rod_cache = RodCache()
        return _rod_cache
