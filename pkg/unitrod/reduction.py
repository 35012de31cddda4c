"""
Reduction Compiler for unitrod
Turns a 3-coloring instance G into the weighted graph H whose embeddability
in R^d is equivalent to G being 3-colorable, and expands H into a pure
unit-distance graph by substituting rods for every non-unit edge.

Vertex numbering of H (n = |V_G|, edges of G in G's order):
    K        0 .. d-2
    U        u0, u1, u2 = d-1, d, d+1
    V        v_i = d+2+i
    Aux      aux(u0,u1), aux(u0,u2), aux(u1,u2);
             then aux(v_i, u_c) for i in order, c = 0, 1, 2;
             then aux(v_i, v_j) for each G edge (i, j)
Edge order of H: E_K, E_KU, E_KV, E_U, E_VU, E_V (each apex contributes its
a-edge then its b-edge).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from .errors import DomainError, InvalidInputGraph, RodUnavailable, UnitRodError
from .gadgets import (LengthExpr, RodCache, RodCertificate, RodPlan, SubstitutionPlan,
                      chord_value, dimension_constants, get_rod_cache, plan_rod,
                      require_dimension, substitute_edges)
from .graph_core import WeightedGraph, from_networkx

logger = logging.getLogger(__name__)

EPSILON = math.pi / 24
ROD_NAMES = ("a_uu", "b_uu", "a_uv", "b_uv", "a_vv", "b_vv")


def chord(theta: float, d: int) -> float:
    """Length of the chord subtending ``theta`` on the circle of radius r0"""
    if not (0.0 <= theta <= 2.0 * math.pi):
        raise DomainError(f"chord angle must lie in [0, 2pi], got {theta}")
    return chord_value(theta, d)


class Unbounded(Enum):
    """Upper bound of +infinity in an apex window"""
    INF = "+inf"


UNBOUNDED = Unbounded.INF
Bound = Union[float, Unbounded]


def _gap_above(R: float, r: Bound) -> Optional[float]:
    return None if r is UNBOUNDED else r - R


def _below(x: float, r: Bound) -> bool:
    return r is UNBOUNDED or x < r


@dataclass(frozen=True)
class ApexWindow:
    """
    Apex gadget window: an auxiliary vertex joined by edges of lengths a and b
    to a pair whose distance lies in [L, R] confines that distance to (l, r).
    """
    l: float
    L: float
    R: float
    r: Bound

    @property
    def delta(self) -> float:
        above = _gap_above(self.R, self.r)
        return self.L - self.l if above is None else min(self.L - self.l, above)

    @property
    def a_interval(self) -> Tuple[float, float]:
        center = (self.L + self.R) / 2.0
        return center - self.delta / 3.0, center + self.delta / 3.0

    @property
    def b_interval(self) -> Tuple[float, float]:
        half = (self.R - self.L) / 2.0
        return half + self.delta / 3.0, half + self.delta / 2.0

    def chain_margin(self, a: float, b: float) -> float:
        """Smallest gap in l < a-b < L <= R < a+b < r"""
        gaps = [a - b - self.l, self.L - (a - b), (a + b) - self.R]
        if self.r is not UNBOUNDED:
            gaps.append(self.r - (a + b))
        return min(gaps)

    def to_dict(self) -> Dict[str, Any]:
        return {"l": self.l, "L": self.L, "R": self.R,
                "r": self.r.value if self.r is UNBOUNDED else self.r}


def lemma4_bounds_check(l: float, L: float, R: float, r: Bound, a: float, b: float) -> bool:
    """True iff (a, b) is a valid apex pair for the window (l, L, R, r)"""
    if not (0 <= l < L <= R and _below(R, r)):
        return False
    window = ApexWindow(l, L, R, r)
    delta = window.delta
    if not delta > 0:
        return False
    a_lo, a_hi = window.a_interval
    b_lo, b_hi = window.b_interval
    if not (a_lo < a < a_hi and b_lo < b < b_hi):
        return False
    return l < a - b < L <= R < a + b and _below(a + b, r)


@dataclass(frozen=True)
class ReductionParams:
    """Apex windows and rod lengths for one dimension"""
    d: int
    epsilon: float
    r0: float
    delta_uu: float
    a_uu: float
    b_uu: float
    delta_uv: float
    a_uv: float
    b_uv: float
    delta_vv: float
    a_vv: float
    b_vv: float
    windows: Dict[str, ApexWindow]
    rods: Dict[str, RodPlan]

    def expr(self, name: str) -> LengthExpr:
        return self.rods[name].length

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "epsilon": self.epsilon,
            "r0": self.r0,
            "delta": {"uu": self.delta_uu, "uv": self.delta_uv, "vv": self.delta_vv},
            "lengths": {name: getattr(self, name) for name in ROD_NAMES},
            "windows": {key: w.to_dict() for key, w in self.windows.items()},
            "rods": {name: self.rods[name].to_dict() for name in ROD_NAMES},
        }


@lru_cache(maxsize=None)
def reduction_params(d: int) -> ReductionParams:
    """
    Windows (l, L, R, r) per gadget class at angle scale eps = pi/24:

        uu: (chord(2pi/3 - eps/2), chord(2pi/3), chord(2pi/3), chord(2pi/3 + eps/2))
        uv: (chord(pi/3 - eps), chord(pi/3 - eps/2), 2 r0, +inf)
        vv: (chord(5 eps/2), chord(2pi/3 - eps), 2 r0, +inf)

    and a/b are interval-targeted rod lengths inside each window's intervals.
    """
    require_dimension(d)
    eps = EPSILON
    r0 = dimension_constants(d).r0
    third = 2.0 * math.pi / 3.0
    windows = {
        "uu": ApexWindow(chord(third - eps / 2, d), chord(third, d), chord(third, d), chord(third + eps / 2, d)),
        "uv": ApexWindow(chord(math.pi / 3 - eps, d), chord(math.pi / 3 - eps / 2, d), 2.0 * r0, UNBOUNDED),
        "vv": ApexWindow(chord(5 * eps / 2, d), chord(third - eps, d), 2.0 * r0, UNBOUNDED),
    }
    rods: Dict[str, RodPlan] = {}
    for key, window in windows.items():
        rods[f"a_{key}"] = plan_rod(*window.a_interval, d)
        rods[f"b_{key}"] = plan_rod(*window.b_interval, d)
        a, b = rods[f"a_{key}"].length_value, rods[f"b_{key}"].length_value
        w = window
        if not lemma4_bounds_check(w.l, w.L, w.R, w.r, a, b):
            raise UnitRodError(f"rod lengths ({a}, {b}) fall outside the {key} apex window")
    params = ReductionParams(
        d=d, epsilon=eps, r0=r0,
        delta_uu=windows["uu"].delta, a_uu=rods["a_uu"].length_value, b_uu=rods["b_uu"].length_value,
        delta_uv=windows["uv"].delta, a_uv=rods["a_uv"].length_value, b_uv=rods["b_uv"].length_value,
        delta_vv=windows["vv"].delta, a_vv=rods["a_vv"].length_value, b_vv=rods["b_vv"].length_value,
        windows=windows, rods=rods,
    )
    logger.info(f"reduction parameters for d={d}: " +
                ", ".join(f"{name}={getattr(params, name):.9g}" for name in ROD_NAMES))
    return params


class RoleKind(Enum):
    K = "K"
    U = "U"
    V = "V"
    AUX = "Aux"


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    index: int
    tag: Tuple = ()

    def label(self) -> str:
        if self.kind is RoleKind.AUX:
            return "Aux(" + ",".join(str(t) for t in self.tag) + ")"
        return f"{self.kind.value}{self.index}"

    def to_dict(self) -> Dict[str, Any]:
        data = {"kind": self.kind.value, "index": self.index}
        if self.tag:
            data["tag"] = list(self.tag)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Role":
        return cls(RoleKind(data["kind"]), int(data["index"]), tuple(data.get("tag", ())))


@dataclass(frozen=True)
class ApexGadget:
    """Aux vertex joined to ``near`` by an a-edge and to ``far`` by a b-edge"""
    aux: int
    near: int
    far: int
    kind: str
    edge_a: int
    edge_b: int


@dataclass(frozen=True, eq=False)
class ReductionInstance:
    H: WeightedGraph
    roles: Tuple[Role, ...]
    source: WeightedGraph
    params: ReductionParams
    gadgets: Tuple[ApexGadget, ...]

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def k_vertices(self) -> np.ndarray:
        return np.arange(self.d - 1)

    @property
    def u_vertices(self) -> np.ndarray:
        return np.arange(self.d - 1, self.d + 2)

    @property
    def v_vertices(self) -> np.ndarray:
        return np.arange(self.d + 2, self.d + 2 + self.source.n)

    @property
    def base_size(self) -> int:
        """Number of K, U and V vertices (they precede every Aux vertex)"""
        return self.d + 2 + self.source.n

    def rod_name(self, gadget: ApexGadget, side: str) -> str:
        return f"{side}_{gadget.kind}"

    def same_as(self, other: "ReductionInstance") -> bool:
        return (self.H == other.H and self.roles == other.roles and self.source == other.source
                and self.params == other.params and self.gadgets == other.gadgets)

    def __repr__(self) -> str:
        return f"ReductionInstance(d={self.d}, |V_G|={self.source.n}, |E_G|={self.source.m}, H={self.H!r})"


def _as_source_graph(G) -> WeightedGraph:
    if isinstance(G, WeightedGraph):
        return G
    if isinstance(G, nx.Graph):
        if nx.number_of_selfloops(G):
            raise InvalidInputGraph("input graph has self-loops")
        return from_networkx(G)
    raise InvalidInputGraph(f"expected a WeightedGraph or networkx.Graph, got {type(G).__name__}")


def build_reduction(G, d: int) -> ReductionInstance:
    """
    Compile G into H.

    Args:
        G: Simple graph (WeightedGraph or networkx.Graph); lengths are ignored
        d: Target dimension, d >= 3

    Returns:
        ReductionInstance with the documented vertex and edge order
    """
    source = _as_source_graph(G)
    require_dimension(d)
    params = reduction_params(d)
    n = source.n
    k_ids = list(range(d - 1))
    u_ids = [d - 1, d, d + 1]
    v_ids = [d + 2 + i for i in range(n)]

    roles: List[Role] = [Role(RoleKind.K, i) for i in range(d - 1)]
    roles += [Role(RoleKind.U, c) for c in range(3)]
    roles += [Role(RoleKind.V, i) for i in range(n)]

    edges: List[Tuple[int, int]] = []
    lengths: List[float] = []
    exprs: Dict[int, LengthExpr] = {}

    def unit(u: int, v: int):
        edges.append((u, v))
        lengths.append(1.0)

    def rod_edge(u: int, v: int, name: str) -> int:
        exprs[len(edges)] = params.expr(name)
        edges.append((u, v))
        lengths.append(getattr(params, name))
        return len(edges) - 1

    for u, v in combinations(k_ids, 2):
        unit(u, v)
    for u in u_ids:
        for k in k_ids:
            unit(u, k)
    for v in v_ids:
        for k in k_ids:
            unit(v, k)

    next_aux = d + 2 + n
    gadgets: List[ApexGadget] = []

    def apex(near: int, far: int, kind: str, tag: Tuple):
        nonlocal next_aux
        aux = next_aux
        next_aux += 1
        roles.append(Role(RoleKind.AUX, aux - (d + 2 + n), tag))
        edge_a = rod_edge(near, aux, f"a_{kind}")
        edge_b = rod_edge(aux, far, f"b_{kind}")
        gadgets.append(ApexGadget(aux, near, far, kind, edge_a, edge_b))

    for a, b in ((0, 1), (0, 2), (1, 2)):
        apex(u_ids[a], u_ids[b], "uu", ("u", a, "u", b))
    for i, v in enumerate(v_ids):
        for c, u in enumerate(u_ids):
            apex(v, u, "uv", ("v", i, "u", c))
    for i, j in source.edges.tolist():
        apex(v_ids[i], v_ids[j], "vv", ("v", i, "v", j))

    H = WeightedGraph.from_arrays(next_aux, np.array(edges, dtype=np.int64).reshape(-1, 2),
                                  np.array(lengths), exprs)
    inst = ReductionInstance(H=H, roles=tuple(roles), source=source, params=params, gadgets=tuple(gadgets))
    logger.info(f"compiled reduction: |V_G|={n}, |E_G|={source.m} -> |V_H|={H.n}, |E_H|={H.m}")
    return inst


def reduction_counts(n: int, m: int, d: int) -> Tuple[int, int]:
    """Closed-form (|V_H|, |E_H|)"""
    vertices = (d - 1) + 3 + n + (3 + 3 * n + m)
    edges = (d - 1) * (d - 2) // 2 + 3 * (d - 1) + n * (d - 1) + 6 + 6 * n + 2 * m
    return vertices, edges


@dataclass(frozen=True, eq=False)
class ExpandedInstance:
    """
    Unit-distance graph H' with provenance: for each H' vertex, the H vertex
    it is (or -1), else the H edge whose rod it belongs to and its rod-local id.
    """
    graph: WeightedGraph
    base: ReductionInstance
    plan: SubstitutionPlan
    origin_vertex: np.ndarray
    origin_edge: np.ndarray
    rod_vertex: np.ndarray

    def provenance_of(self, v: int) -> Tuple:
        if self.origin_vertex[v] >= 0:
            return ("H", int(self.origin_vertex[v]))
        return ("rod", int(self.origin_edge[v]), int(self.rod_vertex[v]))

    @property
    def rod_shapes(self) -> int:
        return len({id(block.rod) for block in self.plan.blocks})

    def __repr__(self) -> str:
        return f"ExpandedInstance({self.graph!r}, substituted={len(self.plan.blocks)})"


def rods_for(params: ReductionParams, cache: Optional[RodCache] = None, populate: bool = True) -> Dict[str, RodCertificate]:
    """The six apex rods, built through the cache when ``populate`` is set"""
    cache = cache or get_rod_cache()
    rods = {}
    for name in ROD_NAMES:
        plan = params.rods[name]
        rod = cache.get_or_build(plan.a, plan.b, plan.d) if populate else cache.get(plan.a, plan.b, plan.d)
        if rod is None:
            raise RodUnavailable(f"rod {name} for ({plan.a}, {plan.b}, d={plan.d}) is not cached")
        rods[name] = rod
    return rods


def expand_to_unit(inst: ReductionInstance,
                   cache: Optional[RodCache] = None,
                   populate: bool = True) -> ExpandedInstance:
    """
    Substitute every non-unit edge of H by the rod realizing its length.

    Args:
        inst: Compiled reduction
        cache: Rod cache (process-wide by default)
        populate: Build missing rods instead of raising RodUnavailable

    Returns:
        ExpandedInstance whose graph has every edge length exactly 1
    """
    rods = rods_for(inst.params, cache, populate)
    assignments: Dict[int, RodCertificate] = {}
    for gadget in inst.gadgets:
        assignments[gadget.edge_a] = rods[inst.rod_name(gadget, "a")]
        assignments[gadget.edge_b] = rods[inst.rod_name(gadget, "b")]
    graph, plan = substitute_edges(inst.H, assignments)
    if not graph.is_unit():
        raise UnitRodError("expansion left a non-unit edge behind")
    origin_vertex, origin_edge, rod_vertex = plan.provenance()
    expanded = ExpandedInstance(graph, inst, plan, origin_vertex, origin_edge, rod_vertex)
    logger.info(f"expanded H ({inst.H.n} vertices) to H' with {graph.n} vertices and {graph.m} edges "
                f"({len(assignments)} rods substituted)")
    return expanded


def predicted_sizes(n: int, m: int, d: int, cache: Optional[RodCache] = None) -> Dict[str, int]:
    """|V_H|, |E_H|, |V_H'|, |E_H'| from rod sizes, without expanding"""
    rods = rods_for(reduction_params(d), cache)
    copies = {"a_uu": 3, "b_uu": 3, "a_uv": 3 * n, "b_uv": 3 * n, "a_vv": m, "b_vv": m}
    v_h, e_h = reduction_counts(n, m, d)
    extra_v = sum(c * (rods[name].graph.n - 2) for name, c in copies.items())
    extra_e = sum(c * (rods[name].graph.m - 1) for name, c in copies.items())
    return {"V_H": v_h, "E_H": e_h, "V_H_unit": v_h + extra_v, "E_H_unit": e_h + extra_e}


def measure_linear_size(graphs: Iterable[WeightedGraph], d: int, cache: Optional[RodCache] = None) -> pd.DataFrame:
    """
    Tabulate |V_H'| / (|V_G| + |E_G| + 1) over a corpus of source graphs.

    The relative spread (max - min) / mean of the ratio is stored in
    ``frame.attrs["ratio_spread"]``. The size law is affine with a large
    constant term, so the ratio drifts with graph size and is not a constant.
    """
    rows = []
    for g in graphs:
        sizes = predicted_sizes(g.n, g.m, d, cache)
        rows.append({"n": g.n, "m": g.m, **sizes,
                     "ratio": sizes["V_H_unit"] / (g.n + g.m + 1)})
    frame = pd.DataFrame(rows)
    if not frame.empty:
        ratio = frame["ratio"]
        frame.attrs["ratio_spread"] = float((ratio.max() - ratio.min()) / ratio.mean())
        logger.info(f"linear size ratio at d={d}: min {ratio.min():.1f}, max {ratio.max():.1f}, "
                    f"mean {ratio.mean():.1f}, spread {frame.attrs['ratio_spread']:.1%}")
    return frame
