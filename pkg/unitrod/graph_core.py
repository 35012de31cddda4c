"""
Graph Core for unitrod
Weighted graphs, embeddings and the verification predicates
(embedding, strict, injective, non-critical)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .config import ToleranceConfig, as_generator
from .errors import (DuplicateEdge, MissingVertexCoordinates, NonPositiveLength,
                     SelfLoop, VertexOutOfRange)

logger = logging.getLogger(__name__)

MAX_REPORTED_VIOLATIONS = 100
PAIR_CHUNK = 512


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """
    Undirected weighted graph on dense vertex ids 0..n-1.

    Edges are stored with u < v. ``exprs`` holds the exact length expression
    for edges that carry one (edge index -> LengthExpr); unit edges never do.
    """
    n: int
    edges: np.ndarray
    lengths: np.ndarray
    exprs: Mapping[int, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "edges", _frozen(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)))
        object.__setattr__(self, "lengths", _frozen(np.asarray(self.lengths, dtype=np.float64).reshape(-1)))
        object.__setattr__(self, "exprs", dict(self.exprs))

    @classmethod
    def from_arrays(cls,
                    n: int,
                    edges: np.ndarray,
                    lengths: np.ndarray,
                    exprs: Optional[Mapping[int, Any]] = None,
                    validate: bool = True) -> "WeightedGraph":
        """
        Vectorized constructor used by the gadget builders.

        Args:
            n: Vertex count
            edges: (m, 2) integer array, any endpoint order
            lengths: (m,) positive lengths
            exprs: Optional exact expressions keyed by edge index
            validate: Run the range/self-loop/duplicate/length checks

        Returns:
            Normalized WeightedGraph
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=np.float64).reshape(-1)
        if validate:
            if n < 0:
                raise VertexOutOfRange(f"negative vertex count {n}")
            if len(edges) != len(lengths):
                raise ValueError(f"{len(edges)} edges but {len(lengths)} lengths")
            if len(edges):
                bad = (edges < 0) | (edges >= n)
                if bad.any():
                    row = int(np.nonzero(bad.any(axis=1))[0][0])
                    raise VertexOutOfRange(f"edge {tuple(edges[row])} references a vertex outside 0..{n - 1}")
                loops = edges[:, 0] == edges[:, 1]
                if loops.any():
                    raise SelfLoop(f"self-loop at vertex {int(edges[loops][0, 0])}")
                nonpos = ~(lengths > 0)
                if nonpos.any():
                    row = int(np.nonzero(nonpos)[0][0])
                    raise NonPositiveLength(f"edge {tuple(edges[row])} has length {lengths[row]}")
        canon = np.sort(edges, axis=1)
        if validate and len(canon):
            keys = canon[:, 0] * max(n, 1) + canon[:, 1]
            uniq, counts = np.unique(keys, return_counts=True)
            if (counts > 1).any():
                key = int(uniq[counts > 1][0])
                raise DuplicateEdge(f"duplicate edge ({key // n}, {key % n})")
        return cls(n=n, edges=canon, lengths=lengths, exprs=exprs or {})

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> range:
        return range(self.n)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted u*n+v keys, used for vectorized adjacency tests"""
        return np.sort(self.edges[:, 0] * max(self.n, 1) + self.edges[:, 1])

    @cached_property
    def edge_index(self) -> Dict[Tuple[int, int], int]:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}

    def find_edge(self, u: int, v: int) -> Optional[int]:
        return self.edge_index.get((min(u, v), max(u, v)))

    def expr(self, e: int):
        return self.exprs.get(e)

    def is_unit(self) -> bool:
        return bool(np.all(self.lengths == 1.0))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.n)

    @cached_property
    def adjacency(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges.tolist():
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def max_length(self) -> float:
        return float(self.lengths.max()) if self.m else 1.0

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        mat = coo_matrix((np.ones(self.m), (self.edges[:, 0], self.edges[:, 1])), shape=(self.n, self.n))
        count, _ = connected_components(mat, directed=False)
        return count == 1

    def same_as(self, other: "WeightedGraph") -> bool:
        if not isinstance(other, WeightedGraph):
            return False
        if self.n != other.n or self.m != other.m:
            return False
        if not (np.array_equal(self.edges, other.edges) and np.array_equal(self.lengths, other.lengths)):
            return False
        return self.exprs == other.exprs

    __eq__ = same_as
    __hash__ = None

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m}, symbolic_edges={len(self.exprs)})"


@dataclass(frozen=True, eq=False)
class Embedding:
    """Point in R^dim for every vertex; row i holds vertex i"""
    dim: int
    coords: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"embedding dimension must be positive, got {self.dim}")
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.size == 0:
            coords = coords.reshape(0, self.dim)
        if coords.ndim != 2 or coords.shape[1] != self.dim:
            raise ValueError(f"coords shape {coords.shape} does not match dimension {self.dim}")
        object.__setattr__(self, "coords", _frozen(coords.copy()))

    @property
    def n(self) -> int:
        return len(self.coords)

    def point(self, v: int) -> np.ndarray:
        return self.coords[v]

    def moved(self, rotation: np.ndarray, translation: np.ndarray) -> "Embedding":
        """Apply x -> Q x + t to every point"""
        return Embedding(self.dim, self.coords @ np.asarray(rotation).T + np.asarray(translation))

    def __eq__(self, other) -> bool:
        return isinstance(other, Embedding) and self.dim == other.dim and np.array_equal(self.coords, other.coords)

    __hash__ = None


class ViolationKind(Enum):
    """Kinds of verification failure"""
    EDGE_LENGTH = "EdgeLength"
    COINCIDENT_PAIR = "CoincidentPair"
    UNIT_NON_ADJACENT = "UnitNonAdjacent"
    COLLINEAR_TRIPLE = "CollinearTriple"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    vertices: Tuple[int, ...]
    value: float

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "vertices": list(self.vertices), "value": self.value}


@dataclass
class VerificationReport:
    """Outcome of classify_embedding; flags agree with the violation counts"""
    is_embedding: bool
    is_strict: bool
    is_injective: bool
    is_non_critical: bool
    residual: float
    violations: List[Violation] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)
    pairs_sampled: bool = False
    triples_sampled: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "is_embedding": self.is_embedding,
            "is_strict": self.is_strict,
            "is_injective": self.is_injective,
            "is_non_critical": self.is_non_critical,
            "residual": self.residual,
            "pairs_sampled": self.pairs_sampled,
            "triples_sampled": self.triples_sampled,
            "counts": dict(self.counts),
            "violations": [v.to_dict() for v in self.violations],
        }


def build_graph(vertex_count: int, edges: Iterable[Tuple[int, int, Any]]) -> WeightedGraph:
    """
    Build a validated weighted graph.

    Lengths may be plain numbers or exact length expressions (anything with
    a ``value()`` method); expressions are kept on the edge.
    """
    pairs, lengths, exprs = [], [], {}
    for i, (u, v, length) in enumerate(edges):
        pairs.append((int(u), int(v)))
        if hasattr(length, "value"):
            exprs[i] = length
            lengths.append(length.value())
        else:
            lengths.append(float(length))
    return WeightedGraph.from_arrays(vertex_count, np.array(pairs, dtype=np.int64).reshape(-1, 2),
                                     np.array(lengths, dtype=np.float64), exprs)


def _require_coverage(g: WeightedGraph, e: Embedding):
    if e.n < g.n:
        raise MissingVertexCoordinates(f"embedding has {e.n} points but the graph has {g.n} vertices")


def edge_distances(g: WeightedGraph, coords: np.ndarray) -> np.ndarray:
    if g.m == 0:
        return np.zeros(0)
    return np.linalg.norm(coords[g.edges[:, 0]] - coords[g.edges[:, 1]], axis=1)


def embedding_residual(g: WeightedGraph, e: Embedding) -> float:
    """Max over edges of |distance - length|; 0.0 for an edgeless graph"""
    _require_coverage(g, e)
    if g.m == 0:
        return 0.0
    return float(np.max(np.abs(edge_distances(g, e.coords) - g.lengths)))


class _Collector:
    """Keeps violation counts and the first few instances of each kind"""

    def __init__(self):
        self.violations: List[Violation] = []
        self.counts: Dict[str, int] = {kind.value: 0 for kind in ViolationKind}

    def add(self, kind: ViolationKind, rows: np.ndarray, values: np.ndarray):
        if len(rows) == 0:
            return
        already = self.counts[kind.value]
        self.counts[kind.value] += len(rows)
        room = max(0, MAX_REPORTED_VIOLATIONS - already)
        for row, value in zip(rows[:room], values[:room]):
            self.violations.append(Violation(kind, tuple(int(x) for x in row), float(value)))


def _adjacent(g: WeightedGraph, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    keys = np.minimum(i, j) * max(g.n, 1) + np.maximum(i, j)
    return np.isin(keys, g.edge_keys)


def _unit_pairs(g: WeightedGraph, X: np.ndarray, tol: ToleranceConfig, rng) -> Tuple[np.ndarray, np.ndarray, bool]:
    n = len(X)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0), False
    if n <= tol.pair_threshold:
        found_rows, found_vals = [], []
        for i0 in range(0, n, PAIR_CHUNK):
            i1 = min(n, i0 + PAIR_CHUNK)
            block = cdist(X[i0:i1], X)
            ii, jj = np.nonzero(np.abs(block - 1.0) <= tol.eps_sep)
            ii = ii + i0
            upper = jj > ii
            ii, jj = ii[upper], jj[upper]
            if len(ii):
                found_rows.append(np.stack([ii, jj], axis=1))
                found_vals.append(block[ii - i0, jj])
        if not found_rows:
            return np.zeros((0, 2), dtype=np.int64), np.zeros(0), False
        rows, vals = np.concatenate(found_rows), np.concatenate(found_vals)
        sampled = False
    else:
        i = rng.integers(0, n, size=tol.pair_samples)
        j = rng.integers(0, n - 1, size=tol.pair_samples)
        j = j + (j >= i)
        dist = np.linalg.norm(X[i] - X[j], axis=1)
        hit = np.abs(dist - 1.0) <= tol.eps_sep
        rows = np.stack([np.minimum(i, j)[hit], np.maximum(i, j)[hit]], axis=1)
        vals = dist[hit]
        sampled = True
    keep = ~_adjacent(g, rows[:, 0], rows[:, 1]) if len(rows) else np.zeros(0, dtype=bool)
    return rows[keep], vals[keep], sampled


def _collinear_exhaustive(X: np.ndarray, tol: ToleranceConfig) -> Tuple[np.ndarray, np.ndarray]:
    n = len(X)
    cut = tol.eps_collinear ** 2
    rows, vals = [], []
    for j in range(n):
        vec = np.delete(X, j, axis=0) - X[j]
        others = np.delete(np.arange(n), j)
        norms = np.linalg.norm(vec, axis=1)
        ok = norms > tol.eps_sep
        unit = vec[ok] / norms[ok, None]
        idx = others[ok]
        gram = unit @ unit.T
        gap = (1.0 - gram) * (1.0 + gram)
        a, b = np.nonzero(np.triu((gram < 0) & (gap <= cut), k=1))
        if len(a):
            rows.append(np.stack([idx[a], np.full(len(a), j), idx[b]], axis=1))
            vals.append(np.sqrt(np.maximum(gap[a, b], 0.0)))
    if not rows:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(vals)


def middle_angle_sines(X: np.ndarray, triples: np.ndarray) -> np.ndarray:
    """
    Sine of the angle at the middle vertex (the one opposite the longest side)
    of each triple. Triples containing coincident points get sine 1.
    """
    p, q, r = X[triples[:, 0]], X[triples[:, 1]], X[triples[:, 2]]
    sides = np.stack([np.linalg.norm(q - r, axis=1),
                      np.linalg.norm(p - r, axis=1),
                      np.linalg.norm(p - q, axis=1)], axis=1)
    middle = np.argmax(sides, axis=1)
    pts = np.stack([p, q, r], axis=1)
    rows = np.arange(len(triples))
    apex = pts[rows, middle]
    first = pts[rows, (middle + 1) % 3] - apex
    second = pts[rows, (middle + 2) % 3] - apex
    na, nb = np.linalg.norm(first, axis=1), np.linalg.norm(second, axis=1)
    degenerate = (na == 0) | (nb == 0)
    cos = np.einsum("ij,ij->i", first, second) / np.where(degenerate, 1.0, na * nb)
    sine = np.sqrt(np.maximum((1.0 - cos) * (1.0 + cos), 0.0))
    return np.where(degenerate, 1.0, sine)


def _collinear_sampled(X: np.ndarray, tol: ToleranceConfig, rng) -> Tuple[np.ndarray, np.ndarray]:
    n = len(X)
    triples = rng.integers(0, n, size=(tol.triple_samples, 3))
    distinct = (triples[:, 0] != triples[:, 1]) & (triples[:, 1] != triples[:, 2]) & (triples[:, 0] != triples[:, 2])
    triples = triples[distinct]
    sines = middle_angle_sines(X, triples)
    hit = sines <= tol.eps_collinear
    return triples[hit], sines[hit]


def classify_embedding(g: WeightedGraph,
                       e: Embedding,
                       tol: Optional[ToleranceConfig] = None,
                       rng=None) -> VerificationReport:
    """
    Check an embedding against the four exact notions, discretized by ``tol``.

    Coincidences are found exhaustively through a k-d tree. Unit-distance
    pairs are exhaustive up to ``tol.pair_threshold`` vertices and collinear
    triples up to ``tol.triple_threshold``; past those the checks sample
    uniformly and the report marks them as sampled.

    Args:
        g: Graph whose edges define adjacency and lengths
        e: Embedding covering every vertex of g
        tol: Tolerances (defaults from the environment)
        rng: Seed or generator for the sampled checks (default seed 0)

    Returns:
        VerificationReport
    """
    _require_coverage(g, e)
    tol = tol or ToleranceConfig()
    rng = as_generator(0 if rng is None else rng)
    X = e.coords[: g.n]
    out = _Collector()

    residual = embedding_residual(g, e)
    if g.m:
        dev = np.abs(edge_distances(g, X) - g.lengths)
        bad = np.nonzero(dev > tol.eps_len)[0]
        out.add(ViolationKind.EDGE_LENGTH, g.edges[bad], dev[bad])

    if g.n >= 2:
        pairs = cKDTree(X).query_pairs(tol.eps_sep, output_type="ndarray")
        if len(pairs):
            pairs = np.sort(pairs, axis=1)
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            out.add(ViolationKind.COINCIDENT_PAIR, pairs, np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1))

    unit_rows, unit_vals, pairs_sampled = _unit_pairs(g, X, tol, rng)
    out.add(ViolationKind.UNIT_NON_ADJACENT, unit_rows, unit_vals)

    triples_sampled = False
    if g.n >= 3:
        if g.n <= tol.triple_threshold:
            col_rows, col_vals = _collinear_exhaustive(X, tol)
        else:
            col_rows, col_vals = _collinear_sampled(X, tol, rng)
            triples_sampled = True
        out.add(ViolationKind.COLLINEAR_TRIPLE, col_rows, col_vals)

    is_embedding = residual <= tol.eps_len
    is_injective = out.counts[ViolationKind.COINCIDENT_PAIR.value] == 0
    separated = out.counts[ViolationKind.UNIT_NON_ADJACENT.value] == 0
    no_collinear = out.counts[ViolationKind.COLLINEAR_TRIPLE.value] == 0
    report = VerificationReport(
        is_embedding=is_embedding,
        is_strict=is_embedding and separated,
        is_injective=is_injective,
        is_non_critical=is_embedding and is_injective and separated and no_collinear,
        residual=residual,
        violations=out.violations,
        counts=out.counts,
        pairs_sampled=pairs_sampled,
        triples_sampled=triples_sampled,
    )
    logger.debug(f"classified embedding of {g!r}: {report.counts}")
    return report


def distance_graph(e: Embedding, eps: float = 1e-6) -> WeightedGraph:
    """Unit-distance graph of the embedded point set (all pairs within eps of 1)"""
    X = e.coords
    n = len(X)
    rows = []
    for i0 in range(0, n, PAIR_CHUNK):
        i1 = min(n, i0 + PAIR_CHUNK)
        ii, jj = np.nonzero(np.abs(cdist(X[i0:i1], X) - 1.0) <= eps)
        ii = ii + i0
        upper = jj > ii
        if upper.any():
            rows.append(np.stack([ii[upper], jj[upper]], axis=1))
    edges = np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)
    return WeightedGraph.from_arrays(n, edges, np.ones(len(edges)), validate=False)


def from_networkx(graph: nx.Graph) -> WeightedGraph:
    """Unit-weighted graph from a networkx graph, relabelling nodes in sorted order"""
    nodes = sorted(graph.nodes())
    index = {node: i for i, node in enumerate(nodes)}
    edges = [(index[u], index[v], 1.0) for u, v in graph.edges() if u != v]
    return build_graph(len(nodes), edges)


def to_networkx(g: WeightedGraph) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.n))
    graph.add_weighted_edges_from((int(u), int(v), float(w)) for (u, v), w in zip(g.edges, g.lengths))
    return graph


def simple_graph(n: int, edges: Sequence[Tuple[int, int]]) -> WeightedGraph:
    """Unit-weighted graph from bare (u, v) pairs, e.g. a coloring instance"""
    return build_graph(n, [(u, v, 1.0) for u, v in edges])
