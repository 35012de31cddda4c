"""
Witness Synthesis for unitrod
Explicit non-critical embeddings of H (and of its unit-distance expansion)
from a valid 3-coloring, and 3-coloring extraction from any embedding of H
"""

import logging
import math
import threading
import zlib
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import null_space
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from tenacity import Retrying, after_log, retry_if_exception_type, stop_after_attempt

from .config import RngStream, ToleranceConfig, as_generator
from .errors import (DegeneracyRetryExhausted, DegenerateK, InvalidColoring, LengthMismatch,
                     NotAnEmbedding, PartialColoring, TriangleInfeasible, UnitRodError)
from .gadgets import (AngularTrace, MultiplyTrace, RodCertificate, SpindleTrace, SubstitutionPlan,
                      UnitEdgeTrace, dimension_constants)
from .graph_core import (Embedding, WeightedGraph, classify_embedding, embedding_residual,
                         middle_angle_sines)
from .reduction import EPSILON, ExpandedInstance, ReductionInstance

logger = logging.getLogger(__name__)

Coloring = Dict[int, int]

CANONICAL_SEED = 20240917
JITTER_SCALE = EPSILON / 1e6
GLUE_LENGTH_TOL = 1e-9
LOCAL_TRIPLE_LIMIT = 2_000_000


class _Degenerate(UnitRodError):
    """A random placement hit a near-degeneracy; draw again"""


def _retrying(tol: ToleranceConfig, what: str, build):
    """Run ``build(attempt)`` until it stops raising _Degenerate"""
    try:
        for attempt in Retrying(stop=stop_after_attempt(tol.max_retries),
                                retry=retry_if_exception_type(_Degenerate),
                                after=after_log(logger, logging.DEBUG),
                                reraise=True):
            with attempt:
                return build(attempt.retry_state.attempt_number)
    except _Degenerate as exc:
        raise DegeneracyRetryExhausted(f"{what}: no non-degenerate placement in {tol.max_retries} tries ({exc})") from exc


def normalize_coloring(c: Union[Mapping[int, int], Sequence[int]]) -> Coloring:
    if isinstance(c, Mapping):
        return {int(k): int(v) for k, v in c.items()}
    return {i: int(v) for i, v in enumerate(c)}


def _require_valid_coloring(G: WeightedGraph, c) -> Coloring:
    from .oracle import validate_coloring

    coloring = normalize_coloring(c)
    try:
        ok = validate_coloring(G, coloring)
    except PartialColoring as exc:
        raise InvalidColoring(str(exc)) from exc
    if not ok:
        raise InvalidColoring("coloring is not a proper 3-coloring of the source graph")
    return coloring


def simplex_coordinates(m: int, edge: float = 1.0, dim: Optional[int] = None) -> np.ndarray:
    """
    Vertices of a regular simplex with m vertices and the given edge length,
    centroid at the origin, in R^dim (default m-1, at least 1).
    """
    if m < 1 or edge <= 0:
        raise ValueError(f"simplex needs m >= 1 and edge > 0, got m={m}, edge={edge}")
    dim = max(m - 1, 1) if dim is None else dim
    if dim < m - 1:
        raise ValueError(f"a {m}-vertex simplex needs dimension >= {m - 1}")
    out = np.zeros((m, dim))
    if m == 1:
        return out
    pts = np.eye(m) * (edge / math.sqrt(2.0))
    pts -= pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts)
    out[:, : m - 1] = pts @ vt[: m - 1].T
    return out


def random_frames(axes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Orthonormal frames (k, d, d) whose first column is the given unit axis and
    whose remaining columns are a uniformly random basis of its complement.
    """
    axes = np.atleast_2d(axes)
    k, d = axes.shape
    mats = rng.standard_normal((k, d, d))
    mats[:, :, 0] = axes
    q, r = np.linalg.qr(mats)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def _terminal_frame(X: np.ndarray, u: int, v: int) -> np.ndarray:
    """Move u to the origin and v onto the positive first axis"""
    t = X - X[u]
    axis = t[v] / np.linalg.norm(t[v])
    e1 = np.zeros_like(axis)
    e1[0] = 1.0
    w = axis - e1
    norm = np.linalg.norm(w)
    if norm < 1e-15:
        return t
    w /= norm
    return t - 2.0 * np.outer(t @ w, w)


def _spindle_coords(d: int, rng: np.random.Generator) -> np.ndarray:
    """Two unit simplices sharing apex A, with B and C the reflected apexes"""
    const = dimension_constants(d)
    D = const.D
    X = np.zeros((2 * d + 3, d))
    X[1, 0] = D
    simplex = simplex_coordinates(d, 1.0)
    frame = random_frames(np.eye(d)[:1], rng)[0]
    X[3: 3 + d] = (D / 2.0) * frame[:, 0] + simplex @ frame[:, 1:].T
    x = (2.0 * D * D - 1.0) / (2.0 * D)
    rho = math.sqrt(max(D * D - x * x, 0.0))
    X[2] = x * frame[:, 0] + rho * random_frames(np.eye(d)[:1], rng)[0][:, 1]
    c_axis = X[2] / np.linalg.norm(X[2])
    c_frame = random_frames(c_axis[None, :], rng)[0]
    X[3 + d: 3 + 2 * d] = X[2] / 2.0 + simplex @ c_frame[:, 1:].T
    return X


def _angular_skeleton_coords(d: int, n_path: int) -> np.ndarray:
    """K as a unit simplex in the last d-2 axes, path vertices on the circle of radius r0"""
    const = dimension_constants(d)
    X = np.zeros((d - 1 + n_path, d))
    X[: d - 1, 2:] = simplex_coordinates(d - 1, 1.0, dim=d - 2)
    angles = np.arange(n_path) * const.alpha
    X[d - 1:, 0] = const.r0 * np.cos(angles)
    X[d - 1:, 1] = const.r0 * np.sin(angles)
    return X


def _glue_plan(X: np.ndarray, plan: SubstitutionPlan, d: int, tol: ToleranceConfig,
               rng: np.random.Generator) -> np.ndarray:
    """Place a randomly rotated canonical copy of each block's rod on its edge"""
    for rod, blocks in plan.groups():
        Y = canonical_rod_embedding(rod, d, tol)
        maps = np.stack([block.vertex_map for block in blocks])
        p, q = X[maps[:, rod.u]], X[maps[:, rod.v]]
        span = np.linalg.norm(q - p, axis=1)
        if np.any(np.abs(span - rod.length_value) > GLUE_LENGTH_TOL * max(1.0, rod.length_value)):
            raise LengthMismatch(f"host edge lengths do not match rod length {rod.length_value}")
        frames = random_frames((q - p) / span[:, None], rng)
        interior = rod.interior
        X[maps[:, interior]] = p[:, None, :] + np.einsum("kij,nj->kni", frames, Y[interior])
    return X


def _check_intrinsic(g: WeightedGraph, X: np.ndarray, d: int, tol: ToleranceConfig, rng):
    report = classify_embedding(g, Embedding(d, X), tol, rng)
    if not report.is_embedding:
        raise UnitRodError(f"canonical construction has residual {report.residual:.3e}")
    if not report.is_non_critical:
        raise _Degenerate(f"violations {report.counts}")


def _build_canonical(rod: RodCertificate, d: int, tol: ToleranceConfig) -> np.ndarray:
    trace = rod.trace
    if isinstance(trace, UnitEdgeTrace):
        X = np.zeros((2, d))
        X[1, 0] = 1.0
        return X
    seed_key = zlib.crc32(repr((rod.recipe, d)).encode())

    def attempt(number: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(CANONICAL_SEED, spawn_key=(seed_key, number)))
        if isinstance(trace, SpindleTrace):
            X = _spindle_coords(d, rng)
        elif isinstance(trace, AngularTrace):
            plan = trace.substitute.plan
            X = np.zeros((plan.result_n, d))
            X[: plan.base_n] = _angular_skeleton_coords(d, trace.n_path)
            X = _glue_plan(X, plan, d, tol, rng)
        elif isinstance(trace, MultiplyTrace):
            plan = trace.substitute.plan
            X = np.zeros((plan.result_n, d))
            X[: plan.base_n] = canonical_rod_embedding(trace.outer, d, tol) * trace.inner.length_value
            X = _glue_plan(X, plan, d, tol, rng)
        else:
            raise UnitRodError(f"no canonical layout for trace {type(trace).__name__}")
        X = _terminal_frame(X, rod.u, rod.v)
        _check_intrinsic(rod.graph, X, d, tol, rng)
        return X

    return _retrying(tol, f"canonical embedding of {rod!r}", attempt)


_canonical_cache: Dict[Tuple, np.ndarray] = {}
_canonical_lock = threading.Lock()


def canonical_rod_embedding(rod: RodCertificate, d: Optional[int] = None,
                            tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """
    Deterministic non-critical embedding of a rod in R^d with u at the origin
    and v at (length, 0, ..., 0). Cached per (recipe, d).
    """
    d = d or rod.d
    if d is None:
        raise ValueError("a dimension is needed to embed a rod built without one")
    tol = tol or ToleranceConfig()
    key = (rod.recipe, d, tol)
    with _canonical_lock:
        cached = _canonical_cache.get(key)
    if cached is not None:
        return cached
    X = _build_canonical(rod, d, tol)
    X.setflags(write=False)
    with _canonical_lock:
        X = _canonical_cache.setdefault(key, X)
    logger.debug(f"canonical embedding ready for {rod!r} in R^{d}")
    return X


def _host_check(new: np.ndarray, host: np.ndarray, tol: ToleranceConfig, rng: np.random.Generator):
    """New points against an existing point set: no coincidence, unit pair or collinear triple"""
    if len(new) == 0 or len(host) == 0:
        return
    dist, _ = cKDTree(host).query(new, distance_upper_bound=tol.eps_sep)
    if np.isfinite(dist).any():
        raise _Degenerate("new point coincides with a placed point")
    total = len(new) * len(host)
    if total <= tol.pair_samples:
        diff = np.linalg.norm(new[:, None, :] - host[None, :, :], axis=2).ravel()
    else:
        i = rng.integers(0, len(new), size=tol.pair_samples)
        j = rng.integers(0, len(host), size=tol.pair_samples)
        diff = np.linalg.norm(new[i] - host[j], axis=1)
    if np.any(np.abs(diff - 1.0) <= tol.eps_sep):
        raise _Degenerate("new point at unit distance from a non-adjacent placed point")
    pts = np.concatenate([new, host])
    n_new, n_all = len(new), len(pts)
    if n_all < 3:
        return
    if n_new == 1 and (n_all - 1) * (n_all - 2) // 2 <= LOCAL_TRIPLE_LIMIT:
        others = np.arange(1, n_all)
        a, b = np.triu_indices(len(others), k=1)
        triples = np.stack([np.zeros(len(a), dtype=np.int64), others[a], others[b]], axis=1)
    else:
        count = min(tol.triple_samples, LOCAL_TRIPLE_LIMIT)
        first = rng.integers(0, n_new, size=count)
        rest = rng.integers(0, n_all, size=(count, 2))
        triples = np.concatenate([first[:, None], rest], axis=1)
        keep = (triples[:, 0] != triples[:, 1]) & (triples[:, 0] != triples[:, 2]) & (triples[:, 1] != triples[:, 2])
        triples = triples[keep]
    if len(triples) and np.any(middle_angle_sines(pts, triples) <= tol.eps_collinear):
        raise _Degenerate("new point collinear with two placed points")


def glue_rod_embedding(rod: RodCertificate,
                       p_u: np.ndarray,
                       p_v: np.ndarray,
                       rng=None,
                       tol: Optional[ToleranceConfig] = None,
                       host: Optional[np.ndarray] = None) -> Embedding:
    """
    Embed a rod with its terminals on p_u and p_v.

    The canonical embedding is moved onto the segment and spun about it by a
    random rotation. Without ``host`` the result is non-critical by itself;
    with ``host`` (points already placed, terminals excluded) rotations are
    redrawn until the rod interior is also non-degenerate against the host.

    Args:
        rod: Rod to place
        p_u, p_v: Terminal positions, |p_u - p_v| equal to the rod length
        rng: RngStream, Generator or seed
        tol: Tolerances
        host: Optional (h, d) array of other placed points

    Returns:
        Embedding of rod.graph in rod-local vertex order
    """
    tol = tol or ToleranceConfig()
    gen = as_generator(0 if rng is None else rng)
    p_u, p_v = np.asarray(p_u, dtype=np.float64), np.asarray(p_v, dtype=np.float64)
    d = len(p_u)
    span = float(np.linalg.norm(p_v - p_u))
    if abs(span - rod.length_value) > GLUE_LENGTH_TOL * max(1.0, rod.length_value):
        raise LengthMismatch(f"terminal distance {span} does not match rod length {rod.length_value}")
    Y = canonical_rod_embedding(rod, d, tol)
    axis = (p_v - p_u) / span
    interior = rod.interior

    def attempt(_: int) -> np.ndarray:
        frame = random_frames(axis[None, :], gen)[0]
        Z = p_u + Y @ frame.T
        Z[rod.u], Z[rod.v] = p_u, p_v
        if host is not None:
            _host_check(Z[interior], host, tol, gen)
        return Z

    return Embedding(d, _retrying(tol, f"gluing {rod!r}", attempt))


def base_witness(G: WeightedGraph, c, d: int, rng=None) -> Embedding:
    """
    Coordinates for K, U and V (H numbering, so V_i is row d+2+i).

    K is a unit simplex centered at the origin in the last d-2 axes; U sits
    on the circle of radius r0 in the first two axes at angles 0, 2pi/3,
    4pi/3; color-c vertices are spread evenly across the central half of the
    arc of width eps opposite u_c, with a seed-derived jitter of at most eps/1e6.
    """
    coloring = _require_valid_coloring(G, c)
    const = dimension_constants(d)
    gen = as_generator(0 if rng is None else rng)
    n = G.n
    X = np.zeros((d + 2 + n, d))
    X[: d - 1, 2:] = simplex_coordinates(d - 1, 1.0, dim=d - 2)
    anchors = 2.0 * math.pi * np.arange(3) / 3.0
    X[d - 1: d + 2, 0] = const.r0 * np.cos(anchors)
    X[d - 1: d + 2, 1] = const.r0 * np.sin(anchors)
    angles = np.zeros(n)
    for color in range(3):
        members = [i for i in range(n) if coloring[i] == color]
        if not members:
            continue
        step = (EPSILON / 2.0) / len(members)
        start = anchors[color] + math.pi - EPSILON / 4.0
        angles[members] = start + (np.arange(len(members)) + 0.5) * step
    angles += gen.uniform(-JITTER_SCALE, JITTER_SCALE, size=n)
    X[d + 2:, 0] = const.r0 * np.cos(angles)
    X[d + 2:, 1] = const.r0 * np.sin(angles)
    return Embedding(d, X)


def place_apex(p_v: np.ndarray, p_u: np.ndarray, a: float, b: float, rng=None) -> np.ndarray:
    """Point z with |z - p_v| = a and |z - p_u| = b at a random angle about the line p_v p_u"""
    gen = as_generator(0 if rng is None else rng)
    p_v, p_u = np.asarray(p_v, dtype=np.float64), np.asarray(p_u, dtype=np.float64)
    ell = float(np.linalg.norm(p_u - p_v))
    if not abs(a - b) < ell < a + b:
        raise TriangleInfeasible(f"no triangle with sides {a}, {b}, {ell}")
    axis = (p_u - p_v) / ell
    x = (a * a - b * b + ell * ell) / (2.0 * ell)
    rho = math.sqrt(max(a * a - x * x, 0.0))
    direction = random_frames(axis[None, :], gen)[0][:, 1]
    return p_v + x * axis + rho * direction


def _apex_positions(inst: ReductionInstance, c, gen: np.random.Generator, tol: ToleranceConfig) -> np.ndarray:
    """Base witness plus every aux vertex, in gadget order"""
    X = np.zeros((inst.H.n, inst.d))
    X[: inst.base_size] = base_witness(inst.source, c, inst.d, gen).coords
    for gadget in inst.gadgets:
        a = getattr(inst.params, inst.rod_name(gadget, "a"))
        b = getattr(inst.params, inst.rod_name(gadget, "b"))
        host = X[np.setdiff1d(np.arange(gadget.aux), [gadget.near, gadget.far])]

        def attempt(_: int, gadget=gadget, a=a, b=b, host=host) -> np.ndarray:
            z = place_apex(X[gadget.near], X[gadget.far], a, b, gen)
            _host_check(z[None, :], host, tol, gen)
            return z

        X[gadget.aux] = _retrying(tol, f"apex {inst.roles[gadget.aux].label()}", attempt)
    return X


def _glue_expansion(expanded: ExpandedInstance, h_coords: np.ndarray, gen: np.random.Generator,
                    tol: ToleranceConfig) -> np.ndarray:
    """Glue every rod of H' onto its H edge; interiors fill consecutive id ranges in block order"""
    d = expanded.base.d
    full = np.zeros((expanded.graph.n, d))
    filled = len(h_coords)
    full[:filled] = h_coords
    for block in expanded.plan.blocks:
        rod = block.rod
        ends = block.vertex_map[[rod.u, rod.v]]
        host = full[np.setdiff1d(np.arange(filled), ends)]
        placed = glue_rod_embedding(rod, full[ends[0]], full[ends[1]], gen, tol, host=host)
        interior = rod.interior
        full[block.vertex_map[interior]] = placed.coords[interior]
        filled += len(interior)
    return full


def witness_embedding(inst: Union[ReductionInstance, ExpandedInstance],
                      c,
                      rng=None,
                      tol: Optional[ToleranceConfig] = None) -> Embedding:
    """
    Non-critical embedding of H (or of its expansion H') from a valid coloring.

    Args:
        inst: ReductionInstance or ExpandedInstance
        c: Coloring of the source graph (mapping or sequence)
        rng: RngStream or int seed
        tol: Tolerances

    Returns:
        Embedding verified by classify_embedding
    """
    tol = tol or ToleranceConfig()
    stream = rng if isinstance(rng, RngStream) else RngStream(0 if rng is None else int(rng))
    expanded = inst if isinstance(inst, ExpandedInstance) else None
    base_inst = expanded.base if expanded is not None else inst
    graph = expanded.graph if expanded is not None else base_inst.H

    def attempt(number: int):
        gen = stream.child(number).generator
        X = _apex_positions(base_inst, c, gen, tol)
        if expanded is not None:
            X = _glue_expansion(expanded, X, gen, tol)
        emb = Embedding(base_inst.d, X)
        report = classify_embedding(graph, emb, tol, gen)
        if not report.is_embedding:
            raise UnitRodError(f"witness residual {report.residual:.3e} exceeds eps_len")
        if not report.is_non_critical:
            raise _Degenerate(f"violations {report.counts}")
        return emb, report

    emb, report = _retrying(tol, f"witness for {graph!r}", attempt)
    logger.info(f"witness for {graph!r}: residual {report.residual:.3e}, "
                f"sampled pairs={report.pairs_sampled}, sampled triples={report.triples_sampled}")
    return emb


def _wrap(angle: np.ndarray) -> np.ndarray:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def _on_short_arc(start: float, end: float, t: float) -> bool:
    span = _wrap(end - start)
    offset = _wrap(t - start)
    return bool(np.sign(offset) == np.sign(span) and abs(offset) < abs(span))


def circle_angles(inst: ReductionInstance, e: Embedding, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """
    Angular coordinate of every H vertex projected into the 2-plane through
    the centroid of K orthogonal to K's affine hull.
    """
    tol = tol or ToleranceConfig()
    d = inst.d
    K = e.coords[inst.k_vertices]
    if d - 1 >= 2 and np.any(np.abs(pdist(K) - 1.0) > tol.eps_sep):
        raise DegenerateK("K images are not a regular unit simplex")
    origin = K.mean(axis=0)
    plane = null_space(K[1:] - K[0]) if d - 1 >= 2 else np.eye(d)
    if plane.shape[1] != 2:
        raise DegenerateK(f"K's affine hull leaves a {plane.shape[1]}-dimensional complement")
    flat = (e.coords[: inst.H.n] - origin) @ plane
    return np.arctan2(flat[:, 1], flat[:, 0])


def extract_coloring(inst: Union[ReductionInstance, ExpandedInstance],
                     e: Embedding,
                     tol: Optional[ToleranceConfig] = None) -> Coloring:
    """
    Read a 3-coloring off an embedding of H: a V vertex on the short arc
    u0-u1 gets color 2, on the short arc u0-u2 color 1, otherwise color 0.
    """
    tol = tol or ToleranceConfig()
    if isinstance(inst, ExpandedInstance):
        graph, inst = inst.graph, inst.base
    else:
        graph = inst.H
    if e.n < graph.n:
        raise NotAnEmbedding(f"embedding covers {e.n} of {graph.n} vertices")
    angles = circle_angles(inst, e, tol)
    residual = embedding_residual(graph, e)
    if residual > tol.eps_len:
        raise NotAnEmbedding(f"residual {residual:.3e} exceeds eps_len {tol.eps_len:.1e}")
    u0, u1, u2 = (angles[u] for u in inst.u_vertices)
    coloring: Coloring = {}
    for i, v in enumerate(inst.v_vertices):
        if _on_short_arc(u0, u1, angles[v]):
            coloring[i] = 2
        elif _on_short_arc(u0, u2, angles[v]):
            coloring[i] = 1
        else:
            coloring[i] = 0
    return coloring


def rotation_direction_check(rod: RodCertificate, d: Optional[int] = None, atol: float = 1e-9) -> bool:
    """
    On the canonical layout of an angular rod, every consecutive pair of path
    vertices differs by the same rotation of +alpha about the K axis.
    """
    trace = rod.trace
    outer = rod
    while isinstance(trace, MultiplyTrace):
        outer = trace.outer
        trace = outer.trace
    if not isinstance(trace, AngularTrace):
        raise ValueError(f"{rod!r} is not built on an angular rod")
    d = d or trace.d
    X = canonical_rod_embedding(outer, d)
    K = X[: d - 1]
    plane = null_space(K[1:] - K[0])
    path = X[d - 1: d - 1 + trace.n_path] - K.mean(axis=0)
    flat = path @ plane
    steps = _wrap(np.diff(np.arctan2(flat[:, 1], flat[:, 0])))
    alpha = dimension_constants(d).alpha
    return bool(np.allclose(steps, alpha, atol=atol) or np.allclose(steps, -alpha, atol=atol))
