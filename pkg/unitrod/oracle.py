"""
Coloring Oracle for unitrod
Exact 3-coloring by backtracking and end-to-end consistency checks of the
reduction pipeline against it
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .config import RngStream, SolveConfig, ToleranceConfig
from .errors import InvalidColoring, NotAnEmbedding, DegenerateK, PartialColoring, TooLarge
from .graph_core import WeightedGraph
from .reduction import build_reduction
from .solver import HEURISTIC_LABEL, SolveReport, Verdict, solve
from .witness import Coloring, extract_coloring, normalize_coloring, witness_embedding

logger = logging.getLogger(__name__)

MAX_ORACLE_VERTICES = 25
ENUMERATE_LIMIT = 8
CANDIDATE_SAMPLES = 500
COLORS = 3


def validate_coloring(G: WeightedGraph, c: Union[Mapping[int, int], Sequence[int]]) -> bool:
    """True iff c assigns every vertex a color in {0, 1, 2} and no edge is monochromatic"""
    coloring = normalize_coloring(c)
    missing = [v for v in range(G.n) if v not in coloring]
    if missing:
        raise PartialColoring(f"coloring misses vertices {missing[:10]}")
    if any(k < 0 or k >= G.n for k in coloring):
        return False
    colors = np.array([coloring[v] for v in range(G.n)], dtype=np.int64)
    if np.any((colors < 0) | (colors >= COLORS)):
        return False
    if G.m == 0:
        return True
    return bool(np.all(colors[G.edges[:, 0]] != colors[G.edges[:, 1]]))


@dataclass
class OracleResult:
    colorable: bool
    witness: Optional[Coloring]
    colorings_tried: int

    def to_dict(self) -> Dict[str, Any]:
        return {"colorable": self.colorable,
                "witness": None if self.witness is None else {str(k): v for k, v in sorted(self.witness.items())},
                "colorings_tried": self.colorings_tried}


def brute_force_3color(G: WeightedGraph, pin_first: bool = True) -> OracleResult:
    """
    Exhaustive 3-coloring search with forward edge checks.

    Vertices are colored in id order trying colors 0, 1, 2, so the witness is
    the lexicographically smallest proper coloring. ``pin_first`` fixes vertex
    0 to color 0; that never changes the answer.
    """
    n = G.n
    if n > MAX_ORACLE_VERTICES:
        raise TooLarge(f"oracle handles at most {MAX_ORACLE_VERTICES} vertices, got {n}")
    if n == 0:
        return OracleResult(True, {}, 0)
    earlier = [[u for u in G.adjacency[v] if u < v] for v in range(n)]
    colors = [-1] * n
    tried = 0
    v = 0
    while 0 <= v < n:
        top = 1 if (pin_first and v == 0) else COLORS
        c = colors[v] + 1
        while c < top:
            tried += 1
            if all(colors[u] != c for u in earlier[v]):
                break
            c += 1
        if c < top:
            colors[v] = c
            v += 1
        else:
            colors[v] = -1
            v -= 1
    if v == n:
        witness = dict(enumerate(colors))
        logger.debug(f"oracle: {G!r} colorable after {tried} color trials")
        return OracleResult(True, witness, tried)
    logger.debug(f"oracle: {G!r} not 3-colorable after {tried} color trials")
    return OracleResult(False, None, tried)


@dataclass
class ConsistencyReport:
    n: int
    m: int
    d: int
    h_vertices: int
    h_edges: int
    oracle: OracleResult
    extracted: Optional[Coloring] = None
    round_trip: Optional[bool] = None
    candidates_checked: int = 0
    candidates_rejected: int = 0
    solver: Optional[SolveReport] = None
    inconsistencies: List[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.inconsistencies

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "source": {"vertices": self.n, "edges": self.m},
            "d": self.d,
            "H": {"vertices": self.h_vertices, "edges": self.h_edges},
            "oracle": self.oracle.to_dict(),
            "consistent": self.consistent,
            "inconsistencies": list(self.inconsistencies),
        }
        if self.oracle.colorable:
            data["extracted"] = {str(k): v for k, v in sorted((self.extracted or {}).items())}
            data["round_trip"] = self.round_trip
        else:
            data["candidates"] = {"checked": self.candidates_checked, "rejected": self.candidates_rejected}
        if self.solver is not None:
            data["solver"] = {"verdict": self.solver.verdict.value,
                              "best_residual": self.solver.best_residual,
                              "min_energy": self.solver.min_energy,
                              "restarts": len(self.solver.energies)}
            if self.solver.verdict is Verdict.NO_EMBEDDING_FOUND_HEURISTIC:
                data["solver"]["evidence"] = HEURISTIC_LABEL
        return data


def _candidates(n: int, rng: np.random.Generator):
    if n <= ENUMERATE_LIMIT:
        for colors in itertools.product(range(COLORS), repeat=n):
            yield dict(enumerate(colors))
    else:
        for _ in range(CANDIDATE_SAMPLES):
            yield dict(enumerate(rng.integers(0, COLORS, size=n).tolist()))


def end_to_end_check(G,
                     d: int = 3,
                     cfg: Optional[SolveConfig] = None,
                     tol: Optional[ToleranceConfig] = None,
                     progress: bool = False) -> ConsistencyReport:
    """
    Run the oracle and the reduction pipeline on G and compare them.

    Colorable G: the oracle's witness must produce a non-critical embedding
    of H whose extracted coloring is proper and equal to the witness.
    Non-colorable G: every candidate coloring must be rejected by the
    witness path, and the solver's verdict on H is recorded as heuristic
    evidence; a solver embedding that decodes to a proper coloring is an
    inconsistency.

    Args:
        G: Source graph (WeightedGraph or networkx.Graph)
        d: Dimension
        cfg: Solver settings for the negative case (its seed seeds everything)
        tol: Tolerances
        progress: Show a progress bar over candidates

    Returns:
        ConsistencyReport
    """
    cfg = cfg or SolveConfig()
    tol = tol or ToleranceConfig()
    inst = build_reduction(G, d)
    source = inst.source
    result = brute_force_3color(source)
    report = ConsistencyReport(n=source.n, m=source.m, d=d, h_vertices=inst.H.n, h_edges=inst.H.m, oracle=result)

    if result.colorable:
        if not validate_coloring(source, result.witness):
            report.inconsistencies.append("oracle witness is not a proper coloring")
        try:
            emb = witness_embedding(inst, result.witness, RngStream(cfg.seed), tol)
            report.extracted = extract_coloring(inst, emb, tol)
            report.round_trip = report.extracted == result.witness
            if not validate_coloring(source, report.extracted):
                report.inconsistencies.append("extracted coloring is not proper")
            if not report.round_trip:
                report.inconsistencies.append("extracted coloring differs from the witness")
        except InvalidColoring as exc:
            report.inconsistencies.append(f"witness path rejected the oracle coloring: {exc}")
    else:
        rng = RngStream(cfg.seed, 1).generator
        for candidate in tqdm(_candidates(source.n, rng), desc="candidates", disable=not progress):
            report.candidates_checked += 1
            try:
                witness_embedding(inst, candidate, RngStream(cfg.seed), tol)
            except InvalidColoring:
                report.candidates_rejected += 1
            else:
                report.inconsistencies.append(f"witness path accepted coloring {candidate}")
        report.solver = solve(inst.H, d, cfg)
        if report.solver.verdict is Verdict.EMBEDDING_FOUND:
            try:
                decoded = extract_coloring(inst, report.solver.best, tol)
            except (NotAnEmbedding, DegenerateK) as exc:
                report.inconsistencies.append(f"solver embedding could not be decoded: {exc}")
            else:
                if validate_coloring(source, decoded):
                    report.inconsistencies.append("solver embedding decodes to a proper coloring of a non-3-colorable graph")
                else:
                    report.inconsistencies.append("solver found an embedding of H for a non-3-colorable graph")

    if report.consistent:
        logger.info(f"end-to-end check consistent for |V_G|={source.n}, |E_G|={source.m}, d={d} "
                    f"(colorable={result.colorable})")
    else:
        logger.warning(f"end-to-end check found {len(report.inconsistencies)} inconsistencies: {report.inconsistencies}")
    return report
