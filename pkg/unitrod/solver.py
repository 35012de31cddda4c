"""
Embedding Solver for unitrod
Multi-restart least-squares search for coordinates realizing a weighted graph,
and the rod property check built on it
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy.optimize import least_squares
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import lsmr
from tqdm import tqdm

from .config import RngStream, SolveConfig
from .errors import InsufficientSuccesses, MissingVertexCoordinates
from .gadgets import RodCertificate
from .graph_core import Embedding, WeightedGraph, embedding_residual

logger = logging.getLogger(__name__)

HEURISTIC_LABEL = "heuristic, not a proof"
DENSE_LIMIT = 600
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MIN_STEP = 1e-12
DEFAULT_ROD_DIM = 3
MAX_ROD_ATTEMPTS = 2000


class Verdict(Enum):
    EMBEDDING_FOUND = "EmbeddingFound"
    NO_EMBEDDING_FOUND_HEURISTIC = "NoEmbeddingFoundHeuristic"


def _coords(g: WeightedGraph, X: Union[np.ndarray, Embedding]) -> np.ndarray:
    coords = X.coords if isinstance(X, Embedding) else np.asarray(X, dtype=np.float64)
    if coords.ndim != 2 or len(coords) < g.n:
        raise MissingVertexCoordinates(f"need coordinates for {g.n} vertices, got shape {coords.shape}")
    return coords[: g.n]


def squared_residuals(g: WeightedGraph, X: np.ndarray) -> np.ndarray:
    """Per-edge ||x_u - x_v||^2 - w^2"""
    if g.m == 0:
        return np.zeros(0)
    delta = X[g.edges[:, 0]] - X[g.edges[:, 1]]
    return np.einsum("ij,ij->i", delta, delta) - g.lengths ** 2


def energy(g: WeightedGraph, X: Union[np.ndarray, Embedding]) -> float:
    """Sum over edges of (||x_u - x_v||^2 - w^2)^2"""
    r = squared_residuals(g, _coords(g, X))
    return float(r @ r)


def energy_gradient(g: WeightedGraph, X: Union[np.ndarray, Embedding]) -> np.ndarray:
    """Gradient of energy, same shape as the coordinates"""
    X = _coords(g, X)
    grad = np.zeros_like(X)
    if g.m == 0:
        return grad
    delta = X[g.edges[:, 0]] - X[g.edges[:, 1]]
    r = np.einsum("ij,ij->i", delta, delta) - g.lengths ** 2
    contrib = 4.0 * r[:, None] * delta
    np.add.at(grad, g.edges[:, 0], contrib)
    np.add.at(grad, g.edges[:, 1], -contrib)
    return grad


class _Problem:
    """Residual and sparse Jacobian of one (graph, dimension) pair in flat coordinates"""

    def __init__(self, g: WeightedGraph, d: int):
        self.g = g
        self.d = d
        self.size = g.n * d
        m = g.m
        axes = np.arange(d)
        self.rows = np.repeat(np.arange(m), 2 * d)
        cols_u = g.edges[:, 0, None] * d + axes
        cols_v = g.edges[:, 1, None] * d + axes
        self.cols = np.concatenate([cols_u, cols_v], axis=1).reshape(-1)
        self.dense = self.size <= DENSE_LIMIT

    def residual(self, x: np.ndarray) -> np.ndarray:
        return squared_residuals(self.g, x.reshape(-1, self.d))

    def jacobian_sparse(self, x: np.ndarray) -> csr_matrix:
        X = x.reshape(-1, self.d)
        delta = 2.0 * (X[self.g.edges[:, 0]] - X[self.g.edges[:, 1]])
        values = np.concatenate([delta, -delta], axis=1).reshape(-1)
        return csr_matrix((values, (self.rows, self.cols)), shape=(self.g.m, self.size))

    def jacobian(self, x: np.ndarray):
        J = self.jacobian_sparse(x)
        return J.toarray() if self.dense else J

    def energy(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return float(r @ r)


def _gauss_newton_polish(problem: _Problem, x: np.ndarray, iters: int, target: float) -> np.ndarray:
    """Damped Gauss-Newton with Armijo backtracking; energy never increases"""
    f = problem.energy(x)
    for _ in range(iters):
        r = problem.residual(x)
        if np.max(np.abs(r), initial=0.0) <= target:
            break
        J = problem.jacobian_sparse(x)
        if problem.dense:
            step = np.linalg.lstsq(J.toarray(), -r, rcond=None)[0]
        else:
            step = lsmr(J, -r, atol=1e-14, btol=1e-14)[0]
        slope = 2.0 * float((J.T @ r) @ step)
        if slope >= 0:
            break
        alpha = 1.0
        while alpha > MIN_STEP:
            trial = x + alpha * step
            f_trial = problem.energy(trial)
            if f_trial <= f + ARMIJO_C * alpha * slope:
                x, f = trial, f_trial
                break
            alpha *= ARMIJO_SHRINK
        else:
            break
    return x


@dataclass
class RestartResult:
    index: int
    energy: float
    residual: float
    success: bool
    evaluations: int
    coords: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "energy": self.energy, "residual": self.residual,
                "success": self.success, "evaluations": self.evaluations}


@dataclass
class SolveReport:
    """Best restart plus the per-restart record; EmbeddingFound iff best_residual <= success_residual"""
    best: Embedding
    best_energy: float
    best_residual: float
    energies: List[float]
    verdict: Verdict
    restarts: List[RestartResult] = field(default_factory=list)
    config: Optional[SolveConfig] = None

    @property
    def successes(self) -> List[RestartResult]:
        return [r for r in self.restarts if r.success]

    @property
    def min_energy(self) -> float:
        return min(self.energies) if self.energies else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.restarts])

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "verdict": self.verdict.value,
            "best_energy": self.best_energy,
            "best_residual": self.best_residual,
            "min_energy": self.min_energy,
            "energies": list(self.energies),
            "successes": len(self.successes),
            "config": self.config.model_dump() if self.config else None,
            "embedding": {"dim": self.best.dim, "coords": self.best.coords},
        }
        if self.verdict is Verdict.NO_EMBEDDING_FOUND_HEURISTIC:
            data["evidence"] = HEURISTIC_LABEL
        return data


def _initial_point(g: WeightedGraph, d: int, cfg: SolveConfig, rng: np.random.Generator,
                   reference: Optional[np.ndarray]) -> np.ndarray:
    if cfg.init == "perturbed":
        return reference + rng.normal(scale=cfg.perturbation, size=reference.shape)
    half = cfg.init_box or 1.5 * g.max_length()
    return rng.uniform(-half, half, size=(g.n, d))


def _run_restart(problem: _Problem, index: int, cfg: SolveConfig, reference: Optional[np.ndarray]) -> RestartResult:
    g, d = problem.g, problem.d
    rng = RngStream(cfg.seed, index).generator
    x0 = _initial_point(g, d, cfg, rng, reference).reshape(-1)
    evaluations = 0
    if g.m:
        fit = least_squares(problem.residual, x0, jac=problem.jacobian, method="trf",
                            tr_solver="exact" if problem.dense else "lsmr",
                            ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=cfg.max_iters)
        x = fit.x
        evaluations = int(fit.nfev)
        x = _gauss_newton_polish(problem, x, cfg.polish_iters, cfg.success_residual * 1e-3)
    else:
        x = x0
    X = x.reshape(-1, d)
    residual = embedding_residual(g, Embedding(d, X)) if g.m else 0.0
    return RestartResult(index=index, energy=problem.energy(x), residual=residual,
                         success=residual <= cfg.success_residual, evaluations=evaluations,
                         coords=X if cfg.keep_embeddings else None)


def solve(g: WeightedGraph,
          d: int,
          cfg: Optional[SolveConfig] = None,
          reference: Optional[Union[np.ndarray, Embedding]] = None,
          first_restart: int = 0) -> SolveReport:
    """
    Search for an embedding of g in R^d.

    Each restart runs a trust-region least-squares descent on the squared
    residuals and a Gauss-Newton polish. Restarts are independent, seeded by
    (cfg.seed, restart index), and merged in index order.

    Args:
        g: Weighted graph
        d: Dimension, d >= 1
        cfg: Solver settings
        reference: Starting embedding for cfg.init == "perturbed"
        first_restart: Index of the first restart; batches with disjoint
            ranges draw independent streams

    Returns:
        SolveReport; NoEmbeddingFoundHeuristic is evidence only
    """
    cfg = cfg or SolveConfig()
    if d < 1:
        raise ValueError(f"dimension must be at least 1, got {d}")
    ref = None
    if cfg.init == "perturbed":
        if reference is None:
            raise ValueError("perturbed initialisation needs a reference embedding")
        ref = _coords(g, reference)
        if ref.shape[1] != d:
            raise ValueError(f"reference embedding lives in R^{ref.shape[1]}, not R^{d}")
    problem = _Problem(g, d)
    indices = range(first_restart, first_restart + cfg.restarts)

    with tqdm(total=cfg.restarts, desc="restarts", disable=not cfg.progress) as bar:
        def task(i: int) -> RestartResult:
            result = _run_restart(problem, i, cfg, ref)
            bar.update(1)
            return result

        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(task, indices))
        else:
            results = [task(i) for i in indices]

    best = min(results, key=lambda r: (r.residual, r.energy, r.index))
    best_coords = best.coords
    if best_coords is None:
        best_coords = _run_restart(problem, best.index, cfg.model_copy(update={"keep_embeddings": True}), ref).coords
    verdict = Verdict.EMBEDDING_FOUND if best.residual <= cfg.success_residual else Verdict.NO_EMBEDDING_FOUND_HEURISTIC
    report = SolveReport(best=Embedding(d, best_coords), best_energy=best.energy, best_residual=best.residual,
                         energies=[r.energy for r in results], verdict=verdict, restarts=results, config=cfg)
    logger.info(f"solve {g!r} in R^{d}: {verdict.value}, best residual {best.residual:.3e}, "
                f"{len(report.successes)}/{cfg.restarts} restarts succeeded")
    if verdict is Verdict.NO_EMBEDDING_FOUND_HEURISTIC and report.min_energy < cfg.fail_energy_floor:
        logger.warning(f"min energy {report.min_energy:.3e} is below the advisory floor {cfg.fail_energy_floor:.1e}")
    return report


@dataclass
class RodPropertyReport:
    length: float
    d: int
    init: str
    attempts: int
    successes: int
    min_distance: float
    max_distance: float
    tolerance: float

    @property
    def max_deviation(self) -> float:
        return max(abs(self.min_distance - self.length), abs(self.max_distance - self.length))

    @property
    def holds(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {"length": self.length, "d": self.d, "init": self.init, "attempts": self.attempts,
                "successes": self.successes, "min_distance": self.min_distance,
                "max_distance": self.max_distance, "max_deviation": self.max_deviation,
                "holds": self.holds}


def rod_property_check(rod: RodCertificate,
                       cfg: Optional[SolveConfig] = None,
                       d: Optional[int] = None,
                       min_successes: int = 20,
                       tolerance: float = 1e-6,
                       random_init_limit: int = 40,
                       max_attempts: int = MAX_ROD_ATTEMPTS) -> RodPropertyReport:
    """
    Solve the rod's graph repeatedly and compare the terminal distance of
    every successful embedding with the rod length.

    Batches of ``cfg.restarts`` restarts run until ``min_successes``
    embeddings are collected or ``max_attempts`` restarts have been spent.
    Rods up to ``random_init_limit`` vertices start from random points; larger
    rods start from their canonical embedding plus noise.
    """
    from .witness import canonical_rod_embedding

    cfg = cfg or SolveConfig()
    d = d or rod.d or DEFAULT_ROD_DIM
    reference = None
    if rod.graph.n > random_init_limit:
        reference = canonical_rod_embedding(rod, d)
        cfg = cfg.model_copy(update={"init": "perturbed"})
    cfg = cfg.model_copy(update={"keep_embeddings": True})

    wins: List[RestartResult] = []
    attempts = 0
    while len(wins) < min_successes and attempts < max_attempts:
        batch = cfg.model_copy(update={"restarts": min(cfg.restarts, max_attempts - attempts)})
        wins.extend(solve(rod.graph, d, batch, reference, first_restart=attempts).successes)
        attempts += batch.restarts
        logger.debug(f"rod property check {rod!r}: {len(wins)} successes after {attempts} restarts")
    if len(wins) < min_successes:
        raise InsufficientSuccesses(f"{len(wins)} of {attempts} restarts succeeded, {min_successes} required")
    distances = np.array([np.linalg.norm(r.coords[rod.u] - r.coords[rod.v]) for r in wins])
    out = RodPropertyReport(length=rod.length_value, d=d, init=cfg.init, attempts=attempts,
                            successes=len(wins), min_distance=float(distances.min()),
                            max_distance=float(distances.max()), tolerance=tolerance)
    if out.holds:
        logger.info(f"rod property holds for {rod!r}: {out.successes} embeddings, max deviation {out.max_deviation:.2e}")
    else:
        logger.error(f"rod property violated for {rod!r}: terminal distances in "
                     f"[{out.min_distance}, {out.max_distance}]")
    return out
