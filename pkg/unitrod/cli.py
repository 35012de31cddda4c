"""
Command Line Interface for unitrod

    python -m unitrod.cli --seed 7 reduce --dim 3 -i k3.col -o h.json

Exit codes: 0 success, 1 negative verdict, 2 usage or input error.
"""

import functools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import click
import jsonschema
import numpy as np
import orjson
import pydantic

from . import __version__
from .config import LOG_LEVEL, RngStream, SolveConfig, ToleranceConfig, setup_logging
from .errors import UnitRodError
from .gadgets import get_rod_cache, moser_spindle, plan_rod
from .graph_core import classify_embedding
from .oracle import brute_force_3color, end_to_end_check
from .reduction import ExpandedInstance, ReductionInstance, build_reduction, expand_to_unit
from .serialization import (RunManifest, coloring_from_dict, coloring_to_dict, document_from_dict,
                            document_graph, dumps, embedding_from_dict, embedding_to_dict,
                            expanded_to_dict, instance_to_dict, read_graph, read_json, rod_to_dict,
                            write_json)
from .solver import Verdict, solve
from .witness import extract_coloring, witness_embedding

logger = logging.getLogger(__name__)

EXIT_NEGATIVE = 1
EXIT_ERROR = 2


@dataclass
class RunContext:
    seed: int
    threads: int


def _draw_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _fail(exc: Exception):
    logger.error(f"{type(exc).__name__}: {exc}")
    click.echo(orjson.dumps({"error": type(exc).__name__, "message": str(exc)}).decode(), err=True)
    raise SystemExit(EXIT_ERROR)


def guarded(func):
    """Map library and input errors to exit code 2 with a JSON error on stderr"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (UnitRodError, pydantic.ValidationError, jsonschema.ValidationError, OSError, ValueError) as e:
            _fail(e)
    return wrapper


def _seed(ctx: click.Context, override: Optional[int]) -> int:
    return override if override is not None else ctx.obj.seed


def _emit(ctx: click.Context, payload: Any, output: Optional[str], inputs: List[Optional[str]],
          seed: int, dimension: Optional[int] = None):
    """Write the payload (file or stdout) and its run manifest"""
    manifest = RunManifest.for_inputs(
        ctx.info_name, [p for p in inputs if p],
        arguments={k: v for k, v in ctx.params.items()},
        seed=seed, dimension=dimension, tolerances=ToleranceConfig().model_dump(),
    )
    if output:
        write_json(output, payload)
        manifest.write_beside(output)
        logger.info(f"{ctx.info_name}: wrote {output}")
    else:
        click.echo(dumps(payload).decode())
        click.echo(dumps(manifest.model_dump()).decode(), err=True)


def _load_instance(path: str):
    doc = document_from_dict(read_json(path))
    if not isinstance(doc, (ReductionInstance, ExpandedInstance)):
        raise UnitRodError(f"{path} does not hold a reduction instance")
    return doc


@click.group()
@click.option("--seed", type=int, default=None, help="Master seed; drawn and recorded when absent")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads for solver restarts")
@click.option("--log-level", default=LOG_LEVEL, show_default=True)
@click.version_option(__version__, prog_name="unitrod")
@click.pass_context
def cli(ctx: click.Context, seed: Optional[int], threads: int, log_level: str):
    """Unit-distance rods and the 3-coloring embedding reduction"""
    setup_logging(log_level)
    ctx.obj = RunContext(seed=seed if seed is not None else _draw_seed(), threads=threads)


@cli.command()
@click.option("--dim", "d", type=int, required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def spindle(ctx, d: int, output: Optional[str]):
    """d-dimensional Moser spindle rod (length D)"""
    _emit(ctx, rod_to_dict(moser_spindle(d)), output, [], ctx.obj.seed, d)


@cli.command()
@click.option("--dim", "d", type=int, required=True)
@click.option("--min", "a", type=float, required=True)
@click.option("--max", "b", type=float, required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def rod(ctx, d: int, a: float, b: float, output: Optional[str]):
    """Unit-distance rod with length strictly inside (min, max)"""
    plan = plan_rod(a, b, d)
    certificate = plan.certificate(get_rod_cache())
    payload = rod_to_dict(certificate)
    payload["plan"] = plan.to_dict()
    _emit(ctx, payload, output, [], ctx.obj.seed, d)


@cli.command()
@click.option("--dim", "d", type=int, required=True)
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--unit-distance", is_flag=True, help="Substitute rods for every non-unit edge")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def reduce(ctx, d: int, source: str, unit_distance: bool, output: Optional[str]):
    """Compile a 3-coloring instance into the weighted graph H"""
    inst = build_reduction(read_graph(source), d)
    payload = expanded_to_dict(expand_to_unit(inst)) if unit_distance else instance_to_dict(inst)
    _emit(ctx, payload, output, [source], ctx.obj.seed, d)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dim", "d", type=int, required=True)
@click.option("--restarts", type=int, default=50, show_default=True)
@click.option("--max-iters", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--table", is_flag=True, help="Print the per-restart table to stderr")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def embed(ctx, source: str, d: int, restarts: int, max_iters: int, seed: Optional[int], table: bool,
          output: Optional[str]):
    """Numerical embedding search; exit 1 when no embedding is found"""
    seed = _seed(ctx, seed)
    graph = document_graph(document_from_dict(read_json(source)))
    cfg = SolveConfig(restarts=restarts, max_iters=max_iters, seed=seed, threads=ctx.obj.threads)
    report = solve(graph, d, cfg)
    if table:
        click.echo(report.to_frame().to_string(), err=True)
    _emit(ctx, report.to_dict(), output, [source], seed, d)
    if report.verdict is not Verdict.EMBEDDING_FOUND:
        ctx.exit(EXIT_NEGATIVE)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-e", "--embedding", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--non-critical", is_flag=True, help="Require non-criticality, not only the edge lengths")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def verify(ctx, source: str, embedding: str, non_critical: bool, output: Optional[str]):
    """Check an embedding; exit 1 on failure"""
    graph = document_graph(document_from_dict(read_json(source)))
    emb = embedding_from_dict(read_json(embedding))
    report = classify_embedding(graph, emb, ToleranceConfig(), RngStream(ctx.obj.seed).generator)
    ok = report.is_non_critical if non_critical else report.is_embedding
    payload: Dict[str, Any] = {"ok": ok, "checked": "non_critical" if non_critical else "embedding",
                               **report.to_dict()}
    _emit(ctx, payload, output, [source, embedding], ctx.obj.seed, emb.dim)
    if not ok:
        ctx.exit(EXIT_NEGATIVE)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--coloring", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dim", "d", type=int, required=True)
@click.option("--seed", type=int, default=None)
@click.option("--unit-distance", is_flag=True, help="Embed the expanded unit-distance graph")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def witness(ctx, source: str, coloring: str, d: int, seed: Optional[int], unit_distance: bool,
            output: Optional[str]):
    """Non-critical embedding of H built from a proper 3-coloring"""
    seed = _seed(ctx, seed)
    inst = build_reduction(read_graph(source), d)
    target = expand_to_unit(inst) if unit_distance else inst
    emb = witness_embedding(target, coloring_from_dict(read_json(coloring)), RngStream(seed), ToleranceConfig())
    _emit(ctx, embedding_to_dict(emb), output, [source, coloring], seed, d)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-e", "--embedding", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def extract(ctx, source: str, embedding: str, output: Optional[str]):
    """Read the 3-coloring encoded by an embedding of H"""
    inst = _load_instance(source)
    emb = embedding_from_dict(read_json(embedding))
    coloring = extract_coloring(inst, emb, ToleranceConfig())
    _emit(ctx, coloring_to_dict(coloring), output, [source, embedding], ctx.obj.seed, emb.dim)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def oracle(ctx, source: str, output: Optional[str]):
    """Exact 3-colorability by backtracking"""
    result = brute_force_3color(read_graph(source))
    _emit(ctx, result.to_dict(), output, [source], ctx.obj.seed)


@cli.command()
@click.option("-i", "--input", "source", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dim", "d", type=int, required=True)
@click.option("--restarts", type=int, default=50, show_default=True)
@click.option("--progress", is_flag=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
@click.pass_context
@guarded
def check(ctx, source: str, d: int, restarts: int, progress: bool, output: Optional[str]):
    """Oracle against reduction pipeline; exit 1 on any inconsistency"""
    cfg = SolveConfig(restarts=restarts, seed=ctx.obj.seed, threads=ctx.obj.threads, progress=progress)
    report = end_to_end_check(read_graph(source), d, cfg, ToleranceConfig(), progress=progress)
    _emit(ctx, report.to_dict(), output, [source], ctx.obj.seed, d)
    if not report.consistent:
        ctx.exit(EXIT_NEGATIVE)


def main():
    cli(prog_name="unitrod")


if __name__ == "__main__":
    main()
