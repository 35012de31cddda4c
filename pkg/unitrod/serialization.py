"""
Serialization for unitrod
DIMACS ingestion, JSON documents for graphs, embeddings, colorings, rods and
reduction instances, schema validation and run manifests
"""

import hashlib
import logging
import warnings
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import orjson
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match
from pydantic import BaseModel, Field

from . import __version__
from .errors import (DuplicateEdgeLines, EdgeCountMismatch, MalformedHeader, SchemaViolation,
                     VertexOutOfRange)
from .gadgets import RodCertificate, length_from_dict, rebuild_rod
from .graph_core import Embedding, WeightedGraph, build_graph
from .reduction import ExpandedInstance, ReductionInstance, build_reduction, expand_to_unit

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY
PARAM_TOL = 1e-12

_number_list = {"type": "array", "items": {"type": "number"}}
_length_expr = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["unit", "dpow", "chord", "product"]},
        "d": {"type": "integer", "minimum": 3},
        "k": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 1},
        "factors": {"type": "array", "items": {"$ref": "#/$defs/length"}},
    },
}
_edge = {
    "type": "object",
    "required": ["u", "v", "len"],
    "properties": {
        "u": {"type": "integer", "minimum": 0},
        "v": {"type": "integer", "minimum": 0},
        "len": {"type": "number", "exclusiveMinimum": 0},
        "expr": {"$ref": "#/$defs/length"},
    },
    "additionalProperties": False,
}
_graph = {
    "type": "object",
    "required": ["vertices", "edges"],
    "properties": {
        "kind": {"const": "graph"},
        "dim": {"type": ["integer", "null"], "minimum": 1},
        "vertices": {"type": "integer", "minimum": 0},
        "edges": {"type": "array", "items": {"$ref": "#/$defs/edge"}},
    },
}


def _schema(body: Dict[str, Any]) -> Dict[str, Any]:
    return {"$schema": "https://json-schema.org/draft/2020-12/schema",
            "$defs": {"length": _length_expr, "edge": _edge, "graph": _graph}, **body}


SCHEMAS: Dict[str, Dict[str, Any]] = {
    "graph": _schema({"$ref": "#/$defs/graph"}),
    "embedding": _schema({
        "type": "object",
        "required": ["dim", "coords"],
        "properties": {
            "kind": {"const": "embedding"},
            "dim": {"type": "integer", "minimum": 1},
            "coords": {"type": "array", "items": _number_list},
        },
    }),
    "coloring": _schema({
        "type": "object",
        "patternProperties": {"^[0-9]+$": {"type": "integer", "minimum": 0, "maximum": 2}},
        "additionalProperties": False,
    }),
    "rod": _schema({
        "type": "object",
        "required": ["kind", "recipe", "terminals", "length", "length_value", "graph"],
        "properties": {
            "kind": {"const": "rod"},
            "recipe": {"type": "array", "minItems": 1},
            "terminals": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
            "length": {"$ref": "#/$defs/length"},
            "length_value": {"type": "number", "exclusiveMinimum": 0},
            "graph": {"$ref": "#/$defs/graph"},
            "trace": {"type": "object"},
        },
    }),
    "instance": _schema({
        "type": "object",
        "required": ["kind", "d", "source", "H", "roles", "params"],
        "properties": {
            "kind": {"const": "instance"},
            "d": {"type": "integer", "minimum": 3},
            "source": {"$ref": "#/$defs/graph"},
            "H": {"$ref": "#/$defs/graph"},
            "roles": {"type": "array", "items": {"type": "object", "required": ["kind", "index"]}},
            "params": {"type": "object"},
        },
    }),
    "expanded": _schema({
        "type": "object",
        "required": ["kind", "instance", "graph"],
        "properties": {
            "kind": {"const": "expanded"},
            "instance": {"type": "object"},
            "graph": {"$ref": "#/$defs/graph"},
            "provenance": {"type": "object"},
        },
    }),
    "manifest": _schema({
        "type": "object",
        "required": ["command", "input_digests", "seed", "tolerances", "version", "timestamp"],
        "properties": {
            "command": {"type": "string"},
            "arguments": {"type": "object"},
            "input_digests": {"type": "object", "additionalProperties": {"type": "string"}},
            "seed": {"type": "integer"},
            "dimension": {"type": ["integer", "null"]},
            "tolerances": {"type": "object"},
            "version": {"type": "string"},
            "timestamp": {"type": "string"},
        },
    }),
}

_validators = {kind: Draft202012Validator(schema) for kind, schema in SCHEMAS.items()}


def validate_document(kind: str, data: Any):
    """Raise SchemaViolation if ``data`` does not match the named schema"""
    error = best_match(_validators[kind].iter_errors(data))
    if error is not None:
        path = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise SchemaViolation(f"{kind} document invalid at {path}: {error.message}")


# ---------------------------------------------------------------------------
# DIMACS
# ---------------------------------------------------------------------------

def parse_dimacs(text: str) -> WeightedGraph:
    """
    Parse a DIMACS .col document ("p edge n m" or "p col n m", "e i j", "c ...").

    Ids are 1-based in the file and 0-based in the result. Repeated edges
    (in either orientation) are collapsed with a DuplicateEdgeLines warning;
    an edge total different from the header's m gives EdgeCountMismatch.
    """
    header: Optional[Tuple[int, int]] = None
    seen: Dict[Tuple[int, int], None] = {}
    lines = duplicates = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        tag = parts[0]
        if tag == "p":
            if header is not None:
                raise MalformedHeader(f"line {number}: second problem line")
            if len(parts) != 4 or parts[1] not in ("edge", "col"):
                raise MalformedHeader(f"line {number}: expected 'p edge n m', got '{raw.strip()}'")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise MalformedHeader(f"line {number}: non-integer counts in '{raw.strip()}'")
            if header[0] < 0 or header[1] < 0:
                raise MalformedHeader(f"line {number}: negative counts")
        elif tag == "e":
            if header is None:
                raise MalformedHeader(f"line {number}: edge before the problem line")
            if len(parts) != 3:
                raise MalformedHeader(f"line {number}: expected 'e i j', got '{raw.strip()}'")
            try:
                i, j = int(parts[1]), int(parts[2])
            except ValueError:
                raise MalformedHeader(f"line {number}: non-integer vertex in '{raw.strip()}'")
            n = header[0]
            if not (1 <= i <= n and 1 <= j <= n):
                raise VertexOutOfRange(f"line {number}: edge ({i}, {j}) outside 1..{n}")
            lines += 1
            key = (min(i, j) - 1, max(i, j) - 1)
            if key in seen:
                duplicates += 1
            else:
                seen[key] = None
        else:
            logger.debug(f"line {number}: ignoring '{tag}' line")
    if header is None:
        raise MalformedHeader("missing 'p edge n m' line")
    n, m = header
    if duplicates:
        message = f"collapsed {duplicates} duplicate edge lines"
        logger.warning(message)
        warnings.warn(message, DuplicateEdgeLines, stacklevel=2)
    if m not in (lines, len(seen)):
        message = f"header announces {m} edges, found {len(seen)} distinct in {lines} lines"
        logger.warning(message)
        warnings.warn(message, EdgeCountMismatch, stacklevel=2)
    return build_graph(n, [(u, v, 1.0) for u, v in seen])


def write_dimacs(g: WeightedGraph, comment: Optional[str] = None) -> str:
    out = [f"c {comment}"] if comment else []
    out.append(f"p edge {g.n} {g.m}")
    out += [f"e {u + 1} {v + 1}" for u, v in g.edges.tolist()]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def graph_to_dict(g: WeightedGraph, dim: Optional[int] = None) -> Dict[str, Any]:
    """
    {"dim", "vertices", "edges": [{"u", "v", "len"}]}; an edge with an exact
    length also carries it as "expr"
    """
    edges = []
    for e, ((u, v), w) in enumerate(zip(g.edges.tolist(), g.lengths.tolist())):
        edge = {"u": u, "v": v, "len": w}
        if e in g.exprs:
            edge["expr"] = g.exprs[e].to_dict()
        edges.append(edge)
    return {"kind": "graph", "dim": dim, "vertices": g.n, "edges": edges}


def graph_from_dict(data: Mapping[str, Any]) -> WeightedGraph:
    validate_document("graph", data)
    edges = data["edges"]
    pairs = np.array([[e["u"], e["v"]] for e in edges], dtype=np.int64).reshape(-1, 2)
    lengths = np.array([e["len"] for e in edges], dtype=np.float64)
    exprs = {i: length_from_dict(e["expr"]) for i, e in enumerate(edges) if "expr" in e}
    return WeightedGraph.from_arrays(int(data["vertices"]), pairs, lengths, exprs)


def embedding_to_dict(e: Embedding) -> Dict[str, Any]:
    return {"kind": "embedding", "dim": e.dim, "coords": e.coords.tolist()}


def embedding_from_dict(data: Mapping[str, Any]) -> Embedding:
    validate_document("embedding", data)
    dim = int(data["dim"])
    return Embedding(dim, np.array(data["coords"], dtype=np.float64).reshape(-1, dim))


def coloring_to_dict(c: Mapping[int, int]) -> Dict[str, int]:
    return {str(k): int(v) for k, v in sorted(c.items())}


def coloring_from_dict(data: Mapping[str, Any]) -> Dict[int, int]:
    validate_document("coloring", data)
    return {int(k): int(v) for k, v in data.items()}


def _recipe_to_json(recipe: Tuple) -> List:
    return [_recipe_to_json(x) if isinstance(x, tuple) else x for x in recipe]


def _recipe_from_json(data: List) -> Tuple:
    return tuple(_recipe_from_json(x) if isinstance(x, list) else x for x in data)


def rod_to_dict(rod: RodCertificate) -> Dict[str, Any]:
    return {
        "kind": "rod",
        "recipe": _recipe_to_json(rod.recipe),
        "terminals": [rod.u, rod.v],
        "length": rod.length.to_dict(),
        "length_value": rod.length_value,
        "graph": graph_to_dict(rod.graph, rod.d),
        "trace": rod.trace.summary(),
    }


def rod_from_dict(data: Mapping[str, Any]) -> RodCertificate:
    """Replay the stored recipe and check the result against the stored graph"""
    validate_document("rod", data)
    rod = rebuild_rod(_recipe_from_json(data["recipe"]))
    if not rod.graph.same_as(graph_from_dict(data["graph"])) or [rod.u, rod.v] != list(data["terminals"]):
        raise SchemaViolation("stored rod graph does not match its recipe")
    if rod.length.canonical() != length_from_dict(data["length"]).canonical():
        raise SchemaViolation("stored rod length does not match its recipe")
    return rod


def instance_to_dict(inst: ReductionInstance) -> Dict[str, Any]:
    return {
        "kind": "instance",
        "d": inst.d,
        "source": graph_to_dict(inst.source),
        "H": graph_to_dict(inst.H, inst.d),
        "roles": [role.to_dict() for role in inst.roles],
        "params": inst.params.to_dict(),
    }


def instance_from_dict(data: Mapping[str, Any]) -> ReductionInstance:
    """Recompile from the stored source graph and check H and the parameters"""
    validate_document("instance", data)
    inst = build_reduction(graph_from_dict(data["source"]), int(data["d"]))
    if not inst.H.same_as(graph_from_dict(data["H"])):
        raise SchemaViolation("stored H does not match the compiled reduction")
    stored = data["params"].get("lengths", {})
    for name, value in inst.params.to_dict()["lengths"].items():
        if name in stored and abs(float(stored[name]) - value) > PARAM_TOL:
            raise SchemaViolation(f"stored parameter {name}={stored[name]} differs from {value}")
    return inst


def expanded_to_dict(exp: ExpandedInstance) -> Dict[str, Any]:
    return {
        "kind": "expanded",
        "instance": instance_to_dict(exp.base),
        "graph": graph_to_dict(exp.graph, exp.base.d),
        "provenance": {"origin_vertex": exp.origin_vertex.tolist(), "origin_edge": exp.origin_edge.tolist(),
                       "rod_vertex": exp.rod_vertex.tolist()},
    }


def expanded_from_dict(data: Mapping[str, Any]) -> ExpandedInstance:
    validate_document("expanded", data)
    exp = expand_to_unit(instance_from_dict(data["instance"]))
    if not exp.graph.same_as(graph_from_dict(data["graph"])):
        raise SchemaViolation("stored H' does not match the expansion")
    return exp


Document = Union[WeightedGraph, ReductionInstance, ExpandedInstance, RodCertificate]


def document_from_dict(data: Mapping[str, Any]) -> Document:
    """Decode any graph-carrying document by its ``kind``"""
    kind = data.get("kind", "graph") if isinstance(data, Mapping) else None
    readers = {"graph": graph_from_dict, "instance": instance_from_dict,
               "expanded": expanded_from_dict, "rod": rod_from_dict}
    if kind not in readers:
        raise SchemaViolation(f"unknown document kind '{kind}'")
    return readers[kind](data)


def document_graph(doc: Document) -> WeightedGraph:
    if isinstance(doc, ReductionInstance):
        return doc.H
    if isinstance(doc, (ExpandedInstance, RodCertificate)):
        return doc.graph
    return doc


def dumps(obj: Any) -> bytes:
    return orjson.dumps(obj, option=JSON_OPTIONS)


def write_json(path: Union[str, Path], obj: Any) -> Path:
    path = Path(path)
    path.write_bytes(dumps(obj) + b"\n")
    logger.debug(f"wrote {path}")
    return path


def read_json(path: Union[str, Path]) -> Any:
    try:
        return orjson.loads(Path(path).read_bytes())
    except orjson.JSONDecodeError as e:
        raise SchemaViolation(f"{path} is not valid JSON: {e}") from e


def read_graph(path: Union[str, Path]) -> WeightedGraph:
    """Source graph from a .col (DIMACS) or .json file"""
    path = Path(path)
    if path.suffix.lower() == ".col":
        return parse_dimacs(path.read_text())
    return document_graph(document_from_dict(read_json(path)))


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunManifest(BaseModel):
    """What a command was run on and with, written next to its output"""
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    seed: int
    dimension: Optional[int] = None
    tolerances: Dict[str, Any] = Field(default_factory=dict)
    version: str = __version__
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @classmethod
    def for_inputs(cls, command: str, inputs: List[Union[str, Path]], **kwargs) -> "RunManifest":
        digests = {str(p): file_digest(p) for p in inputs if p is not None}
        return cls(command=command, input_digests=digests, **kwargs)

    def write_beside(self, output: Union[str, Path]) -> Path:
        path = Path(f"{output}.manifest.json")
        return write_json(path, self.model_dump())
