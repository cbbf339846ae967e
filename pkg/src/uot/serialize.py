"""JSON file formats: measures, cone points, maps, potentials, reports.

Every document is plain JSON. Infinities travel as the strings "inf" /
"-inf" (JSON has no infinity literal); dumps sort keys and use a fixed
indentation so equal data produces equal bytes. `validate_schema` checks a
file against the format its shape announces and reports violations by
JSON pointer.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .cone import ConePoint
from .entropy import DiscreteMeasure
from .errors import InvalidInputError, SchemaError
from .manifold import Space

__all__ = [
    "to_jsonable",
    "from_jsonable",
    "dumps_json",
    "dump_json",
    "load_json",
    "classify_document",
    "validate_document",
    "validate_schema",
    "load_measure",
    "load_potential",
    "load_map",
    "load_cone_point",
]


# ---------------------------------------------------------------------------
# encoding / decoding
# ---------------------------------------------------------------------------


def to_jsonable(obj):
    """Recursively convert to plain JSON types; floats may be infinite."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            raise InvalidInputError("NaN has no JSON representation")
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if obj is None or isinstance(obj, str):
        return obj
    raise InvalidInputError(f"cannot serialize {type(obj).__name__} to JSON")


def from_jsonable(obj):
    """Inverse of :func:`to_jsonable`: restore "inf" strings to floats."""
    if obj == "inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    if isinstance(obj, list):
        return [from_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {k: from_jsonable(v) for k, v in obj.items()}
    return obj


def dumps_json(obj) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def dump_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj))


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e}", [f"/: cannot read file: {e}"])
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not JSON: {e}", [f"/: not valid JSON: {e}"])
    return from_jsonable(raw)


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_SPACE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["circle", "sphere", "euclidean", "hyperbolic"]},
        "dim": {"type": "integer", "minimum": 1},
        "radius": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

_MEASURE_SCHEMA = {
    "type": "object",
    "required": ["space", "points", "masses"],
    "properties": {
        "space": _SPACE_SCHEMA,
        "points": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        },
        "masses": {"type": "array", "items": {"type": "number"}},
    },
    "additionalProperties": False,
}

_CONE_POINT_SCHEMA = {
    "type": "object",
    "required": ["base", "r"],
    "properties": {
        "base": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "r": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

_MAP_SCHEMA = {
    "type": "object",
    "required": ["phi", "lam"],
    "properties": {
        "phi": {"type": "array", "items": {"type": "number"}, "minItems": 3},
        "lam": {"type": "array", "items": {"type": "number"}, "minItems": 3},
    },
    "additionalProperties": False,
}

_POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["z"],
    "properties": {
        "z": {"type": "array", "items": {"type": "number"}, "minItems": 3},
    },
    "additionalProperties": False,
}

_REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema", "config"],
    "properties": {
        "schema": {"const": "uot-report/1"},
        "config": {
            "type": "object",
            "required": ["command"],
            "properties": {"command": {"type": "string"}},
        },
    },
}

_SCHEMAS = {
    "space": _SPACE_SCHEMA,
    "measure": _MEASURE_SCHEMA,
    "cone_point": _CONE_POINT_SCHEMA,
    "map": _MAP_SCHEMA,
    "potential": _POTENTIAL_SCHEMA,
    "report": _REPORT_SCHEMA,
}


def classify_document(doc) -> str | None:
    """Guess which format a parsed document is in from its key set."""
    if not isinstance(doc, dict):
        return None
    keys = set(doc)
    if "schema" in keys:
        return "report"
    if {"space", "points", "masses"} <= keys:
        return "measure"
    if {"phi", "lam"} <= keys:
        return "map"
    if {"base", "r"} <= keys:
        return "cone_point"
    if "z" in keys:
        return "potential"
    if "kind" in keys:
        return "space"
    return None


def _pointer(path) -> str:
    parts = [str(p) for p in path]
    return "/" + "/".join(parts) if parts else "/"


def _expected_coords(space: dict) -> int:
    kind = space.get("kind")
    dim = int(space.get("dim", 1))
    if kind == "circle":
        return 1
    if kind == "euclidean":
        return dim
    return dim + 1  # sphere and hyperboloid points carry ambient coordinates


def _check_measure(doc: dict, out: list) -> None:
    space = doc["space"]
    points = doc["points"]
    masses = doc["masses"]
    if len(points) != len(masses):
        out.append(
            f"/masses: {len(masses)} masses for {len(points)} points")
    for k, m in enumerate(masses):
        if not math.isfinite(m):
            out.append(f"/masses/{k}: mass must be finite")
        elif m < 0:
            out.append(f"/masses/{k}: negative mass {m}")
    d = _expected_coords(space)
    kind = space.get("kind")
    radius = float(space.get("radius", 1.0))
    for k, p in enumerate(points):
        if len(p) != d:
            out.append(f"/points/{k}: expected {d} coordinates, got {len(p)}")
            continue
        if not all(math.isfinite(x) for x in p):
            out.append(f"/points/{k}: coordinates must be finite")
            continue
        if kind == "sphere":
            norm = math.sqrt(sum(x * x for x in p))
            if abs(norm - radius) > 1e-9:
                out.append(
                    f"/points/{k}: norm {norm!r} is off the sphere radius "
                    f"{radius!r} by more than 1e-9")
        elif kind == "hyperbolic":
            q = -p[0] * p[0] + sum(x * x for x in p[1:])
            if p[0] <= 0 or abs(q + 1.0) > 1e-9:
                out.append(
                    f"/points/{k}: not on the unit hyperboloid "
                    f"(<p,p> = {q!r}, first coordinate {p[0]!r})")


def _check_map(doc: dict, out: list) -> None:
    phi, lam = doc["phi"], doc["lam"]
    if len(phi) != len(lam):
        out.append(f"/lam: {len(lam)} factors for {len(phi)} angles")
    for k, x in enumerate(phi):
        if not math.isfinite(x):
            out.append(f"/phi/{k}: angle must be finite")
    for k, x in enumerate(lam):
        if not math.isfinite(x):
            out.append(f"/lam/{k}: factor must be finite")
        elif x <= 0:
            out.append(f"/lam/{k}: factor must be strictly positive, got {x}")


def _check_potential(doc: dict, out: list) -> None:
    for k, x in enumerate(doc["z"]):
        if not math.isfinite(x):
            out.append(f"/z/{k}: potential value must be finite")


def _check_cone_point(doc: dict, out: list) -> None:
    if not math.isfinite(doc["r"]):
        out.append("/r: radius must be finite")
    for k, x in enumerate(doc["base"]):
        if not math.isfinite(x):
            out.append(f"/base/{k}: coordinate must be finite")


_SEMANTIC_CHECKS = {
    "measure": _check_measure,
    "map": _check_map,
    "potential": _check_potential,
    "cone_point": _check_cone_point,
}


def validate_document(doc, kind: str | None = None) -> list:
    """Diagnostics (JSON pointer + message) for one parsed document.

    With no `kind` the document is checked against the format
    :func:`classify_document` announces; an empty list means valid.
    Structural violations suppress the semantic pass, whose checks assume
    well-shaped data.
    """
    if kind is None:
        kind = classify_document(doc)
    if kind is None:
        return ["/: unrecognized document (expected a space, measure, cone "
                "point, map, potential, or report)"]
    if kind not in _SCHEMAS:
        raise InvalidInputError(f"unknown document kind {kind!r}")
    validator = Draft202012Validator(_SCHEMAS[kind])
    diags = [
        f"{_pointer(e.absolute_path)}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    ]
    if diags:
        return diags
    check = _SEMANTIC_CHECKS.get(kind)
    if check is not None:
        check(doc, diags)
    return diags


def validate_schema(path) -> list:
    """Diagnostics for the JSON document at `path`; empty iff valid."""
    try:
        doc = load_json(path)
    except SchemaError as e:
        return e.diagnostics
    return validate_document(doc)


# ---------------------------------------------------------------------------
# typed loaders
# ---------------------------------------------------------------------------


def _load_checked(path, kind: str) -> dict:
    doc = load_json(path)
    diags = validate_document(doc, kind)
    if diags:
        raise SchemaError(f"{path} is not a valid {kind} document", diags)
    return doc


def load_measure(path) -> DiscreteMeasure:
    return DiscreteMeasure.from_json(_load_checked(path, "measure"))


def load_potential(path) -> np.ndarray:
    return np.asarray(_load_checked(path, "potential")["z"], dtype=float)


def load_map(path):
    """Returns the (phi, lam) arrays of a map document."""
    doc = _load_checked(path, "map")
    return (np.asarray(doc["phi"], dtype=float),
            np.asarray(doc["lam"], dtype=float))


def load_cone_point(path, space: Space) -> ConePoint:
    doc = _load_checked(path, "cone_point")
    return ConePoint(space, np.asarray(doc["base"], dtype=float), float(doc["r"]))
