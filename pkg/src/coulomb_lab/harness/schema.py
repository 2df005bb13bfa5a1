"""Versioned JSON schemas for experiment configs, checked with jsonschema."""

import json
import os

import jsonschema

from ..errors import SchemaError

CONFIG_VERSION = 1

_GRID = {
    "type": ["object", "null"],
    "properties": {
        "h": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "extent": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "geometry": {"enum": ["auto", "radial", "cartesian"]},
    },
    "additionalProperties": False,
}

_POTENTIAL = {
    "type": "object",
    "required": ["kind", "dim", "parameters"],
    "properties": {"kind": {"type": "string"}, "dim": {"enum": [2, 3]}, "parameters": {"type": "object"}},
}

_BASE = {
    "schemaVersion": {"const": CONFIG_VERSION},
    "kind": {"type": "string"},
    "name": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "potential": _POTENTIAL,
    "potentialFile": {"type": "string"},
}


def _schema(kind, props, required=()):
    return {
        "type": "object",
        "required": ["schemaVersion", "kind", *required],
        "properties": {**_BASE, "kind": {"const": kind}, **props},
        "additionalProperties": False,
    }


SCHEMAS = {
    "equilibrium": _schema("equilibrium", {
        "method": {"enum": ["auto", "closed_form", "radial", "cartesian"]},
        "grid": _GRID,
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "thermal": {
            "type": "object",
            "required": ["theta"],
            "properties": {"theta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 2}},
                           "tol": {"type": "number", "exclusiveMinimum": 0}, "grid": _GRID},
            "additionalProperties": False,
        },
    }),
    "sample": _schema("sample", {
        "N": {"type": "integer", "minimum": 1},
        "beta": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "chains": {"type": "integer", "minimum": 1},
        "schedule": {"type": "object", "properties": {"burnIn": {"type": "integer", "minimum": 0},
                                                       "thin": {"type": "integer", "minimum": 1}},
                     "additionalProperties": False},
        "init": {"enum": ["thermal", "equilibrium", "box"]},
        "equilibriumArtifact": {"type": "string"},
    }, ["N", "beta", "samples"]),
    "verify": _schema("verify", {
        "groups": {"type": "array", "items": {"enum": ["split", "iso", "mean_value", "kpt", "squeeze"]}},
        "quick": {"type": "boolean"},
    }),
    "acceptance": _schema("acceptance", {
        "criteria": {"type": "object", "patternProperties": {"^([1-9]|10)$": {"type": "object"}},
                     "additionalProperties": False},
    }, ["criteria"]),
    "estimate": _schema("estimate", {
        "samples": {"type": ["string", "array"], "items": {"type": "string"}},
        "beta": {"type": "number", "minimum": 0},
        "equilibriumArtifact": {"type": "string"},
        "estimators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {"name": {"enum": ["rho1", "count_in_ball", "subharmonicity", "confinement",
                                                 "extreme_radius", "vacuum_tail", "poisson", "rho2"]}},
            },
        },
    }, ["samples", "estimators"]),
}


def load_config(path):
    """Read and validate an experiment config. Relative paths inside it resolve
    against the config's directory (stored under ``_base``)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError(f"config {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    validate_config(doc)
    return doc, os.path.dirname(os.path.abspath(path))


def validate_config(doc):
    if not isinstance(doc, dict) or doc.get("kind") not in SCHEMAS:
        kinds = sorted(SCHEMAS)
        raise SchemaError(f"config must be an object whose 'kind' is one of {kinds}")
    try:
        jsonschema.validate(doc, SCHEMAS[doc["kind"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"config error at {where}: {exc.message}") from exc
    return doc
