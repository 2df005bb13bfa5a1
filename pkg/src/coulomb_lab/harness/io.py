"""Equilibrium artifacts on disk: a JSON descriptor plus an .npz of arrays."""

import json
import os

import numpy as np

from ..equilibrium import EquilibriumData, GridSpec, ThermalEquilibriumData
from ..errors import MissingArtifact, SchemaError
from ..kernel.measures import CartesianMeasure, RadialMeasure
from ..potential import potential_from_dict

ARTIFACT_VERSION = 1


def _measure_arrays(m):
    if isinstance(m, RadialMeasure):
        return "radial", {"edges": m.edges, "values": m.values}
    return "cartesian", {"origin": m.origin, "h": np.array(m.h), "values": m.values}


def _measure_from(kind, arrs, dim):
    if kind == "radial":
        return RadialMeasure(arrs["edges"], arrs["values"], dim)
    if kind == "cartesian":
        return CartesianMeasure(arrs["origin"], float(arrs["h"]), arrs["values"])
    raise SchemaError(f"unknown measure kind {kind!r}")


def _grid(doc):
    return None if doc is None else GridSpec(doc.get("h"), doc.get("extent"), doc.get("geometry", "auto"))


def save_equilibrium(eq, directory, name="equilibrium"):
    """Write ``name``.json and ``name``.npz; returns the two paths."""
    os.makedirs(directory, exist_ok=True)
    kind, arrs = _measure_arrays(eq.measure)
    if isinstance(eq.zeta_grid, np.ndarray):
        arrs["zeta_grid"] = eq.zeta_grid
    doc = {"artifactVersion": ARTIFACT_VERSION, "type": "equilibrium", "potential": eq.potential.to_dict(),
           "measureKind": kind, **eq.to_dict()}
    jp = os.path.join(directory, name + ".json")
    npz = os.path.join(directory, name + ".npz")
    with open(jp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
    np.savez(npz, **arrs)
    return jp, npz


def save_thermal(t, directory, name="thermal"):
    os.makedirs(directory, exist_ok=True)
    kind, arrs = _measure_arrays(t.measure)
    arrs["history"] = np.array(t.history, dtype=float).reshape(-1, 2)
    doc = {"artifactVersion": ARTIFACT_VERSION, "type": "thermal", "potential": t.potential.to_dict(),
           "measureKind": kind, "theta": t.theta, "cTheta1": t.c, "residual": t.residual,
           "grid": None if t.grid is None else t.grid.to_dict()}
    jp = os.path.join(directory, name + ".json")
    npz = os.path.join(directory, name + ".npz")
    with open(jp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    np.savez(npz, **arrs)
    return jp, npz


def _read(directory, name, expected):
    jp = os.path.join(directory, name + ".json")
    npz = os.path.join(directory, name + ".npz")
    if not (os.path.exists(jp) and os.path.exists(npz)):
        raise MissingArtifact(f"{expected} artifact {name!r} not found in {directory}")
    try:
        with open(jp) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{jp}: not valid JSON ({exc})") from exc
    if doc.get("type") != expected or doc.get("artifactVersion") != ARTIFACT_VERSION:
        raise SchemaError(f"{jp}: not a version-{ARTIFACT_VERSION} {expected} artifact")
    with np.load(npz) as z:
        arrs = {k: z[k] for k in z.files}
    return doc, arrs


def load_equilibrium(directory, name="equilibrium"):
    doc, arrs = _read(directory, name, "equilibrium")
    p = potential_from_dict(doc["potential"])
    m = _measure_from(doc["measureKind"], arrs, p.dim)
    return EquilibriumData(p, m, doc["cInf1"], doc["method"], _grid(doc.get("grid")), doc.get("log"),
                           zeta_grid=arrs.get("zeta_grid"))


def load_thermal(directory, name="thermal"):
    doc, arrs = _read(directory, name, "thermal")
    p = potential_from_dict(doc["potential"])
    m = _measure_from(doc["measureKind"], arrs, p.dim)
    hist = [tuple(r) for r in arrs["history"].tolist()]
    return ThermalEquilibriumData(p, doc["theta"], m, doc["cTheta1"], doc["residual"], hist, _grid(doc.get("grid")))
