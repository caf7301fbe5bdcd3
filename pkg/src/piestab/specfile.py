"""JSON spec files: schema validation, parameter substitution, canonical form."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .model import PDESpec
from .polyalg import MatPoly1, MatPoly2, from_json, to_json


class SpecFileError(ValueError):
    pass


def _schema(name: str) -> dict:
    return json.loads(resources.files("piestab").joinpath("schemas").joinpath(name).read_text())


SPEC_SCHEMA = _schema("spec.schema.json")
REPORT_SCHEMA = _schema("report.schema.json")


def validate_schema(doc: dict, schema: dict = SPEC_SCHEMA) -> None:
    errs = sorted(Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
    if errs:
        msgs = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errs]
        raise SpecFileError("schema violation: " + "; ".join(msgs))


def _resolve(x, params: dict):
    if isinstance(x, dict):
        name = x["param"]
        if name not in params:
            raise SpecFileError(f"undefined parameter {name!r}")
        return float(x.get("scale", 1.0)) * float(params[name])
    if isinstance(x, list):
        return [_resolve(v, params) for v in x]
    return float(x)


def _poly(doc: dict | None, rows: int, cols: int, params: dict, two_var: bool):
    if doc is None:
        return MatPoly2.zeros(rows, cols) if two_var else MatPoly1.zeros(rows, cols)
    d = copy.deepcopy(doc)
    for e in d.get("entries", []):
        for key in ("coeffs", "grid"):
            if key in e:
                e[key] = _resolve(e[key], params)
    return from_json(d, two_var=two_var)


def parse_spec(doc: dict, overrides: dict | None = None) -> PDESpec:
    """Build a :class:`PDESpec` from a spec-file document."""
    validate_schema(doc)
    params = dict(doc.get("parameters", {}))
    for k, v in (overrides or {}).items():
        if k not in params:
            raise SpecFileError(f"unknown parameter {k!r}")
        params[k] = float(v)
    n = tuple(int(k) for k in doc["n"])
    nx, nS = sum(n), n[1] + 2 * n[2]
    nD = nx + nS
    dyn = doc["dynamics"]
    A0 = _poly(dyn.get("A0"), nx, nD, params, False)
    A1 = _poly(dyn.get("A1"), A0.rows, A0.cols, params, True)
    A2 = _poly(dyn.get("A2"), A0.rows, A0.cols, params, True)
    B = np.array(_resolve(doc["bc"]["B"], params), dtype=float)
    if B.size == 0:
        B = np.zeros((0, 2 * nS))
    BI = _poly(doc["bc"].get("BI"), B.shape[0], nD, params, False)
    for name, P in (("A0", A0), ("A1", A1), ("A2", A2), ("BI", BI)):
        if not np.all(np.isfinite(P.coef)):
            raise SpecFileError(f"{name}: non-finite coefficient")
    return PDESpec(n=n, A0=A0, A1=A1, A2=A2, B=B, BI=BI,
                   interval=(float(doc["domain"][0]), float(doc["domain"][1])),
                   name=doc.get("name", ""), parameters=params)


def load_spec(path: str | Path, overrides: dict | None = None) -> tuple[PDESpec, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"{path}: invalid JSON ({exc})") from exc
    return parse_spec(doc, overrides), doc


def spec_to_dict(spec: PDESpec) -> dict:
    """Canonical document with all parameters substituted."""
    doc = {"domain": [float(spec.interval[0]), float(spec.interval[1])],
           "n": [int(k) for k in spec.n],
           "dynamics": {"A0": to_json(spec.A0), "A1": to_json(spec.A1), "A2": to_json(spec.A2)},
           "bc": {"B": np.asarray(spec.B, dtype=float).tolist(), "BI": to_json(spec.BI)}}
    if spec.name:
        doc["name"] = spec.name
    return doc


def canonical_hash(doc_or_spec) -> str:
    spec = doc_or_spec if isinstance(doc_or_spec, PDESpec) else parse_spec(doc_or_spec)
    blob = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def fixture_document(name: str, **params) -> dict:
    """Spec-file document for a shipped fixture.

    Scalar fixture parameters that enter the dynamics linearly are kept as
    ``{"param": ...}`` references so a file can be bisected directly.
    """
    from .fixtures import fixture_spec

    spec = fixture_spec(name, **params)
    doc = spec_to_dict(spec)
    if name == "mckendrick":
        doc["parameters"] = {"c": spec.parameters["c"]}
        doc["dynamics"]["A0"] = {"rows": 1, "cols": 2, "entries": [
            {"row": 0, "col": 0, "coeffs": [{"param": "c", "scale": 1.0}]},
            {"row": 0, "col": 1, "coeffs": [-1.0]}]}
    elif name == "dirichlet-diffusion":
        doc["dynamics"]["A0"] = {"rows": 1, "cols": 3, "entries": [
            {"row": 0, "col": 0, "coeffs": [{"param": "lam", "scale": 1.0}]},
            {"row": 0, "col": 2, "coeffs": [1.0]}]}
        doc["parameters"] = {"lam": spec.parameters["lam"]}
    return doc


def finite_tree(x) -> bool:
    if isinstance(x, dict):
        return all(finite_tree(v) for v in x.values())
    if isinstance(x, (list, tuple)):
        return all(finite_tree(v) for v in x)
    if isinstance(x, float):
        return math.isfinite(x)
    return True
