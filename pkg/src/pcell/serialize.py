"""JSON mirror of the DSL objects.

p-adic numbers travel as their text literal (``"3*p^-2"``), radii and
bounds as integers, ``"inf"`` or ``null``.
"""

from __future__ import annotations

from typing import Any

from .balls import Ball
from .cells import Cell, CellCondition, Decomposition
from .clusters import (
    CenterSet,
    ClassicalCellFam,
    ClusteredCellFam,
    ConditionFamily,
    DecompositionFam,
    MultiCellFam,
    ParamSet,
)
from .dsl import Document
from .padic import INF, NEG_INF, format_padic, parse_padic


def gamma_json(g):
    if g is INF:
        return "inf"
    if g is NEG_INF:
        return "-inf"
    return g


def gamma_from(v):
    if v == "inf":
        return INF
    if v == "-inf":
        return NEG_INF
    return int(v)


def cell_json(c: Cell) -> dict:
    cond = c.condition
    return {
        "kind": "cell",
        "lower": cond.lower,
        "upper": cond.upper,
        "lambda": format_padic(cond.lam),
        "n": cond.n,
        "m": cond.m,
        "center": format_padic(c.center),
    }


def ball_json(b: Ball) -> dict:
    return {"kind": "ball", "center": format_padic(b.center), "radius": gamma_json(b.radius)}


def cond_json(cf: ConditionFamily) -> dict:
    return {
        "lambda": format_padic(cf.lam),
        "n": cf.n,
        "m": cf.m,
        "bounds": {s: [lo, hi] for s, (lo, hi) in cf.bounds},
    }


def to_json(obj) -> Any:
    if isinstance(obj, Cell):
        return cell_json(obj)
    if isinstance(obj, Ball):
        return ball_json(obj)
    if isinstance(obj, Decomposition):
        return {"kind": "decomposition", "cells": [cell_json(c) for c in obj.cells]}
    if isinstance(obj, ClusteredCellFam):
        return {
            "kind": "cluster",
            "params": list(obj.params.labels),
            "condition": cond_json(obj.cond),
            "classes": {s: [ball_json(b) for b in bs] for s, bs in obj.centers.fibers},
        }
    if isinstance(obj, ClassicalCellFam):
        return {
            "kind": "classical",
            "params": list(obj.params.labels),
            "condition": cond_json(obj.cond),
            "centers": {s: format_padic(c) for s, c in obj.centers},
        }
    if isinstance(obj, MultiCellFam):
        return {
            "kind": "array",
            "params": list(obj.params.labels),
            "conditions": [cond_json(c) for c in obj.conds],
            "classes": {s: [[ball_json(b) for b in bs] for bs in per] for s, per in obj.classes},
            "tuples": {s: [list(t) for t in tups] for s, tups in obj.tuples},
        }
    if isinstance(obj, DecompositionFam):
        return {
            "kind": "family",
            "params": list(obj.params.labels),
            "fibers": {s: to_json(d) for s, d in obj.fibers},
        }
    raise TypeError(f"no JSON form for {type(obj).__name__}")


def document_json(doc: Document) -> dict:
    return {
        "p": doc.p,
        "params": None if doc.params is None else list(doc.params.labels),
        "objects": {name: to_json(obj) for name, obj in doc.objects},
    }


# ---------------------------------------------------------------------------
# decoding


def _cond_from(p: int, d: dict) -> ConditionFamily:
    lam = parse_padic(p, d["lambda"])
    return ConditionFamily.build(lam, d["n"], d["m"], {s: tuple(b) for s, b in d["bounds"].items()})


def _ball_from(p: int, d: dict) -> Ball:
    return Ball(parse_padic(p, d["center"]), gamma_from(d["radius"]))


def from_json(p: int, d: dict):
    kind = d["kind"]
    if kind == "cell":
        cond = CellCondition(d["lower"], d["upper"], parse_padic(p, d["lambda"]), d["n"], d["m"])
        return Cell(cond, parse_padic(p, d["center"]))
    if kind == "ball":
        return _ball_from(p, d)
    if kind == "decomposition":
        return Decomposition(tuple(from_json(p, c) for c in d["cells"]), p)
    params = ParamSet(tuple(d["params"]))
    if kind == "cluster":
        centers = CenterSet.build({s: [_ball_from(p, b) for b in d["classes"][s]] for s in params})
        return ClusteredCellFam(params, _cond_from(p, d["condition"]), centers)
    if kind == "classical":
        return ClassicalCellFam(params, _cond_from(p, d["condition"]), tuple((s, parse_padic(p, d["centers"][s])) for s in params))
    if kind == "array":
        conds = [_cond_from(p, c) for c in d["conditions"]]
        classes = {s: [[_ball_from(p, b) for b in bs] for bs in d["classes"][s]] for s in params}
        tuples = {s: [tuple(t) for t in d["tuples"][s]] for s in params} if "tuples" in d else None
        return MultiCellFam.build(params, conds, classes, tuples)
    if kind == "family":
        return DecompositionFam.build({s: from_json(p, d["fibers"][s]) for s in params})
    raise ValueError(f"unknown object kind {kind!r}")


def document_from_json(data: dict) -> Document:
    p = int(data["p"])
    params = data.get("params")
    objs = tuple((name, from_json(p, o)) for name, o in data["objects"].items())
    return Document(p, None if params is None else ParamSet(tuple(params)), objs)


# ---------------------------------------------------------------------------
# shipped schemas


def load_schema(name: str) -> dict:
    """``name`` is ``"objects"`` or ``"output"``."""
    import json
    from importlib import resources

    text = resources.files("pcell").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def schema_validator(name: str = "output"):
    """A jsonschema validator with both shipped schemas registered (needs ``jsonschema``)."""
    import jsonschema
    from referencing import Registry, Resource

    schemas = {n: load_schema(n) for n in ("objects", "output")}
    registry = Registry().with_resources((s["$id"], Resource.from_contents(s)) for s in schemas.values())
    cls = jsonschema.validators.validator_for(schemas[name])
    return cls(schemas[name], registry=registry)
