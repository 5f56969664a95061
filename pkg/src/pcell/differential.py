"""Per-case checks of each pipeline against the grid oracle.

Each ``check_*`` function returns a ``CaseResult``; ``run_oracle`` draws
seeded random inputs for one pipeline and collects the results.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .admissible import decompose_admissible, is_admissible
from .cells import Decomposition
from .clusters import ClusteredCellFam, ClassicalCellFam, MultiCellFam, validate_cell_array, validate_clustered
from .family_generators import random_array, random_cluster, random_decomposition_family
from .generators import random_decomposition, random_tiled_decomposition, rng_for
from .leafform import set_equal
from .oracle import DEFAULT_GRID_CAP, GridSpec, WindowTooLargeError, comparison_window, grid_partition_check, grid_set_equal
from .padic import format_padic
from .regular import (
    check_regular_cluster,
    check_regularity,
    class_disjointness,
    clustered_decompose,
    normalize_ac,
    regularize,
    repartition_acprec,
    repartition_interval,
    repartition_order,
)

AGAINST = ("admissibilize", "decompose", "regularize", "normalize", "repartition", "set-equal")


@dataclass
class CaseResult:
    ok: bool
    detail: str = ""
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WindowOverride:
    vmin: Optional[int] = None
    vmax: Optional[int] = None
    digits: Optional[int] = None
    cap: int = DEFAULT_GRID_CAP

    def window(self, source, derived: Sequence, p: int) -> GridSpec:
        base = comparison_window(source, derived, p, self.cap)
        if self.vmin is None and self.vmax is None and self.digits is None:
            return base
        g = GridSpec(
            p,
            base.vmin if self.vmin is None else self.vmin,
            base.vmax if self.vmax is None else self.vmax,
            base.digits if self.digits is None else self.digits,
            True,
            None if self.digits is not None else base.resolve,
            self.cap,
        )
        g.check_cap()
        return g


_DEFAULT = WindowOverride()


def _fail(detail: str, verdict=None) -> CaseResult:
    data = {}
    if verdict is not None and verdict.counterexample is not None:
        data["counterexample"] = format_padic(verdict.counterexample)
    return CaseResult(False, detail, data)


def check_admissibilize(d: Decomposition, win: WindowOverride = _DEFAULT) -> CaseResult:
    out, trace = decompose_admissible(d, with_trace=True)
    if not is_admissible(out):
        return _fail("output is not admissible")
    if not set_equal(d, out, d.p):
        return _fail("output differs symbolically from the input")
    v = grid_set_equal(d, out, win.window(d, [out], d.p))
    if not v.ok:
        return _fail(f"grid disagreement: {v.reason}", v)
    w = trace.w_sizes
    if any(b >= a for a, b in zip(w, w[1:])) or trace.iterations() > (w[0] if w else 0):
        return _fail(f"W sizes {w} do not shrink strictly")
    if not all(y["ok"] for y in trace.y_checks):
        return _fail("a traced Y set differs from its progression")
    return CaseResult(True, data={"cells": len(out.cells), "w_sizes": w, "y_checks": len(trace.y_checks)})


def _fibers(x):
    if isinstance(x, Decomposition):
        return [("s", x)]
    return [(s, x.fiber(s)) for s in x.params]


def check_decompose(x, win: WindowOverride = _DEFAULT) -> CaseResult:
    res = clustered_decompose(x)
    shapes = {(it.cond.n, it.cond.m) for it in res.items if not it.cond.is_zero}
    if len(shapes) > 1:
        return _fail(f"several (n, m) in the output: {sorted(shapes)}")
    for it in res.items:
        if isinstance(it, ClusteredCellFam):
            if not validate_clustered(it).ok:
                return _fail("an output clustered cell is invalid")
            if not check_regular_cluster(it).ok:
                return _fail("an output clustered cell is not regular")
        elif not isinstance(it, ClassicalCellFam):
            return _fail(f"unexpected output kind {type(it).__name__}")
    if res.merge is not None and not res.merge.monotone():
        return _fail(f"merge measures {res.merge.measures} are not monotone")
    is_single = isinstance(x, Decomposition)
    for s, whole in _fibers(x):
        parts = res.fiber_parts("s" if is_single else s)
        v = grid_partition_check(parts, whole, win.window(whole, parts, whole.p))
        if not v.ok:
            return _fail(f"fiber {s}: {v.reason}", v)
    return CaseResult(True, data={"items": len(res.items), "n": res.n, "m": res.m})


def check_regularize(arr: MultiCellFam, win: WindowOverride = _DEFAULT) -> CaseResult:
    regs = regularize(arr)
    for r in regs:
        rep = check_regularity(r)
        if not rep.ok:
            return _fail(f"output fails {sorted(k for k, v in rep.violations.items() if v)}")
        if class_disjointness(r):
            return _fail("classes of one condition give overlapping cells")
    for s in arr.params:
        whole = arr.fiber(s)
        parts = [r.fiber(s) for r in regs if s in r.params]
        v = grid_partition_check(parts, whole, win.window(whole, parts, arr.p))
        if not v.ok:
            return _fail(f"fiber {s}: {v.reason}", v)
    return CaseResult(True, data={"arrays": len(regs)})


def check_normalize(fam: ClusteredCellFam, win: WindowOverride = _DEFAULT) -> CaseResult:
    out = normalize_ac(fam)
    if not validate_clustered(out).ok:
        return _fail("normalized cell is invalid")
    for s in fam.params:
        a, b = fam.classes(s), out.classes(s)
        if len(a) != len(b):
            return _fail(f"fiber {s}: class count changed")
        if sorted(x.radius for x in a) != sorted(x.radius for x in b):
            return _fail(f"fiber {s}: class radii changed")
        if sorted(x.center.ord for x in a) != sorted(x.center.ord for x in b):
            return _fail(f"fiber {s}: center valuations changed")
        v = grid_set_equal(fam.fiber(s), out.fiber(s), win.window(fam.fiber(s), [out.fiber(s)], fam.p))
        if not v.ok:
            return _fail(f"fiber {s}: {v.reason}", v)
    return CaseResult(True, data={"lambda": format_padic(out.cond.lam)})


def apply_repartition(arr: MultiCellFam, op: str, i: int, arg):
    if op == "interval":
        return repartition_interval(arr, i, arg)
    if op == "order":
        return repartition_order(arr, i, arg)
    if op == "acprec":
        return repartition_acprec(arr, i, arg)
    raise ValueError(f"unknown repartition {op!r}")


def check_repartition(arr: MultiCellFam, op: str, i: int, arg, win: WindowOverride = _DEFAULT) -> CaseResult:
    out = apply_repartition(arr, op, i, arg)
    for s in arr.params:
        a, b = arr.fiber(s), out.fiber(s)
        if not set_equal(a, b, arr.p):
            return _fail(f"fiber {s}: sets differ symbolically")
        v = grid_set_equal(a, b, win.window(a, [b], arr.p))
        if not v.ok:
            return _fail(f"fiber {s}: {v.reason}", v)
    if op == "interval":
        rep = validate_cell_array(out)
        if not rep.ok:
            return _fail(f"result is not a cell array: {rep.violations[0].condition}")
    return CaseResult(True, data={"coordinates": out.r})


def check_set_equal(a: Decomposition, b: Decomposition, win: WindowOverride = _DEFAULT) -> CaseResult:
    sym = set_equal(a, b, a.p)
    g = win.window(a, [b], a.p)
    v1 = grid_set_equal(a, b, g)
    v2 = grid_set_equal(a, b, g.enlarged(2))
    if not (sym == v1.ok == v2.ok):
        return _fail(f"symbolic {sym}, grid {v1.ok}, enlarged grid {v2.ok}", v1 if not v1.ok else v2)
    return CaseResult(True, data={"equal": sym})


# ---------------------------------------------------------------------------
# random cases


def random_pair(rng: random.Random, p: int):
    """Two decompositions, equal about half the time."""
    a = random_decomposition(rng, p)
    if rng.random() < 0.5:
        b = decompose_admissible(a)
        if rng.random() < 0.3 and b.cells:
            b = Decomposition(b.cells[:-1], p)
    else:
        b = random_decomposition(rng, p)
    return a, b


def random_case(against: str, seed: int, p: int):
    rng = rng_for(seed, f"oracle-{against}-{p}")
    if against == "admissibilize":
        d = random_tiled_decomposition(rng, p) if rng.random() < 0.4 else random_decomposition(rng, p)
        return (d,)
    if against == "decompose":
        r = rng.random()
        if r < 0.4:
            return (random_array(rng, p),)
        if r < 0.7:
            return (random_decomposition_family(rng, p),)
        return (random_decomposition(rng, p),)
    if against == "regularize":
        return (random_array(rng, p),)
    if against == "normalize":
        return (random_cluster(rng, p, small=True, unit_lambda=True),)
    if against == "repartition":
        arr = random_array(rng, p)
        op = rng.choice(("interval", "order", "acprec"))
        i = rng.randrange(arr.r)
        if op == "interval":
            arg = {s: rng.randint(arr.condition(s, i).lower - 1, arr.condition(s, i).upper + 1) for s in arr.params}
        elif op == "order":
            arg = rng.randint(1, 2 if p == 2 else 1)
        else:
            arg = rng.randint(0, 1)
        return (arr, op, i, arg)
    if against == "set-equal":
        # redraw until the enlarged comparison window stays under the cap
        while True:
            a, b = random_pair(rng, p)
            try:
                comparison_window(a, [b], p).enlarged(2).check_cap()
                return a, b
            except WindowTooLargeError:
                continue
    raise ValueError(f"unknown oracle target {against!r}")


CHECKS = {
    "admissibilize": check_admissibilize,
    "decompose": check_decompose,
    "regularize": check_regularize,
    "normalize": check_normalize,
    "repartition": check_repartition,
    "set-equal": check_set_equal,
}


def run_case(against: str, args: tuple, win: WindowOverride = _DEFAULT) -> CaseResult:
    return CHECKS[against](*args, win=win)


def run_oracle(against: str, seeds: Sequence[int], primes: Sequence[int], win: WindowOverride = _DEFAULT) -> list:
    out = []
    for seed in seeds:
        p = primes[seed % len(primes)]
        res = run_case(against, random_case(against, seed, p), win)
        out.append({"seed": seed, "p": p, "ok": res.ok, "detail": res.detail, **res.data})
    return out
