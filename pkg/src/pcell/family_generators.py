"""Seeded random clustered cells, cell arrays and decomposition families.

Arrays are built per label from a recipe that proposes conditions and
candidate class balls; the allowed tuples are then found by searching for
sections that partition the union of all candidate cells, and the result is
kept only if it validates as a cell array.
"""

from __future__ import annotations

import random
from typing import Optional

from .balls import Ball, subballs
from .cells import Cell, CellCondition, leaf_ball
from .clusters import (
    CenterSet,
    ClassicalCellFam,
    ClusteredCellFam,
    ConditionFamily,
    DecompositionFam,
    MultiCellFam,
    ParamSet,
    SearchLimitError,
    partition_tuples,
    validate_cell_array,
)
from .generators import DEFAULT_BOUNDS, MAX_M, random_decomposition, random_unit, rng_for
from .oracle import WindowTooLargeError, fitted_window
from .padic import INF, PAdic

RECIPES = ("copies", "stacked", "exchange", "ball-exchange")


class GenerationError(RuntimeError):
    pass


def _labels(rng: random.Random, max_labels: int) -> tuple:
    return tuple(f"s{i}" for i in range(1, rng.randint(1, max_labels) + 1))


def _lam(rng: random.Random, p: int, n: int, m: int, exponent: Optional[int] = None) -> PAdic:
    e = rng.randrange(n) if exponent is None else exponent
    return PAdic(p, random_unit(rng, p, m), e)


def _at_valuation(rng: random.Random, p: int, v: int, residue: Optional[int] = None, digits: int = 1) -> PAdic:
    """A number of valuation ``v``, optionally with a prescribed unit residue."""
    u = random_unit(rng, p, digits) if residue is None else residue
    return PAdic(p, u + p**digits * rng.randrange(p), v)


def _spread_centers(rng: random.Random, p: int, v: int, k: int, alpha: int) -> list:
    """``k`` centers of valuation ``v`` pairwise meeting at or below ``alpha``."""
    d = alpha - v + 1
    pool = [u for u in range(1, p**d) if u % p]
    if len(pool) < k:
        return []
    return [_at_valuation(rng, p, v, u, d) for u in rng.sample(pool, k)]


def _condition(rng: random.Random, lam: PAdic, n: int, m: int, alpha: int, width: int) -> CellCondition:
    return CellCondition(alpha, alpha + width, lam, n, m)


def _classes(cond: CellCondition, centers) -> list:
    top = cond.heights().top()
    return [Ball(c, top + cond.m) for c in centers]


# ---------------------------------------------------------------------------
# recipes: each returns {label: (conditions, candidate classes)}


def _recipe_copies(rng, p, labels, bounds):
    n = rng.randint(1, 2)
    m = rng.randint(1, MAX_M.get(p, 1))
    lam = _lam(rng, p, n, m)
    k = rng.randint(1, 3 if p > 2 else 2)
    width = rng.randint(2, 4)
    out = {}
    for s in labels:
        v = rng.randint(-bounds, 0)
        alpha = v + rng.randint(0, 1) + (1 if p == 2 and k > 1 else 0)
        cond = _condition(rng, lam, n, m, alpha, width)
        if cond.heights().is_empty():
            return None
        centers = _spread_centers(rng, p, v, k, alpha)
        if not centers:
            return None
        cls = _classes(cond, centers)
        out[s] = ([cond] * k, [cls] * k)
    return out


def _recipe_stacked(rng, p, labels, bounds):
    n = rng.randint(1, 2)
    m = rng.randint(1, MAX_M.get(p, 1))
    n2 = rng.choice([n, n, 1, 2])
    m2 = rng.choice([m, m, 1, MAX_M.get(p, 1)])
    lam1 = _lam(rng, p, n, m)
    vertical = rng.random() < 0.5
    lam2 = lam1 if vertical else _lam(rng, p, n2, m2)
    if vertical:
        n2, m2 = n, m
    k = rng.randint(1, 2)
    w1, w2 = rng.randint(2, 4), rng.randint(2, 4)
    shift = rng.randint(0, 2)
    out = {}
    for s in labels:
        v = rng.randint(-bounds, 0)
        alpha = v + rng.randint(0, 1) + (1 if p == 2 and k > 1 else 0)
        c1 = _condition(rng, lam1, n, m, alpha, w1)
        a2 = alpha + w1 - 1 + shift if vertical else alpha + rng.randint(0, 2)
        c2 = _condition(rng, lam2, n2, m2, a2, w2)
        if c1.heights().is_empty() or c2.heights().is_empty():
            return None
        centers = _spread_centers(rng, p, v, k, alpha)
        if not centers:
            return None
        out[s] = ([c1] * k + [c2] * k, [_classes(c1, centers)] * k + [_classes(c2, centers)] * k)
    return out


def _recipe_exchange(rng, p, labels, bounds):
    """A large condition whose two classes split inside its interval, plus
    single-height conditions covering the leaves where the two cells differ."""
    m = rng.randint(1, MAX_M.get(p, 1))
    if p == 2 and m == 1:
        m = 2 if MAX_M.get(p, 1) >= 2 else 1
    lam = _lam(rng, p, 1, m, 0)
    a0 = rng.randint(0, 1)
    dd = rng.randint(1, 2)
    d = rng.randint(1, 2)
    out = {}
    for s in labels:
        v = rng.randint(-bounds, 0)
        alpha = v + a0
        delta = alpha + dd
        first = max(alpha + 1, delta - m + 1)
        beta = max(first + d, delta + 1)
        cond = CellCondition(alpha, beta, lam, 1, m)
        s1 = _at_valuation(rng, p, v, digits=2)
        w = rng.choice([u for u in range(1, p**m) if u % p and u != lam.ac(m)])
        s2 = s1 + PAdic(p, w, delta)
        if s2.ord != v:
            return None
        diff = [g for g in cond.heights() if g > delta - m]
        if len(diff) != beta - first:
            return None
        conds = [cond]
        classes = [_classes(cond, [s1, s2])]
        for g in diff:
            small = CellCondition(g - 1, g + 1, lam, 1, m)
            conds.append(small)
            classes.append([Ball(s1, g + m), Ball(s2, g + m)])
        out[s] = (conds, classes)
    if len({len(c[0]) for c in out.values()}) != 1:
        return None
    return out


def _recipe_ball_exchange(rng, p, labels, bounds):
    """Two leaves at one height versus their subleaves one height up."""
    if p > 3:
        return None
    # with m = 1 the finer centers would sit inside the coarse leaves
    m = 2
    lam = _lam(rng, p, 1, m, 0)
    up = 2 if p == 2 else rng.randint(1, 2)
    out = {}
    for s in labels:
        v = rng.randint(-bounds, 0)
        g = v + up
        ca = CellCondition(g - 1, g + 1, lam, 1, m)
        cb = CellCondition(g, g + 2, lam, 1, m)
        s1 = _at_valuation(rng, p, v, digits=2)
        low = v + 1 if (p == 2 or rng.random() < 0.5) and g - 1 > v else v
        s2 = s1 + PAdic(p, random_unit(rng, p, 1), rng.randint(low, g - 1))
        if s2.ord != v:
            return None
        leaves = [leaf_ball(Cell(ca, x), g) for x in (s1, s2)]
        if leaves[0] == leaves[1]:
            return None
        shift = lam.shift(g + 1 - lam.exponent)
        subs = [b for L in leaves for b in subballs(L, 1)]
        cls_b = [Ball(b.center - shift, g + 1 + m) for b in subs]
        if any(b.center.ord != v for b in cls_b):
            return None
        out[s] = ([ca] + [cb] * p, [[Ball(s1, g + m), Ball(s2, g + m)]] + [cls_b] * p)
    return out


_RECIPES = {
    "copies": _recipe_copies,
    "stacked": _recipe_stacked,
    "exchange": _recipe_exchange,
    "ball-exchange": _recipe_ball_exchange,
}


def _finish(p: int, labels: tuple, proposal: dict, search_cap: int) -> Optional[MultiCellFam]:
    tuples = {}
    for s in labels:
        conds, classes = proposal[s]
        target = [Cell(c, b.center) for c, bs in zip(conds, classes) for b in bs]
        try:
            found = partition_tuples(conds, classes, target, p, search_cap)
        except SearchLimitError:
            return None
        if not found:
            return None
        tuples[s] = found
    first = proposal[labels[0]][0]
    cfs = []
    for j, c in enumerate(first):
        bounds = {}
        for s in labels:
            cj = proposal[s][0][j]
            if (cj.lam, cj.n, cj.m) != (c.lam, c.n, c.m):
                return None
            bounds[s] = (cj.lower, cj.upper)
        cfs.append(ConditionFamily.build(c.lam, c.n, c.m, bounds))
    fam = MultiCellFam.build(ParamSet(labels), cfs, {s: proposal[s][1] for s in labels}, tuples).pruned()
    if not validate_cell_array(fam).ok or not _fits(fam):
        return None
    return fam


def _fits(fam) -> bool:
    # keep every fiber checkable on a grid under the default cap
    try:
        for s in fam.params:
            fitted_window([fam.fiber(s)], fam.p)
    except WindowTooLargeError:
        return False
    return True


def random_array(
    seed_or_rng,
    p: int = 2,
    bounds: Optional[int] = None,
    recipe: Optional[str] = None,
    max_labels: int = 3,
    attempts: int = 60,
    search_cap: int = 20000,
) -> MultiCellFam:
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "array")
    bounds = DEFAULT_BOUNDS.get(p, 2) if bounds is None else bounds
    for _ in range(attempts):
        name = recipe or rng.choices(RECIPES, weights=(3, 3, 3, 2))[0]
        labels = _labels(rng, max_labels)
        proposal = _RECIPES[name](rng, p, labels, bounds)
        if proposal is None:
            continue
        fam = _finish(p, labels, proposal, search_cap)
        if fam is not None:
            return fam
    # always succeeds: one class, one coordinate
    proposal = None
    while proposal is None:
        proposal = _recipe_copies(rng, p, ("s1",), bounds)
        if proposal and len(proposal["s1"][0]) != 1:
            proposal = None
        if proposal is not None:
            fam = _finish(p, ("s1",), proposal, search_cap)
            if fam is None:
                proposal = None
    return fam


def _draw_cluster(
    rng: random.Random,
    p: int = 2,
    bounds: Optional[int] = None,
    small: bool = False,
    unit_lambda: bool = False,
    max_labels: int = 3,
    max_classes: int = 4,
) -> ClusteredCellFam:
    bounds = DEFAULT_BOUNDS.get(p, 2) if bounds is None else bounds
    n = rng.randint(1, 2)
    m = rng.randint(1, MAX_M.get(p, 1))
    lam = _lam(rng, p, n, m, 0 if unit_lambda else None)
    labels = _labels(rng, max_labels)
    k = rng.randint(1, max_classes)
    width = 2 if small else rng.randint(2, 4)
    bounds_t, centers = {}, {}
    for s in labels:
        while True:
            v = rng.randint(-bounds, 0)
            alpha = v + rng.randint(0, 1)
            if small:
                h = alpha + 1 + (lam.exponent - alpha - 1) % n
                alpha = h - 1
            cond = CellCondition(alpha, alpha + width, lam, n, m)
            if not cond.heights().is_empty():
                break
        radius = cond.heights().top() + m
        balls = set()
        tries = 0
        while len(balls) < k and tries < 50:
            tries += 1
            c = PAdic(p, random_unit(rng, p, radius - v), v)
            balls.add(Ball(c, radius))
        bounds_t[s] = (cond.lower, cond.upper)
        centers[s] = sorted(balls, key=lambda b: b.sort_key())
    return ClusteredCellFam(ParamSet(labels), ConditionFamily.build(lam, n, m, bounds_t), CenterSet.build(centers))


def random_cluster(seed_or_rng, p: int = 2, bounds: Optional[int] = None, **options) -> ClusteredCellFam:
    """A clustered cell with arbitrary (disjoint) class balls of one valuation,
    redrawn until every fiber fits the default grid cap."""
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "cluster")
    while True:
        fam = _draw_cluster(rng, p, bounds, **options)
        if _fits(fam):
            return fam


def random_decomposition_family(seed_or_rng, p: int = 2, bounds: Optional[int] = None, max_labels: int = 3, **kw) -> DecompositionFam:
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "decomposition-family")
    labels = _labels(rng, max_labels)
    return DecompositionFam.build({s: random_decomposition(rng, p, bounds, **kw) for s in labels})


def random_family(kind: str, seed, p: int = 2, bounds: Optional[int] = None, **options):
    if kind == "cluster":
        return random_cluster(seed, p, bounds, **options)
    if kind == "array":
        return random_array(seed, p, bounds, **options)
    if kind == "decomposition-family":
        return random_decomposition_family(seed, p, bounds, **options)
    raise ValueError(f"unknown family kind {kind!r}")


def random_document(seed, p: Optional[int] = None):
    """A document mixing every object kind, for round-trip testing."""
    from .dsl import make_document
    from .generators import random_cell, random_padic

    rng = rng_for(seed, "document")
    p = p or rng.choice((2, 3, 5))
    bounds = DEFAULT_BOUNDS.get(p, 2)
    named: dict = {}
    kinds = ["cell", "ball", "decomposition", "cluster", "array", "family", "classical"]
    for k in range(rng.randint(1, 5)):
        kind = rng.choice(kinds)
        name = f"{kind[0].upper()}{k}"
        if kind == "cell":
            obj = random_cell(rng, p, bounds)
        elif kind == "ball":
            c = random_padic(rng, p, bounds, 2, zero_bias=0.2)
            obj = Ball(c, INF if rng.random() < 0.2 else rng.randint(-bounds, bounds + 2))
        elif kind == "decomposition":
            obj = random_decomposition(rng, p, bounds, max_cells=4)
        elif kind == "family":
            obj = random_decomposition_family(rng, p, bounds, max_cells=3)
        elif kind == "cluster":
            obj = random_cluster(rng, p, bounds)
        elif kind == "classical":
            fam = random_cluster(rng, p, bounds)
            obj = ClassicalCellFam(fam.params, fam.cond, tuple((s, fam.classes(s)[0].center) for s in fam.params))
        else:
            obj = random_array(rng, p, bounds, max_labels=2, attempts=5)
        named[name] = obj
    return make_document(p, named)
