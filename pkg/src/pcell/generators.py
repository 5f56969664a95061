"""Seeded random instances for tests and the CLI oracle command."""

from __future__ import annotations

import random
from typing import Optional

from .cells import Cell, CellCondition, Decomposition
from .padic import PAdic

# parameter ranges that keep fitted oracle grids small
DEFAULT_BOUNDS = {2: 4, 3: 2, 5: 1}
MAX_M = {2: 2, 3: 1, 5: 1}


def rng_for(seed: int, salt: str = "") -> random.Random:
    return random.Random(f"{salt}:{seed}")


def random_unit(rng: random.Random, p: int, digits: int) -> int:
    while True:
        u = rng.randrange(1, p**digits)
        if u % p:
            return u


def random_padic(rng: random.Random, p: int, bounds: int, digits: int = 2, zero_bias: float = 0.0) -> PAdic:
    if rng.random() < zero_bias:
        return PAdic(p, 0, 0)
    sign = -1 if rng.random() < 0.2 else 1
    return PAdic(p, sign * random_unit(rng, p, digits), rng.randint(-bounds, bounds))


def random_condition(
    rng: random.Random,
    p: int,
    bounds: int,
    max_n: int = 2,
    max_m: Optional[int] = None,
    allow_open: bool = True,
) -> CellCondition:
    max_m = max_m or MAX_M.get(p, 1)
    n = rng.randint(1, max_n)
    m = rng.randint(1, max_m)
    lam = PAdic(p, random_unit(rng, p, m), rng.randint(0, n - 1) + rng.choice([0, 0, -n, n]))
    lower = None if (allow_open and rng.random() < 0.15) else rng.randint(-bounds, bounds - 1)
    if allow_open and rng.random() < 0.15:
        upper = None
    else:
        base = lower if lower is not None else -bounds
        upper = min(bounds, base + rng.randint(1, 2 * bounds))
        if lower is not None and upper <= lower:
            upper = lower + 1
    return CellCondition(lower, upper, lam, n, m)


def random_cell(seed_or_rng, p: int = 2, bounds: Optional[int] = None, zero_cell_rate: float = 0.15, **kw) -> Cell:
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "cell")
    bounds = DEFAULT_BOUNDS.get(p, 2) if bounds is None else bounds
    center = random_padic(rng, p, bounds, 2, zero_bias=0.35)
    if rng.random() < zero_cell_rate:
        return Cell(CellCondition(None, None, PAdic(p, 0, 0), 1, 1), center)
    return Cell(random_condition(rng, p, bounds, **kw), center)


def random_one_cell(seed_or_rng, p: int = 2, bounds: Optional[int] = None, **kw) -> Cell:
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "one-cell")
    return random_cell(rng, p, bounds, zero_cell_rate=0.0, **kw)


def random_decomposition(seed_or_rng, p: int = 2, bounds: Optional[int] = None, max_cells: int = 6, **kw) -> Decomposition:
    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "decomposition")
    bounds = DEFAULT_BOUNDS.get(p, 2) if bounds is None else bounds
    k = rng.randint(1, max_cells)
    centers = [random_padic(rng, p, bounds, 2, zero_bias=0.35) for _ in range(rng.randint(1, 3))]
    cells = []
    for _ in range(k):
        c = random_cell(rng, p, bounds, **kw)
        if rng.random() < 0.6:
            c = Cell(c.condition, rng.choice(centers))
        cells.append(c)
    return Decomposition(cells, p)


def random_instance(kind: str, seed: int, bounds: Optional[int] = None, p: int = 2, **options):
    if kind == "cell":
        return random_cell(seed, p, bounds, **options)
    if kind == "decomposition":
        return random_decomposition(seed, p, bounds, **options)
    if kind in ("cluster", "array"):
        from . import family_generators

        return family_generators.random_family(kind, seed, p=p, bounds=bounds, **options)
    raise ValueError(f"unknown instance kind {kind!r}")


def random_tiled_decomposition(seed_or_rng, p: int = 2, bounds: Optional[int] = None, noise: bool = True) -> Decomposition:
    """A ball away from 0 tiled by single-leaf cells with scattered centers,
    plus cells centered inside the ball.  These keep W nonempty after the
    pre-admissible pass."""
    from .balls import Ball, subballs

    rng = seed_or_rng if isinstance(seed_or_rng, random.Random) else rng_for(seed_or_rng, "tiled")
    bounds = DEFAULT_BOUNDS.get(p, 2) if bounds is None else bounds
    max_m = MAX_M.get(p, 1)
    v = rng.randint(-bounds, 0)
    a = PAdic(p, random_unit(rng, p, 2), v)
    r = v + (1 if p >= 3 else rng.randint(1, 2))
    depth = 1 if p > 2 else rng.randint(1, 2)
    cells = []
    for sub in subballs(Ball(a, r), depth):
        if rng.random() < 0.1:
            continue
        s = sub.radius
        m = rng.randint(1, min(max_m, s - v - 1))
        g = s - m
        z = sub.center + PAdic(p, random_unit(rng, p, 1), g)
        cells.append(Cell(CellCondition(g - 1, g + 1, sub.center - z, 1, m), z))
    for _ in range(rng.randint(1, 2)):
        w = a + PAdic(p, rng.randrange(0, p**2), r)
        if w.is_zero():
            continue
        lower = rng.randint(v, r - (1 if p >= 5 else 0))
        n = rng.randint(1, 2)
        m = rng.randint(1, max_m)
        lam = PAdic(p, random_unit(rng, p, m), lower + 1)
        cells.append(Cell(CellCondition(lower, lower + rng.randint(1, 2 if p >= 5 else 3), lam, n, m), w))
    if noise and rng.random() < 0.5:
        cells.extend(random_decomposition(rng, p, bounds, max_cells=2).cells)
    rng.shuffle(cells)
    return Decomposition(cells, p)
