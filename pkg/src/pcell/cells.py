"""Denef cell conditions, cells with explicit centers, and finite unions of cells."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .balls import Ball
from .padic import PAdic, coset_member, format_padic


class WrongKindError(ValueError):
    """Operation applied to the wrong kind of cell (0-cell vs 1-cell, square shape)."""


class OutOfRangeError(ValueError):
    pass


class UndefinedRhoError(ValueError):
    pass


@dataclass(frozen=True)
class CellCondition:
    """``lower < ord(t - c) < upper`` and ``t - c`` in ``lam * Q_{n,m}``.

    ``lower``/``upper`` set to ``None`` mean the corresponding square is
    empty (no bound).  ``lam == 0`` is a 0-cell condition: ``t == c``.
    """

    lower: Optional[int]
    upper: Optional[int]
    lam: PAdic
    n: int = 1
    m: int = 1

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")

    @property
    def p(self) -> int:
        return self.lam.p

    @property
    def is_zero_cell(self) -> bool:
        return self.lam.is_zero()

    @property
    def both_bounded(self) -> bool:
        return self.lower is not None and self.upper is not None

    def admits_height(self, g: int) -> bool:
        if self.lam.is_zero():
            return False
        if self.lower is not None and not self.lower < g:
            return False
        if self.upper is not None and not g < self.upper:
            return False
        return (g - self.lam.exponent) % self.n == 0

    def heights(self) -> "HeightProgression":
        if self.lam.is_zero():
            raise WrongKindError("a 0-cell condition has no leaves")
        return HeightProgression(self.lower, self.upper, self.lam.exponent % self.n, self.n)

    def with_bounds(self, lower, upper) -> "CellCondition":
        return replace(self, lower=lower, upper=upper)


@dataclass(frozen=True)
class HeightProgression:
    """The heights ``g`` with ``lower < g < upper`` and ``g = residue mod n``."""

    lower: Optional[int]
    upper: Optional[int]
    residue: int
    n: int

    @property
    def finite(self) -> bool:
        return self.lower is not None and self.upper is not None

    def __contains__(self, g) -> bool:
        if not isinstance(g, int):
            return False
        if self.lower is not None and g <= self.lower:
            return False
        if self.upper is not None and g >= self.upper:
            return False
        return (g - self.residue) % self.n == 0

    def first_at_least(self, g: int) -> int:
        return g + (self.residue - g) % self.n

    def last_at_most(self, g: int) -> int:
        return g - (g - self.residue) % self.n

    def between(self, lo: int, hi: int) -> list[int]:
        """Heights in the closed range [lo, hi] (intersected with the bounds)."""
        if self.lower is not None:
            lo = max(lo, self.lower + 1)
        if self.upper is not None:
            hi = min(hi, self.upper - 1)
        if lo > hi:
            return []
        return list(range(self.first_at_least(lo), hi + 1, self.n))

    def top(self) -> Optional[int]:
        if self.upper is None:
            return None
        g = self.last_at_most(self.upper - 1)
        if self.lower is not None and g <= self.lower:
            return None
        return g

    def bottom(self) -> Optional[int]:
        if self.lower is None:
            return None
        g = self.first_at_least(self.lower + 1)
        if self.upper is not None and g >= self.upper:
            return None
        return g

    def is_empty(self) -> bool:
        return self.finite and self.top() is None

    def as_list(self) -> list[int]:
        if not self.finite:
            raise ValueError("unbounded height progression")
        return self.between(self.lower + 1, self.upper - 1)

    def __iter__(self) -> Iterator[int]:
        return iter(self.as_list())

    def __len__(self) -> int:
        return len(self.as_list())


@dataclass(frozen=True)
class Cell:
    condition: CellCondition
    center: PAdic

    @property
    def p(self) -> int:
        return self.center.p

    @property
    def is_zero_cell(self) -> bool:
        return self.condition.is_zero_cell

    @property
    def lower(self):
        return self.condition.lower

    @property
    def upper(self):
        return self.condition.upper

    @property
    def lam(self) -> PAdic:
        return self.condition.lam

    @property
    def n(self) -> int:
        return self.condition.n

    @property
    def m(self) -> int:
        return self.condition.m

    def __contains__(self, t: PAdic) -> bool:
        return cell_member(self, t)

    def recentered(self, center: PAdic) -> "Cell":
        return Cell(self.condition, center)

    def is_empty(self) -> bool:
        if self.is_zero_cell:
            return False
        return self.condition.heights().is_empty()

    def __str__(self):
        return format_cell(self)


@dataclass(frozen=True)
class Decomposition:
    """A finite list of cells; the denoted set is the union."""

    cells: tuple = field(default_factory=tuple)
    p: Optional[int] = None

    def __post_init__(self):
        cells = tuple(self.cells)
        object.__setattr__(self, "cells", cells)
        if self.p is None and cells:
            object.__setattr__(self, "p", cells[0].p)
        for c in cells:
            if self.p is not None and c.p != self.p:
                raise ValueError("mixed primes in decomposition")

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)

    def __getitem__(self, i):
        return self.cells[i]

    def __contains__(self, t: PAdic) -> bool:
        return any(cell_member(c, t) for c in self.cells)

    def centers(self) -> list[PAdic]:
        seen = []
        for c in self.cells:
            if c.center not in seen:
                seen.append(c.center)
        return seen

    def plus(self, other: "Decomposition") -> "Decomposition":
        return Decomposition(self.cells + other.cells, self.p or other.p)


def zero_cell(point: PAdic) -> Cell:
    return Cell(CellCondition(None, None, PAdic.zero(point.p), 1, 1), point)


def one_cell(center: PAdic, lower, upper, lam: PAdic, n: int = 1, m: int = 1) -> Cell:
    return Cell(CellCondition(lower, upper, lam, n, m), center)


def cell_member(c: Cell, t: PAdic) -> bool:
    d = t - c.center
    cond = c.condition
    if cond.lam.is_zero():
        return d.is_zero()
    if d.is_zero():
        return False
    g = d.exponent
    if cond.lower is not None and not cond.lower < g:
        return False
    if cond.upper is not None and not g < cond.upper:
        return False
    return coset_member(d, cond.lam, cond.n, cond.m)


def leaf_heights(c: Cell) -> HeightProgression:
    return c.condition.heights()


def leaf_ball(c: Cell, g: int) -> Ball:
    """The leaf of ``c`` at height ``g``: a ball of radius ``g + m``."""
    cond = c.condition
    if cond.lam.is_zero():
        raise WrongKindError("a 0-cell has no leaves")
    if g not in cond.heights():
        raise OutOfRangeError(f"{g} is not a leaf height")
    shifted = cond.lam.shift(g - cond.lam.exponent)
    return Ball(c.center + shifted, g + cond.m)


def rho_max(cond: CellCondition) -> int:
    if cond.lam.is_zero():
        raise UndefinedRhoError("rho_max is undefined for 0-cells")
    if cond.upper is None:
        raise UndefinedRhoError("rho_max needs an upper bound")
    top = cond.heights().top()
    if top is None:
        raise UndefinedRhoError("empty cell has no top leaf")
    return top


def center_ball(c: Cell) -> Ball:
    return Ball(c.center, rho_max(c.condition) + c.condition.m)


def restrict(c: Cell, lower: int, upper: int) -> Cell:
    """Intersect the ord-interval with (lower, upper)."""
    cond = c.condition
    if cond.lam.is_zero() or cond.lower is None or cond.upper is None:
        raise WrongKindError("restriction needs a 1-cell with both bounds")
    return Cell(cond.with_bounds(max(cond.lower, lower), min(cond.upper, upper)), c.center)


def _fmt_bound(b) -> str:
    return "none" if b is None else str(b)


def format_cell(c: Cell) -> str:
    cond = c.condition
    return (
        f"cell(lower={_fmt_bound(cond.lower)}, upper={_fmt_bound(cond.upper)}; "
        f"lambda={format_padic(cond.lam)}, n={cond.n}, m={cond.m}; center={format_padic(c.center)})"
    )
