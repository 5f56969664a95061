"""Exact set algebra for finite unions of cells.

A finite union X of cells is an open set plus finitely many points.  Its
interior is a disjoint union of maximal balls.  Infinitely many maximal balls
can only occur in two periodic families:

* an *outer* family in the annuli ``ord t = v`` for ``v`` below some bound,
* an *inner* family in the annuli ``ord(t - a) = g`` above some bound, around
  an accumulation point ``a`` (the center of a cell without upper bound).

Inside one annulus the maximal balls are described by *classes* ``(j, u)``:
the ball of radius ``g + j`` around ``a + u * p**g`` where ``u`` is a unit
residue modulo ``p**j``.  Because maximal balls are unique, listing points,
finite balls and the two kinds of families with extremal bounds and minimal
periods gives a canonical normal form.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Iterable, Optional, Sequence

from .balls import Ball, ball_contains
from .cells import Cell, CellCondition, Decomposition, cell_member
from .padic import INF, PAdic, angular_component

FULL = "full"
EMPTY = "empty"
MIXED = "mixed"
PARTIAL = "partial"


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


def cell_ball_status(cell: Cell, b: Ball) -> str:
    """FULL if b is inside the cell, EMPTY if disjoint, PARTIAL otherwise."""
    cond = cell.condition
    if cond.lam.is_zero():
        return PARTIAL if (cell.center - b.center).ord >= b.radius else EMPTY
    d = b.center - cell.center
    g = d.ord
    r = b.radius
    if g >= r:
        if cond.upper is None:
            return PARTIAL
        top = cond.heights().top()
        if top is None or top < r:
            return EMPTY
        return PARTIAL
    if not cond.admits_height(g):
        return EMPTY
    k = r - g
    p = cell.p
    if k >= cond.m:
        return FULL if angular_component(d, cond.m) == angular_component(cond.lam, cond.m) else EMPTY
    if angular_component(d, k) == angular_component(cond.lam, cond.m) % p**k:
        return PARTIAL
    return EMPTY


def unit_residues(p: int, m: int) -> list[int]:
    return [u for u in range(p**m) if u % p]


def maximal_classes(p: int, units: frozenset, precision: int) -> tuple:
    """Maximal residue classes ``(j, u mod p**j)`` fully inside ``units`` (mod p**precision)."""
    out = []
    full_prev: set = set()
    for j in range(1, precision + 1):
        mod = p**j
        counts: dict = {}
        for u in units:
            counts[u % mod] = counts.get(u % mod, 0) + 1
        need = p ** (precision - j)
        full_now = {r for r, c in counts.items() if c == need}
        for r in sorted(full_now):
            if j == 1 or (r % p ** (j - 1)) not in full_prev:
                out.append((j, r))
        full_prev = full_now
    return tuple(sorted(out))


def class_member(p: int, classes: Iterable, unit: int) -> bool:
    return any(unit % p**j == u for j, u in classes)


def minimal_period(seq: Sequence) -> tuple:
    n = len(seq)
    for d in range(1, n + 1):
        if n % d == 0 and all(seq[i] == seq[i % d] for i in range(n)):
            return tuple(seq[:d])
    return tuple(seq)


@dataclass(frozen=True)
class Family:
    """Periodic family of maximal balls in annuli around ``center``.

    ``direction == "down"``: annuli ``ord(t - center) = g`` with ``g < bound``
    (``bound is None`` means every annulus).  ``direction == "up"``: annuli
    with ``g > bound``.  ``classes[g mod period]`` lists the balls in annulus g.
    """

    direction: str
    center: PAdic
    bound: Optional[int]
    classes: tuple

    @property
    def period(self) -> int:
        return len(self.classes)

    def covers_height(self, g: int) -> bool:
        if self.bound is None:
            return True
        return g < self.bound if self.direction == "down" else g > self.bound

    def member(self, t: PAdic) -> bool:
        d = t - self.center
        if d.is_zero():
            return False
        g = d.exponent
        if not self.covers_height(g):
            return False
        return class_member(t.p, self.classes[g % self.period], d.mantissa)

    def balls_at(self, g: int) -> list[Ball]:
        p = self.center.p
        return [Ball(self.center + PAdic(p, u, g), g + j) for j, u in self.classes[g % self.period]]

    def describe(self) -> dict:
        return {
            "direction": self.direction,
            "center": self.center,
            "bound": self.bound,
            "classes": [list(map(list, c)) for c in self.classes],
        }


@dataclass(frozen=True)
class LeafForm:
    """Canonical normal form of a finite union of cells."""

    p: int
    whole: bool
    points: tuple
    balls: tuple
    tails: tuple
    flags: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, LeafForm):
            return NotImplemented
        return (self.p, self.whole, self.points, self.balls, self.tails) == (
            other.p,
            other.whole,
            other.points,
            other.balls,
            other.tails,
        )

    def __hash__(self):
        return hash((self.p, self.whole, self.points, self.balls, self.tails))

    @property
    def point_part(self) -> frozenset:
        return frozenset(self.points)

    @property
    def ball_part(self) -> frozenset:
        return frozenset(self.balls)

    def member(self, t: PAdic) -> bool:
        if self.whole:
            return True
        if t in self.points:
            return True
        if any((t - b.center).ord >= b.radius for b in self.balls):
            return True
        return any(f.member(t) for f in self.tails)

    def is_empty(self) -> bool:
        return not (self.whole or self.points or self.balls or self.tails)

    def oracle_cells(self) -> list:
        """The same set as plain cells and balls (for vectorized membership)."""
        p = self.p
        zero = PAdic.zero(p)
        if self.whole:
            return [Cell(CellCondition(None, None, zero, 1, 1), zero)] + [
                Cell(CellCondition(None, None, PAdic(p, u), 1, 1), zero) for u in range(1, p)
            ]
        out: list = [Cell(CellCondition(None, None, zero, 1, 1), x) for x in self.points]
        out.extend(self.balls)
        for f in self.tails:
            lower, upper = (None, f.bound) if f.direction == "down" else (f.bound, None)
            for r, cls in enumerate(f.classes):
                for j, u in cls:
                    out.append(Cell(CellCondition(lower, upper, PAdic(p, u, r), f.period, j), f.center))
        return out


WHOLE_SPACE = "whole-space"


class UnionEngine:
    """Decides ball statuses for the union of a list of cells."""

    def __init__(self, cells: Iterable[Cell], p: Optional[int] = None):
        cells = list(cells)
        if p is None:
            if not cells:
                raise ValueError("prime needed for an empty union")
            p = cells[0].p
        self.p = p
        self.zero = PAdic.zero(p)
        self.ones = [c for c in cells if not c.is_zero_cell and not c.is_empty()]
        pts: list = []
        for c in cells:
            if c.is_zero_cell and c.center not in pts:
                pts.append(c.center)
        self.points = sorted(pts, key=lambda x: x.sort_key())
        self.point_set = frozenset(self.points)
        specials: list = [self.zero]
        for x in [c.center for c in self.ones] + self.points:
            if x not in specials:
                specials.append(x)
        values: set = set()
        for c in self.ones:
            if c.lower is not None:
                values.add(c.lower)
            if c.upper is not None:
                values.add(c.upper)
        for i, x in enumerate(specials):
            for y in specials[i + 1 :]:
                values.add((x - y).ord)
        if not values:
            values = {0}
        self.M = max([c.m for c in self.ones], default=1)
        N = 1
        for c in self.ones:
            N = lcm(N, c.n)
        self.N = N
        self.vlow = min(values)
        self.vhigh = max(values)
        # below lo only cells without lower bound matter, uniformly in v mod N
        self.lo = self.vlow - self.M + 1
        # inside B_{hi+1}(a) only cells centered at a vary
        self.hi = self.vhigh + self.M - 1
        cands: list = []
        for c in self.ones:
            if c.upper is None and c.center not in cands:
                cands.append(c.center)
        self.candidates = sorted(cands, key=lambda x: x.sort_key())
        self.units = frozenset(unit_residues(p, self.M))
        self.outer_pattern = self._pattern([c for c in self.ones if c.lower is None])
        self.tail_patterns = {
            a: self._pattern([c for c in self.ones if c.upper is None and c.center == a]) for a in self.candidates
        }
        self._memo: dict = {}
        self._accumulation: Optional[list] = None

    # -- patterns -------------------------------------------------------------
    def _pattern(self, cells: list[Cell]) -> tuple:
        p = self.p
        out = []
        for r in range(self.N):
            s = set()
            for c in cells:
                if (r - c.lam.exponent) % c.n == 0:
                    target = angular_component(c.lam, c.m)
                    mod = p**c.m
                    s.update(u for u in self.units if u % mod == target)
            out.append(frozenset(s))
        return tuple(out)

    # -- membership -----------------------------------------------------------
    def member(self, t: PAdic) -> bool:
        if t in self.point_set:
            return True
        return any(cell_member(c, t) for c in self.ones)

    def candidate_in(self, b: Ball) -> Optional[PAdic]:
        for a in self.candidates:
            if (a - b.center).ord >= b.radius:
                return a
        return None

    # -- statuses -------------------------------------------------------------
    def _tail_status(self, a: PAdic) -> str:
        probe = Ball(a, self.hi + 1)
        for c in self.ones:
            if c.center != a and cell_ball_status(c, probe) == FULL:
                return FULL
        pat = self.tail_patterns[a]
        if a in self.point_set and all(s == self.units for s in pat):
            return FULL
        return MIXED

    def status(self, b: Ball) -> str:
        """FULL if b is inside X; EMPTY if b misses every 1-cell; else MIXED.

        Isolated points of X are ignored here except where they complete a
        ball around an accumulation point.
        """
        key = (b.center, b.radius)
        got = self._memo.get(key)
        if got is not None:
            return got
        res = self._status(b)
        self._memo[key] = res
        return res

    def _status(self, b: Ball) -> str:
        if b.radius > self.hi:
            a = self.candidate_in(b)
            if a is not None:
                return self._tail_status(a)
        partial = False
        for c in self.ones:
            s = cell_ball_status(c, b)
            if s == FULL:
                return FULL
            if s == PARTIAL:
                partial = True
        if not partial:
            return EMPTY
        seen = set()
        for child in b.children():
            seen.add(self.status(child))
            if len(seen) > 1 or MIXED in seen:
                return MIXED
        return seen.pop()

    def is_whole(self) -> bool:
        return all(s == self.units for s in self.outer_pattern) and self.status(Ball(self.zero, self.lo)) == FULL

    def is_interior(self, a: PAdic) -> bool:
        return self.status(Ball(a, self.resolving_radius(a))) == FULL

    def resolving_radius(self, a: PAdic) -> int:
        r = self.hi + 1
        for c in self.ones:
            g = (a - c.center).ord
            if g is not INF:
                r = max(r, g + self.M + 1)
        for q in self.points:
            g = (a - q).ord
            if g is not INF:
                r = max(r, g + 1)
        return r

    def accumulation_points(self) -> list:
        if self._accumulation is None:
            self._accumulation = [a for a in self.candidates if self.status(Ball(a, self.hi + 1)) != FULL]
        return self._accumulation

    # -- maximal balls --------------------------------------------------------
    def annulus_classes(self, a: PAdic, g: int) -> Optional[tuple]:
        """Maximal balls of X inside ``ord(t - a) = g`` as classes; None if infinite."""
        for b in self.accumulation_points():
            if b != a and (b - a).ord == g:
                return None
        p = self.p
        out = []
        stack = [(1, u) for u in range(p - 1, 0, -1)]
        while stack:
            j, u = stack.pop()
            s = self.status(Ball(a + PAdic(p, u, g), g + j))
            if s == FULL:
                out.append((j, u))
            elif s == MIXED:
                stack.extend((j + 1, u + k * p**j) for k in range(p - 1, -1, -1))
        return tuple(sorted(out))

    def maximal_ball(self, a: PAdic):
        """The maximal ball around ``a`` inside X, None, or WHOLE_SPACE."""
        if self.is_whole():
            return WHOLE_SPACE
        if not self.member(a):
            return None
        r = self.resolving_radius(a)
        if self.status(Ball(a, r)) != FULL:
            return None
        while self.status(Ball(a, r - 1)) == FULL:
            r -= 1
        return Ball(a, r)

    def leaf_form(self) -> LeafForm:
        p = self.p
        if self.is_whole():
            return LeafForm(p, True, (), (), ())
        N, M = self.N, self.M
        cls_out = [maximal_classes(p, s, M) for s in self.outer_pattern]
        # w0: the radius of the maximal ball around 0, if any
        w0 = INF
        if self.status(Ball(self.zero, self.lo)) == FULL:
            w0 = self.lo
            while self.outer_pattern[(w0 - 1) % N] == self.units:
                w0 -= 1
        else:
            for v in range(self.lo + 1, self.hi + 2):
                if self.status(Ball(self.zero, v)) == FULL:
                    w0 = v
                    break
        acc = self.accumulation_points()
        outer: Optional[Family] = None
        L = None
        global_outer = False
        if any(cls_out):
            if w0 is not INF and w0 <= self.lo:
                L = w0
            else:
                L = self.lo
                limit = self.hi + 2 * N + 1
                while (w0 is INF or L < w0) and L <= limit:
                    if self.annulus_classes(self.zero, L) != cls_out[L % N]:
                        break
                    L += 1
                if L > limit:
                    global_outer = True
            outer = Family("down", self.zero, None if global_outer else L, minimal_period(cls_out))
        families: list = []
        if outer is not None:
            families.append(outer)
        tail_bounds: dict = {}
        for a in acc:
            if global_outer and a == self.zero:
                continue
            cls_a = [maximal_classes(p, s, M) for s in self.tail_patterns[a]]
            H = self.hi
            floor = self.lo - 2 * N - 2
            while H > floor:
                if outer is not None and (global_outer or H < L) and (a == self.zero or H < a.ord):
                    break
                if self.annulus_classes(a, H) != cls_a[H % N]:
                    break
                H -= 1
            tail_bounds[a] = H
            families.append(Family("up", a, H, minimal_period(cls_a)))
        balls: list = []
        if not global_outer:
            root = Ball(self.zero, L if outer is not None else self.lo)
            self._collect(root, tail_bounds, balls)
        points = tuple(q for q in self.points if not self.is_interior(q))
        families.sort(key=lambda f: (f.direction, f.center.sort_key()))
        balls.sort(key=lambda b: b.sort_key())
        return LeafForm(p, False, points, tuple(balls), tuple(families), self.flags())

    def _collect(self, root: Ball, tail_bounds: dict, out: list) -> None:
        stack = [root]
        while stack:
            b = stack.pop()
            skip = False
            for a, H in tail_bounds.items():
                if b.radius > H and (a - b.center).ord >= b.radius:
                    skip = True
                    break
            if skip:
                continue
            s = self.status(b)
            if s == FULL:
                out.append(b)
            elif s == MIXED:
                stack.extend(reversed(b.children()))

    def flags(self) -> tuple:
        bad = [c for c in self.ones if c.lower is None and not c.center.is_zero()]
        return ("tail-with-nonzero-center",) if bad else ()

    # -- points outside -------------------------------------------------------
    def point_outside(self, b: Ball) -> Optional[PAdic]:
        if b.radius is INF:
            return None if self.member(b.center) else b.center
        s = self.status(b)
        if s == FULL:
            return None
        if s == EMPTY:
            return self._free_point(b)
        if b.radius > self.hi:
            a = self.candidate_in(b)
            if a is not None and not self.member(a):
                return a
        kids = b.children()
        specials = [x for x in self.candidates + self.points]
        kids.sort(key=lambda k: any((x - k.center).ord >= k.radius for x in specials))
        for k in kids:
            got = self.point_outside(k)
            if got is not None:
                return got
        return None

    def _free_point(self, b: Ball) -> PAdic:
        p = self.p
        k = 0
        while True:
            cand = b.center + PAdic(p, k, b.radius)
            if cand not in self.point_set:
                return cand
            k += 1


def _engine(d, p: Optional[int] = None) -> UnionEngine:
    if isinstance(d, UnionEngine):
        return d
    if isinstance(d, Cell):
        return UnionEngine([d], d.p)
    if isinstance(d, Decomposition):
        return UnionEngine(d.cells, p or d.p)
    return UnionEngine(list(d), p)


def normalize_to_leafform(d, p: Optional[int] = None) -> LeafForm:
    return _engine(d, p).leaf_form()


def set_equal(d1, d2, p: Optional[int] = None) -> bool:
    p = p or _prime_of(d1) or _prime_of(d2)
    return normalize_to_leafform(d1, p) == normalize_to_leafform(d2, p)


def _prime_of(d) -> Optional[int]:
    if isinstance(d, (Cell, Decomposition)):
        return d.p
    if isinstance(d, UnionEngine):
        return d.p
    for c in d:
        return c.p
    return None


def cells_intersect(c1: Cell, c2: Cell) -> bool:
    """Exact test whether two cells share a point."""
    if c1.is_zero_cell:
        return cell_member(c2, c1.center)
    if c2.is_zero_cell:
        return cell_member(c1, c2.center)
    if c1.is_empty() or c2.is_empty():
        return False
    if c1.center == c2.center:
        return _same_center_intersect(c1, c2)
    eng = UnionEngine([c1, c2], c1.p)
    # outer annuli: only cells without lower bound live there
    pa = eng._pattern([c1] if c1.lower is None else [])
    pb = eng._pattern([c2] if c2.lower is None else [])
    if any(x & y for x, y in zip(pa, pb)):
        return True
    stack = [Ball(eng.zero, eng.lo)]
    while stack:
        b = stack.pop()
        s1 = cell_ball_status(c1, b)
        s2 = cell_ball_status(c2, b)
        if s1 == EMPTY or s2 == EMPTY:
            continue
        if s1 == FULL or s2 == FULL:
            return True
        stack.extend(b.children())
    return False


def _same_center_intersect(c1: Cell, c2: Cell) -> bool:
    a, b = c1.condition, c2.condition
    p = c1.p
    k = min(a.m, b.m)
    if angular_component(a.lam, a.m) % p**k != angular_component(b.lam, b.m) % p**k:
        return False
    lo = max([x for x in (a.lower, b.lower) if x is not None], default=None)
    hi = min([x for x in (a.upper, b.upper) if x is not None], default=None)
    n = lcm(a.n, b.n)
    start = lo + 1 if lo is not None else (hi - n if hi is not None else 0)
    for g in range(start, start + n):
        if hi is not None and g >= hi:
            break
        if (g - a.lam.exponent) % a.n == 0 and (g - b.lam.exponent) % b.n == 0:
            return True
    return False


def set_disjoint_cells(c1: Cell, c2: Cell) -> bool:
    return not cells_intersect(c1, c2)


def max_ball_in_union(d, a: PAdic, p: Optional[int] = None):
    return _engine(d, p).maximal_ball(a)


def find_point_outside(d, b: Ball, p: Optional[int] = None) -> Optional[PAdic]:
    return _engine(d, p or b.p).point_outside(b)


def ball_inside_cell(b: Ball, c: Cell) -> bool:
    return cell_ball_status(c, b) == FULL


def ball_subset_of_ball(inner: Ball, outer: Ball) -> bool:
    return ball_contains(outer, inner)
