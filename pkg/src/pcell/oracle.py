"""Brute-force grid oracle.

Sets are compared pointwise on a finite grid of exact elements
``u * p**v`` of Z[1/p].  Membership uses exact integer arithmetic: a numpy
path works on the grid scaled by ``p**-vmin`` when that fits in int64, and a
pure-Python path calls the core predicates otherwise.  A counterexample found
here is therefore a genuine counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .balls import Ball
from .cells import Cell, Decomposition, cell_member
from .padic import INF, PAdic

DEFAULT_GRID_CAP = 10**6
_INT64_LIMIT = 1 << 62


class WindowTooLargeError(RuntimeError):
    def __init__(self, size: int, cap: int, hint: str = ""):
        msg = f"grid of {size} points exceeds cap {cap}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class GridSpec:
    """Grid ``{u p^v : vmin <= v <= vmax, 1 <= u < p^D, p does not divide u}``.

    ``digits`` is D.  When ``resolve`` is set, valuation v only enumerates
    ``min(D, max(1, resolve - v))`` digits: a point of valuation v then still
    resolves every ball of radius up to ``resolve``.
    """

    p: int
    vmin: int
    vmax: int
    digits: int
    include_zero: bool = True
    resolve: Optional[int] = None
    cap: int = DEFAULT_GRID_CAP
    # points outside the regular grid, e.g. centers with negative mantissa
    extra: tuple = ()

    def __post_init__(self):
        if self.vmin > self.vmax:
            raise ValueError("vmin must not exceed vmax")
        if self.digits < 1:
            raise ValueError("digits must be positive")

    def digits_at(self, v: int) -> int:
        if self.resolve is None:
            return self.digits
        return max(1, min(self.digits, self.resolve - v))

    def size(self) -> int:
        p = self.p
        total = sum(p ** self.digits_at(v) - p ** (self.digits_at(v) - 1) for v in range(self.vmin, self.vmax + 1))
        return total + (1 if self.include_zero else 0) + len(self.extra)

    def on_grid(self, x: PAdic) -> bool:
        if x.is_zero():
            return self.include_zero
        v = x.exponent
        return self.vmin <= v <= self.vmax and 0 < x.mantissa < self.p ** self.digits_at(v)

    def with_points(self, pts) -> "GridSpec":
        """Add points that the regular grid misses (duplicates are skipped)."""
        extra = list(self.extra)
        for x in pts:
            if x.exponent >= self.vmin and not self.on_grid(x) and x not in extra:
                extra.append(x)
        extra.sort(key=lambda x: x.sort_key())
        return replace(self, extra=tuple(extra))

    def check_cap(self) -> None:
        n = self.size()
        if n > self.cap:
            raise WindowTooLargeError(n, self.cap, "shrink parameter ranges, digits or the valuation window")

    def enlarged(self, k: int = 2) -> "GridSpec":
        g = replace(
            self,
            vmin=self.vmin - k,
            vmax=self.vmax + k,
            digits=self.digits + k,
            resolve=None if self.resolve is None else self.resolve + k,
            extra=(),
        )
        return g.with_points(self.extra)

    def top_exponent(self) -> int:
        return max(v - self.vmin + self.digits_at(v) for v in range(self.vmin, self.vmax + 1))

    def fits_int64(self) -> bool:
        if self.p ** self.top_exponent() >= _INT64_LIMIT:
            return False
        return all(abs(x.mantissa) * self.p ** (x.exponent - self.vmin) < _INT64_LIMIT for x in self.extra)

    def points(self) -> Iterable[PAdic]:
        p = self.p
        if self.include_zero:
            yield PAdic(p, 0, 0)
        for v in range(self.vmin, self.vmax + 1):
            for u in range(1, p ** self.digits_at(v)):
                if u % p:
                    yield PAdic(p, u, v)
        yield from self.extra

    def scaled(self) -> np.ndarray:
        """Grid points multiplied by ``p**-vmin`` (exact int64)."""
        p = self.p
        chunks = []
        if self.include_zero:
            chunks.append(np.zeros(1, dtype=np.int64))
        for v in range(self.vmin, self.vmax + 1):
            u = np.arange(1, p ** self.digits_at(v), dtype=np.int64)
            u = u[u % p != 0]
            chunks.append(u * np.int64(p ** (v - self.vmin)))
        if self.extra:
            chunks.append(np.array([x.mantissa * p ** (x.exponent - self.vmin) for x in self.extra], dtype=np.int64))
        return np.concatenate(chunks)

    def point_at(self, k: int) -> PAdic:
        return PAdic(self.p, int(k), self.vmin)


# ---------------------------------------------------------------------------
# window selection


def _collect(obj: Any, p: int, vals: list, ns: list, ms: list, centers: list) -> None:
    if obj is None:
        return
    if isinstance(obj, PAdic):
        centers.append(obj)
        return
    if isinstance(obj, Ball):
        centers.append(obj.center)
        if obj.radius is not INF:
            vals.append(obj.radius)
        return
    if isinstance(obj, Cell):
        cond = obj.condition
        centers.append(obj.center)
        for b in (cond.lower, cond.upper):
            if b is not None:
                vals.append(b)
        if not cond.lam.is_zero():
            centers.append(("lam", cond.lam.exponent))
            ns.append(cond.n)
            ms.append(cond.m)
        return
    if hasattr(obj, "window_objects"):
        for x in obj.window_objects():
            _collect(x, p, vals, ns, ms, centers)
        return
    if isinstance(obj, (Decomposition, list, tuple)):
        for x in obj:
            _collect(x, p, vals, ns, ms, centers)
        return
    if isinstance(obj, int) and not isinstance(obj, bool):
        vals.append(obj)
        return
    raise TypeError(f"cannot derive a window from {type(obj).__name__}")


def _window_data(objects: Sequence, p: int):
    vals: list = []
    ns: list = []
    ms: list = []
    centers: list = []
    for obj in objects:
        _collect(obj, p, vals, ns, ms, centers)
    lam_ords = [c[1] for c in centers if isinstance(c, tuple)]
    centers = [c for c in centers if not isinstance(c, tuple)]
    return vals, ns, ms, centers, lam_ords


def default_window(objects: Sequence = (), p: int = 2, cap: int = DEFAULT_GRID_CAP, check: bool = True) -> GridSpec:
    """Conservative window: every threshold of the objects lies inside it."""
    vals, ns, ms, centers, lam_ords = _window_data(objects, p)
    vals = vals + lam_ords + [c.exponent for c in centers if not c.is_zero()]
    if not vals:
        g = GridSpec(p, -4, 4, 9, True, None, cap)
    else:
        n = max(ns, default=1)
        m = max(ms, default=1)
        vmin = min(vals) - (n + m + 2)
        vmax = max(vals) + m + 2
        g = GridSpec(p, vmin, vmax, (vmax - vmin) + m + 1, True, None, cap).with_points(centers)
    if check:
        g.check_cap()
    return g


def fitted_window(objects: Sequence = (), p: int = 2, cap: int = DEFAULT_GRID_CAP, margin: int = 0, check: bool = True) -> GridSpec:
    """Tight window with valuation-dependent digits.

    The valuations below ``lo`` see one full period of the outer periodic
    pattern, and the annuli above ``hi`` around every center see one full
    period of the inner pattern, each resolved to ``m`` digits of angular
    component.
    """
    vals, ns, ms, centers, _ = _window_data(objects, p)
    zero = PAdic(p, 0, 0)
    pts = [zero]
    for c in centers:
        if c not in pts:
            pts.append(c)
    vals = list(vals)
    for i, x in enumerate(pts):
        for y in pts[i + 1 :]:
            vals.append((x - y).ord)
    if not vals:
        vals = [0]
    N = 1
    for n in ns:
        N = N * n // _gcd(N, n)
    M = max(ms, default=1)
    lo = min(vals) - M + 1
    hi = max(vals) + M - 1
    vmin = lo - N - margin
    resolve = hi + N + M + margin
    vmax = resolve - 1
    g = GridSpec(p, vmin, vmax, resolve - vmin, True, resolve, cap).with_points(pts)
    if check:
        g.check_cap()
    return g


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


# ---------------------------------------------------------------------------
# vectorized membership


def _ord_unit(x: np.ndarray, p: int):
    """Relative valuation and unit part of each nonzero entry (zero -> huge ord)."""
    ords = np.zeros(x.shape, dtype=np.int64)
    u = x.copy()
    idx = np.nonzero(u)[0]
    sub = u[idx]
    # only entries still divisible by p stay in the working set
    while len(idx):
        keep = sub % p == 0
        idx, sub = idx[keep], sub[keep] // p
        if not len(idx):
            break
        u[idx] = sub
        ords[idx] += 1
    ords[x == 0] = np.iinfo(np.int64).max // 4
    return ords, u


class _Scaled:
    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.K = grid.scaled()
        self.p = grid.p
        self.vmin = grid.vmin
        self._cache: dict = {}

    def scale(self, x: PAdic) -> Optional[int]:
        if x.is_zero():
            return 0
        if x.exponent < self.vmin:
            return None
        return x.mantissa * self.p ** (x.exponent - self.vmin)

    def diff(self, c: PAdic):
        s = self.scale(c)
        if s is None:
            return None
        if abs(s) >= _INT64_LIMIT:
            return None
        key = s
        got = self._cache.get(key)
        if got is None:
            got = _ord_unit(self.K - np.int64(s), self.p)
            self._cache[key] = got
        return got

    def cell_mask(self, c: Cell) -> Optional[np.ndarray]:
        got = self.diff(c.center)
        if got is None:
            return None
        ords, unit = got
        cond = c.condition
        if cond.lam.is_zero():
            return self.K == np.int64(self.scale(c.center))
        g = ords + self.vmin
        mask = self.K != np.int64(self.scale(c.center))
        if cond.lower is not None:
            mask &= g > cond.lower
        if cond.upper is not None:
            mask &= g < cond.upper
        mask &= (g - cond.lam.exponent) % cond.n == 0
        pm = self.p**cond.m
        mask &= unit % pm == cond.lam.mantissa % pm
        return mask

    def ball_mask(self, b: Ball) -> Optional[np.ndarray]:
        got = self.diff(b.center)
        if got is None:
            return None
        ords, _ = got
        if b.radius is INF:
            return self.K == np.int64(self.scale(b.center))
        return ords + self.vmin >= b.radius


def _slow_mask(obj, grid: GridSpec) -> np.ndarray:
    f = membership_function(obj)
    return np.fromiter((f(t) for t in grid.points()), dtype=bool, count=grid.size())


def membership_function(obj):
    if callable(obj) and not isinstance(obj, (Cell, Ball, Decomposition)):
        return obj
    if isinstance(obj, Cell):
        return lambda t: cell_member(obj, t)
    if isinstance(obj, Ball):
        return lambda t: (t - obj.center).ord >= obj.radius
    if isinstance(obj, Decomposition):
        return lambda t: any(cell_member(c, t) for c in obj.cells)
    if hasattr(obj, "member"):
        return obj.member
    if isinstance(obj, (list, tuple)):
        fs = [membership_function(x) for x in obj]
        return lambda t: any(f(t) for f in fs)
    raise TypeError(f"no membership for {type(obj).__name__}")


def _cells_of(obj) -> Optional[list]:
    if isinstance(obj, (Cell, Ball)):
        return [obj]
    if isinstance(obj, Decomposition):
        return list(obj.cells)
    if hasattr(obj, "oracle_cells"):
        return list(obj.oracle_cells())
    if isinstance(obj, (list, tuple)):
        out = []
        for x in obj:
            sub = _cells_of(x)
            if sub is None:
                return None
            out.extend(sub)
        return out
    return None


def grid_mask(obj, grid: GridSpec, _scaled: Optional[_Scaled] = None) -> np.ndarray:
    """Boolean membership of every grid point (in ``grid.points()`` order)."""
    grid.check_cap()
    parts = _cells_of(obj)
    if parts is not None and grid.fits_int64():
        sc = _scaled or _Scaled(grid)
        mask = np.zeros(sc.K.shape, dtype=bool)
        for x in parts:
            mx = sc.cell_mask(x) if isinstance(x, Cell) else sc.ball_mask(x)
            if mx is None:
                return _slow_mask(obj, grid)
            mask |= mx
        return mask
    return _slow_mask(obj, grid)


@dataclass(frozen=True)
class GridVerdict:
    ok: bool
    counterexample: Optional[PAdic] = None
    reason: str = ""
    points_checked: int = 0

    def __bool__(self):
        return self.ok


def grid_set_equal(a, b, grid: GridSpec) -> GridVerdict:
    sc = _Scaled(grid) if grid.fits_int64() else None
    ma = grid_mask(a, grid, sc)
    mb = grid_mask(b, grid, sc)
    bad = np.nonzero(ma != mb)[0]
    if len(bad):
        t = _point(grid, sc, int(bad[0]))
        side = "only in first" if ma[bad[0]] else "only in second"
        return GridVerdict(False, t, side, len(ma))
    return GridVerdict(True, None, "", len(ma))


def grid_partition_check(parts: Sequence, whole, grid: GridSpec) -> GridVerdict:
    sc = _Scaled(grid) if grid.fits_int64() else None
    mw = grid_mask(whole, grid, sc)
    count = np.zeros(mw.shape, dtype=np.int64)
    for part in parts:
        mp = grid_mask(part, grid, sc)
        outside = np.nonzero(mp & ~mw)[0]
        if len(outside):
            return GridVerdict(False, _point(grid, sc, int(outside[0])), "part point outside whole", len(mw))
        count += mp
    over = np.nonzero(count > 1)[0]
    if len(over):
        return GridVerdict(False, _point(grid, sc, int(over[0])), "point in several parts", len(mw))
    missing = np.nonzero(mw & (count == 0))[0]
    if len(missing):
        return GridVerdict(False, _point(grid, sc, int(missing[0])), "point of whole in no part", len(mw))
    return GridVerdict(True, None, "", len(mw))


def grid_disjoint(a, b, grid: GridSpec) -> GridVerdict:
    sc = _Scaled(grid) if grid.fits_int64() else None
    both = np.nonzero(grid_mask(a, grid, sc) & grid_mask(b, grid, sc))[0]
    if len(both):
        return GridVerdict(False, _point(grid, sc, int(both[0])), "common point")
    return GridVerdict(True)


def grid_points_in(obj, grid: GridSpec) -> list[PAdic]:
    sc = _Scaled(grid) if grid.fits_int64() else None
    mask = grid_mask(obj, grid, sc)
    return [_point(grid, sc, int(i)) for i in np.nonzero(mask)[0]]


def _point(grid: GridSpec, sc: Optional[_Scaled], index: int) -> PAdic:
    if sc is not None:
        return grid.point_at(int(sc.K[index]))
    for i, t in enumerate(grid.points()):
        if i == index:
            return t
    raise IndexError(index)


def random_instance(kind: str, seed: int, bounds: int = 4, p: int = 2, **options):
    """Reproducible random object of the given kind (cell, decomposition, cluster, array)."""
    from . import generators

    return generators.random_instance(kind, seed, bounds=bounds, p=p, **options)


def comparison_window(source, derived: Sequence = (), p: int = 2, cap: int = DEFAULT_GRID_CAP) -> GridSpec:
    """Window fitted to ``source`` and ``derived`` together, or to ``source``
    alone when the joint window would exceed the cap."""
    try:
        return fitted_window([source, *derived], p, cap)
    except WindowTooLargeError:
        return fitted_window([source], p, cap)
