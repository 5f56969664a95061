"""Regular cell arrays and the clustered decomposition pipeline.

Everything here works one parameter label at a time on a :class:`FiberArray`
(conditions, class balls, allowed tuples) and regroups fibers with the same
combinatorial shape into families at the end.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .admissible import PreconditionError
from .balls import Ball, ball_contains, canonical_point, subballs
from .cells import Cell, CellCondition, Decomposition, WrongKindError, leaf_ball
from .clusters import (
    CenterTree,
    ClassicalCellFam,
    ClusteredCellFam,
    CenterSet,
    ConditionFamily,
    DecompositionFam,
    MultiCellFam,
    ParamSet,
    ValidationReport,
    _project,
    validate_cell_array,
)
from .leafform import cells_intersect, normalize_to_leafform
from .padic import INF, PAdic, format_padic

DEFAULT_TUPLE_CAP = 4096
HARD_TUPLE_CAP = 200000


class InvalidArrayError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.violations[0] if report.violations else None
        msg = f"not a valid cell array: {first.condition} at {first.label}: {first.detail}" if first else "invalid"
        super().__init__(msg)


class CapExceededError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# per-fiber working representation


@dataclass
class FiberArray:
    p: int
    conds: list
    classes: list  # list[list[Ball]]
    tuples: set

    @classmethod
    def of(cls, arr: MultiCellFam, s) -> "FiberArray":
        return cls(
            arr.p,
            [arr.condition(s, i) for i in range(arr.r)],
            [list(bs) for bs in arr.classes_at(s)],
            set(arr.tuples_at(s)),
        )

    @property
    def r(self) -> int:
        return len(self.conds)

    def used(self, i: int) -> list:
        return [self.classes[i][k] for k in sorted({t[i] for t in self.tuples})]

    def section(self, t: Sequence[int]) -> list:
        return [Cell(c, canonical_point(self.classes[i][k])) for i, (c, k) in enumerate(zip(self.conds, t))]

    def first_section(self) -> list:
        return self.section(min(self.tuples)) if self.tuples else []

    def pruned(self) -> "FiberArray":
        maps, classes = [], []
        for i in range(self.r):
            used = sorted({t[i] for t in self.tuples})
            maps.append({k: j for j, k in enumerate(used)})
            classes.append([self.classes[i][k] for k in used])
        tuples = {tuple(maps[i][t[i]] for i in range(self.r)) for t in self.tuples}
        return FiberArray(self.p, list(self.conds), classes, tuples)

    def drop(self, idx: Iterable[int]) -> "FiberArray":
        gone = set(idx)
        keep = [i for i in range(self.r) if i not in gone]
        return FiberArray(
            self.p,
            [self.conds[i] for i in keep],
            [self.classes[i] for i in keep],
            {tuple(t[i] for i in keep) for t in self.tuples},
        )

    def copy_groups(self) -> list:
        groups: dict = {}
        for i, c in enumerate(self.conds):
            groups.setdefault(c, []).append(i)
        return list(groups.values())


def _ball_key(b: Ball):
    return b.sort_key()


def _heights(cond: CellCondition) -> list:
    if cond.is_zero_cell or not cond.both_bounded:
        return []
    return cond.heights().as_list()


def _is_empty(cond: CellCondition) -> bool:
    return not cond.is_zero_cell and cond.heights().is_empty()


def _tighten(cond: CellCondition) -> CellCondition:
    if cond.is_zero_cell or not cond.both_bounded:
        return cond
    h = cond.heights()
    lo, hi = h.bottom(), h.top()
    if lo is None:
        return cond
    return cond.with_bounds(lo - 1, hi + 1)


def _enlarger(cond: CellCondition) -> Callable:
    """Class map for a piece whose top leaf may sit lower than before."""
    if cond.is_zero_cell or cond.upper is None or _is_empty(cond):
        return lambda b: [b]
    radius = cond.heights().top() + cond.m
    return lambda b: [b] if b.radius is INF else [Ball(b.center, radius)]


def _replace(fa: FiberArray, i: int, pieces: Sequence, cap: int = DEFAULT_TUPLE_CAP) -> FiberArray:
    """Swap coordinate ``i`` for ``pieces`` = [(condition, class map)].

    A class map sends an old class ball to a list of variants; variant ``v``
    of every piece is used together, which keeps each section a partition.
    When the expanded tuple set would pass ``cap`` only variant 0 is kept.
    """
    old = fa.classes[i]
    used = sorted({t[i] for t in fa.tuples})
    var = {k: [fn(old[k]) for _, fn in pieces] for k in used}
    new_classes, index = [], []
    for q in range(len(pieces)):
        balls = sorted({b for k in used for b in var[k][q]}, key=_ball_key)
        new_classes.append(balls)
        index.append({b: j for j, b in enumerate(balls)})
    nvar = {k: (len(var[k][0]) if pieces else 1) for k in used}
    full = sum(nvar[t[i]] for t in fa.tuples) <= cap
    tuples = set()
    for t in fa.tuples:
        vs = var[t[i]]
        for v in range(nvar[t[i]] if full else 1):
            mid = tuple(index[q][vs[q][v]] for q in range(len(pieces)))
            tuples.add(t[:i] + mid + t[i + 1 :])
    return FiberArray(
        fa.p,
        fa.conds[:i] + [c for c, _ in pieces] + fa.conds[i + 1 :],
        fa.classes[:i] + new_classes + fa.classes[i + 1 :],
        tuples,
    )


def _apply(fa: FiberArray, i: int, conds: Sequence[CellCondition], maker: Callable, drop_empty: bool, cap: int):
    pieces = []
    for c in conds:
        if drop_empty and _is_empty(c):
            continue
        pieces.append((c, maker(c)))
    return _replace(fa, i, pieces, cap), len(pieces)


# ---------------------------------------------------------------------------
# the three repartitionings, as piece builders


def interval_pieces(cond: CellCondition, cuts: Sequence[int]) -> list:
    """Cut the heights at each ``h`` in ``cuts``: heights ``< h`` versus ``>= h``."""
    if cond.is_zero_cell or not cond.both_bounded:
        raise WrongKindError("interval cuts need a 1-cell condition with both bounds")
    cuts = sorted({h for h in cuts if cond.lower + 1 < h <= cond.upper - 1})
    edges = [cond.lower] + [h - 1 for h in cuts]
    uppers = cuts + [cond.upper]
    return [cond.with_bounds(lo, hi) for lo, hi in zip(edges, uppers)]


def order_pieces(cond: CellCondition, ell: int) -> list:
    if ell < 1:
        raise ValueError("the order factor must be positive")
    if cond.is_zero_cell or ell == 1:
        return [cond]
    return [CellCondition(cond.lower, cond.upper, cond.lam.shift(j * cond.n), ell * cond.n, cond.m) for j in range(ell)]


def acprec_pieces(cond: CellCondition, ell: int, cap: int = 1 << 12) -> list:
    if ell < 0:
        raise ValueError("the precision increment must be non-negative")
    if cond.is_zero_cell or ell == 0:
        return [cond]
    p = cond.p
    count = p**ell
    if count > cap:
        from .balls import EnumerationLimitError

        raise EnumerationLimitError(f"{count} pieces exceed the cap {cap}")
    base = cond.lam.exponent + cond.m
    return [CellCondition(cond.lower, cond.upper, cond.lam + PAdic(p, j, base), cond.n, cond.m + ell) for j in range(count)]


def _acprec_maker(ell: int) -> Callable:
    def maker(cond):
        return lambda b: [b] if b.radius is INF else subballs(b, ell)

    return maker if ell else _enlarger


# ---------------------------------------------------------------------------
# family-level repartitionings


def _assemble(labels: Sequence, fibers: Mapping) -> MultiCellFam:
    first = fibers[labels[0]]
    conds = []
    for j, c in enumerate(first.conds):
        bounds = {}
        for s in labels:
            cj = fibers[s].conds[j]
            if (cj.lam, cj.n, cj.m) != (c.lam, c.n, c.m):
                raise ValueError("fibers disagree on a condition's shape")
            bounds[s] = (cj.lower, cj.upper)
        conds.append(ConditionFamily.build(c.lam, c.n, c.m, bounds))
    return MultiCellFam.build(
        ParamSet(tuple(labels)),
        conds,
        {s: fibers[s].classes for s in labels},
        {s: fibers[s].tuples for s in labels},
    )


def _as_array(arr) -> MultiCellFam:
    if isinstance(arr, CondensedArray):
        return arr.array
    if isinstance(arr, ClusteredCellFam):
        return cluster_as_array(arr)
    return arr


def _family_op(arr, i: int, conds_for: Callable, maker: Callable, cap: int) -> MultiCellFam:
    arr = _as_array(arr)
    if not 0 <= i < arr.r:
        raise ValueError("coordinate index out of range")
    fibers, empty = {}, None
    for s in arr.params:
        fa = FiberArray.of(arr, s)
        pieces = conds_for(s, fa.conds[i])
        flags = [_is_empty(c) for c in pieces]
        empty = flags if empty is None else [a and b for a, b in zip(empty, flags)]
        fibers[s], _ = _apply(fa, i, pieces, maker, False, cap)
    if len({len(fibers[s].conds) for s in arr.params}) != 1:
        raise ValueError("piece counts differ across fibers")
    dead = [i + q for q, e in enumerate(empty or []) if e]
    if dead:
        fibers = {s: fa.drop(dead) for s, fa in fibers.items()}
    out = _assemble(list(arr.params), fibers)
    return out.pruned()


def repartition_interval(arr, i: int, delta, cap: int = DEFAULT_TUPLE_CAP) -> MultiCellFam:
    """Split coordinate ``i`` into heights below ``delta(s)`` and the rest.

    ``delta`` is clamped into ``(lower, upper]`` so neither piece reaches
    outside the original interval.
    The lower piece is inserted at position ``i``; its class balls are the
    enlarged balls of radius (new top leaf + m).  Pieces empty in every fiber
    are dropped.
    """
    table = delta if isinstance(delta, Mapping) else None

    def conds_for(s, cond):
        d = table[s] if table is not None else delta
        if cond.is_zero_cell or not cond.both_bounded:
            raise WrongKindError("interval cuts need a 1-cell condition with both bounds")
        d = min(max(d, cond.lower + 1), cond.upper)
        return [cond.with_bounds(cond.lower, d), cond.with_bounds(d - 1, cond.upper)]

    return _family_op(arr, i, conds_for, _enlarger, cap)


def repartition_order(arr, i: int, ell: int, cap: int = DEFAULT_TUPLE_CAP) -> MultiCellFam:
    return _family_op(arr, i, lambda s, c: order_pieces(c, ell), _enlarger, cap)


def repartition_acprec(arr, i: int, ell: int, cap: int = DEFAULT_TUPLE_CAP) -> MultiCellFam:
    return _family_op(arr, i, lambda s, c: acprec_pieces(c, ell), _acprec_maker(ell), cap)


# ---------------------------------------------------------------------------
# condensed view


@dataclass(frozen=True)
class CondensedArray:
    """Identical conditions grouped with their multiplicity."""

    array: MultiCellFam
    groups: tuple  # tuples of coordinate indices

    @classmethod
    def from_array(cls, arr: MultiCellFam) -> "CondensedArray":
        groups: dict = {}
        for i, c in enumerate(arr.conds):
            groups.setdefault(c, []).append(i)
        return cls(arr, tuple(tuple(g) for g in groups.values()))

    @property
    def conditions(self) -> list:
        return [self.array.conds[g[0]] for g in self.groups]

    @property
    def multiplicities(self) -> list:
        return [len(g) for g in self.groups]

    def classes(self, s, j: int) -> list:
        return self.array.used_classes(s, self.groups[j][0])

    def is_legal(self) -> bool:
        return all(
            len({tuple(self.array.used_classes(s, i)) for i in g}) == 1 for g in self.groups for s in self.array.params
        )


def cluster_as_array(fam: ClusteredCellFam) -> MultiCellFam:
    """A single-condition array: one coordinate per class, all orderings."""
    ks = {len(fam.classes(s)) for s in fam.params}
    if len(ks) != 1:
        raise ValueError("class counts differ across fibers")
    k = ks.pop()
    classes = {s: [list(fam.classes(s))] * k for s in fam.params}
    tuples = {s: list(itertools.permutations(range(k))) for s in fam.params}
    return MultiCellFam.build(fam.params, [fam.cond] * k, classes, tuples)


# ---------------------------------------------------------------------------
# classification and regularity checks


@dataclass(frozen=True)
class Classification:
    kind: str  # "small" | "bounded" | "large"
    M: Optional[int] = None

    def __str__(self):
        return self.kind if self.M is None else f"{self.kind}({self.M})"


def _gap(cond: CellCondition) -> int:
    return cond.upper - cond.lower


def classify(fam, M: Optional[int] = None) -> Classification:
    if isinstance(fam, ClusteredCellFam):
        conds = [fam.condition(s) for s in fam.params]
    else:
        conds = [fam.at(s) for s in fam.labels()]
    for c in conds:
        if c.is_zero_cell or not c.both_bounded:
            raise WrongKindError("classification needs 1-cell conditions with both bounds")
    if all(len(_heights(c)) == 1 for c in conds):
        return Classification("small")
    gaps = [_gap(c) for c in conds]
    if M is not None and min(gaps) > M:
        return Classification("large", M)
    return Classification("bounded", max(gaps))


def _is_large(conds: Sequence[CellCondition]) -> bool:
    return min(_gap(c) for c in conds) > 2


@dataclass
class RegularityReport:
    violations: dict = field(default_factory=lambda: {f"R{k}": [] for k in range(1, 7)})

    def add(self, rule: str, witness: str) -> None:
        self.violations[rule].append(witness)

    def passed(self, rule: str) -> bool:
        return not self.violations[rule]

    @property
    def ok(self) -> bool:
        return all(not v for v in self.violations.values())

    def summary(self) -> dict:
        return {k: ("ok" if not v else v) for k, v in self.violations.items()}


def _relation(a: CellCondition, b: CellCondition) -> str:
    if (a.lower, a.upper) == (b.lower, b.upper):
        return "parallel"
    if a.upper <= b.lower + 1:
        return "below"
    if b.upper <= a.lower + 1:
        return "above"
    return "overlap"


def check_regularity(arr) -> RegularityReport:
    arr = _as_array(arr)
    rep = RegularityReport()
    shapes = {(c.n, c.m) for c in arr.conds if not c.is_zero}
    if len(shapes) > 1:
        rep.add("R1", f"conditions use {sorted(shapes)}")
    bounded = True
    for i, c in enumerate(arr.conds):
        for s in arr.params:
            ci = c.at(s)
            if ci.is_zero_cell or not ci.both_bounded:
                rep.add("R2", f"coordinate {i} at {s} lacks finite bounds")
                bounded = False
    if bounded:
        for i, j in itertools.combinations(range(arr.r), 2):
            rels = {_relation(arr.condition(s, i), arr.condition(s, j)) for s in arr.params}
            if "overlap" in rels:
                rep.add("R2", f"coordinates {i},{j} overlap")
            elif len(rels) > 1:
                rule = "R2" if "parallel" in rels else "R3"
                rep.add(rule, f"coordinates {i},{j} relate as {sorted(rels)} across labels")
    for i, j in itertools.combinations(range(arr.r), 2):
        if arr.conds[i] == arr.conds[j]:
            for s in arr.params:
                if arr.used_classes(s, i) != arr.used_classes(s, j):
                    rep.add("R4", f"copies {i},{j} have different centers at {s}")
    for i in range(arr.r):
        trees = {CenterTree(arr.used_classes(s, i)).shape() for s in arr.params}
        if len(trees) > 1:
            rep.add("R5", f"coordinate {i} has {len(trees)} tree types")
    if bounded:
        for i, c in enumerate(arr.conds):
            if not _is_large([c.at(s) for s in arr.params]):
                continue
            for s in arr.params:
                ci = c.at(s)
                high = [g for g in CenterTree(arr.used_classes(s, i)).branching_heights() if g > ci.lower]
                if high:
                    rep.add("R6", f"coordinate {i} at {s}: branching heights {high} above {ci.lower}")
    return rep


def class_disjointness(arr) -> list:
    """Pairs of non-equivalent centers of one condition whose cells meet."""
    arr = _as_array(arr)
    bad = []
    for s in arr.params:
        for i in range(arr.r):
            cond = arr.condition(s, i)
            cells = [Cell(cond, canonical_point(b)) for b in arr.used_classes(s, i)]
            for a, b in itertools.combinations(cells, 2):
                if cells_intersect(a, b):
                    bad.append((s, i, a.center, b.center))
    return bad


def check_regular_cluster(fam: ClusteredCellFam) -> RegularityReport:
    """Regularity of a clustered cell seen as a one-condition array."""
    rep = RegularityReport()
    conds = [fam.condition(s) for s in fam.params]
    if len({fam.tree(s).shape() for s in fam.params}) > 1:
        rep.add("R5", "tree types differ across labels")
    if all(c.both_bounded for c in conds) and _is_large(conds):
        for s, c in zip(fam.params, conds):
            high = [g for g in fam.tree(s).branching_heights() if g > c.lower]
            if high:
                rep.add("R6", f"{s}: branching heights {high} above {c.lower}")
    return rep


# ---------------------------------------------------------------------------
# regularization


def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // gcd(out, v)
    return out


def _symmetrize(fa: FiberArray) -> FiberArray:
    groups = fa.copy_groups()
    union = {}
    for g in groups:
        balls = sorted({fa.classes[i][t[i]] for t in fa.tuples for i in g}, key=_ball_key)
        for i in g:
            union[i] = balls
    index = {i: {b: k for k, b in enumerate(union[i])} for i in union}
    tuples = set()
    for t in fa.tuples:
        vals = [fa.classes[i][t[i]] for i in range(fa.r)]
        perms = [list(itertools.permutations([vals[i] for i in g])) for g in groups]
        for choice in itertools.product(*perms):
            new = list(vals)
            for g, perm in zip(groups, choice):
                for i, b in zip(g, perm):
                    new[i] = b
            tuples.add(tuple(index[i][new[i]] for i in range(fa.r)))
            if len(tuples) > HARD_TUPLE_CAP:
                raise CapExceededError("symmetrized tuple set exceeds the cap")
    return FiberArray(fa.p, list(fa.conds), [union[i] for i in range(fa.r)], tuples)


def _unify_shape(fa: FiberArray, N: int, M: int, cap: int) -> FiberArray:
    for i in reversed(range(fa.r)):
        c = fa.conds[i]
        if c.is_zero_cell:
            continue
        fa, k = _apply(fa, i, order_pieces(c, N // c.n), _enlarger, True, cap)
        for q in reversed(range(k)):
            cq = fa.conds[i + q]
            fa, _ = _apply(fa, i + q, acprec_pieces(cq, M - cq.m), _acprec_maker(M - cq.m), True, cap)
    return fa


def _cut_all(fa: FiberArray, cuts_for: Callable, cap: int) -> FiberArray:
    for i in reversed(range(fa.r)):
        cuts = cuts_for(i, fa.conds[i])
        if cuts:
            fa, _ = _apply(fa, i, interval_pieces(fa.conds[i], cuts), _enlarger, True, cap)
    return fa


def _needs_r6_cut(fa: FiberArray, i: int) -> list:
    c = fa.conds[i]
    if len(_heights(c)) <= 1 and _gap(c) <= 2:
        return []
    return [g for g in CenterTree(fa.used(i)).branching_heights() if g > c.lower]


def regularize_fiber(fa: FiberArray, cap: int = DEFAULT_TUPLE_CAP, shape: Optional[tuple] = None) -> FiberArray:
    """Regular form of one fiber; ``shape`` = (N, M) forces the common Q_{N,M}."""
    for c in fa.conds:
        if c.is_zero_cell or not c.both_bounded:
            raise WrongKindError("regularization needs bounded 1-cell conditions")
    fa = FiberArray(fa.p, [_tighten(c) for c in fa.conds], fa.classes, fa.tuples)
    fa = fa.drop([i for i, c in enumerate(fa.conds) if _is_empty(c)])
    if shape is None:
        shape = (_lcm(c.n for c in fa.conds), max((c.m for c in fa.conds), default=1))
    N, M = shape
    fa = _unify_shape(fa, N, M, cap)
    fa = FiberArray(fa.p, [_tighten(c) for c in fa.conds], fa.classes, fa.tuples)
    # align intervals: cut everything at every other boundary
    points = set()
    for c in fa.conds:
        points.update((c.lower + 1, c.upper))
    fa = _cut_all(fa, lambda i, c: [h for h in points if c.lower + 1 < h <= c.upper - 1], cap)
    fa = _symmetrize(fa.pruned())
    # branching heights above the lower bound: cut the parallel group near them
    while True:
        target = next(((i, hs) for i in range(fa.r) if (hs := _needs_r6_cut(fa, i))), None)
        if target is None:
            break
        i, hs = target
        c = fa.conds[i]
        span = (c.lower, c.upper)
        cuts = sorted({g + k for g in hs for k in range(-c.m, c.m + 1)} & set(range(c.lower + 2, c.upper)))
        if not cuts:
            cuts = list(range(c.lower + 2, c.upper))
        fa = _cut_all(fa, lambda j, cj: cuts if (cj.lower, cj.upper) == span else [], cap)
        fa = _symmetrize(fa.pruned())
    return _canonical(fa.pruned())


def _coord_key(c: CellCondition):
    return (c.lower, c.upper, c.lam.sort_key(), c.n, c.m)


def _canonical(fa: FiberArray) -> FiberArray:
    order = sorted(range(fa.r), key=lambda i: _coord_key(fa.conds[i]))
    classes, maps = [], []
    for i in order:
        used = sorted({t[i] for t in fa.tuples}, key=lambda k: _ball_key(fa.classes[i][k]))
        maps.append({k: j for j, k in enumerate(used)})
        classes.append([fa.classes[i][k] for k in used])
    tuples = {tuple(maps[j][t[i]] for j, i in enumerate(order)) for t in fa.tuples}
    return FiberArray(fa.p, [fa.conds[i] for i in order], classes, tuples)


def _fiber_key(fa: FiberArray) -> tuple:
    spans = sorted({(c.lower, c.upper) for c in fa.conds})
    out = []
    for i, c in enumerate(fa.conds):
        out.append(
            (
                spans.index((c.lower, c.upper)),
                format_padic(c.lam),
                c.n,
                c.m,
                len(_heights(c)) == 1,
                _gap(c) > 2,
                CenterTree(fa.used(i)).shape(),
            )
        )
    return tuple(out)


def _group_fibers(fibers: Mapping, order: Sequence) -> list:
    groups: dict = {}
    for s in order:
        groups.setdefault(_fiber_key(fibers[s]), []).append(s)
    return [_assemble(labels, fibers) for labels in groups.values()]


def regularize(arr, cap: int = DEFAULT_TUPLE_CAP) -> list:
    """Partition a valid cell array into regular cell arrays over parts of S."""
    arr = _as_array(arr)
    rep = validate_cell_array(arr)
    if not rep.ok:
        raise InvalidArrayError(rep)
    # one (N, M) for the whole family keeps every output on the same Q_{N,M}
    shape = (_lcm(c.n for c in arr.conds), max(c.m for c in arr.conds))
    fibers = {s: regularize_fiber(FiberArray.of(arr, s), cap, shape) for s in arr.params}
    return _group_fibers(fibers, list(arr.params))


# ---------------------------------------------------------------------------
# splitting off saturated conditions


def split_off_cluster(arr, i: int):
    """Split the copies of coordinate ``i`` off as one clustered cell.

    Returns ``(cluster, rest)`` with ``rest`` None when nothing remains, or
    None when some fiber has more classes than copies.
    """
    arr = _as_array(arr)
    group = [j for j in range(arr.r) if arr.conds[j] == arr.conds[i]]
    k = len(group)
    for s in arr.params:
        if len(arr.used_classes(s, i)) != k:
            return None
    cluster = ClusteredCellFam(arr.params, arr.conds[i], CenterSet.build({s: arr.used_classes(s, i) for s in arr.params}))
    others = [j for j in range(arr.r) if j not in group]
    rest = _project(arr, others) if others else None
    return cluster, rest


# ---------------------------------------------------------------------------
# ac normalization of small conditions


def _single_height(cond: CellCondition) -> int:
    hs = _heights(cond)
    if len(hs) != 1:
        raise PreconditionError("the condition is not small")
    return hs[0]


def _translation(cond: CellCondition, height: int):
    """(new lambda, translation b) turning ac_m(t - c) into 1 at ``height``."""
    lam, n, m, p = cond.lam, cond.n, cond.m, cond.p
    new_lam = PAdic.power(p, lam.exponent % n)
    unit = PAdic(p, lam.mantissa, 0)
    diff = unit - 1
    r = diff.ord
    if r is INF or r >= m:
        return new_lam, None
    big = diff if r == 0 else PAdic(p, diff.mantissa, 0)
    return new_lam, PAdic(p, big.ac(m), height + r)


def normalize_ac(fam: ClusteredCellFam, allow_shift: bool = False) -> ClusteredCellFam:
    """Rewrite a small clustered cell with ``lambda = p^(ord lambda mod n)``.

    Class balls are translated by an element of valuation ``height + r``
    where ``r = ord(lambda_unit - 1)``; the induced cells are unchanged.
    """
    lam = fam.cond.lam
    if lam.is_zero():
        raise PreconditionError("0-cells carry no angular component")
    if lam.exponent != 0 and not allow_shift:
        raise PreconditionError("ord lambda must be 0 (pass allow_shift=True to normalize the unit part)")
    centers = {}
    new_lam = None
    for s in fam.params:
        cond = fam.condition(s)
        g = _single_height(cond)
        new_lam, b = _translation(cond, g)
        balls = fam.classes(s)
        centers[s] = balls if b is None else [Ball(x.center + b, x.radius) for x in balls]
    if new_lam == lam:
        return fam
    cond = ConditionFamily(new_lam, fam.cond.n, fam.cond.m, fam.cond.bounds)
    return ClusteredCellFam(fam.params, cond, CenterSet.build(centers))


# ---------------------------------------------------------------------------
# merging small conditions with exchange


@dataclass
class MergeTrace:
    measures: list = field(default_factory=list)  # per label: exchange-level counts per step
    multiplicities: list = field(default_factory=list)

    def monotone(self) -> bool:
        for seq in self.measures:
            if any(b > a for a, b in zip(seq, seq[1:])):
                return False
            if seq and seq[-1] != 0:
                return False
        return True


def _mass(balls: Iterable[Ball], top: int) -> int:
    return sum(p_pow for p_pow in (b.p ** (top - b.radius) for b in balls))


def _inside(b: Ball, leaves: Sequence[Ball], top: int) -> bool:
    parts = [x for x in leaves if ball_contains(b, x)]
    return bool(parts) and _mass(parts, top) == b.p ** (top - b.radius)


def _potential(leaves: Sequence[Ball], radius: int, top: int) -> list:
    cands = {Ball(x.center, radius) for x in leaves if x.radius >= radius}
    return sorted((b for b in cands if _inside(b, leaves, top)), key=_ball_key)


def merge_levels(p: int, leaves: Sequence[Ball], heights: Sequence[int], n: int, m: int):
    """Repartition disjoint leaf balls by the coarsest available leaf per point.

    ``heights`` are the candidate leaf heights; a leaf at height g has radius
    g + m.  Returns ``(items, measures)`` where items are (condition, classes)
    per height and measures count levels still carrying exchange before each
    step (and after the last).
    """
    levels = sorted(set(heights))
    remaining = list(leaves)
    top = max(x.radius for x in remaining) if remaining else 0
    items, measures = [], []

    def exchange_count(rest, lv):
        count = 0
        for j, g in enumerate(lv):
            pot = _potential(rest, g + m, top)
            coarser = [b for h in lv[:j] for b in _potential(rest, h + m, top)]
            free = [b for b in pot if not any(ball_contains(c, b) for c in coarser)]
            if len(pot) > len(free):
                count += 1
        return count

    for j, g in enumerate(levels):
        measures.append(exchange_count(remaining, levels[j:]))
        F = _potential(remaining, g + m, top)
        if not F:
            continue
        remaining = [x for x in remaining if not any(ball_contains(b, x) for b in F)]
        lam = PAdic.power(p, g % n)
        cond = CellCondition(g - 1, g + 1, lam, n, m)
        shift = lam.shift(g - lam.exponent)
        items.append((cond, [Ball(b.center - shift, b.radius) for b in F]))
    measures.append(exchange_count(remaining, []))
    if remaining:
        raise AssertionError("leaves left after merging")
    return items, measures


def _leaves_of(cells: Iterable[Cell]) -> list:
    out = []
    for c in cells:
        for g in _heights(c.condition):
            out.append(leaf_ball(c, g))
    return out


def merge_small_exchange(arr, with_trace: bool = False):
    """Turn an array of small, ac-normalized conditions into clustered cells
    without exchange, one per height level and group of labels."""
    arr = _as_array(arr)
    items = {}
    trace = MergeTrace()
    shapes = {(c.n, c.m) for c in arr.conds}
    if len(shapes) != 1:
        raise PreconditionError("conditions must share n and m")
    n, m = shapes.pop()
    for c in arr.conds:
        if c.lam.ac(m) != 1:
            raise PreconditionError("conditions must be ac-normalized")
    for s in arr.params:
        fa = FiberArray.of(arr, s)
        heights = [_single_height(c) for c in fa.conds]
        got, measures = merge_levels(arr.p, _leaves_of(fa.first_section()), heights, n, m)
        items[s] = got
        trace.measures.append(measures)
        trace.multiplicities.append({h: heights.count(h) for h in sorted(set(heights))})
    out = _group_items(items, list(arr.params))
    return (out, trace) if with_trace else out


# ---------------------------------------------------------------------------
# end-to-end


def _item_key(cond: CellCondition, classes: Sequence[Ball]):
    zero = cond.is_zero_cell
    return (
        zero,
        format_padic(cond.lam),
        cond.n,
        cond.m,
        cond.lower is None,
        cond.upper is None,
        len(classes),
        None if zero else CenterTree(classes).shape(),
    )


def _group_items(items: Mapping, order: Sequence, classical_single: bool = False) -> list:
    """Group per-label (condition, classes) items into families."""
    groups: dict = {}
    for s in order:
        seen: dict = {}
        for cond, classes in sorted(items[s], key=lambda it: (_coord_key_loose(it[0]), [_ball_key(b) for b in it[1]])):
            base = _item_key(cond, classes)
            k = seen.get(base, 0)
            seen[base] = k + 1
            groups.setdefault(base + (k,), {})[s] = (cond, classes)
    out = []
    for table in groups.values():
        labels = [s for s in order if s in table]
        cond0 = table[labels[0]][0]
        cf = ConditionFamily.build(cond0.lam, cond0.n, cond0.m, {s: (table[s][0].lower, table[s][0].upper) for s in labels})
        params = ParamSet(tuple(labels))
        if classical_single or all(len(table[s][1]) == 1 for s in labels):
            out.append(ClassicalCellFam(params, cf, tuple((s, canonical_point(table[s][1][0])) for s in labels)))
        else:
            out.append(ClusteredCellFam(params, cf, CenterSet.build({s: table[s][1] for s in labels})))
    return out


def _coord_key_loose(c: CellCondition):
    lo = -(1 << 60) if c.lower is None else c.lower
    hi = 1 << 60 if c.upper is None else c.upper
    return (lo, hi, c.lam.sort_key(), c.n, c.m)


@dataclass
class DecomposeResult:
    items: list
    n: Optional[int]
    m: Optional[int]
    regular_arrays: int = 0
    merge: Optional[MergeTrace] = None

    def fiber_parts(self, s) -> list:
        return [it.fiber(s) for it in self.items if s in it.params]


def _fiber_pipeline(fa: FiberArray, trace: MergeTrace) -> list:
    items = []
    while fa.r:
        sat = next((g for g in fa.copy_groups() if len(fa.used(g[0])) == len(g)), None)
        if sat is None:
            break
        items.append((fa.conds[sat[0]], fa.used(sat[0])))
        fa = fa.drop(sat).pruned()
    if not fa.r:
        return items
    n = fa.conds[0].n
    m = fa.conds[0].m
    heights = sorted({g for c in fa.conds for g in _heights(c)})
    got, measures = merge_levels(fa.p, _leaves_of(fa.first_section()), heights, n, m)
    trace.measures.append(measures)
    items.extend(got)
    return items


def _ball_cell(b: Ball) -> Cell:
    from .admissible import ball_as_cell

    zeta = b.center + PAdic.power(b.p, b.radius - 1)
    return ball_as_cell(b, zeta)


def _pairwise_disjoint(cells: Sequence[Cell]) -> bool:
    return not any(cells_intersect(a, b) for a, b in itertools.combinations(cells, 2))


def _decomposition_pipeline(fam: DecompositionFam) -> DecomposeResult:
    per = {}
    for s in fam.params:
        d = fam.fiber(s)
        cells = [c for c in d.cells if c.is_zero_cell or not c.is_empty()]
        if not _pairwise_disjoint(cells):
            # overlapping input: fall back to the canonical disjoint leaf form
            lf = normalize_to_leafform(d)
            cells = [x if isinstance(x, Cell) else _ball_cell(x) for x in lf.oracle_cells()]
        per[s] = cells
    ones = [c for cells in per.values() for c in cells if not c.is_zero_cell]
    N = _lcm(c.n for c in ones) if ones else None
    M = max((c.m for c in ones), default=None)
    items = {}
    for s, cells in per.items():
        got = []
        for c in cells:
            if c.is_zero_cell:
                got.append((c.condition, [Ball(c.center, INF)]))
                continue
            for piece in order_pieces(c.condition, N // c.n):
                for q in acprec_pieces(piece, M - piece.m):
                    if not _is_empty(q):
                        got.append((q, [Ball(c.center, INF)]))
        items[s] = got
    return DecomposeResult(_group_items(items, list(fam.params), classical_single=True), N, M)


def clustered_decompose(inp, cap: int = DEFAULT_TUPLE_CAP) -> DecomposeResult:
    """Partition the input into classical cells and regular clustered cells
    of finite order sharing one (n, m)."""
    if isinstance(inp, Decomposition):
        inp = DecompositionFam(ParamSet(("s",)), (("s", inp),))
    if isinstance(inp, DecompositionFam):
        return _decomposition_pipeline(inp)
    arr = _as_array(inp)
    rep = validate_cell_array(arr)
    if not rep.ok:
        raise InvalidArrayError(rep)
    trace = MergeTrace()
    regs = regularize(arr, cap)
    items: dict = {s: [] for s in arr.params}
    for reg in regs:
        for s in reg.params:
            items[s].extend(_fiber_pipeline(FiberArray.of(reg, s).pruned(), trace))
    out = _group_items(items, list(arr.params))
    ones = [it.cond for it in out if not it.cond.is_zero]
    n = ones[0].n if ones else None
    m = ones[0].m if ones else None
    return DecomposeResult(out, n, m, len(regs), trace)
