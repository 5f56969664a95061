"""Cells whose centers range over finite unions of balls, indexed by a finite
parameter set, plus the ball trees spanned by their center classes.

Every fibered object maps a parameter label ``s`` to plain cells, so all
geometric checks reduce to the single-fiber engine in :mod:`pcell.leafform`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .balls import Ball, ball_contains, ball_meet, ball_member, canonical_point
from .cells import Cell, CellCondition, Decomposition, rho_max
from .leafform import WHOLE_SPACE, UnionEngine, cells_intersect, normalize_to_leafform
from .padic import INF, NEG_INF, PAdic, format_gamma


class NotACenterError(ValueError):
    pass


class SearchLimitError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parameter sets and per-label tables


@dataclass(frozen=True)
class ParamSet:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValueError("a parameter set needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate parameter labels")
        object.__setattr__(self, "labels", labels)

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, s) -> bool:
        return s in self.labels

    def restrict(self, keep: Iterable) -> "ParamSet":
        keep = set(keep)
        return ParamSet(tuple(s for s in self.labels if s in keep))


def _frozen_table(mapping: Mapping, labels: Sequence) -> tuple:
    return tuple((s, mapping[s]) for s in labels)


@dataclass(frozen=True)
class ConditionFamily:
    """A cell condition over S: ``lam``, ``n``, ``m`` fixed, bounds per label."""

    lam: PAdic
    n: int
    m: int
    bounds: tuple  # ((label, (lower, upper)), ...)

    @classmethod
    def build(cls, lam: PAdic, n: int, m: int, bounds: Mapping) -> "ConditionFamily":
        return cls(lam, n, m, tuple((s, tuple(b)) for s, b in bounds.items()))

    @classmethod
    def constant(cls, cond: CellCondition, params: Iterable) -> "ConditionFamily":
        return cls.build(cond.lam, cond.n, cond.m, {s: (cond.lower, cond.upper) for s in params})

    @property
    def p(self) -> int:
        return self.lam.p

    @property
    def is_zero(self) -> bool:
        return self.lam.is_zero()

    def table(self) -> dict:
        return dict(self.bounds)

    def labels(self) -> tuple:
        return tuple(s for s, _ in self.bounds)

    def at(self, s) -> CellCondition:
        lo, hi = self.table()[s]
        return CellCondition(lo, hi, self.lam, self.n, self.m)

    def restrict(self, labels: Iterable) -> "ConditionFamily":
        t = self.table()
        return ConditionFamily.build(self.lam, self.n, self.m, {s: t[s] for s in labels})

    def with_bounds(self, bounds: Mapping) -> "ConditionFamily":
        return ConditionFamily.build(self.lam, self.n, self.m, bounds)

    def same_shape(self, other: "ConditionFamily") -> bool:
        return (self.lam, self.n, self.m) == (other.lam, other.n, other.m)


def expected_class_radius(cond: CellCondition):
    """Radius of the balls of equivalent centers, or ``None`` for an empty cell."""
    if cond.is_zero_cell or cond.upper is None:
        return INF
    top = cond.heights().top()
    if top is None:
        return None
    return top + cond.m


def _sorted_balls(balls: Iterable[Ball]) -> tuple:
    return tuple(sorted(set(balls), key=lambda b: b.sort_key()))


@dataclass(frozen=True)
class CenterSet:
    """Per label, the finite list of balls of equivalent centers."""

    fibers: tuple  # ((label, (Ball, ...)), ...)

    @classmethod
    def build(cls, mapping: Mapping) -> "CenterSet":
        return cls(tuple((s, _sorted_balls(bs)) for s, bs in mapping.items()))

    def table(self) -> dict:
        return dict(self.fibers)

    def at(self, s) -> tuple:
        return self.table()[s]

    def restrict(self, labels: Iterable) -> "CenterSet":
        t = self.table()
        return CenterSet.build({s: t[s] for s in labels})


# ---------------------------------------------------------------------------
# clustered cells


@dataclass(frozen=True)
class ClusteredCellFam:
    params: ParamSet
    cond: ConditionFamily
    centers: CenterSet

    @property
    def p(self) -> int:
        return self.cond.p

    def condition(self, s) -> CellCondition:
        return self.cond.at(s)

    def rho_max(self, s) -> int:
        return rho_max(self.condition(s))

    def class_radius(self, s):
        return expected_class_radius(self.condition(s))

    def classes(self, s) -> tuple:
        return self.centers.at(s)

    def order(self, s) -> int:
        return len(self.classes(s))

    def class_of(self, s, c: PAdic) -> Ball:
        for b in self.classes(s):
            if ball_member(b, c):
                return b
        raise NotACenterError(f"{c} is not a potential center at {s}")

    def cells(self, s) -> list:
        cond = self.condition(s)
        return [Cell(cond, canonical_point(b)) for b in self.classes(s)]

    def fiber(self, s) -> Decomposition:
        return Decomposition(self.cells(s), self.p)

    def restrict(self, labels: Iterable) -> "ClusteredCellFam":
        ps = self.params.restrict(labels)
        return ClusteredCellFam(ps, self.cond.restrict(ps), self.centers.restrict(ps))

    def tree(self, s) -> "CenterTree":
        return CenterTree(self.classes(s))


@dataclass(frozen=True)
class ClassicalCellFam:
    """A cell condition with one explicit center per label."""

    params: ParamSet
    cond: ConditionFamily
    centers: tuple  # ((label, PAdic), ...)

    @property
    def p(self) -> int:
        return self.cond.p

    def center(self, s) -> PAdic:
        return dict(self.centers)[s]

    def cell(self, s) -> Cell:
        return Cell(self.cond.at(s), self.center(s))

    def fiber(self, s) -> Decomposition:
        return Decomposition([self.cell(s)], self.p)


@dataclass(frozen=True)
class DecompositionFam:
    """An explicit finite union of cells per label."""

    params: ParamSet
    fibers: tuple  # ((label, Decomposition), ...)

    @classmethod
    def build(cls, fibers: Mapping) -> "DecompositionFam":
        return cls(ParamSet(tuple(fibers)), tuple(fibers.items()))

    @property
    def p(self) -> int:
        return self.fibers[0][1].p

    def fiber(self, s) -> Decomposition:
        return dict(self.fibers)[s]


def centers_equivalent(fam: ClusteredCellFam, s, c1: PAdic, c2: PAdic) -> bool:
    return fam.class_of(s, c1) == fam.class_of(s, c2)


# ---------------------------------------------------------------------------
# center trees


class CenterTree:
    """Meet-closure of a finite set of disjoint class balls."""

    def __init__(self, classes: Sequence[Ball]):
        leaves = _sorted_balls(classes)
        if not leaves:
            raise ValueError("a center tree needs at least one class")
        nodes = set(leaves)
        for a, b in itertools.combinations(leaves, 2):
            nodes.add(ball_meet(a, b))
        self.leaves = leaves
        self.nodes = tuple(sorted(nodes, key=lambda b: b.sort_key()))
        self.root = self.nodes[0]
        self._children: dict = {b: [] for b in self.nodes}
        self._parent: dict = {}
        for b in self.nodes:
            if b == self.root:
                continue
            above = [x for x in self.nodes if x != b and ball_contains(x, b)]
            par = max(above, key=lambda x: x.radius)
            self._parent[b] = par
            self._children[par].append(b)
        for v in self._children.values():
            v.sort(key=lambda b: b.sort_key())

    def children(self, b: Ball) -> list:
        return list(self._children[b])

    def parent(self, b: Ball) -> Optional[Ball]:
        return self._parent.get(b)

    def internal_nodes(self) -> list:
        return [b for b in self.nodes if self._children[b]]

    def branching_heights(self) -> list:
        return sorted({b.radius for b in self.internal_nodes()}, reverse=True)

    def node_at(self, c: PAdic, gamma: int) -> Optional[Ball]:
        b = Ball(c, gamma)
        return b if b in self._children and self._children[b] else None

    def successor_count(self, c: PAdic, gamma: int) -> int:
        node = self.node_at(c, gamma)
        return len(self._children[node]) if node is not None else 1

    def shape(self, b: Optional[Ball] = None) -> tuple:
        """Isomorphism type: nested sorted tuples of child shapes."""
        b = self.root if b is None else b
        return tuple(sorted(self.shape(x) for x in self._children[b]))

    def to_dot(self, name: str = "tree") -> str:
        ids = {b: f"n{i}" for i, b in enumerate(self.nodes)}
        lines = [f'digraph "{name}" {{']
        for b in self.nodes:
            kind = "box" if b in self.leaves else "ellipse"
            lines.append(f'  {ids[b]} [label="{b}", shape={kind}];')
        for b in self.nodes:
            for c in self._children[b]:
                lines.append(f"  {ids[b]} -> {ids[c]};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def center_tree(fam: ClusteredCellFam, s) -> CenterTree:
    return fam.tree(s)


def branching_heights(fam: ClusteredCellFam, s) -> list:
    return fam.tree(s).branching_heights()


def successor_count(fam: ClusteredCellFam, s, c: PAdic, gamma: int) -> int:
    fam.class_of(s, c)
    return fam.tree(s).successor_count(c, gamma)


def d_signature(fam: ClusteredCellFam, s, c: PAdic, d: int) -> tuple:
    if d < 1:
        raise ValueError("d must be positive")
    fam.class_of(s, c)
    tree = fam.tree(s)
    hs = tree.branching_heights()
    return tuple(tree.successor_count(c, hs[i]) if i < len(hs) else NEG_INF for i in range(d))


def format_signature(sig: Sequence) -> str:
    return "(" + ",".join("-inf" if k is NEG_INF else str(k) for k in sig) + ")"


# ---------------------------------------------------------------------------
# multi-cells and cell arrays


@dataclass(frozen=True)
class MultiCellFam:
    """Conditions ``C_1..C_r`` plus, per label, class balls for each coordinate
    and the allowed tuples of class indices (one per section type)."""

    params: ParamSet
    conds: tuple
    classes: tuple  # ((label, ((Ball, ...), ...)), ...)
    tuples: tuple  # ((label, ((i_1, ..., i_r), ...)), ...)

    @classmethod
    def build(cls, params, conds: Sequence, classes: Mapping, tuples: Optional[Mapping] = None) -> "MultiCellFam":
        params = params if isinstance(params, ParamSet) else ParamSet(tuple(params))
        conds = tuple(conds)
        cls_t = []
        tup_t = []
        for s in params:
            per = tuple(tuple(bs) for bs in classes[s])
            if len(per) != len(conds):
                raise ValueError(f"classes at {s} do not match the number of conditions")
            cls_t.append((s, per))
            if tuples is None or tuples.get(s) is None:
                allowed = itertools.product(*[range(len(bs)) for bs in per])
            else:
                allowed = tuples[s]
            tup_t.append((s, tuple(sorted(set(tuple(t) for t in allowed)))))
        return cls(params, conds, tuple(cls_t), tuple(tup_t))

    @property
    def p(self) -> int:
        return self.conds[0].p

    @property
    def r(self) -> int:
        return len(self.conds)

    def condition(self, s, i: int) -> CellCondition:
        return self.conds[i].at(s)

    def classes_at(self, s) -> tuple:
        return dict(self.classes)[s]

    def tuples_at(self, s) -> tuple:
        return dict(self.tuples)[s]

    def used_classes(self, s, i: int) -> list:
        used = sorted({t[i] for t in self.tuples_at(s)})
        return [self.classes_at(s)[i][k] for k in used]

    def section_cells(self, s, tup: Sequence[int]) -> list:
        cls_ = self.classes_at(s)
        return [Cell(self.condition(s, i), canonical_point(cls_[i][k])) for i, k in enumerate(tup)]

    def potential_cells(self, s, i: int) -> list:
        cond = self.condition(s, i)
        return [Cell(cond, canonical_point(b)) for b in self.used_classes(s, i)]

    def all_cells(self, s) -> list:
        out = []
        for i in range(self.r):
            out.extend(self.potential_cells(s, i))
        return out

    def fiber(self, s) -> Decomposition:
        tups = self.tuples_at(s)
        if not tups:
            return Decomposition((), self.p)
        return Decomposition(self.section_cells(s, tups[0]), self.p)

    def coordinate(self, i: int) -> ClusteredCellFam:
        return ClusteredCellFam(self.params, self.conds[i], CenterSet.build({s: self.used_classes(s, i) for s in self.params}))

    def restrict(self, labels: Iterable) -> "MultiCellFam":
        ps = self.params.restrict(labels)
        cl = dict(self.classes)
        tu = dict(self.tuples)
        return MultiCellFam(ps, tuple(c.restrict(ps) for c in self.conds), tuple((s, cl[s]) for s in ps), tuple((s, tu[s]) for s in ps))

    def pruned(self) -> "MultiCellFam":
        """Drop classes that no allowed tuple uses and reindex."""
        classes = {}
        tuples = {}
        for s in self.params:
            cls_ = self.classes_at(s)
            tups = self.tuples_at(s)
            maps = []
            newc = []
            for i in range(self.r):
                used = sorted({t[i] for t in tups})
                maps.append({k: j for j, k in enumerate(used)})
                newc.append([cls_[i][k] for k in used])
            classes[s] = newc
            tuples[s] = [tuple(maps[i][t[i]] for i in range(self.r)) for t in tups]
        return MultiCellFam.build(self.params, self.conds, classes, tuples)

    def window_objects(self) -> list:
        return [self.fiber(s) for s in self.params]


CellArrayFam = MultiCellFam


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    condition: str
    label: object
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    # non-fatal observations such as empty fibers
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, condition: str, label, detail: str) -> None:
        self.violations.append(Violation(condition, label, detail))

    def flag(self, condition: str, label, detail: str) -> None:
        self.flags.append(Violation(condition, label, detail))

    def conditions(self) -> set:
        return {v.condition for v in self.violations}

    def __bool__(self):
        return self.ok


class _PairCache:
    def __init__(self):
        self.memo: dict = {}

    def intersect(self, a: Cell, b: Cell) -> bool:
        key = (a, b)
        if key not in self.memo:
            self.memo[key] = self.memo[(b, a)] = cells_intersect(a, b)
        return self.memo[key]


def validate_multicell(fam: MultiCellFam) -> ValidationReport:
    rep = ValidationReport()
    cache = _PairCache()
    for s in fam.params:
        tups = fam.tuples_at(s)
        cls_ = fam.classes_at(s)
        if not tups:
            rep.add("sections", s, "no allowed tuple")
            continue
        for t in tups:
            if len(t) != fam.r or any(not 0 <= k < len(cls_[i]) for i, k in enumerate(t)):
                rep.add("sections", s, f"tuple {t} out of range")
        for i in range(fam.r):
            want = expected_class_radius(fam.condition(s, i))
            for b in fam.used_classes(s, i):
                if want is not None and b.radius != want:
                    rep.add("class-radius", s, f"coordinate {i}: {b} should have radius {format_gamma(want)}")
        if rep.violations and rep.violations[-1].condition == "sections":
            continue
        ref = None
        for t in tups:
            cells = fam.section_cells(s, t)
            for a, b in itertools.combinations(cells, 2):
                if cache.intersect(a, b):
                    rep.add("ii", s, f"section {t} has overlapping cells {a} and {b}")
                    break
            lf = normalize_to_leafform(cells, fam.p)
            if ref is None:
                ref = lf
            elif lf != ref:
                rep.add("i", s, f"section {t} induces a different set than {tups[0]}")
    return rep


def validate_clustered(fam: ClusteredCellFam) -> ValidationReport:
    """Checks conditions (1)-(4) of a clustered cell on every fiber."""
    rep = ValidationReport()
    for s in fam.params:
        _check_cluster_fiber(rep, s, fam.condition(s), fam.classes(s), "")
    return rep


def _check_cluster_fiber(rep: ValidationReport, s, cond: CellCondition, balls: Sequence[Ball], tag: str) -> Optional[int]:
    if cond.is_zero_cell or cond.lower is None or cond.upper is None:
        rep.add("clustered-1", s, f"{tag}needs a 1-cell condition with both bounds")
        return None
    want = expected_class_radius(cond)
    if want is None:
        rep.flag("empty-cell", s, f"{tag}cell condition has no leaves")
        return None
    if not balls:
        rep.add("clustered-4", s, f"{tag}no centers")
        return None
    vals = set()
    for b in balls:
        if b.radius != want:
            rep.add("clustered-4", s, f"{tag}{b} should have radius {want}")
        if ball_member(b, PAdic.zero(b.p)):
            rep.add("iii", s, f"{tag}{b} contains 0")
            continue
        v = b.center.ord
        vals.add(v)
        if v > cond.lower:
            rep.add("clustered-2", s, f"{tag}center valuation {v} exceeds lower bound {cond.lower}")
    if len(vals) > 1:
        rep.add("clustered-3", s, f"{tag}centers have valuations {sorted(vals)}")
    if len(set(balls)) != len(balls):
        rep.add("clustered-4", s, f"{tag}repeated class ball")
    return next(iter(vals)) if len(vals) == 1 else None


def validate_cell_array(fam: MultiCellFam) -> ValidationReport:
    rep = validate_multicell(fam)
    for s in fam.params:
        vals = set()
        for i in range(fam.r):
            v = _check_cluster_fiber(rep, s, fam.condition(s, i), fam.used_classes(s, i), f"coordinate {i}: ")
            if v is not None:
                vals.add(v)
        if len(vals) > 1:
            rep.add("array-ii", s, f"coordinates use center valuations {sorted(vals)}")
        if rep.violations:
            continue
        engine = UnionEngine(fam.fiber(s).cells, fam.p)
        for i in range(fam.r):
            if expected_class_radius(fam.condition(s, i)) is None:
                continue
            top = rho_max(fam.condition(s, i))
            for b in fam.used_classes(s, i):
                mb = engine.maximal_ball(canonical_point(b))
                if mb == WHOLE_SPACE or (isinstance(mb, Ball) and mb.radius < top + 1):
                    rep.add("iv", s, f"coordinate {i}: ball {mb} around {b.center} is wider than radius {top + 1}")
    return rep


# ---------------------------------------------------------------------------
# splitting


def _cells_disjoint(xs: Sequence[Cell], ys: Sequence[Cell], cache: Optional[_PairCache] = None) -> bool:
    cache = cache or _PairCache()
    return not any(cache.intersect(a, b) for a in xs for b in ys)


def _project(fam: MultiCellFam, idx: Sequence[int]) -> MultiCellFam:
    classes = {}
    tuples = {}
    for s in fam.params:
        cl = fam.classes_at(s)
        classes[s] = [cl[i] for i in idx]
        tuples[s] = {tuple(t[i] for i in idx) for t in fam.tuples_at(s)}
    return MultiCellFam.build(fam.params, [fam.conds[i] for i in idx], classes, tuples).pruned()


def split_by_projection(fam: MultiCellFam, k: int):
    """Split after the first ``k`` coordinates, or ``None`` when the two
    projected sets meet."""
    if not 1 <= k < fam.r:
        raise ValueError("need 1 <= k < r")
    a = _project(fam, range(k))
    b = _project(fam, range(k, fam.r))
    cache = _PairCache()
    for s in fam.params:
        if not _cells_disjoint(a.all_cells(s), b.all_cells(s), cache):
            return None
    return a, b


def split_by_definable_choice(fam: MultiCellFam, i: int, canonical: bool = False):
    """Pull coordinate ``i`` (0-based) out as a classical cell family.

    The chosen center per label is the canonical point of the first class in
    canonical order.  Without ``canonical`` the coordinate must have a single
    class in every fiber.
    """
    if not 0 <= i < fam.r:
        raise ValueError("coordinate index out of range")
    centers = {}
    rest_classes = {}
    rest_tuples = {}
    for s in fam.params:
        used = fam.used_classes(s, i)
        if len(used) != 1 and not canonical:
            raise ValueError(f"coordinate {i} has {len(used)} classes at {s}; pass canonical=True to choose one")
        chosen = used[0]
        k = fam.classes_at(s)[i].index(chosen)
        centers[s] = canonical_point(chosen)
        cl = fam.classes_at(s)
        rest_classes[s] = [c for j, c in enumerate(cl) if j != i]
        rest_tuples[s] = {tuple(x for j, x in enumerate(t) if j != i) for t in fam.tuples_at(s) if t[i] == k}
    classical = ClassicalCellFam(fam.params, fam.conds[i], tuple(centers.items()))
    if fam.r == 1:
        return classical, None
    rest = MultiCellFam.build(fam.params, [c for j, c in enumerate(fam.conds) if j != i], rest_classes, rest_tuples)
    return classical, rest.pruned()


# ---------------------------------------------------------------------------
# section search


def partition_tuples(conds: Sequence[CellCondition], classes: Sequence[Sequence[Ball]], target, p: int, cap: int = 200000) -> list:
    """All class-index tuples whose cells are disjoint with union ``target``."""
    target_lf = target if not isinstance(target, (Decomposition, list, tuple)) else normalize_to_leafform(target, p)
    cells = [[Cell(c, canonical_point(b)) for b in bs] for c, bs in zip(conds, classes)]
    inside = {}
    for i, row in enumerate(cells):
        for k, c in enumerate(row):
            inside[i, k] = c.is_zero_cell or not c.is_empty()
    cache = _PairCache()
    out = []
    visited = 0

    def rec(i: int, chosen: list):
        nonlocal visited
        visited += 1
        if visited > cap:
            raise SearchLimitError(f"section search exceeded {cap} nodes")
        if i == len(cells):
            lf = normalize_to_leafform([cells[j][k] for j, k in enumerate(chosen)], p)
            if lf == target_lf:
                out.append(tuple(chosen))
            return
        for k, c in enumerate(cells[i]):
            if not inside[i, k]:
                continue
            if any(cache.intersect(c, cells[j][kk]) for j, kk in enumerate(chosen)):
                continue
            chosen.append(k)
            rec(i + 1, chosen)
            chosen.pop()

    rec(0, [])
    return out
