"""Pre-admissible and admissible decompositions.

``preadmissibilize`` removes interior 0-cells away from the origin and
recenters every cell that has a lower-bound problem at 0.  ``admissibilize``
then empties W, the set of nonzero centers whose maximal ball inside the
union of the bounded cells straddles several of those cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .balls import Ball, balls_disjoint
from .cells import Cell, CellCondition, Decomposition, cell_member, leaf_ball, restrict
from .leafform import EMPTY, FULL, WHOLE_SPACE, UnionEngine, cell_ball_status
from .padic import PAdic, angular_component

RULES = ("zero-cell-interior", "recenter", "case-d1", "case-d2", "case-d3", "restrict")


class PreconditionError(ValueError):
    pass


@dataclass
class TraceStep:
    rule: str
    before: Decomposition
    after: Decomposition
    w_before: int
    w_after: int
    iteration: Optional[int] = None
    details: dict = field(default_factory=dict)


@dataclass
class AdmissibilizeTrace:
    steps: list = field(default_factory=list)
    w_sizes: list = field(default_factory=list)
    y_checks: list = field(default_factory=list)

    def add(self, step: TraceStep) -> None:
        self.steps.append(step)

    def __len__(self):
        return len(self.steps)

    def extend(self, other: "AdmissibilizeTrace") -> None:
        self.steps.extend(other.steps)
        self.w_sizes.extend(other.w_sizes)
        self.y_checks.extend(other.y_checks)

    def iterations(self) -> int:
        return max(0, len(self.w_sizes) - 1)


@dataclass(frozen=True)
class Violation:
    index: int
    condition: str
    cell: Cell


# ---------------------------------------------------------------------------
# predicates


def _nonempty_cells(cells) -> list:
    return [c for c in cells if c.is_zero_cell or not c.is_empty()]


def starred(d: Decomposition) -> list:
    """The bounded 1-cells with nonzero center."""
    return [
        c
        for c in d.cells
        if not c.is_zero_cell and not c.center.is_zero() and c.lower is not None and c.upper is not None
    ]


def preadmissible_violations(d: Decomposition) -> list:
    out = []
    engine = None
    for i, c in enumerate(d.cells):
        if c.is_zero_cell:
            if c.center.is_zero():
                continue
            if engine is None:
                engine = UnionEngine(d.cells, d.p)
            if engine.is_interior(c.center):
                out.append(Violation(i, "a", c))
            continue
        if c.center.is_zero():
            continue
        if c.lower is None:
            out.append(Violation(i, "c", c))
        elif c.center.ord > c.lower:
            out.append(Violation(i, "b", c))
    return out


def is_preadmissible(d: Decomposition) -> bool:
    return not preadmissible_violations(d)


def compute_W(d: Decomposition) -> list:
    star = starred(d)
    if not star:
        return []
    engine = UnionEngine(star, d.p)
    out = []
    seen = set()
    for c in star:
        s = c.center
        if s in seen:
            continue
        seen.add(s)
        b = engine.maximal_ball(s)
        if not isinstance(b, Ball):
            continue
        if not any(cell_ball_status(x, b) == FULL for x in star):
            out.append(s)
    out.sort(key=lambda x: x.sort_key())
    return out


def is_admissible(d: Decomposition) -> bool:
    return is_preadmissible(d) and not compute_W(d)


# ---------------------------------------------------------------------------
# building blocks


def ball_as_cell(b: Ball, zeta: PAdic) -> Cell:
    """B_r(s) written as {ord(t - zeta) = r - 1, t - zeta in (s - zeta) Q_{1,1}}."""
    lam = b.center - zeta
    if lam.ord != b.radius - 1:
        raise ValueError("zeta must satisfy ord(center - zeta) = radius - 1")
    return Cell(CellCondition(b.radius - 2, b.radius, lam, 1, 1), zeta)


def ball_as_zero_centered_cells(b: Ball) -> list:
    """Cover a ball by cells centered at 0 (the two cases used for W)."""
    p = b.p
    zero = PAdic.zero(p)
    if (b.center).ord >= b.radius:
        cells = [Cell(CellCondition(None, None, zero, 1, 1), zero)]
        for mu in range(1, p):
            cells.append(Cell(CellCondition(b.radius - 1, None, PAdic(p, mu), 1, 1), zero))
        return cells
    s = b.center
    m = b.radius - s.ord
    return [Cell(CellCondition(s.ord - 1, s.ord + 1, s, 1, m), zero)]


def cover_ball_case_d3(star_cells: list, b: Ball) -> Optional[Cell]:
    """Cover ``b`` by one cell centered at a point of B_{r-1} outside the union."""
    p = b.p
    engine = UnionEngine(star_cells, p)
    target = Ball(b.center, b.radius - 1)
    for k in range(1, p):
        sub = Ball(b.center + PAdic(p, k, b.radius - 1), b.radius)
        zeta = engine.point_outside(sub)
        if zeta is not None:
            return ball_as_cell(b, zeta)
    zeta = engine.point_outside(target)
    if zeta is None or (b.center - zeta).ord != b.radius - 1:
        return None
    return ball_as_cell(b, zeta)


def _recenter_pieces(c: Cell) -> list:
    """Split a nonzero-centered 1-cell into D^sigma and cells centered at 0."""
    cond = c.condition
    p = c.p
    s = c.center
    zero = PAdic.zero(p)
    h = s.ord
    lam, n, m = cond.lam, cond.n, cond.m
    a_lam = angular_component(lam, m)
    lo, hi = cond.lower, cond.upper

    def clip(lower, upper):
        if lo is not None:
            lower = lo if lower is None else max(lower, lo)
        if hi is not None:
            upper = hi if upper is None else min(upper, hi)
        return lower, upper

    out = []
    # heights above ord(sigma) keep the center
    lw, up = clip(h, None)
    out.append(Cell(CellCondition(lw, up, lam, n, m), s))
    # heights <= ord(sigma) - m: same coset around 0
    lw, up = clip(None, h - m + 1)
    out.append(Cell(CellCondition(lw, up, lam, n, m), zero))
    # heights ord(sigma) - i for 0 < i < m
    su = s.mantissa
    for i in range(1, m):
        g = h - i
        if not cond.admits_height(g):
            continue
        mu = (a_lam + su * p**i) % p**m
        out.append(Cell(CellCondition(g - 1, g + 1, PAdic(p, mu, g), n, m), zero))
    # height ord(sigma)
    if cond.admits_height(h):
        w = (a_lam + su) % p**m
        if w:
            k = 0
            while w % p == 0:
                w //= p
                k += 1
            g = h + k
            out.append(Cell(CellCondition(g - 1, g + 1, PAdic(p, w % p ** (m - k), g), n, m - k), zero))
        else:
            out.append(Cell(CellCondition(None, None, zero, 1, 1), zero))
            for r in range(1, p):
                out.append(Cell(CellCondition(h + m - 1, None, PAdic(p, r), 1, 1), zero))
    return _nonempty_cells(out)


# ---------------------------------------------------------------------------
# transformations


def preadmissibilize(d: Decomposition):
    p = d.p
    trace = AdmissibilizeTrace()
    cur = Decomposition(_nonempty_cells(d.cells), p)
    # (a): interior 0-cells away from the origin
    while True:
        viol = [v for v in preadmissible_violations(cur) if v.condition == "a"]
        if not viol:
            break
        j = viol[0].index
        sj = cur.cells[j].center
        others = [c for i, c in enumerate(cur.cells) if i != j]
        if any(not c.is_zero_cell and cell_member(c, sj) for c in others):
            nxt = Decomposition(others, p)
            detail = {"point": sj, "absorbed_by_cell": True}
        else:
            c1 = [
                i
                for i, c in enumerate(cur.cells)
                if i != j and ((c.is_zero_cell and c.center == sj) or (not c.is_zero_cell and c.center == sj and c.upper is None))
            ]
            xprime = [cur.cells[j]] + [cur.cells[i] for i in c1]
            mb = UnionEngine(xprime, p).maximal_ball(sj)
            if mb == WHOLE_SPACE:
                gamma = sj.ord
            elif isinstance(mb, Ball):
                gamma = mb.radius
            else:
                raise AssertionError("interior point without a ball in X'")
            zeta = (sj + PAdic(p, 1, gamma - 1)).residue_mod(gamma)
            dz = ball_as_cell(Ball(sj, gamma), zeta)
            new = [dz]
            for i, c in enumerate(cur.cells):
                if i == j:
                    continue
                if i in c1:
                    if c.is_zero_cell:
                        continue
                    new.append(Cell(c.condition.with_bounds(c.lower, gamma), c.center))
                else:
                    new.append(c)
            nxt = Decomposition(_nonempty_cells(new), p)
            detail = {"point": sj, "gamma": gamma, "zeta": zeta}
        trace.add(TraceStep("zero-cell-interior", cur, nxt, -1, -1, None, detail))
        cur = nxt
    # (b), (c): recenter at 0
    while True:
        viol = [v for v in preadmissible_violations(cur) if v.condition in ("b", "c")]
        if not viol:
            break
        j = viol[0].index
        pieces = _recenter_pieces(cur.cells[j])
        nxt = Decomposition(list(cur.cells[:j]) + pieces + list(cur.cells[j + 1 :]), p)
        trace.add(TraceStep("recenter", cur, nxt, -1, -1, None, {"index": j, "condition": viol[0].condition}))
        cur = nxt
    return cur, trace


def _heights_meeting(c: Cell, b: Ball) -> list:
    return [g for g in c.condition.heights().as_list() if not balls_disjoint(leaf_ball(c, g), b)]


def _minimal_cover(cells: list, idx: list, b: Ball, p: int) -> list:
    chosen = [i for i in idx if cell_ball_status(cells[i], b) != EMPTY]
    for i in list(chosen):
        rest = [k for k in chosen if k != i]
        if rest and UnionEngine([cells[k] for k in rest], p).status(b) == FULL:
            chosen = rest
    return chosen


def admissibilize(d: Decomposition, max_iterations: Optional[int] = None, prefer_d3: bool = False):
    """Empty W one center at a time.

    Over Q_p a ball missing 0 always has the form used by case d2, so the
    d3 branch only runs when ``prefer_d3`` asks for it.
    """
    if not is_preadmissible(d):
        raise PreconditionError("admissibilize needs a pre-admissible decomposition")
    p = d.p
    trace = AdmissibilizeTrace()
    cur = Decomposition(_nonempty_cells(d.cells), p)
    w = compute_W(cur)
    trace.w_sizes.append(len(w))
    limit = len(w) if max_iterations is None else max_iterations
    it = 0
    while w:
        if it >= max(limit, 1) + 1:
            raise AssertionError("W did not shrink as expected")
        s0 = w[0]
        cells = list(cur.cells)
        star_idx = [
            i for i, c in enumerate(cells)
            if not c.is_zero_cell and not c.center.is_zero() and c.lower is not None and c.upper is not None
        ]
        star = [cells[i] for i in star_idx]
        b = UnionEngine(star, p).maximal_ball(s0)
        rho = b.radius
        jprime = _minimal_cover(cells, star_idx, b, p)
        restricted = []
        ys = []
        for j in jprime:
            c = cells[j]
            y = _heights_meeting(c, b)
            g1, g2 = min(y), max(y)
            formula = [g for g in range(g1, g2 + 1) if (g - c.lam.exponent) % c.n == 0]
            ys.append({"index": j, "Y": y, "gamma1": g1, "gamma2": g2, "formula": formula, "ok": y == formula})
            restricted.append(restrict(c, c.lower, g1))
            restricted.append(restrict(c, g2, c.upper))
        trace.y_checks.extend(ys)
        got = None
        if s0.ord < rho and prefer_d3:
            got = cover_ball_case_d3(star, b)
        if got is not None:
            rule, cover = "case-d3", [got]
        elif s0.ord >= rho:
            rule, cover = "case-d1", ball_as_zero_centered_cells(b)
        else:
            rule, cover = "case-d2", ball_as_zero_centered_cells(b)
        mid = Decomposition(cells + cover, p)
        trace.add(TraceStep(rule, cur, mid, len(w), len(w), it, {"center": s0, "rho": rho, "J'": jprime, "Y": ys}))
        keep = [c for i, c in enumerate(cells) if i not in jprime]
        nxt = Decomposition(_nonempty_cells(keep + restricted + cover), p)
        w_next = compute_W(nxt)
        trace.add(TraceStep("restrict", mid, nxt, len(w), len(w_next), it, {"J'": jprime}))
        trace.w_sizes.append(len(w_next))
        cur, w = nxt, w_next
        it += 1
    return cur, trace


def decompose_admissible(d: Decomposition, with_trace: bool = False):
    pre, t1 = preadmissibilize(d)
    out, t2 = admissibilize(pre)
    if with_trace:
        t1.extend(t2)
        return out, t1
    return out
