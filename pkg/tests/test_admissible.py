import pytest

from pcell.admissible import (
    PreconditionError,
    admissibilize,
    ball_as_zero_centered_cells,
    compute_W,
    cover_ball_case_d3,
    decompose_admissible,
    is_admissible,
    is_preadmissible,
    preadmissibilize,
    preadmissible_violations,
    starred,
)
from pcell.balls import Ball, ball_member
from pcell.cells import Cell, CellCondition, Decomposition, zero_cell
from pcell.generators import random_decomposition, random_tiled_decomposition, rng_for
from pcell.leafform import max_ball_in_union, set_equal
from pcell.oracle import comparison_window, fitted_window, grid_partition_check, grid_set_equal
from pcell.padic import PAdic


def c1(p, center, lo, hi, lam=1, n=1, m=1):
    return Cell(CellCondition(lo, hi, PAdic(p, lam), n, m), PAdic(p, center))


def straddle():
    # B_1(1) = annulus around 1 union annulus around 3, neither alone
    return Decomposition((c1(2, 1, 0, 4), c1(2, 3, 0, 6)))


def annulus_around(p, a, lower):
    return [c1(p, a, lower, None, lam=u) for u in range(1, p)]


def test_zero_centers_are_preadmissible():
    d = Decomposition((c1(5, 0, -1, 3), zero_cell(PAdic(5, 0)), c1(5, 0, None, 0, lam=2)))
    assert is_preadmissible(d)


def test_interior_zero_cell_violates_a():
    d = Decomposition([zero_cell(PAdic(5, 2))] + annulus_around(5, 2, 0))
    assert [v.condition for v in preadmissible_violations(d)] == ["a"]
    g = fitted_window([d], 5)
    assert all(t in d for t in g.points() if ball_member(Ball(PAdic(5, 2), 1), t))


def test_center_above_lower_violates_b():
    assert is_preadmissible(Decomposition((c1(5, 1, 3, 6),)))
    d = Decomposition((c1(5, 625, 3, 6),))
    assert [v.condition for v in preadmissible_violations(d)] == ["b"]


def test_unbounded_below_off_zero_violates_c():
    d = Decomposition((c1(3, 1, None, 2),))
    assert [v.condition for v in preadmissible_violations(d)] == ["c"]


def test_W_examples():
    assert compute_W(Decomposition((c1(3, 1, 0, 4),))) == []
    assert compute_W(Decomposition((c1(3, 0, 0, 4), c1(3, 0, 4, 7)))) == []
    d = straddle()
    assert compute_W(d) == [PAdic(2, 1), PAdic(2, 3)]
    b = max_ball_in_union(Decomposition(starred(d)), PAdic(2, 1))
    assert b == Ball(PAdic(2, 1), 1)
    g = fitted_window([d], 2)
    inside = [t for t in g.points() if ball_member(b, t)]
    assert all(t in d for t in inside)
    for c in d.cells:
        assert any(t not in c for t in inside)


def test_is_admissible_examples():
    assert is_admissible(Decomposition((zero_cell(PAdic(3, 0)),)))
    assert is_preadmissible(straddle()) and not is_admissible(straddle())


def test_preadmissibilize_unchanged_when_compliant():
    d = Decomposition((c1(5, 0, 0, 3),))
    out, trace = preadmissibilize(d)
    assert out == d and len(trace) == 0


def test_preadmissibilize_absorbs_interior_point():
    p = 5
    d = Decomposition([zero_cell(PAdic(p, 2))] + annulus_around(p, 2, 0))
    out, trace = preadmissibilize(d)
    assert is_preadmissible(out) and set_equal(d, out)
    assert trace.steps[0].rule == "zero-cell-interior"
    assert grid_set_equal(d, out, comparison_window(d, [out], p)).ok


def test_preadmissibilize_recenters():
    p = 5
    d = Decomposition((c1(p, 125, 1, 6),))
    out, trace = preadmissibilize(d)
    assert is_preadmissible(out) and set_equal(d, out)
    assert {s.rule for s in trace.steps} == {"recenter"}
    assert any(c.center == PAdic(p, 125) for c in out.cells)
    assert any(c.center.is_zero() for c in out.cells)
    assert grid_set_equal(d, out, comparison_window(d, [out], p)).ok


def test_admissibilize_requires_preadmissible():
    with pytest.raises(PreconditionError):
        admissibilize(Decomposition((c1(5, 625, 3, 6),)))


def test_admissibilize_noop():
    d = Decomposition((c1(3, 0, 0, 4),))
    out, trace = admissibilize(d)
    assert out == d and trace.w_sizes == [0]


def test_admissibilize_straddle():
    d = straddle()
    out, trace = admissibilize(d)
    assert is_admissible(out) and set_equal(d, out)
    w = trace.w_sizes
    assert all(b < a for a, b in zip(w, w[1:])) and trace.iterations() <= w[0]
    assert all(y["ok"] for y in trace.y_checks)
    for step in trace.steps:
        assert set_equal(step.before, step.after)
    assert grid_set_equal(d, out, fitted_window([d, out], 2)).ok


def test_ball_cover_through_zero():
    for p in (2, 3, 5):
        b = Ball(PAdic(p, 0), 2)
        cells = ball_as_zero_centered_cells(b)
        assert len(cells) == 1 + (p - 1) and all(c.center.is_zero() for c in cells)
        assert grid_partition_check(cells, b, fitted_window([b], p)).ok


def test_ball_cover_away_from_zero():
    b = Ball(PAdic(3, 4), 2)
    cells = ball_as_zero_centered_cells(b)
    assert len(cells) == 1 and cells[0].center.is_zero()
    assert grid_set_equal(Decomposition(tuple(cells)), b, fitted_window([b], 3)).ok


def test_case_d3_zeta():
    # B_2(1) straddled by cells around 1 and 5; ord(1) = 0 < rho - m = 1
    d = Decomposition((c1(2, 1, 1, 5), c1(2, 5, 1, 7)))
    b = Ball(PAdic(2, 1), 2)
    assert max_ball_in_union(d, PAdic(2, 1)) == b
    cell = cover_ball_case_d3(list(d.cells), b)
    assert cell is not None
    zeta = cell.center
    assert zeta.ord == PAdic(2, 1).ord and zeta not in d
    assert grid_set_equal(cell, b, fitted_window([b, cell], 2)).ok
    out, trace = admissibilize(d, prefer_d3=True)
    assert is_admissible(out) and set_equal(d, out)


def test_decompose_admissible_examples():
    assert decompose_admissible(Decomposition((), 3)).cells == ()
    d = Decomposition((zero_cell(PAdic(2, 0)), c1(2, 0, None, None)))
    out = decompose_admissible(d)
    assert is_admissible(out) and len(out.cells) == 2 and set_equal(d, out)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_random_decompose_admissible(p):
    rng = rng_for(5, f"adm-{p}")
    for k in range(20):
        d = random_tiled_decomposition(rng, p) if k % 2 else random_decomposition(rng, p)
        out, trace = decompose_admissible(d, with_trace=True)
        assert is_admissible(out) and set_equal(d, out)
        assert grid_set_equal(d, out, comparison_window(d, [out], p)).ok
        for step in trace.steps:
            assert set_equal(step.before, step.after)
