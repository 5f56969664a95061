import pytest

from pcell.balls import Ball, subballs
from pcell.cells import (
    Cell,
    CellCondition,
    Decomposition,
    OutOfRangeError,
    UndefinedRhoError,
    WrongKindError,
    center_ball,
    cell_member,
    leaf_ball,
    leaf_heights,
    one_cell,
    restrict,
    rho_max,
    zero_cell,
)
from pcell.generators import random_one_cell, rng_for
from pcell.leafform import set_equal
from pcell.oracle import comparison_window, fitted_window, grid_partition_check, grid_set_equal
from pcell.padic import PAdic


def cond(lo, hi, lam=1, n=1, m=1, p=5):
    return CellCondition(lo, hi, PAdic(p, lam), n, m)


def test_cell_member_examples():
    c = Cell(cond(0, 3), PAdic(5, 0))
    assert cell_member(c, PAdic(5, 5))
    assert not cell_member(c, PAdic(5, 10))
    assert not cell_member(c, PAdic(5, 0))
    z = zero_cell(PAdic(5, 2))
    assert cell_member(z, PAdic(5, 2)) and not cell_member(z, PAdic(5, 7))


def test_leaf_heights_examples():
    assert leaf_heights(Cell(cond(0, 7, n=2), PAdic(5, 0))).as_list() == [2, 4, 6]
    assert leaf_heights(Cell(cond(0, 2, n=2), PAdic(5, 0))).as_list() == []
    tail = leaf_heights(Cell(cond(None, 3), PAdic(5, 0)))
    assert not tail.finite and tail.top() == 2 and -100 in tail and 3 not in tail
    with pytest.raises(WrongKindError):
        leaf_heights(zero_cell(PAdic(5, 1)))


def test_leaf_ball_examples():
    c = Cell(cond(0, 7), PAdic(5, 0))
    assert leaf_ball(c, 2) == Ball(PAdic(5, 25), 3)
    c2 = Cell(CellCondition(-1, 3, PAdic(2, 1), 1, 1), PAdic(2, 1))
    assert leaf_ball(c2, 0) == Ball(PAdic(2, 2), 1)
    with pytest.raises(OutOfRangeError):
        leaf_ball(c, 7)


def test_leaf_ball_matches_level_set_on_grid():
    c = Cell(cond(0, 4), PAdic(5, 0))
    leaf = leaf_ball(c, 2)
    g = fitted_window([c], 5)
    at_two = [t for t in g.points() if cell_member(c, t) and t.ord == 2]
    assert at_two and all(t in leaf for t in at_two)
    assert all(cell_member(c, t) for t in g.points() if t in leaf)


def test_rho_max_examples():
    assert rho_max(cond(0, 7, n=2)) == 6
    assert rho_max(cond(0, 5)) == 4
    with pytest.raises(UndefinedRhoError):
        rho_max(cond(0, None))
    with pytest.raises(UndefinedRhoError):
        rho_max(cond(0, 2, n=2))


def test_center_ball_examples():
    assert center_ball(Cell(cond(0, 7, n=2), PAdic(5, 0))) == Ball(PAdic(5, 0), 7)
    assert center_ball(Cell(cond(0, 2), PAdic(5, 0))) == Ball(PAdic(5, 0), 2)


def test_restrict_examples():
    c = Cell(cond(0, 7), PAdic(5, 0))
    r = restrict(c, 2, 5)
    assert (r.lower, r.upper) == (2, 5)
    assert restrict(c, 9, 12).is_empty()
    with pytest.raises(WrongKindError):
        restrict(Cell(cond(None, 3), PAdic(5, 0)), 0, 2)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_random_leaf_partition_and_exchange(p):
    rng = rng_for(7, f"cells-{p}")
    checked = 0
    while checked < 15:
        c = random_one_cell(rng, p, allow_open=False)
        if c.is_empty():
            continue
        hs = leaf_heights(c).as_list()
        leaves = [leaf_ball(c, g) for g in hs]
        g = fitted_window([c], p)
        assert grid_partition_check(leaves, c, g).ok
        top = rho_max(c.condition)
        assert c.upper - c.n <= top <= c.upper - 1
        cb = center_ball(c)
        for k in range(3):
            other = c.recentered(cb.center + PAdic(p, rng.randint(1, 4 * p), cb.radius))
            assert set_equal(Decomposition((c,)), Decomposition((other,)), p)
            assert grid_set_equal(c, other, comparison_window(c, [other], p)).ok
        checked += 1


@pytest.mark.parametrize("delta", [-3, 0, 1, 2, 3, 4, 6])
def test_restrict_conservation(delta):
    c = Cell(cond(0, 4), PAdic(5, 3))
    lo = restrict(c, 0, delta)
    hi = restrict(c, delta - 1, 4)
    g = fitted_window([c], 5)
    assert grid_partition_check([lo, hi], c, g).ok


def test_decomposition_rejects_mixed_primes():
    with pytest.raises(ValueError):
        Decomposition((zero_cell(PAdic(2, 1)), zero_cell(PAdic(3, 1))))


def test_one_cell_helper():
    c = one_cell(PAdic(3, 1), 0, 4, PAdic(3, 2), 2, 1)
    assert c.n == 2 and c.lam == PAdic(3, 2)
    assert [b.radius for b in subballs(Ball(PAdic(3, 0), 0), 1)] == [1, 1, 1]
