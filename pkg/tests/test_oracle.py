import pytest

from pcell.balls import Ball, subballs
from pcell.cells import Cell, CellCondition, Decomposition
from pcell.clusters import validate_cell_array, validate_clustered
from pcell.generators import random_instance
from pcell.oracle import (
    GridSpec,
    WindowTooLargeError,
    default_window,
    fitted_window,
    grid_partition_check,
    grid_points_in,
    grid_set_equal,
)
from pcell.padic import PAdic


def test_default_window_single_cell():
    c = Cell(CellCondition(0, 3, PAdic(5, 1), 1, 1), PAdic(5, 0))
    g = default_window([c], 5, cap=10**12, check=False)
    assert g.vmin <= -3 and g.vmax >= 4 and g.digits >= 9


def test_default_window_empty():
    g = default_window([], 5, cap=10**12, check=False)
    assert (g.vmin, g.vmax, g.digits) == (-4, 4, 9)


def test_window_cap_error():
    with pytest.raises(WindowTooLargeError):
        default_window([], 5)


def test_window_covers_leaf_heights():
    c = Cell(CellCondition(-2, 3, PAdic(3, 2), 2, 1), PAdic(3, 1))
    g = fitted_window([c], 3)
    assert g.vmin < -2 and g.vmax >= 3


def test_grid_size_formula():
    g = GridSpec(3, -1, 1, 2)
    assert g.size() == 3 * (9 - 3) + 1 == len(list(g.points()))


def test_grid_set_equal_examples():
    p = 5
    b2, b3 = Ball(PAdic(p, 0), 2), Ball(PAdic(p, 0), 3)
    g = fitted_window([b2, b3], p)
    assert grid_set_equal(b2, b2, g).ok
    v = grid_set_equal(b2, b3, g)
    assert not v.ok and v.counterexample == PAdic(p, 25)


def test_partition_examples():
    b = Ball(PAdic(3, 1), 0)
    g = fitted_window([b], 3)
    assert grid_partition_check(subballs(b, 1), b, g).ok
    parts = subballs(b, 1) + [Ball(PAdic(3, 1), 1)]
    v = grid_partition_check(parts, b, g)
    assert not v.ok and v.reason == "point in several parts"


def test_counterexample_is_genuine():
    p = 2
    a = Decomposition((Cell(CellCondition(0, 4, PAdic(p, 1), 1, 2), PAdic(p, 0)),))
    b = Decomposition((Cell(CellCondition(0, 4, PAdic(p, 3), 1, 2), PAdic(p, 0)),))
    v = grid_set_equal(a, b, fitted_window([a, b], p))
    assert not v.ok and ((v.counterexample in a) != (v.counterexample in b))


def test_enlarged_keeps_extra_points():
    g = GridSpec(2, 0, 2, 2).with_points([PAdic(2, -3)])
    assert PAdic(2, -3) in list(g.enlarged(2).points())


def test_points_in_matches_membership():
    c = Cell(CellCondition(0, 3, PAdic(3, 1), 1, 1), PAdic(3, 0))
    g = fitted_window([c], 3)
    assert grid_points_in(c, g) == [t for t in g.points() if t in c]


@pytest.mark.parametrize("kind", ["cell", "decomposition", "cluster", "array"])
def test_random_instance_is_deterministic(kind):
    assert random_instance(kind, 42, p=3) == random_instance(kind, 42, p=3)


def test_decomposition_centers_inside_default_window():
    for seed in range(100):
        p = (2, 3, 5)[seed % 3]
        d = random_instance("decomposition", seed, p=p)
        g = default_window([d], p, cap=10**15, check=False)
        for c in d.cells:
            assert c.center.is_zero() or g.vmin <= c.center.ord <= g.vmax


def test_500_valid_instances():
    for seed in range(500):
        p = (2, 3, 5)[seed % 3]
        assert validate_cell_array(random_instance("array", seed, p=p)).ok
        assert validate_clustered(random_instance("cluster", seed, p=p)).ok
