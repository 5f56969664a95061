import pytest

from pcell.admissible import PreconditionError
from pcell.balls import Ball, ball_member
from pcell.cells import Cell, CellCondition, Decomposition, cell_member
from pcell.clusters import (
    CenterSet,
    ClassicalCellFam,
    ClusteredCellFam,
    ConditionFamily,
    MultiCellFam,
    ParamSet,
    validate_cell_array,
    validate_clustered,
)
from pcell.differential import check_decompose, check_normalize, check_regularize, check_repartition, random_case
from pcell.family_generators import random_array
from pcell.generators import rng_for
from pcell.leafform import cells_intersect, set_equal
from pcell.oracle import comparison_window, fitted_window, grid_partition_check, grid_set_equal
from pcell.padic import PAdic
from pcell.regular import (
    CondensedArray,
    acprec_pieces,
    check_regular_cluster,
    check_regularity,
    class_disjointness,
    classify,
    cluster_as_array,
    clustered_decompose,
    interval_pieces,
    merge_levels,
    merge_small_exchange,
    normalize_ac,
    order_pieces,
    regularize,
    repartition_acprec,
    repartition_interval,
    repartition_order,
    split_off_cluster,
)


def P(x, p=3, e=0):
    return PAdic(p, x, e)


def cluster(p, bounds, balls, lam=1, n=1, m=1):
    cond = ConditionFamily.build(PAdic(p, lam), n, m, bounds)
    return ClusteredCellFam(ParamSet(tuple(bounds)), cond, CenterSet.build(balls))


def two_class():
    return cluster(3, {"s": (0, 2)}, {"s": [Ball(P(1), 2), Ball(P(4), 2)]})


def mixed_array():
    """Two copies of the two-class condition plus one small single-class one."""
    a = ConditionFamily.build(P(1), 1, 1, {"s": (0, 2)})
    b = ConditionFamily.build(P(1), 1, 1, {"s": (1, 3)})
    cls = [Ball(P(1), 2), Ball(P(4), 2)]
    return MultiCellFam.build(["s"], [a, a, b], {"s": [cls, cls, [Ball(P(1), 3)]]}, {"s": [(0, 1, 0), (1, 0, 0)]})


def single(p, bounds, ball, lam=1):
    cond = ConditionFamily.build(PAdic(p, lam), 1, 1, {"s": bounds})
    return MultiCellFam.build(["s"], [cond], {"s": [[ball]]})


def fiber_equal(a, b, p):
    for s in a.params:
        assert set_equal(a.fiber(s), b.fiber(s), p)
        assert grid_set_equal(a.fiber(s), b.fiber(s), comparison_window(a.fiber(s), [b.fiber(s)], p)).ok


# -- classification -------------------------------------------------------


def test_classify_examples():
    assert classify(two_class()).kind == "small"
    gaps = ConditionFamily.build(P(1), 1, 1, {"a": (0, 3), "b": (0, 5)})
    c = classify(gaps)
    assert (c.kind, c.M, str(c)) == ("bounded", 5, "bounded(5)")
    wide = ConditionFamily.build(P(1), 1, 1, {"a": (0, 11), "b": (-1, 12)})
    assert classify(wide, M=10).kind == "large"


# -- repartitions ---------------------------------------------------------


def test_mixed_array_is_valid():
    assert validate_cell_array(mixed_array()).ok
    ca = CondensedArray.from_array(mixed_array())
    assert ca.multiplicities == [2, 1] and ca.is_legal()


def test_interval_mid():
    arr = single(3, (0, 4), Ball(P(1), 4))
    out = repartition_interval(arr, 0, {"s": 2})
    assert out.r == 2
    assert [(c.lower, c.upper) for c in (out.condition("s", 0), out.condition("s", 1))] == [(0, 2), (1, 4)]
    fiber_equal(arr, out, 3)
    assert validate_cell_array(out).ok


def test_interval_low_delta():
    arr = single(3, (0, 4), Ball(P(1), 4))
    out = repartition_interval(arr, 0, {"s": 1})
    fiber_equal(arr, out, 3)
    nonempty = [out.condition("s", i) for i in range(out.r) if out.condition("s", i).heights().as_list()]
    assert [(c.lower, c.upper) for c in nonempty] == [(0, 4)]


def test_interval_pieces_partition_heights():
    cond = CellCondition(-2, 6, P(1), 2, 1)
    pieces = interval_pieces(cond, [1, 4])
    got = [h for c in pieces for h in c.heights().as_list()]
    assert got == cond.heights().as_list()


def test_interval_keeps_iv_on_random_arrays():
    done = 0
    for seed in range(200):
        arr, op, i, arg = random_case("repartition", seed, (2, 3, 5)[seed % 3])
        if op != "interval":
            continue
        out = repartition_interval(arr, i, arg)
        assert validate_cell_array(out).ok
        done += 1
    assert done >= 40


def test_order_examples():
    arr = single(5, (0, 3), Ball(P(1, 5), 3))
    out = repartition_order(arr, 0, 2)
    assert out.r == 2 and {out.condition("s", i).n for i in range(2)} == {2}
    fiber_equal(arr, out, 5)
    assert repartition_order(arr, 0, 1) == arr
    pieces = order_pieces(CellCondition(0, 3, P(1, 5), 1, 1), 2)
    hits = [cell_member(Cell(c, P(0, 5)), P(5, 5)) for c in pieces]
    assert hits == [False, True]


def test_acprec_examples():
    pieces = acprec_pieces(CellCondition(0, 3, P(1, 5), 1, 1), 1)
    assert sorted(c.lam.ac(2) for c in pieces) == [1, 6, 11, 16, 21]
    assert all(c.m == 2 for c in pieces)
    cells = [Cell(c, P(1, 5)) for c in pieces]
    assert not any(cells_intersect(a, b) for i, a in enumerate(cells) for b in cells[i + 1 :])
    arr = single(5, (0, 3), Ball(P(1, 5), 3))
    assert repartition_acprec(arr, 0, 0) == arr
    out = repartition_acprec(arr, 0, 1)
    assert out.r == 5
    fiber_equal(arr, out, 5)
    # each class splits into p finer classes
    assert all(len(out.used_classes("s", i)) >= 1 for i in range(out.r))


@pytest.mark.parametrize("seed", range(30))
def test_random_repartitions(seed):
    args = random_case("repartition", seed, (2, 3, 5)[seed % 3])
    res = check_repartition(*args)
    assert res.ok, res.detail


# -- regularity -----------------------------------------------------------


def test_regularity_examples():
    assert check_regularity(single(3, (0, 2), Ball(P(1), 2))).ok
    a = ConditionFamily.build(P(1), 1, 1, {"s": (0, 3)})
    b = ConditionFamily.build(P(2), 1, 1, {"s": (1, 4)})
    overlap = MultiCellFam.build(["s"], [a, b], {"s": [[Ball(P(1), 3)], [Ball(P(1), 4)]]})
    assert not check_regularity(overlap).passed("R2")
    wide = cluster(2, {"s": (0, 4)}, {"s": [Ball(PAdic(2, 1), 4), Ball(PAdic(2, 9), 4)]})
    assert not check_regularity(cluster_as_array(wide)).passed("R6")
    assert not check_regular_cluster(wide).passed("R6")


def test_regularity_r1_r4_r5():
    a = ConditionFamily.build(P(1), 1, 1, {"s": (0, 2)})
    b = ConditionFamily.build(P(1), 2, 1, {"s": (1, 3)})
    mixed = MultiCellFam.build(["s"], [a, b], {"s": [[Ball(P(1), 2)], [Ball(P(1), 3)]]})
    assert not check_regularity(mixed).passed("R1")
    copies = MultiCellFam.build(["s"], [a, a], {"s": [[Ball(P(1), 2)], [Ball(P(4), 2)]]})
    assert not check_regularity(copies).passed("R4")
    two = cluster(3, {"s": (0, 2), "t": (0, 2)}, {"s": [Ball(P(1), 2), Ball(P(4), 2)], "t": [Ball(P(1), 2)]})
    assert not check_regular_cluster(two).passed("R5")


def test_regularize_regular_input_is_kept():
    arr = mixed_array()
    out = regularize(arr)
    assert len(out) == 1
    fiber_equal(arr, out[0], 3)
    assert check_regularity(out[0]).ok


@pytest.mark.parametrize("seed", range(25))
def test_regularize_random(seed):
    p = (2, 3, 5)[seed % 3]
    arr = random_array(rng_for(seed, "reg-unit"), p)
    res = check_regularize(arr)
    assert res.ok, res.detail
    for r in regularize(arr):
        assert not class_disjointness(r)


def test_regularize_does_real_work():
    changed = 0
    for seed in range(40):
        arr = random_array(rng_for(seed, "reg-work"), 2)
        if not check_regularity(arr).ok:
            out = regularize(arr)
            assert all(check_regularity(r).ok for r in out)
            changed += 1
    assert changed > 0


# -- split-off, normalization, merge --------------------------------------


def test_split_off_examples():
    arr = mixed_array()
    fam, rest = split_off_cluster(arr, 0)
    assert fam.order("s") == 2 and rest.r == 1
    g = fitted_window([arr.fiber("s")], 3)
    assert grid_partition_check([fam.fiber("s"), rest.fiber("s")], arr.fiber("s"), g).ok
    fam, rest = split_off_cluster(cluster_as_array(two_class()), 0)
    assert rest is None and fam.order("s") == 2
    a = ConditionFamily.build(P(1), 1, 1, {"s": (0, 2)})
    cls = [Ball(P(1), 2), Ball(P(4), 2), Ball(P(7), 2)]
    three = MultiCellFam.build(["s"], [a, a], {"s": [cls, cls]}, {"s": [(i, j) for i in range(3) for j in range(3) if i != j]})
    assert split_off_cluster(three, 0) is None


def test_normalize_lambda_two():
    fam = cluster(5, {"s": (0, 2)}, {"s": [Ball(P(1, 5), 2), Ball(P(3, 5), 2)]}, lam=2)
    out = normalize_ac(fam)
    assert out.cond.lam == P(1, 5)
    assert check_normalize(fam).ok


def test_normalize_lambda_six():
    fam = cluster(5, {"s": (0, 2)}, {"s": [Ball(P(1, 5), 3)]}, lam=6, m=2)
    out = normalize_ac(fam)
    assert out.cond.lam == P(1, 5)
    shift = out.classes("s")[0].center - fam.classes("s")[0].center
    assert shift.ord == 2  # height 1 plus r = ord(6 - 1) = 1
    assert check_normalize(fam).ok


def test_normalize_identity_and_precondition():
    fam = two_class()
    assert normalize_ac(fam) is fam
    shifted = cluster(3, {"s": (0, 2)}, {"s": [Ball(P(1), 2)]}, lam=3)
    with pytest.raises(PreconditionError):
        normalize_ac(shifted)
    wide = cluster(3, {"s": (0, 3)}, {"s": [Ball(P(1), 3)]}, lam=2)
    with pytest.raises(PreconditionError):
        normalize_ac(wide)


@pytest.mark.parametrize("seed", range(30))
def test_normalize_random(seed):
    (fam,) = random_case("normalize", seed, (2, 3, 5)[seed % 3])
    out = normalize_ac(fam)
    assert validate_clustered(out).ok
    res = check_normalize(fam)
    assert res.ok, res.detail


def test_merge_single_height():
    out = merge_small_exchange(cluster_as_array(two_class()))
    assert len(out) == 1 and isinstance(out[0], ClusteredCellFam) and out[0].order("s") == 2


def test_merge_two_heights():
    arr = mixed_array()
    out, trace = merge_small_exchange(arr, with_trace=True)
    assert len(out) == 2 and trace.monotone()
    g = fitted_window([arr.fiber("s")], 3)
    assert grid_partition_check([it.fiber("s") for it in out], arr.fiber("s"), g).ok


def test_merge_levels_full_ball():
    # p=2: four leaves of radius 3 fill B_1(1); height-1 leaves absorb them
    p = 2
    leaves = [Ball(PAdic(p, c), 3) for c in (1, 3, 5, 7)]
    items, measures = merge_levels(p, leaves, [1, 2, 2, 2, 2], 1, 1)
    assert len(items) == 1
    cond, balls = items[0]
    assert cond.heights().as_list() == [1] and len(balls) == 2
    assert measures[0] > 0 and measures[-1] == 0
    cells = [Cell(cond, b.center) for b in balls]
    g = fitted_window([Decomposition(tuple(cells))], p)
    for t in g.points():
        assert any(ball_member(b, t) for b in leaves) == (sum(cell_member(c, t) for c in cells) == 1)


def test_merge_requires_normalized():
    fam = cluster(3, {"s": (0, 2)}, {"s": [Ball(P(1), 2)]}, lam=2)
    with pytest.raises(PreconditionError):
        merge_small_exchange(cluster_as_array(fam))


# -- end to end -----------------------------------------------------------


def test_decompose_single_cell():
    d = Decomposition((Cell(CellCondition(0, 3, P(1, 5), 1, 1), P(0, 5)),))
    res = clustered_decompose(d)
    assert len(res.items) == 1 and isinstance(res.items[0], ClassicalCellFam)
    assert res.items[0].cell("s") == d.cells[0]


def test_decompose_two_class_cluster():
    res = clustered_decompose(cluster_as_array(two_class()))
    assert len(res.items) == 1
    fam = res.items[0]
    assert isinstance(fam, ClusteredCellFam) and fam.order("s") == 2
    assert check_regular_cluster(fam).ok


@pytest.mark.parametrize("seed", range(30))
def test_decompose_random(seed):
    (x,) = random_case("decompose", seed, (2, 3, 5)[seed % 3])
    res = check_decompose(x)
    assert res.ok, res.detail
