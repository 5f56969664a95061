"""Acceptance suite: ten property and oracle checks at desk scale.

Each test records a one-line verdict; ``conftest.py`` prints the lines at
the end of the run, and ``python tests/test_acceptance.py`` prints them
directly.  Primes cycle through 2, 3, 5; every grid stays under 10^6 points.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

from pcell.admissible import decompose_admissible, is_admissible
from pcell.balls import ball_member
from pcell.cells import Decomposition, cell_member, center_ball, leaf_ball, leaf_heights, rho_max
from pcell.clusters import d_signature
from pcell.differential import (
    check_decompose,
    check_normalize,
    check_regularize,
    check_repartition,
    check_set_equal,
    random_case,
)
from pcell.dsl import parse
from pcell.family_generators import random_array
from pcell.generators import random_one_cell, rng_for
from pcell.leafform import set_equal
from pcell.oracle import comparison_window, fitted_window, grid_partition_check, grid_set_equal
from pcell.padic import NEG_INF, PAdic

PRIMES = (2, 3, 5)
FIGURE = Path(__file__).resolve().parents[1] / "docs" / "examples" / "tree_figure.pcell"

ADMISSIBILIZE_RUNS = 500
Y_MIN = 100
LEAF_CELLS = 200
EXCHANGES_PER_CELL = 10
REPARTITIONS_EACH = 200
REGULARIZE_RUNS = 100
NORMALIZE_RUNS = 200
DECOMPOSE_RUNS = 300
SET_EQUAL_PAIRS = 1000

RESULTS: dict = {}


def record(num: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[num] = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


def prime(seed: int) -> int:
    return PRIMES[seed % len(PRIMES)]


# ---------------------------------------------------------------------------
# shared admissibilization runs (criteria 1-3)


class _AdmRuns:
    def __init__(self):
        self.runs = []
        for seed in range(ADMISSIBILIZE_RUNS):
            p = prime(seed)
            (d,) = random_case("admissibilize", seed, p)
            out, trace = decompose_admissible(d, with_trace=True)
            self.runs.append((seed, p, d, out, trace))


@pytest.fixture(scope="module")
def adm_runs():
    return _AdmRuns()


def test_c01_admissibilization_soundness(adm_runs):
    t = time.time()
    bad = []
    for seed, p, d, out, _ in adm_runs.runs:
        ok = is_admissible(out) and set_equal(d, out, p)
        ok = ok and grid_set_equal(d, out, comparison_window(d, [out], p)).ok
        if not ok:
            bad.append(seed)
    n = len(adm_runs.runs)
    record(1, "admissibilization soundness", not bad and n >= 500, f"{n - len(bad)}/{n} admissible and set-equal ({time.time() - t:.1f}s)")
    assert not bad and n >= 500, f"failing seeds {bad[:10]}"


def test_c02_w_strictly_decreases(adm_runs):
    bad = []
    iterations = 0
    for seed, _, _, _, trace in adm_runs.runs:
        w = trace.w_sizes
        iterations += trace.iterations()
        if any(b >= a for a, b in zip(w, w[1:])) or trace.iterations() > (w[0] if w else 0):
            bad.append(seed)
    n = len(adm_runs.runs)
    record(2, "|W| strictly decreasing", not bad, f"{n - len(bad)}/{n} traces, {iterations} iterations")
    assert not bad, f"failing seeds {bad[:10]}"


def _brute_force_y(cell, ball, p):
    g = fitted_window([Decomposition((cell,), p), ball], p)
    return sorted({(t - cell.center).ord for t in g.points() if cell_member(cell, t) and ball_member(ball, t)})


def test_c03_y_progressions(adm_runs):
    from pcell.balls import Ball

    checked = 0
    bad = []
    for seed, p, _, _, trace in adm_runs.runs:
        for step in trace.steps:
            if not step.rule.startswith("case-"):
                continue
            ball = Ball(step.details["center"], step.details["rho"])
            for y in step.details["Y"]:
                cell = step.before.cells[y["index"]]
                brute = _brute_force_y(cell, ball, p)
                checked += 1
                if not (brute == y["formula"] == y["Y"]):
                    bad.append((seed, y["index"]))
    ok = not bad and checked >= Y_MIN
    record(3, "Y equals its progression", ok, f"{checked - len(bad)}/{checked} traced memberships (need {Y_MIN})")
    assert ok, f"mismatches {bad[:10]}, checked {checked}"


# ---------------------------------------------------------------------------
# 4: leaf geometry


def test_c04_leaf_geometry():
    t = time.time()
    rng = rng_for(4, "acceptance-leaves")
    done = 0
    bad = []
    k = 0
    while done < LEAF_CELLS:
        p = prime(k)
        k += 1
        c = random_one_cell(rng, p, allow_open=False)
        if c.is_empty():
            continue
        leaves = [leaf_ball(c, g) for g in leaf_heights(c).as_list()]
        top = rho_max(c.condition)
        ok = c.upper - c.n <= top <= c.upper - 1
        ok = ok and grid_partition_check(leaves, c, fitted_window([c], p)).ok
        cb = center_ball(c)
        single = Decomposition((c,), p)
        for _ in range(EXCHANGES_PER_CELL):
            if not ok:
                break
            sigma = cb.center + PAdic(p, rng.randint(0, p**2 - 1), cb.radius)
            other = c.recentered(sigma)
            ok = set_equal(single, Decomposition((other,), p), p)
            ok = ok and grid_set_equal(c, other, comparison_window(c, [other], p)).ok
        if not ok:
            bad.append(str(c))
        done += 1
    record(
        4,
        "leaf geometry",
        not bad,
        f"{done - len(bad)}/{done} cells, {EXCHANGES_PER_CELL} exchanges each ({time.time() - t:.1f}s)",
    )
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# 5: repartitions


def _repartition_case(op: str, seed: int):
    p = prime(seed)
    rng = rng_for(seed, f"acceptance-{op}-{p}")
    arr = random_array(rng, p)
    i = rng.randrange(arr.r)
    if op == "interval":
        arg = {s: rng.randint(arr.condition(s, i).lower - 1, arr.condition(s, i).upper + 1) for s in arr.params}
    elif op == "order":
        arg = rng.randint(1, 3 if p == 2 else 2)
    else:
        arg = 1 if p == 5 else rng.randint(0, 1)
    return arr, op, i, arg


def test_c05_repartition_conservation():
    t = time.time()
    counts = {}
    bad = []
    for op in ("interval", "order", "acprec"):
        counts[op] = 0
        for seed in range(REPARTITIONS_EACH):
            res = check_repartition(*_repartition_case(op, seed))
            counts[op] += 1
            if not res.ok:
                bad.append((op, seed, res.detail))
    ok = not bad and min(counts.values()) >= 200
    detail = ", ".join(f"{op} {counts[op]}" for op in counts)
    record(5, "repartitions preserve sets", ok, f"{detail}; {len(bad)} failures ({time.time() - t:.1f}s)")
    assert ok, bad[:5]


# ---------------------------------------------------------------------------
# 6: regularization


def test_c06_regularity():
    t = time.time()
    bad = []
    for seed in range(REGULARIZE_RUNS):
        (arr,) = random_case("regularize", seed, prime(seed))
        res = check_regularize(arr)
        if not res.ok:
            bad.append((seed, res.detail))
    record(6, "regularize R1-R6 and partition", not bad, f"{REGULARIZE_RUNS - len(bad)}/{REGULARIZE_RUNS} arrays ({time.time() - t:.1f}s)")
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# 7: signature fixture


def test_c07_signature_fixture():
    fam = parse(FIGURE.read_text()).get("Fig")
    s1, s2 = PAdic(5, 1), PAdic(5, 6)
    got = (d_signature(fam, "s", s1, 3), d_signature(fam, "s", s2, 3), d_signature(fam, "s", s1, 4))
    want = ((3, 1, 2), (2, 3, 2), (3, 1, 2, NEG_INF))
    shown = " ".join("(" + ",".join("-inf" if k is NEG_INF else str(k) for k in sig) + ")" for sig in got)
    record(7, "signature fixture", got == want, shown)
    assert got == want


# ---------------------------------------------------------------------------
# 8: ac normalization


def test_c08_ac_normalization():
    t = time.time()
    bad = []
    for seed in range(NORMALIZE_RUNS):
        (fam,) = random_case("normalize", seed, prime(seed))
        assert fam.cond.lam.ord == 0
        res = check_normalize(fam)
        if not res.ok:
            bad.append((seed, res.detail))
    record(8, "ac normalization", not bad, f"{NORMALIZE_RUNS - len(bad)}/{NORMALIZE_RUNS} clustered cells ({time.time() - t:.1f}s)")
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# 9: end-to-end decomposition


def test_c09_clustered_decomposition():
    t = time.time()
    bad = []
    for seed in range(DECOMPOSE_RUNS):
        (x,) = random_case("decompose", seed, prime(seed))
        res = check_decompose(x)
        if not res.ok:
            bad.append((seed, res.detail))
    record(9, "clustered decomposition shape", not bad, f"{DECOMPOSE_RUNS - len(bad)}/{DECOMPOSE_RUNS} inputs ({time.time() - t:.1f}s)")
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------
# 10: symbolic vs grid


def test_c10_differential_integrity():
    t = time.time()
    bad = []
    equal = 0
    for seed in range(SET_EQUAL_PAIRS):
        a, b = random_case("set-equal", seed, prime(seed))
        res = check_set_equal(a, b)
        equal += bool(res.data.get("equal"))
        if not res.ok:
            bad.append((seed, res.detail))
    record(
        10,
        "set_equal vs grid, stable at +2",
        not bad,
        f"{SET_EQUAL_PAIRS - len(bad)}/{SET_EQUAL_PAIRS} pairs agree, {equal} equal ({time.time() - t:.1f}s)",
    )
    assert not bad, bad[:5]


# ---------------------------------------------------------------------------


def main() -> int:
    runs = _AdmRuns()
    tests = [
        lambda: test_c01_admissibilization_soundness(runs),
        lambda: test_c02_w_strictly_decreases(runs),
        lambda: test_c03_y_progressions(runs),
        test_c04_leaf_geometry,
        test_c05_repartition_conservation,
        test_c06_regularity,
        test_c07_signature_fixture,
        test_c08_ac_normalization,
        test_c09_clustered_decomposition,
        test_c10_differential_integrity,
    ]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    for k in sorted(RESULTS):
        print(RESULTS[k])
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
