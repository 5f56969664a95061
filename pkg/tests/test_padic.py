import random
from fractions import Fraction

import pytest

from pcell.padic import (
    INF,
    NEG_INF,
    PAdic,
    PrimeConfig,
    add,
    angular_component,
    coset_member,
    format_padic,
    negate,
    parse_padic,
    subtract,
    valuation,
)


def test_valuation_examples():
    assert valuation(PAdic(5, 50)) == 2
    assert valuation(PAdic(2, 12)) == 2
    assert valuation(PAdic(3, 0)) is INF
    assert valuation(PAdic.from_fraction(5, Fraction(1, 25))) == -2


def test_angular_component_examples():
    assert angular_component(PAdic(5, 50), 1) == 2
    assert angular_component(PAdic(5, 50), 2) == 2
    assert angular_component(PAdic(2, 12), 2) == 3
    assert angular_component(PAdic(5, 0), 3) == 0
    with pytest.raises(ValueError):
        angular_component(PAdic(5, 1), 0)


def test_coset_member_examples():
    one = PAdic(5, 1)
    assert coset_member(PAdic(5, 150), one, 2, 1)
    assert not coset_member(PAdic(5, 5), one, 2, 1)
    assert coset_member(PAdic(5, 0), PAdic(5, 0), 1, 1)
    assert not coset_member(PAdic(5, 0), one, 1, 1)


def test_arithmetic_examples():
    assert subtract(PAdic(5, 1), PAdic(5, 1)).is_zero()
    d = subtract(PAdic(2, 17), PAdic(2, 1))
    assert d == PAdic(2, 16) and d.ord == 4
    fifth = PAdic.from_fraction(5, Fraction(1, 5))
    assert add(fifth, PAdic.from_fraction(5, Fraction(4, 5))) == PAdic(5, 1)
    assert negate(PAdic(3, 7)) == PAdic(3, -7)


def test_prime_config_rejects_composites():
    PrimeConfig(7)
    for bad in (1, 4, 9, 0):
        with pytest.raises(ValueError):
            PrimeConfig(bad)


def test_from_fraction_rejects_foreign_denominators():
    with pytest.raises(ValueError):
        PAdic.from_fraction(5, Fraction(1, 3))


def test_mixed_primes_rejected():
    with pytest.raises(ValueError):
        PAdic(2, 1) + PAdic(3, 1)


def test_infinity_ordering():
    assert INF > 10**9 and NEG_INF < -(10**9)
    assert min(3, INF) == 3


@pytest.mark.parametrize("text,value", [("3*p^-2", Fraction(3, 25)), ("-7", Fraction(-7)), ("2*p^3", Fraction(250))])
def test_literal_round_trip(text, value):
    x = parse_padic(5, text)
    assert x.to_fraction() == value
    assert parse_padic(5, format_padic(x)) == x


def test_malformed_literal():
    with pytest.raises(ValueError):
        parse_padic(5, "3*q^2")


def _rand(rng, p):
    if rng.random() < 0.1:
        return PAdic(p, 0)
    return PAdic(p, rng.randint(-400, 400), rng.randint(-4, 4))


@pytest.mark.parametrize("p", [2, 3, 5])
def test_properties_randomized(p):
    rng = random.Random(p)
    for _ in range(400):
        x, y = _rand(rng, p), _rand(rng, p)
        # canonical form is idempotent
        assert PAdic(p, x.mantissa, x.exponent) == x
        s = x + y
        assert s.ord >= min(x.ord, y.ord)
        if x.ord != y.ord:
            assert s.ord == min(x.ord, y.ord)
        assert (x - y).to_fraction() == x.to_fraction() - y.to_fraction()
        if x and y:
            m = rng.randint(1, 3)
            assert angular_component(x * y, m) == angular_component(x, m) * angular_component(y, m) % p**m
            for k in range(1, m + 1):
                assert angular_component(x, m) % p**k == angular_component(x, k)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_coset_quotient_compatibility(p):
    rng = random.Random(10 + p)
    for _ in range(300):
        lam = PAdic(p, rng.choice([u for u in range(1, p**2) if u % p]), rng.randint(-2, 2))
        u = PAdic(p, rng.choice([u for u in range(1, p**3) if u % p]), rng.randint(-3, 3))
        x = lam * u
        n, m = rng.randint(1, 3), rng.randint(1, 2)
        assert coset_member(x, lam, n, m) == coset_member(u, PAdic(p, 1), n, m)
