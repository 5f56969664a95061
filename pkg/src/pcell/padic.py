"""Exact elements of Z[1/p] with p-adic valuation and angular components."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Union


@total_ordering
class _Infinity:
    """Positive infinity of the value group, absorbing under addition."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("pcell-infinity")

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __add__(self, other):
        if other is NEG_INF:
            raise ArithmeticError("inf + -inf is undefined")
        return self

    __radd__ = __add__

    def __sub__(self, other):
        if other is self:
            raise ArithmeticError("inf - inf is undefined")
        return self

    def __reduce__(self):
        return (_Infinity, ())


@total_ordering
class _NegInfinity:
    """Negative infinity, used to pad signatures and branching-height lists."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEG_INF"

    def __str__(self):
        return "-inf"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("pcell-neg-infinity")

    def __lt__(self, other):
        return other is not self

    def __gt__(self, other):
        return False

    def __reduce__(self):
        return (_NegInfinity, ())


INF = _Infinity()
NEG_INF = _NegInfinity()

ValueGroupElement = Union[int, _Infinity]


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class PrimeConfig:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not is_prime(self.p):
            raise ValueError(f"p must be a prime integer, got {self.p!r}")


def _strip(p: int, mantissa: int, exponent: int) -> tuple[int, int]:
    if mantissa == 0:
        return 0, 0
    while mantissa % p == 0:
        mantissa //= p
        exponent += 1
    return mantissa, exponent


@dataclass(frozen=True, eq=True)
class PAdic:
    """The number ``mantissa * p**exponent``, always kept in canonical form.

    Canonical form means ``p`` does not divide ``mantissa``, or the value is
    zero and stored as ``(0, 0)``.  Equality of instances is value equality.
    """

    p: int
    mantissa: int
    exponent: int = 0

    def __post_init__(self):
        m, e = _strip(self.p, self.mantissa, self.exponent)
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def of(cls, p: int, value: int, exponent: int = 0) -> "PAdic":
        return cls(p, value, exponent)

    @classmethod
    def zero(cls, p: int) -> "PAdic":
        return cls(p, 0, 0)

    @classmethod
    def power(cls, p: int, e: int) -> "PAdic":
        return cls(p, 1, e)

    @classmethod
    def from_fraction(cls, p: int, q: Fraction) -> "PAdic":
        den = q.denominator
        e = 0
        while den % p == 0:
            den //= p
            e -= 1
        if den != 1:
            raise ValueError(f"{q} is not in Z[1/{p}]")
        return cls(p, q.numerator, e)

    # -- basic invariants -------------------------------------------------
    def is_zero(self) -> bool:
        return self.mantissa == 0

    def __bool__(self):
        return self.mantissa != 0

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa * self.p**self.exponent)
        return Fraction(self.mantissa, self.p ** (-self.exponent))

    def _coerce(self, other) -> "PAdic":
        if isinstance(other, PAdic):
            if other.p != self.p:
                raise ValueError(f"mixed primes {self.p} and {other.p}")
            return other
        if isinstance(other, int):
            return PAdic(self.p, other, 0)
        return NotImplemented

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.mantissa == 0:
            return other
        if other.mantissa == 0:
            return self
        e = min(self.exponent, other.exponent)
        m = self.mantissa * self.p ** (self.exponent - e) + other.mantissa * self.p ** (other.exponent - e)
        return PAdic(self.p, m, e)

    __radd__ = __add__

    def __neg__(self):
        return PAdic(self.p, -self.mantissa, self.exponent)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return PAdic(self.p, self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def shift(self, k: int) -> "PAdic":
        """Multiply by ``p**k``."""
        if self.mantissa == 0:
            return self
        return PAdic(self.p, self.mantissa, self.exponent + k)

    # -- ordering (real value, used only for canonical tie-breaking) --------
    def __lt__(self, other):
        other = self._coerce(other)
        return self.to_fraction() < other.to_fraction()

    def __le__(self, other):
        other = self._coerce(other)
        return self.to_fraction() <= other.to_fraction()

    def __gt__(self, other):
        other = self._coerce(other)
        return self.to_fraction() > other.to_fraction()

    def __ge__(self, other):
        other = self._coerce(other)
        return self.to_fraction() >= other.to_fraction()

    def sort_key(self) -> Fraction:
        return self.to_fraction()

    # -- p-adic data --------------------------------------------------------
    @property
    def ord(self) -> ValueGroupElement:
        return INF if self.mantissa == 0 else self.exponent

    def ac(self, m: int) -> int:
        return angular_component(self, m)

    def residue_mod(self, r: int) -> "PAdic":
        """Least non-negative representative of the class of ``self`` modulo ``p**r``."""
        if self.mantissa == 0 or self.exponent >= r:
            return PAdic(self.p, 0, 0)
        return PAdic(self.p, self.mantissa % self.p ** (r - self.exponent), self.exponent)

    def __str__(self):
        return format_padic(self)

    def __repr__(self):
        return f"PAdic(p={self.p}, {format_padic(self)})"


def valuation(x: PAdic) -> ValueGroupElement:
    return x.ord


def angular_component(x: PAdic, m: int) -> int:
    if m < 1:
        raise ValueError("ac_m needs m >= 1")
    if x.mantissa == 0:
        return 0
    return x.mantissa % (x.p**m)


def coset_member(x: PAdic, lam: PAdic, n: int, m: int) -> bool:
    """Is ``x`` in ``lam * Q_{n,m}``?  With ``lam = 0`` this is ``x == 0``."""
    if lam.is_zero():
        return x.is_zero()
    if x.is_zero():
        return False
    return (x.exponent - lam.exponent) % n == 0 and angular_component(x, m) == angular_component(lam, m)


def add(x: PAdic, y: PAdic) -> PAdic:
    return x + y


def subtract(x: PAdic, y: PAdic) -> PAdic:
    return x - y


def negate(x: PAdic) -> PAdic:
    return -x


def unit_with(p: int, exponent: int, residue: int) -> PAdic:
    """The element ``residue * p**exponent`` (``residue`` is a unit residue)."""
    return PAdic(p, residue, exponent)


_LITERAL = re.compile(r"^\s*([+-]?\d+)\s*(?:\*\s*p\s*\^\s*([+-]?\d+)\s*)?$")


def parse_padic(p: int, text: str) -> PAdic:
    """Parse ``<int>`` or ``<int>*p^<int>``."""
    m = _LITERAL.match(text)
    if not m:
        raise ValueError(f"malformed p-adic literal: {text!r}")
    mant = int(m.group(1))
    exp = int(m.group(2)) if m.group(2) is not None else 0
    return PAdic(p, mant, exp)


def format_padic(x: PAdic) -> str:
    if x.mantissa == 0:
        return "0"
    if x.exponent == 0:
        return str(x.mantissa)
    if x.exponent > 0 and abs(x.mantissa) * x.p**x.exponent < 10**6:
        return str(x.mantissa * x.p**x.exponent)
    return f"{x.mantissa}*p^{x.exponent}"


def format_gamma(g) -> str:
    if g is INF:
        return "inf"
    if g is NEG_INF:
        return "-inf"
    return str(g)
