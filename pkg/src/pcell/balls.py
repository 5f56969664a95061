"""Closed balls B_r(a) of Q_p with canonical centers."""

from __future__ import annotations

from dataclasses import dataclass

from .padic import INF, PAdic, ValueGroupElement, format_gamma, format_padic

DEFAULT_ENUMERATION_CAP = 1 << 16


class EnumerationLimitError(RuntimeError):
    """Raised when an enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class Ball:
    """B_radius(center).  The stored center is always the canonical one.

    Two balls denote the same set exactly when their stored fields agree,
    so instances can be hashed and compared directly.
    """

    center: PAdic
    radius: ValueGroupElement

    def __post_init__(self):
        if self.radius is not INF:
            object.__setattr__(self, "center", self.center.residue_mod(self.radius))

    @property
    def p(self) -> int:
        return self.center.p

    def is_point(self) -> bool:
        return self.radius is INF

    def __contains__(self, x: PAdic) -> bool:
        return ball_member(self, x)

    def children(self) -> list["Ball"]:
        return subballs(self, 1)

    def parent(self) -> "Ball":
        if self.radius is INF:
            raise ValueError("a point ball has no parent")
        return Ball(self.center, self.radius - 1)

    def sort_key(self):
        r = self.radius
        return (1 << 62 if r is INF else r, self.center.sort_key())

    def __str__(self):
        return f"B({format_padic(self.center)}, {format_gamma(self.radius)})"

    __repr__ = __str__


def ball(center: PAdic, radius: ValueGroupElement) -> Ball:
    return Ball(center, radius)


def ball_member(b: Ball, x: PAdic) -> bool:
    return (x - b.center).ord >= b.radius


def ball_contains(outer: Ball, inner: Ball) -> bool:
    """``inner`` is a subset of ``outer``."""
    if outer.radius > inner.radius:
        return False
    return (outer.center - inner.center).ord >= outer.radius


def balls_disjoint(a: Ball, b: Ball) -> bool:
    return not (ball_contains(a, b) or ball_contains(b, a))


def ball_meet(b1: Ball, b2: Ball) -> Ball:
    """Smallest ball containing both arguments."""
    r = min(b1.radius, b2.radius, (b1.center - b2.center).ord)
    return Ball(b1.center, r)


def subballs(b: Ball, depth: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Ball]:
    """The ``p**depth`` subballs of radius ``b.radius + depth`` ordered by residue."""
    if b.radius is INF:
        raise ValueError("cannot subdivide a point ball")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    p = b.p
    count = p**depth
    if count > cap:
        raise EnumerationLimitError(f"{count} subballs exceed the cap {cap}")
    return [Ball(b.center + PAdic(p, k, b.radius), b.radius + depth) for k in range(count)]


def canonical_point(b: Ball) -> PAdic:
    return b.center
