"""Exact interval arithmetic on rational endpoints.

All frequency-space geometry (cube centers, adjusted intervals, tree top
windows) is carried out on Fraction endpoints so that containment,
disjointness and distance predicates are decided exactly.  Floating point
enters only when symbols or signals are evaluated.
"""

from __future__ import annotations

from fractions import Fraction


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(1 << 60) if not x.is_integer() else Fraction(int(x))
    return Fraction(x)


class Interval:
    """Closed interval [a, b] with exact rational endpoints."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        a = frac(a)
        b = frac(b)
        if b < a:
            raise ValueError(f"empty interval [{a}, {b}]")
        self.a = a
        self.b = b

    @property
    def length(self) -> Fraction:
        return self.b - self.a

    @property
    def center(self) -> Fraction:
        return (self.a + self.b) / 2

    def dilate(self, factor) -> "Interval":
        """Interval with the same center and `factor` times the length."""
        c = self.center
        h = self.length * frac(factor) / 2
        return Interval(c - h, c + h)

    def shift(self, t) -> "Interval":
        t = frac(t)
        return Interval(self.a + t, self.b + t)

    def scale(self, t) -> "Interval":
        """Image under x -> t*x (t may be negative)."""
        t = frac(t)
        lo, hi = self.a * t, self.b * t
        return Interval(min(lo, hi), max(lo, hi))

    def contains(self, other: "Interval") -> bool:
        return self.a <= other.a and other.b <= self.b

    def contains_point(self, x) -> bool:
        x = frac(x)
        return self.a <= x <= self.b

    def intersects(self, other: "Interval") -> bool:
        return not (other.b < self.a or self.b < other.a)

    def intersects_open(self, other: "Interval") -> bool:
        """Overlap of positive length (boundary touching does not count)."""
        return not (other.b <= self.a or self.b <= other.a)

    def dist(self, other: "Interval") -> Fraction:
        if self.intersects(other):
            return Fraction(0)
        if other.a > self.b:
            return other.a - self.b
        return self.a - other.b

    def dist_point(self, x) -> Fraction:
        x = frac(x)
        if x < self.a:
            return self.a - x
        if x > self.b:
            return x - self.b
        return Fraction(0)

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.a, other.a), max(self.b, other.b))

    def __eq__(self, other):
        return isinstance(other, Interval) and self.a == other.a and self.b == other.b

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        return f"Interval({self.a}, {self.b})"


def hull_of(intervals) -> Interval:
    its = list(intervals)
    return Interval(min(iv.a for iv in its), max(iv.b for iv in its))


def merge_intervals(intervals) -> list[Interval]:
    """Union of closed intervals as a sorted list of disjoint intervals.

    Touching endpoints are coalesced.
    """
    its = sorted(intervals, key=lambda iv: (iv.a, iv.b))
    out: list[Interval] = []
    for iv in its:
        if out and iv.a <= out[-1].b:
            if iv.b > out[-1].b:
                out[-1] = Interval(out[-1].a, iv.b)
        else:
            out.append(Interval(iv.a, iv.b))
    return out


def dyadic_str(x) -> str:
    """Serialize a dyadic rational as "p/2^q" (q minimal, q >= 0)."""
    x = frac(x)
    den = x.denominator
    q = den.bit_length() - 1
    if (1 << q) != den:
        raise ValueError(f"{x} is not a dyadic rational")
    return f"{x.numerator}/2^{q}"


def parse_dyadic(s: str) -> Fraction:
    p, q = s.split("/2^")
    return Fraction(int(p), 1 << int(q))


def is_dyadic(x) -> bool:
    d = frac(x).denominator
    return (d & (d - 1)) == 0
