"""Geometry of the hyperbolic upper half-plane.

Points in rectangular coordinates, integral Moebius transformations
modulo sign, the point-pair invariant

    u(z, w) = |z - w|^2 / (4 Im z Im w),

geodesic distance cosh d = 1 + 2u, and reduction into the standard
fundamental domain |x| <= 1/2, |z| >= 1 of the full modular group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# Entry-magnitude cap for group elements; keeps |cz+d| products well inside
# the exact range of double precision when applied to points.
MAX_ENTRY = 10**9

_REDUCE_MAX_ITER = 10_000


@dataclass(frozen=True)
class Point:
    """A point x + iy of the upper half-plane."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite point ({self.x}, {self.y})")
        if self.y <= 0.0:
            raise DomainError(f"point must have y > 0, got y = {self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @staticmethod
    def from_complex(z: complex) -> "Point":
        return Point(z.real, z.imag)

    def __repr__(self):
        return f"Point({self.x!r}, {self.y!r})"


@dataclass(frozen=True)
class GroupElement:
    """An integral unimodular matrix (a b; c d) modulo sign.

    The stored representative is canonical: c > 0, or c == 0 and d > 0.
    """

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise DomainError(
                f"matrix ({self.a},{self.b};{self.c},{self.d}) is not unimodular"
            )
        if max(abs(self.a), abs(self.b), abs(self.c), abs(self.d)) > MAX_ENTRY:
            raise DomainError("matrix entries exceed the configured magnitude cap")
        if self.c < 0 or (self.c == 0 and self.d < 0):
            object.__setattr__(self, "a", -self.a)
            object.__setattr__(self, "b", -self.b)
            object.__setattr__(self, "c", -self.c)
            object.__setattr__(self, "d", -self.d)

    @property
    def entries(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def is_identity(self) -> bool:
        return self.c == 0 and self.b == 0

    def __repr__(self):
        return f"GroupElement({self.a}, {self.b}, {self.c}, {self.d})"


IDENTITY = GroupElement(1, 0, 0, 1)
S = GroupElement(0, -1, 1, 0)   # inversion z -> -1/z
T = GroupElement(1, 1, 0, 1)    # translation z -> z + 1


def apply(g: GroupElement, z: Point) -> Point:
    """Act by the fractional linear transformation z -> (az+b)/(cz+d).

    The imaginary part uses Im(z)/|cz+d|^2 directly; the generic complex
    division cancels catastrophically there for large matrix entries.
    """
    re_den = g.c * z.x + g.d
    im_den = g.c * z.y
    den2 = re_den * re_den + im_den * im_den
    re_num = g.a * z.x + g.b
    x = (re_num * re_den + g.a * z.y * im_den) / den2
    return Point(x, z.y / den2)


def point_pair_invariant(z: Point, w: Point) -> float:
    """u(z, w) = |z-w|^2 / (4 Im z Im w); symmetric, Moebius-invariant."""
    dx = z.x - w.x
    dy = z.y - w.y
    return (dx * dx + dy * dy) / (4.0 * z.y * w.y)


def distance_from_invariant(u: float) -> float:
    """Geodesic distance from the point-pair invariant, cosh d = 1 + 2u.

    For u < 1e-8 the direct arccosh cancels catastrophically; the series
    d = 2 sqrt(u) (1 - u/6 + ...) is exact to double precision there.
    """
    if u < 0.0:
        u = 0.0
    if u < 1e-8:
        r = math.sqrt(u)
        return 2.0 * r * (1.0 - u / 6.0)
    return math.acosh(1.0 + 2.0 * u)


def distance(z: Point, w: Point) -> float:
    return distance_from_invariant(point_pair_invariant(z, w))


def reduce(z: Point) -> tuple[Point, GroupElement]:
    """Reduce z into the fundamental domain of the full modular group.

    Returns (z', g) with z' = g z, |Re z'| <= 1/2 and |z'| >= 1. Boundary
    ties go to the left edge and left half of the unit arc, which makes
    the map deterministic.
    """
    x, y = z.x, z.y
    a, b, c, d = 1, 0, 0, 1
    for _ in range(_REDUCE_MAX_ITER):
        n = round(x)
        if n != 0:
            x -= n
            a, b = a - n * c, b - n * d
        r2 = x * x + y * y
        if r2 < 1.0 - 1e-15:
            # z -> -1/z
            x, y = -x / r2, y / r2
            a, b, c, d = -c, -d, a, b
        else:
            break
    else:
        raise DomainError("fundamental-domain reduction did not terminate")

    # Tie-breaks on the boundary.
    if x > 0.5 - 1e-15:
        x -= 1.0
        a, b = a - c, b - d
    r2 = x * x + y * y
    if abs(r2 - 1.0) <= 1e-15 and x > 1e-15:
        x, y = -x / r2, y / r2
        a, b, c, d = -c, -d, a, b

    return Point(x, y), GroupElement(a, b, c, d)
