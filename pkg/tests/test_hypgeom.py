"""Upper half-plane geometry: actions, invariants, reduction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keyid.errors import DomainError
from keyid.hypgeom import (
    IDENTITY,
    S,
    T,
    GroupElement,
    Point,
    apply,
    distance,
    point_pair_invariant,
    reduce,
)

from conftest import random_gamma0


points = st.builds(
    Point,
    st.floats(min_value=-8.0, max_value=8.0),
    st.floats(min_value=0.05, max_value=12.0),
)


def small_gammas():
    def build(c, d, k):
        if math.gcd(abs(c), abs(d)) != 1:
            return IDENTITY
        if c == 0:
            return GroupElement(1, k, 0, 1)
        a0 = pow(d % abs(c), -1, abs(c)) if abs(c) > 1 else 0
        b0 = (a0 * d - 1) // c
        return GroupElement(a0 + k * c, b0 + k * d, c, d)

    return st.builds(
        build,
        st.integers(min_value=-50, max_value=50),
        st.integers(min_value=-50, max_value=50),
        st.integers(min_value=-3, max_value=3),
    )


class TestPoint:
    def test_rejects_lower_half_plane(self):
        with pytest.raises(DomainError):
            Point(0.0, -1.0)
        with pytest.raises(DomainError):
            Point(0.0, 0.0)

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            Point(math.inf, 1.0)
        with pytest.raises(DomainError):
            Point(0.0, math.nan)


class TestGroupElement:
    def test_unimodular_required(self):
        with pytest.raises(DomainError):
            GroupElement(1, 1, 1, 1)

    def test_canonical_sign(self):
        g = GroupElement(-1, 0, 0, -1)
        assert g.entries == (1, 0, 0, 1)
        g = GroupElement(0, 1, -1, 0)
        assert g.c > 0

    def test_entry_cap(self):
        with pytest.raises(DomainError):
            GroupElement(10**10 + 1, 1, 0, 10**10 + 1)

    def test_inverse_and_product(self):
        g = GroupElement(2, 1, 11, 6)
        assert (g * g.inverse()).is_identity()


class TestApply:
    def test_identity(self):
        z = Point(0.0, 2.0)
        assert apply(IDENTITY, z) == z

    def test_inversion_fixes_i(self):
        z = Point(0.0, 1.0)
        w = apply(S, z)
        assert abs(w.x) < 1e-15 and abs(w.y - 1.0) < 1e-15

    def test_unit_translation(self):
        w = apply(T, Point(0.3, 0.7))
        np.testing.assert_allclose((w.x, w.y), (1.3, 0.7), rtol=1e-15)

    @given(g=small_gammas(), z=points)
    @settings(max_examples=80, deadline=None)
    def test_imaginary_part_relation(self, g, z):
        """Im(gz) |cz+d|^2 = Im(z) to rounding."""
        w = apply(g, z)
        den = abs(complex(g.c * z.x + g.d, g.c * z.y)) ** 2
        assert abs(w.y * den - z.y) <= 1e-12 * z.y


class TestPointPairInvariant:
    def test_coincident(self):
        assert point_pair_invariant(Point(0, 1), Point(0, 1)) == 0.0

    def test_i_2i(self):
        assert point_pair_invariant(Point(0, 1), Point(0, 2)) == 0.125

    def test_group_invariance(self, rng):
        for _ in range(100):
            g = random_gamma0(1, rng)
            z = Point(float(rng.uniform(-2, 2)), float(rng.uniform(0.2, 4)))
            w = Point(float(rng.uniform(-2, 2)), float(rng.uniform(0.2, 4)))
            u1 = point_pair_invariant(z, w)
            u2 = point_pair_invariant(apply(g, z), apply(g, w))
            assert abs(u1 - u2) <= 1e-12 * max(1.0, u1)


class TestDistance:
    def test_imaginary_axis(self):
        np.testing.assert_allclose(
            distance(Point(0, 1), Point(0, 2)), math.log(2.0), rtol=1e-14
        )

    def test_zero_on_diagonal(self):
        assert distance(Point(0.3, 0.8), Point(0.3, 0.8)) == 0.0

    def test_small_separation_stable(self):
        d = distance(Point(0, 1), Point(1e-9, 1))
        np.testing.assert_allclose(d, 1e-9, rtol=1e-6)

    def test_triangle_inequality(self, rng):
        for _ in range(1000):
            a, b, c = (
                Point(float(rng.uniform(-3, 3)), float(rng.uniform(0.1, 5)))
                for _ in range(3)
            )
            assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12

    @given(g=small_gammas(), z=points, w=points)
    @settings(max_examples=60, deadline=None)
    def test_mobius_invariance(self, g, z, w):
        d1 = distance(z, w)
        d2 = distance(apply(g, z), apply(g, w))
        assert abs(d1 - d2) <= 1e-10 * max(1.0, d1)


class TestReduce:
    def test_already_reduced(self):
        z = Point(0.1, 2.0)
        zp, g = reduce(z)
        assert g.is_identity() and zp == z

    def test_translation(self):
        zp, g = reduce(Point(5.1, 2.0))
        np.testing.assert_allclose((zp.x, zp.y), (0.1, 2.0), atol=1e-12)
        assert g.entries == (1, -5, 0, 1)

    def test_round_trip(self, rng):
        for _ in range(1000):
            z = Point(float(rng.uniform(-8, 8)), float(rng.uniform(0.01, 10)))
            zp, g = reduce(z)
            assert abs(zp.x) <= 0.5 + 1e-12
            assert zp.x * zp.x + zp.y * zp.y >= 1.0 - 1e-12
            back = apply(g.inverse(), zp)
            assert abs(back.x - z.x) <= 1e-10 * max(1.0, abs(z.x))
            assert abs(back.y - z.y) <= 1e-10 * z.y

    def test_idempotent(self, rng):
        for _ in range(200):
            z = Point(float(rng.uniform(-5, 5)), float(rng.uniform(0.05, 6)))
            zp, _ = reduce(z)
            zpp, g2 = reduce(zp)
            assert g2.is_identity()
            assert zpp == zp

    def test_boundary_tie_breaks(self):
        zp, _ = reduce(Point(0.5, 3.0))
        assert zp.x == -0.5
        # right half of the unit arc maps into the left half
        x = 0.3
        zp, _ = reduce(Point(x, math.sqrt(1 - x * x)))
        assert zp.x < 0
