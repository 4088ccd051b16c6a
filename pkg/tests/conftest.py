"""Shared oracles and generators for the test suite."""

import math

import numpy as np
import pytest

from keyid.fuchsian import GroupSpec
from keyid.hypgeom import GroupElement, Point, apply, distance


def random_point(rng, y_lo=0.3, y_hi=3.0):
    return Point(float(rng.uniform(-3.0, 3.0)), float(rng.uniform(y_lo, y_hi)))


def random_gamma0(level: int, rng, entry_bound: int = 8) -> GroupElement:
    """A random element of Gamma_0(level) with smallish entries."""
    while True:
        c = level * int(rng.integers(-entry_bound, entry_bound + 1))
        d = int(rng.integers(-3 * entry_bound, 3 * entry_bound + 1))
        if math.gcd(abs(c), abs(d)) != 1:
            continue
        if c == 0:
            if abs(d) != 1:
                continue
            b = int(rng.integers(-entry_bound, entry_bound + 1))
            return GroupElement(d, b * d, 0, d)
        a0 = pow(d % abs(c), -1, abs(c)) if abs(c) > 1 else 0
        b0 = (a0 * d - 1) // c
        if a0 * d - b0 * c == 1:
            k = int(rng.integers(-2, 3))
            return GroupElement(a0 + k * c, b0 + k * d, c, d)


def box_enumerate(level: int, z: Point, R: float) -> set[tuple[int, int, int, int]]:
    """Brute-force box oracle for {gamma : d(z, gamma z) <= R} mod +-I.

    Entry bounds follow from |cz+d|^2 <= e^R and the unimodular relation;
    boxes are padded generously and membership decided by the same
    distance function as the production path.
    """
    e_half = math.exp(R / 2.0)
    out = set()
    cmax = int(e_half / z.y) + 2
    for c in range(0, cmax + 1):
        if c % level != 0:
            continue
        if c == 0:
            bmax = int(2.0 * z.y * math.sinh(R / 2.0)) + 2
            for b in range(-bmax, bmax + 1):
                if distance(z, apply(GroupElement(1, b, 0, 1), z)) <= R:
                    out.add((1, b, 0, 1))
            continue
        dmax = int(c * abs(z.x) + e_half) + 2
        for d in range(-dmax, dmax + 1):
            if math.gcd(c, d) != 1:
                continue
            a0 = pow(d % c, -1, c) if c > 1 else 0
            b0 = (a0 * d - 1) // c
            kmax = int(4.0 * e_half / max(c * z.y, 1e-9)) + abs(a0) // c + 8
            for k in range(-kmax, kmax + 1):
                g = GroupElement(a0 + k * c, b0 + k * d, c, d)
                if distance(z, apply(g, z)) <= R:
                    out.add(g.entries)
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def spec11():
    return GroupSpec(11)


@pytest.fixture(scope="session")
def spec37():
    return GroupSpec(37)
