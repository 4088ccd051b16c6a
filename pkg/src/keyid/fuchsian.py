"""Concrete Fuchsian groups Gamma_0(N) of squarefree level.

Signatures (genus, cusps, elliptic orders) from the classical counting
formulas, hyperbolic volumes, right coset representatives inside the full
modular group, and enumeration of all group elements moving a base point
at most a given hyperbolic distance.

The enumeration is the performance core: for gamma = (a b; c d) and points
z, w the displacement satisfies

    cosh d(z, gamma w) = 1 + |P|^2 / (2 Im z Im w),
    P = c z w + d z - a w - b,

so candidates are pruned by |c| <= sqrt(e^R / (Im z Im w)), a window in d
forced by |c w + d|^2 <= Im w e^R / Im z, and a window in the residual
integer k parameterizing (a, b) = (a0 + k c, b0 + k d).
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, EnumerationCapError, UnsupportedLevelError
from .hypgeom import IDENTITY, GroupElement, Point, distance_from_invariant

DEFAULT_ORBIT_CAP = 10**7


def _squarefree(n: int) -> bool:
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def _prime_factors(n: int) -> list[int]:
    ps = []
    k = 2
    while k * k <= n:
        if n % k == 0:
            ps.append(k)
            while n % k == 0:
                n //= k
        k += 1
    if n > 1:
        ps.append(n)
    return ps


@dataclass(frozen=True)
class GroupSpec:
    """Gamma_0(level); level 1 is the full modular group.

    free=True selects the trivial group (method-of-images sum with the
    identity only); it has no signature or volume.
    """

    level: int
    free: bool = False

    def __post_init__(self):
        if self.level < 1:
            raise UnsupportedLevelError(f"level must be >= 1, got {self.level}")
        if not _squarefree(self.level):
            raise UnsupportedLevelError(
                f"level {self.level} is not squarefree; elliptic and cusp "
                "counting formulas are only wired up for squarefree levels"
            )


@dataclass(frozen=True)
class Signature:
    genus: int
    cusp_count: int
    elliptic_orders: tuple[int, ...]


def index(spec: GroupSpec) -> int:
    """Index [PSL_2(Z) : Gamma_0(N)] = N prod_{p|N} (1 + 1/p)."""
    mu = spec.level
    for p in _prime_factors(spec.level):
        mu = mu // p * (p + 1)
    return mu


def signature(spec: GroupSpec) -> Signature:
    if spec.free:
        raise DomainError("the trivial group has no orbisurface signature")
    n = spec.level
    ps = _prime_factors(n)
    nu2 = 1
    nu3 = 1
    for p in ps:
        if p == 2:
            nu2 *= 1
        elif p % 4 == 1:
            nu2 *= 2
        else:
            nu2 *= 0
        if p == 3:
            nu3 *= 1
        elif p % 3 == 1:
            nu3 *= 2
        else:
            nu3 *= 0
    cusps = 2 ** len(ps)
    mu = index(spec)
    genus = 1 + mu / 12 - nu2 / 4 - nu3 / 3 - cusps / 2
    g = round(genus)
    if abs(genus - g) > 1e-9 or g < 0:
        raise UnsupportedLevelError(f"genus formula gave {genus} for level {n}")
    return Signature(g, cusps, (2,) * nu2 + (3,) * nu3)


def volume(sig: Signature) -> float:
    """vol = 2 pi (2g - 2 + |P| + sum_e (1 - 1/m_e)); always positive here."""
    s = 2 * sig.genus - 2 + sig.cusp_count
    s += sum(1.0 - 1.0 / m for m in sig.elliptic_orders)
    v = 2.0 * math.pi * s
    if v <= 0.0:
        raise DomainError(f"signature {sig} has non-positive volume")
    return v


# ----------------------------------------------------------------------
# Coset representatives via P^1(Z/N)
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def _p1_classes(n: int) -> list[tuple[int, int]]:
    """Canonical representatives of P^1(Z/N): pairs (c, d) mod N with
    gcd(c, d, N) = 1, modulo multiplication by units."""
    if n == 1:
        return [(0, 0)]
    units = [u for u in range(1, n) if math.gcd(u, n) == 1]
    seen: set[tuple[int, int]] = set()
    classes = []
    for c in range(n):
        for d in range(n):
            if math.gcd(math.gcd(c, d), n) != 1:
                continue
            if (c, d) in seen:
                continue
            orbit = {((u * c) % n, (u * d) % n) for u in units}
            seen.update(orbit)
            classes.append(min(orbit))
    return sorted(classes)


def p1_index(spec: GroupSpec, c: int, d: int) -> int:
    """Index of the coset of a matrix with bottom row (c, d) in the
    canonical P^1(Z/N) ordering."""
    n = spec.level
    if n == 1:
        return 0
    c %= n
    d %= n
    units = [u for u in range(1, n) if math.gcd(u, n) == 1]
    canon = min(((u * c) % n, (u * d) % n) for u in units)
    return _p1_classes(n).index(canon)


def same_coset(spec: GroupSpec, g: GroupElement, h: GroupElement) -> bool:
    """True iff Gamma_0(N) g = Gamma_0(N) h."""
    gh = g * h.inverse()
    return gh.c % spec.level == 0


def _lift_to_coprime(c: int, d: int, n: int) -> tuple[int, int]:
    """Lift a class (c, d) mod N with gcd(c, d, N) = 1 to coprime integers."""
    if c == 0 and math.gcd(d, n) == 1:
        return 0, 1
    if c == 0:
        raise DomainError("invalid P^1 class")
    for k in range(n + 2):
        if math.gcd(c, d + k * n) == 1:
            return c, d + k * n
    raise DomainError(f"no coprime lift for ({c},{d}) mod {n}")


def _complete_to_unimodular(c: int, d: int) -> GroupElement:
    """Some (a b; c d) with ad - bc = 1 for coprime (c, d)."""
    if c == 0:
        return GroupElement(d, 0, 0, d)  # d = +-1
    a = pow(d % c, -1, c) if c > 1 else 0
    b = (a * d - 1) // c
    return GroupElement(a, b, c, d)


def coset_reps(spec: GroupSpec) -> list[GroupElement]:
    """Right coset representatives: PSL_2(Z) = union_j Gamma_0(N) r_j."""
    n = spec.level
    if n == 1:
        return [IDENTITY]
    reps = []
    for c, d in _p1_classes(n):
        cc, dd = _lift_to_coprime(c, d, n)
        reps.append(_complete_to_unimodular(cc, dd))
    if len(reps) != index(spec):
        raise DomainError("coset construction does not match the index formula")
    return reps


# ----------------------------------------------------------------------
# Orbit enumeration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitData:
    """All gamma in Gamma_0(N) mod +-I with d(z, gamma w) <= R, as columns.

    Rows are sorted by displacement (ties broken on the matrix entries);
    arrays are immutable views shared between threads.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    dist: np.ndarray
    radius: float

    def __post_init__(self):
        for arr in (self.a, self.b, self.c, self.d, self.dist):
            arr.setflags(write=False)

    def __len__(self):
        return self.a.shape[0]


# bounded, read-mostly cache; the heat-kernel time integrals reuse one
# orbit list many times, but grids of distinct points must not pile up
_ORBIT_CACHE_MAX = 6
_orbit_cache: OrderedDict = OrderedDict()
_orbit_lock = threading.Lock()


def _predicted_count(spec: GroupSpec, R: float) -> float:
    if spec.free:
        return 1.0
    vol = volume(signature(spec))
    return 2.0 * math.pi * (math.cosh(R) - 1.0) / vol + 16.0


def orbit_arrays(
    spec: GroupSpec,
    z: Point,
    w: Point,
    R: float,
    cap: int = DEFAULT_ORBIT_CAP,
) -> OrbitData:
    """Enumerate {gamma : d(z, gamma w) <= R}, cached per rounded inputs."""
    if R < 0:
        raise DomainError("enumeration radius must be >= 0")
    key = (
        spec.level,
        spec.free,
        round(z.x, 6),
        round(z.y, 6),
        round(w.x, 6),
        round(w.y, 6),
        round(R, 9),
    )
    with _orbit_lock:
        hit = _orbit_cache.get(key)
        if hit is not None:
            _orbit_cache.move_to_end(key)
    if hit is not None:
        return hit
    data = _enumerate_impl(spec, z, w, R, cap)
    with _orbit_lock:
        _orbit_cache[key] = data
        while len(_orbit_cache) > _ORBIT_CACHE_MAX:
            _orbit_cache.popitem(last=False)
    return data


def _enumerate_impl(
    spec: GroupSpec, z: Point, w: Point, R: float, cap: int
) -> OrbitData:
    pred = _predicted_count(spec, R)
    if pred > cap:
        raise EnumerationCapError(
            f"predicted orbit count {pred:.3g} exceeds cap {cap} at R = {R}"
        )

    zc, wc = z.z, w.z
    yz, yw = z.y, w.y
    n = spec.level
    four_yy = 4.0 * yz * yw
    # |P| <= B on the ball, slightly inflated; the exact test decides.
    B = 2.0 * math.sqrt(yz * yw) * math.sinh(R / 2.0) * (1.0 + 1e-12) + 1e-12

    chunks: list[np.ndarray] = []  # columns a, b, c, d as int64 + dist bits
    dist_chunks: list[np.ndarray] = []
    rows_a: list[int] = []
    rows_b: list[int] = []
    rows_c: list[int] = []
    rows_d: list[int] = []
    dists: list[float] = []
    total = 0

    def flush():
        nonlocal total
        if not dists:
            return
        chunks.append(
            np.array([rows_a, rows_b, rows_c, rows_d], dtype=np.int64)
        )
        dist_chunks.append(np.array(dists, dtype=np.float64))
        total += len(dists)
        rows_a.clear()
        rows_b.clear()
        rows_c.clear()
        rows_d.clear()
        dists.clear()
        if total > cap:
            raise EnumerationCapError(f"orbit count exceeded cap {cap} at R = {R}")

    def push(a: int, b: int, c: int, d: int, P: complex):
        u = (P.real * P.real + P.imag * P.imag) / four_yy
        dd = distance_from_invariant(u)
        if dd <= R:
            rows_a.append(a)
            rows_b.append(b)
            rows_c.append(c)
            rows_d.append(d)
            dists.append(dd)
            if len(dists) >= 65536:
                flush()

    # c = 0: translations (1, b; 0, 1).
    diff = zc - wc
    if B * B >= diff.imag * diff.imag:
        half = math.sqrt(max(B * B - diff.imag * diff.imag, 0.0))
        for b in range(math.ceil(diff.real - half), math.floor(diff.real + half) + 1):
            push(1, b, 0, 1, diff - b)

    if not spec.free:
        zw = zc * wc
        lim = yw * math.exp(R) / yz * (1.0 + 1e-12)
        c_max = int(math.sqrt(lim) / yw) + 1
        c = n
        while c <= c_max:
            s2 = lim - c * c * yw * yw
            if s2 >= 0.0:
                s = math.sqrt(s2)
                d_lo = math.ceil(-c * w.x - s)
                d_hi = math.floor(-c * w.x + s)
                d_arr = np.arange(d_lo, d_hi + 1, dtype=np.int64)
                if d_arr.size:
                    d_arr = d_arr[np.gcd(d_arr, c) == 1]
                for d in d_arr.tolist():
                    a0 = pow(d % c, -1, c) if c > 1 else 0
                    b0 = (a0 * d - 1) // c
                    v = c * wc + d
                    P0 = c * zw + d * zc - a0 * wc - b0
                    q = P0 / v
                    rad2 = (B / abs(v)) ** 2 - q.imag * q.imag
                    if rad2 < 0.0:
                        continue
                    rad = math.sqrt(rad2)
                    for k in range(math.ceil(q.real - rad), math.floor(q.real + rad) + 1):
                        push(a0 + k * c, b0 + k * d, c, d, P0 - k * v)
            c += n

    flush()
    if not chunks:
        empty = np.zeros(0, dtype=np.int64)
        return OrbitData(empty, empty.copy(), empty.copy(), empty.copy(),
                         np.zeros(0), R)
    mat = np.concatenate(chunks, axis=1)
    dist = np.concatenate(dist_chunks)
    order = np.lexsort((mat[3], mat[2], mat[1], mat[0], dist))
    return OrbitData(
        mat[0, order].copy(), mat[1, order].copy(), mat[2, order].copy(),
        mat[3, order].copy(), dist[order], R,
    )


def enumerate_group(spec: GroupSpec, z: Point, R: float,
                    cap: int = DEFAULT_ORBIT_CAP) -> list[GroupElement]:
    """The set {gamma : d(z, gamma z) <= R} mod +-I, sorted by displacement."""
    data = orbit_arrays(spec, z, z, R, cap)
    return [
        GroupElement(int(a), int(b), int(c), int(d))
        for a, b, c, d in zip(data.a, data.b, data.c, data.d)
    ]


def clear_orbit_cache():
    with _orbit_lock:
        _orbit_cache.clear()
