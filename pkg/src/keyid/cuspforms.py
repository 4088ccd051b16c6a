"""Weight-2 cusp forms for Gamma_0(N) as truncated q-expansions.

Supported levels: 11 (the eta product q prod (1-q^n)^2 (1-q^{11n})^2) and
37 (a two-dimensional space; integer coefficient tables shipped as a data
file, regenerable by counting points on the two conductor-37 elliptic
curves and filling in Hecke multiplicativity).

The Petersson inner product is normalized as

    <f, g> = int_{X_0(N)} f(z) conj(g(z)) dx dy,

which makes the canonical density integrate to one.  Gram matrices are
computed by quadrature over the modular tiles r_j F with both cusp ends
cut off at fixed horoball heights and restored analytically from the
q-expansions; the expansion at the zero cusp of a Fricke eigenform is
eps * (its expansion at infinity), so one table serves both ends.

Evaluation at arbitrary points first moves the point to the
highest-height representative under Gamma_0(N), optionally composed with
the Fricke involution z -> -1/(Nz), and unwinds the weight-2 cocycle.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import domain
from .errors import DomainError, UnsupportedLevelError
from .fuchsian import GroupSpec
from .hypgeom import Point

SUPPORTED_FORM_LEVELS = (11, 37)
DEFAULT_ORDER = 256
_TWO_PI = 2.0 * math.pi
# The invariant height max(h_inf, h_0) has floor ~ sqrt(3)/(2N) on X_0(N)
# (the Fricke-group domain floor); 0.018 sits below it for N <= 37 while
# keeping order-256 series tails under 1e-10.
_MIN_LIFT_HEIGHT = 0.018

# Conductor-37 curves in short [a1,a2,a3,a4,a6] form, one per isogeny
# class; their L-series give the two newform coefficient lists.
_CURVES_37 = (
    (0, 0, 1, -1, 0),
    (0, 1, 1, -23, -50),
)


# ----------------------------------------------------------------------
# Coefficient construction
# ----------------------------------------------------------------------

def _dedekind_eta_series(m: int) -> np.ndarray:
    """Coefficients of prod_{n>=1} (1 - q^n) to order q^m (pentagonal)."""
    out = np.zeros(m + 1, dtype=np.int64)
    k = 0
    while True:
        stop = True
        for kk in (k, -k) if k else (0,):
            e = kk * (3 * kk - 1) // 2
            if e <= m:
                out[e] += -1 if kk % 2 else 1
                stop = False
        if stop and k > 0:
            break
        k += 1
    return out


def _trunc_mul(p: np.ndarray, q: np.ndarray, m: int) -> np.ndarray:
    return np.convolve(p, q)[: m + 1]


def eta_product_coefficients(level: int, m: int = DEFAULT_ORDER) -> list[int]:
    """a_1..a_m of q prod (1-q^n)^2 (1-q^{Ln})^2 for eta-product levels."""
    if level != 11:
        raise UnsupportedLevelError(f"no eta-product generator wired for level {level}")
    e = _dedekind_eta_series(m)
    e_l = np.zeros(m + 1, dtype=np.int64)
    e_l[:: level] = _dedekind_eta_series(m // level)
    prod = _trunc_mul(_trunc_mul(e, e, m), _trunc_mul(e_l, e_l, m), m)
    return [int(prod[n - 1]) for n in range(1, m + 1)]  # shift by q^1


def _curve_ap(curve: tuple[int, ...], p: int) -> int:
    """Trace of Frobenius at p for y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6."""
    a1, a2, a3, a4, a6 = curve
    if p == 2:
        count = 1
        for x in range(2):
            for y in range(2):
                if (y * y + a1 * x * y + a3 * y - (x**3 + a2 * x * x + a4 * x + a6)) % 2 == 0:
                    count += 1
        return 2 + 1 - count
    # complete the square: (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    legendre = [0] * p
    for y in range(1, (p + 1) // 2 + 1):
        legendre[y * y % p] = 1
    count = 1  # infinity
    for x in range(p):
        rhs = (4 * x**3 + b2 * x * x + 2 * b4 * x + b6) % p
        if rhs == 0:
            count += 1
        elif legendre[rhs]:
            count += 2
    return p + 1 - count


def _multiplicative_reduction_sign(curve: tuple[int, ...], p: int) -> int:
    """a_p at a prime of multiplicative reduction: +1 split, -1 non-split.

    The node's tangent cone is w^2 = s u^2 in local coordinates; split
    means s is a square mod p.
    """
    a1, a2, a3, a4, a6 = curve
    sing = None
    for x in range(p):
        for y in range(p):
            if (y * y + a1 * x * y + a3 * y - (x**3 + a2 * x * x + a4 * x + a6)) % p:
                continue
            if (2 * y + a1 * x + a3) % p == 0 and (
                a1 * y - 3 * x * x - 2 * a2 * x - a4
            ) % p == 0:
                sing = (x, y)
                break
        if sing:
            break
    if sing is None:
        raise DomainError(f"no singular point mod {p}; reduction is not multiplicative")
    x0, y0 = sing
    # expand F(x0+u, y0+w); quadratic part  w^2 + (a1 x0 + ...) u w - s u^2
    cuw = (a1 + 2 * 0) % p  # coefficient of u w is a1 mod p; complete squares below
    cuu = (-3 * x0 - a2) % p
    # quadratic form w^2 + a1 u w + (B) u^2 with B = -(3 x0 + a2); its
    # discriminant in w-slope: slopes m solve m^2 + a1 m + B = 0
    disc = (a1 * a1 - 4 * cuu * 1) % p
    # slopes rational iff disc is a QR mod p
    if disc == 0:
        raise DomainError("cusp (additive reduction), not a node")
    return 1 if pow(disc, (p - 1) // 2, p) == 1 else -1


def _hecke_fill(ap: dict[int, int], level: int, m: int) -> list[int]:
    """a_1..a_m from prime data via Hecke multiplicativity."""
    a = [0] * (m + 1)
    a[1] = 1
    for p, tp in ap.items():
        if p > m:
            continue
        pk = p
        prev2, prev = 1, tp  # a_{p^0}, a_{p^1}
        while pk <= m:
            a[pk] = prev
            pk_next = pk * p
            if pk_next <= m:
                if level % p == 0:
                    nxt = tp * prev
                else:
                    nxt = tp * prev - p * prev2
                prev2, prev = prev, nxt
            pk = pk_next
    for n in range(2, m + 1):
        if a[n] != 0 or n == 1:
            continue
        # factor n into prime powers and multiply
        val, nn = 1, n
        p = 2
        while p * p <= nn:
            if nn % p == 0:
                q = 1
                while nn % p == 0:
                    nn //= p
                    q *= p
                val *= a[q]
            p += 1
        if nn > 1:
            val *= a[nn]
        a[n] = val
    return a[1:]


def _primes_to(m: int) -> list[int]:
    sieve = np.ones(m + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(m**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return [int(p) for p in np.nonzero(sieve)[0]]


def generate_level37_table(m: int = DEFAULT_ORDER) -> list[list[int]]:
    """Coefficient rows a_1..a_m for the two newforms of level 37."""
    rows = []
    for curve in _CURVES_37:
        ap = {}
        for p in _primes_to(m):
            if p == 37:
                ap[p] = _multiplicative_reduction_sign(curve, p)
            else:
                ap[p] = _curve_ap(curve, p)
        rows.append(_hecke_fill(ap, 37, m))
    return rows


# ----------------------------------------------------------------------
# Data files
# ----------------------------------------------------------------------

def data_dir() -> Path:
    env = os.environ.get("KEYID_DATA_DIR")
    if env:
        return Path(env)
    return Path(__file__).parent / "data"


def write_table(path: Path, level: int, rows: list[list[int]]):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"level {level} dim {len(rows)} order {len(rows[0])}\n")
        for row in rows:
            fh.write(" ".join(str(c) for c in row) + "\n")


def read_table(path: Path) -> tuple[int, list[list[int]]]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != "level" or header[2] != "dim" or header[4] != "order":
            raise DomainError(f"malformed coefficient table header in {path}")
        level, dim, order = int(header[1]), int(header[3]), int(header[5])
        rows = []
        for _ in range(dim):
            row = [int(tok) for tok in fh.readline().split()]
            if len(row) != order:
                raise DomainError(f"coefficient row length mismatch in {path}")
            rows.append(row)
    return level, rows


# ----------------------------------------------------------------------
# q-expansions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class QExpansion:
    """Truncated q-expansion sum_{n=1}^{M} a_n q^n of a weight-2 form."""

    level: int
    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def coeff_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.float64)

    def scaled(self, s: float) -> "QExpansion":
        return QExpansion(self.level, tuple(s * c for c in self.coeffs))


@dataclass(frozen=True)
class EvalResult:
    value: complex
    tail_bound: float


def _coeff_growth_const(f: QExpansion) -> float:
    # |a_n| <= sqrt(3) n holds for Hecke newforms (Deligne, d(n) <= sqrt(3n));
    # take the max with the stored ratios so scaled inputs stay covered.
    arr = np.abs(f.coeff_array())
    n = np.arange(1, f.order + 1)
    return max(math.sqrt(3.0), float(np.max(arr / n)))


def _series_tail(f: QExpansion, y: float) -> float:
    x = math.exp(-_TWO_PI * y)
    m = f.order
    c = _coeff_growth_const(f)
    return c * x ** (m + 1) * ((m + 1) - m * x) / (1.0 - x) ** 2


def series_eval_many(f: QExpansion, p: np.ndarray) -> np.ndarray:
    """Horner evaluation of the truncated q-series at points p."""
    q = np.exp(2j * math.pi * p)
    coeffs = f.coeff_array()
    out = np.full(p.shape, coeffs[-1], dtype=np.complex128)
    for a_n in coeffs[-2::-1]:
        out *= q
        out += a_n
    return out * q


def evaluate(f: QExpansion, z: Point, y_min: float = 0.2) -> EvalResult:
    """Direct q-series evaluation; valid above y_min where the stated
    truncation bound applies.  Lower points must go through
    evaluate_lifted (group move plus weight-2 cocycle)."""
    if z.y < y_min:
        raise DomainError(
            f"evaluation height {z.y} below y_min={y_min}; use evaluate_lifted"
        )
    val = series_eval_many(f, np.array([z.z]))[0]
    return EvalResult(complex(val), _series_tail(f, z.y))


# ----------------------------------------------------------------------
# Lifting low points
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LiftData:
    p: np.ndarray        # high representatives (complex)
    mult: np.ndarray     # f(z) = (eps if flipped) * mult * f(p)
    flipped: np.ndarray  # bool
    height: np.ndarray


def _best_cd(level: int, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coprime rows (c, d), c = 0 mod level, minimizing |cz+d| per point."""
    n = zs.shape[0]
    best_c = np.zeros(n, dtype=np.int64)
    best_d = np.ones(n, dtype=np.int64)
    best = np.ones(n)  # the c = 0, |d| = 1 baseline
    ymin = float(np.min(zs.imag))
    kmax = min(int(1.0 / (level * ymin)) + 2, 200_000 // level + 2)
    for k in range(1, kmax + 1):
        c = k * level
        base = np.floor(-c * zs.real).astype(np.int64)
        for off in (-1, 0, 1, 2):
            d = base + off
            ok = np.gcd(d, c) == 1
            val = np.abs(c * zs + d) ** 2
            better = ok & (val < best)
            best = np.where(better, val, best)
            best_c = np.where(better, c, best_c)
            best_d = np.where(better, d, best_d)
    return best_c, best_d


def _lift_branch(level: int, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best Gamma_0(level) representative of each z: returns (p, cocycle
    (cz+d)^2, height)."""
    c_arr, d_arr = _best_cd(level, zs)
    p = np.empty_like(zs)
    coc = np.empty_like(zs)
    for i in range(zs.shape[0]):
        c, d, z = int(c_arr[i]), int(d_arr[i]), zs[i]
        if c == 0:
            p[i] = z
            coc[i] = 1.0
        else:
            a0 = pow(d % c, -1, c) if c > 1 else 0
            den = c * z + d
            p[i] = a0 / c - 1.0 / (c * den)
            coc[i] = den * den
    return p, coc, p.imag


def lift_points(spec: GroupSpec, zs: np.ndarray) -> LiftData:
    """Move points to their highest representative under Gamma_0(N),
    allowing one Fricke flip z -> -1/(Nz); record the weight-2 factor."""
    n_lvl = spec.level
    p1, coc1, h1 = _lift_branch(n_lvl, zs)
    zf = -1.0 / (n_lvl * zs)
    p2, coc2, h2 = _lift_branch(n_lvl, zf)
    use2 = h2 > h1
    p = np.where(use2, p2, p1)
    # direct: f(z) = coc1^{-1} f(p); flip: f(z) = eps N zf^2 coc2^{-1} f(p)
    mult = np.where(use2, n_lvl * zf * zf / coc2, 1.0 / coc1)
    height = np.where(use2, h2, h1)
    if np.min(height) < _MIN_LIFT_HEIGHT:
        raise DomainError(
            f"lift failed: best height {np.min(height):.4g} below "
            f"{_MIN_LIFT_HEIGHT}; point too deep for the expansion order"
        )
    return LiftData(p, mult, use2, height)


@lru_cache(maxsize=32)
def fricke_eps(f: QExpansion) -> float:
    """Eigenvalue of (N z^2)^{-1} f(-1/(N z)) = eps f(z); +-1 for the
    canonical (eigenform) bases.  Zero forms get +1 by convention."""
    arr = f.coeff_array()
    if not np.any(arr):
        return 1.0
    z0 = complex(0.07, 0.62) if f.level <= 20 else complex(0.05, 0.35)
    w0 = -1.0 / (f.level * z0)
    num = series_eval_many(f, np.array([w0]))[0]
    den = f.level * z0 * z0 * series_eval_many(f, np.array([z0]))[0]
    eps = num / den
    if min(abs(eps - 1.0), abs(eps + 1.0)) > 1e-6:
        raise DomainError(f"Fricke calibration did not give +-1: {eps}")
    return 1.0 if abs(eps - 1.0) < 1.0 else -1.0


def evaluate_lifted_many(spec: GroupSpec, forms: tuple[QExpansion, ...],
                         zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cocycle-corrected values of each (eigen)form at arbitrary points.

    Returns (values[form, point], tail_bounds[form, point]); the bounds
    are the series tails at the lifted heights scaled by |mult|.
    """
    lift = lift_points(spec, zs)
    vals = np.empty((len(forms), zs.shape[0]), dtype=np.complex128)
    tails = np.empty((len(forms), zs.shape[0]))
    for i, f in enumerate(forms):
        raw = series_eval_many(f, lift.p)
        eps = fricke_eps(f)
        factor = np.where(lift.flipped, eps * lift.mult, lift.mult)
        vals[i] = factor * raw
        x = np.exp(-_TWO_PI * lift.height)
        m = f.order
        c = _coeff_growth_const(f)
        tails[i] = np.abs(factor) * c * x ** (m + 1) * ((m + 1) - m * x) / (1.0 - x) ** 2
    return vals, tails


def evaluate_lifted(spec: GroupSpec, f: QExpansion, z: Point) -> EvalResult:
    vals, tails = evaluate_lifted_many(spec, (f,), np.array([z.z]))
    return EvalResult(complex(vals[0, 0]), float(tails[0, 0]))


# ----------------------------------------------------------------------
# Petersson inner products
# ----------------------------------------------------------------------

def _cylinder_tail(f: QExpansion, g: QExpansion, height: float) -> float:
    """int over a width-1 cusp cylinder above the height of f conj(g) dx dy."""
    af, ag = f.coeff_array(), g.coeff_array()
    n = np.arange(1.0, len(af) + 1.0)
    return float(np.sum(af * ag * np.exp(-4.0 * math.pi * n * height) / (4.0 * math.pi * n)))


def petersson_gram(
    spec: GroupSpec,
    forms: tuple[QExpansion, ...],
    y_cut: float = 1.5,
    n_u: int = 16,
    n_v: int = 8,
    v_ratio: float = 1.4,
    add_tails: bool = True,
) -> np.ndarray:
    """Gram matrix of <f_j, f_k> = int f_j conj(f_k) dx dy over X_0(N).

    Tiles are cut at v = y_cut (id tile) and v = N y_cut (others); the two
    horoball masses are restored analytically from the q-expansions, the
    zero-cusp one through the Fricke eigenvalues.  With add_tails=False
    the truncated-domain integral alone is returned (the independent
    cross-check strategy; the omitted mass is the analytic tail bound).
    """
    n_forms = len(forms)
    cut_other = spec.level * y_cut if spec.level > 1 else y_cut
    rows = domain.tile_rows(spec, cut_id=y_cut, cut_other=cut_other,
                            n_u=n_u, n_v=n_v, v_ratio=v_ratio)
    pts = np.concatenate([r.points for r in rows])
    # the invariant integrand is f(z) conj(g(z)) Im(z)^2 at the mapped point
    wts = np.concatenate([r.weights for r in rows]) * pts.imag**2
    vals, _ = evaluate_lifted_many(spec, forms, pts)
    G = np.zeros((n_forms, n_forms), dtype=np.complex128)
    for j in range(n_forms):
        for k in range(j, n_forms):
            G[j, k] = np.sum(wts * vals[j] * np.conj(vals[k]))
            G[k, j] = np.conj(G[j, k])
    if add_tails:
        for j in range(n_forms):
            for k in range(j, n_forms):
                t_inf = _cylinder_tail(forms[j], forms[k], y_cut)
                t_zero = (
                    fricke_eps(forms[j]) * fricke_eps(forms[k])
                    * _cylinder_tail(forms[j], forms[k], y_cut)
                )
                G[j, k] += t_inf + t_zero
                if k != j:
                    G[k, j] = np.conj(G[j, k])
    Greal = G.real
    if np.max(np.abs(G.imag)) > 2e-5 * max(np.max(np.abs(Greal)), 1e-30):
        raise DomainError("Gram matrix has an unexpected imaginary part")
    return Greal


def orthonormalize(gram: np.ndarray) -> np.ndarray:
    """Rows L[j] of combination coefficients with L G L^T = I, by
    Gram-Schmidt with twice-is-enough reorthogonalization."""
    g = gram.shape[0]
    L = np.eye(g)
    for j in range(g):
        v = L[j].copy()
        for _ in range(2):
            for k in range(j):
                v -= (L[k] @ gram @ v) * L[k]
        nrm = math.sqrt(float(v @ gram @ v))
        if not (nrm > 0.0):
            raise DomainError("Gram matrix is not positive definite")
        L[j] = v / nrm
    return L


# ----------------------------------------------------------------------
# Bases and the canonical density
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CuspFormBasis:
    spec: GroupSpec
    forms: tuple[QExpansion, ...]
    gram: np.ndarray
    ortho: np.ndarray  # rows: orthonormal combos over `forms`

    @property
    def genus(self) -> int:
        return len(self.forms)

    def orthonormal_coeffs(self) -> np.ndarray:
        """Coefficient rows of the orthonormalized forms."""
        coeffs = np.vstack([f.coeff_array() for f in self.forms])
        return self.ortho @ coeffs

    def orthonormal_values(self, zs: np.ndarray) -> np.ndarray:
        vals, _ = evaluate_lifted_many(self.spec, self.forms, zs)
        return self.ortho @ vals


def eta_product_basis(level: int, order: int = DEFAULT_ORDER) -> tuple[QExpansion, ...]:
    """Stored generators of S_2(Gamma_0(N)) for the supported levels."""
    if level == 11:
        coeffs = eta_product_coefficients(11, order)
        return (QExpansion(11, tuple(coeffs)),)
    if level == 37:
        path = data_dir() / "level37_weight2.txt"
        lvl, rows = read_table(path)
        if lvl != 37:
            raise DomainError(f"table {path} is for level {lvl}, expected 37")
        return tuple(QExpansion(37, tuple(r[:order])) for r in rows)
    raise UnsupportedLevelError(
        f"no weight-2 basis wired for level {level}; supported: {SUPPORTED_FORM_LEVELS}"
    )


@lru_cache(maxsize=8)
def get_basis(level: int) -> CuspFormBasis:
    spec = GroupSpec(level)
    forms = eta_product_basis(level)
    gram = petersson_gram(spec, forms)
    L = orthonormalize(gram)
    return CuspFormBasis(spec, forms, gram, L)


def canonical_density_many(basis: CuspFormBasis, zs: np.ndarray) -> np.ndarray:
    """c(z) with mu_can = c(z) mu_hyp: (y^2/g) sum_j |f_j^on(z)|^2."""
    combos = basis.orthonormal_values(zs)
    return zs.imag**2 * np.sum(np.abs(combos) ** 2, axis=0) / basis.genus


def canonical_density(basis: CuspFormBasis, z: Point) -> float:
    return float(canonical_density_many(basis, np.array([z.z]))[0])


def canonical_density_error(basis: CuspFormBasis, z: Point) -> float:
    """First-order bound on the density error from series truncation."""
    zs = np.array([z.z])
    vals, tails = evaluate_lifted_many(basis.spec, basis.forms, zs)
    combo_vals = basis.ortho @ vals
    combo_tails = np.abs(basis.ortho) @ tails
    err = np.sum(
        (2.0 * np.abs(combo_vals) + combo_tails) * combo_tails, axis=0
    )
    return float(z.y**2 * err[0] / basis.genus)


def canonical_mass(basis: CuspFormBasis, y_cut: float = 1.5,
                   n_u: int = 16, n_v: int = 8) -> float:
    """int c(z) dmu_hyp over X_0(N); should be 1."""
    spec = basis.spec
    cut_other = spec.level * y_cut
    rows = domain.tile_rows(spec, cut_id=y_cut, cut_other=cut_other,
                            n_u=n_u, n_v=n_v)
    pts = np.concatenate([r.points for r in rows])
    wts = np.concatenate([r.weights for r in rows]) * pts.imag**2
    dens = np.sum(np.abs(basis.orthonormal_values(pts)) ** 2, axis=0)
    total = float(np.sum(wts * dens))
    # analytic horoball masses of sum_j |f_j^on|^2 dx dy at both ends
    coeffs = basis.orthonormal_coeffs()
    eps = np.array([fricke_eps(f) for f in basis.forms])
    coeffs_zero = (basis.ortho * eps[None, :]) @ np.vstack(
        [f.coeff_array() for f in basis.forms]
    )
    n = np.arange(1.0, coeffs.shape[1] + 1.0)
    damp = np.exp(-4.0 * math.pi * n * y_cut) / (4.0 * math.pi * n)
    total += float(np.sum(coeffs**2 * damp[None, :]))
    total += float(np.sum(coeffs_zero**2 * damp[None, :]))
    return total / basis.genus
