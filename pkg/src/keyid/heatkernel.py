"""Heat kernel on the hyperbolic plane and its method-of-images quotient.

The free kernel is evaluated from the classical radial integral

    K(t; rho) = sqrt(2) e^{-t/4} / (4 pi t)^{3/2}
                * int_rho^inf  s e^{-s^2/(4t)} / sqrt(cosh s - cosh rho) ds.

The substitution s = rho + u^2 removes the inverse-square-root endpoint
singularity: with cosh s - cosh rho = 2 sinh(rho + u^2/2) sinh(u^2/2),

    K(t; rho) = C(t) int_0^inf  2 (rho + u^2) e^{-(rho+u^2)^2/(4t)}
                / sqrt( sinh(rho + u^2/2) * sinh(u^2/2)/(u^2/2) )  du,

an everywhere-smooth integrand handled by adaptive Gauss-Kronrod
quadrature.  A per-t cache interpolates S(rho) = log K + rho^2/(4t)
+ rho/2 (the envelope-stripped log-kernel, a slowly varying function)
with a C^2 cubic spline, validated against direct quadrature.

The quotient kernel K_hyp(t; z, w) = sum_gamma K(t; d(z, gamma w)) is
truncated at a radius R certified by the shell bound

    tail <= sum_{k>=0} A e^{R+k+1} Kbound(t; R+k),
    Kbound(t; rho) = 4 sqrt(2 pi) e^{-t/4} (rho+2) e^{-rho/2 - rho^2/(4t)}
                     / (4 pi t)^{3/2},

where the orbit-count premise N(r) <= A e^r is calibrated per level from
enumerated counts at moderate radii, times a safety factor 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import BudgetError, DomainError, QuadratureError
from .fuchsian import DEFAULT_ORBIT_CAP, GroupSpec, OrbitData, orbit_arrays
from .hypgeom import Point, distance

_SQRT2 = math.sqrt(2.0)
# Largest radius the enumerator is ever asked for; ~ e^R elements.
R_HARD_MAX = 17.5
R_FLOOR = 2.0
_CALIBRATION_RADIUS = 7.0
_KBOUND_RHO_MIN = 0.5  # shell bound is valid for rho >= 0.35; keep margin


@dataclass(frozen=True)
class HeatParams:
    """Diffusion time and tolerance knobs for quotient-kernel evaluation."""

    t: float
    trunc_radius: float | None = None  # None: auto-choose from tail_eps
    tail_eps: float = 1e-6
    quad_rel_tol: float = 1e-9

    def __post_init__(self):
        if not (self.t > 0.0):
            raise DomainError(f"diffusion time must be positive, got {self.t}")
        if not (self.tail_eps > 0.0):
            raise DomainError("tail_eps must be positive")
        if not (0.0 < self.quad_rel_tol <= 1e-2):
            raise DomainError("quad_rel_tol must lie in (0, 1e-2]")


@dataclass(frozen=True)
class KernelValue:
    """A quotient-kernel value with its certified truncation tail bound."""

    value: float
    tail_bound: float
    radius: float
    n_terms: int


def _shc(w: float) -> float:
    """sinh(w)/w, stable near 0."""
    if w < 1e-4:
        w2 = w * w
        return 1.0 + w2 / 6.0 + w2 * w2 / 120.0
    return math.sinh(w) / w


def _prefactor(t: float) -> float:
    return _SQRT2 * math.exp(-t / 4.0) / (4.0 * math.pi * t) ** 1.5


def _integrand(u: float, rho: float, t: float) -> float:
    s = rho + u * u
    ex = -s * s / (4.0 * t)
    if ex < -745.0:
        return 0.0
    arg = rho + 0.5 * u * u
    if arg > 700.0:
        return 0.0
    if arg == 0.0:
        return 0.0
    den = math.sinh(arg) * _shc(0.5 * u * u)
    return 2.0 * s * math.exp(ex) / math.sqrt(den)


def _upper_limit(rho: float, t: float) -> float:
    # (rho + U^2)^2/(4t) ~ rho^2/(4t) + 130 kills the integrand.
    target = math.sqrt(rho * rho + 520.0 * t)
    return math.sqrt(max(target - rho, 1e-8)) + 1.0


def khh(t: float, rho: float, rel_tol: float = 1e-9) -> float:
    """Free heat kernel K(t; rho) on the hyperbolic plane."""
    val, _ = khh_with_error(t, rho, rel_tol)
    return val


def khh_with_error(t: float, rho: float, rel_tol: float = 1e-9) -> tuple[float, float]:
    if not (t > 0.0) or rho < 0.0:
        raise DomainError(f"need t > 0 and rho >= 0, got t={t}, rho={rho}")
    U = _upper_limit(rho, t)
    out = quad(
        _integrand,
        0.0,
        U,
        args=(rho, t),
        epsabs=1e-300,
        epsrel=rel_tol,
        limit=200,
        full_output=1,
    )
    if len(out) > 3:
        raise QuadratureError(
            f"radial quadrature did not converge at t={t}, rho={rho}: {out[3]}"
        )
    val, abserr = out[0], out[1]
    if not math.isfinite(val) or val < 0.0:
        raise QuadratureError(f"radial quadrature returned {val} at t={t}, rho={rho}")
    if val == 0.0:
        # genuine underflow: exp(-rho^2/4t) below double range
        if rho * rho / (4.0 * t) > 600.0:
            return 0.0, 0.0
        raise QuadratureError(f"radial quadrature collapsed at t={t}, rho={rho}")
    pref = _prefactor(t)
    return pref * val, pref * abserr


class RadialKernel:
    """Spline cache of K(t; .) on a geometric rho-grid at fixed t.

    Stores the envelope-stripped log-kernel S(rho); evaluation recovers
    K = exp(S - rho^2/(4t) - rho/2) and its first two rho-derivatives.
    The grid is refined until spot checks at off-grid points agree with
    direct quadrature to the requested relative tolerance.
    """

    def __init__(
        self,
        t: float,
        rho_max: float,
        rho_min: float = 1e-3,
        rel_tol: float = 1e-9,
        n0: int = 512,
    ):
        if rho_max <= rho_min:
            rho_max = rho_min * 2.0
        self.t = t
        self.rho_min = rho_min
        self.rho_max = rho_max
        self.rel_tol = rel_tol
        n = n0
        rng = np.random.default_rng(12345)
        while True:
            grid = np.geomspace(rho_min, rho_max, n)
            vals = np.array([khh(t, r, rel_tol) for r in grid])
            pos = vals > 0.0
            if not pos.all():
                # kernel underflows before rho_max; shrink the cached range
                last = int(np.nonzero(pos)[0][-1])
                grid, vals = grid[: last + 1], vals[: last + 1]
                self.rho_max = rho_max = float(grid[-1])
            S = np.log(vals) + grid**2 / (4.0 * t) + grid / 2.0
            spline = CubicSpline(grid, S)
            # audit at off-grid points
            probes = np.sqrt(grid[:-1] * grid[1:])[rng.integers(0, len(grid) - 1, size=12)]
            ok = True
            for r in probes:
                exact = khh(t, float(r), rel_tol)
                approx = math.exp(
                    float(spline(r)) - r * r / (4.0 * t) - r / 2.0
                )
                if abs(approx - exact) > 20.0 * rel_tol * exact:
                    ok = False
                    break
            if ok or n >= 8192:
                if not ok:
                    raise QuadratureError(
                        f"radial cache failed validation at t={t} even at n={n}"
                    )
                break
            n *= 2
        self._spline = spline
        self._d1 = spline.derivative(1)
        self._d2 = spline.derivative(2)
        self.s1_max = float(np.max(np.abs(self._d1(grid))))
        self.s2_max = float(np.max(np.abs(self._d2(grid))))

    def _envelope(self, rho: np.ndarray) -> np.ndarray:
        return -rho * rho / (4.0 * self.t) - rho / 2.0

    def _underflows(self, rho: np.ndarray) -> np.ndarray:
        return rho * rho / (4.0 * self.t) > 600.0

    def eval(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.float64)
        out = np.zeros_like(rho)
        inside = (rho >= self.rho_min) & (rho <= self.rho_max)
        r_in = rho[inside]
        out[inside] = np.exp(self._spline(r_in) + self._envelope(r_in))
        outside = ~inside & ~self._underflows(rho)
        for idx in np.nonzero(outside)[0]:
            out[idx] = khh(self.t, float(rho[idx]), min(self.rel_tol, 1e-11))
        return out

    def eval_with_derivs(self, rho: np.ndarray):
        """K, K', K'' at rho; beyond the cached range only underflowed
        points (all three derivatives zero to double precision) pass."""
        rho = np.asarray(rho, dtype=np.float64)
        inside = (rho >= self.rho_min) & (rho <= self.rho_max)
        bad = ~inside & ~self._underflows(rho)
        if np.any(bad):
            raise DomainError("derivative evaluation outside the cached range")
        K = np.zeros_like(rho)
        K1 = np.zeros_like(rho)
        K2 = np.zeros_like(rho)
        r_in = rho[inside]
        Ki = np.exp(self._spline(r_in) + self._envelope(r_in))
        e1 = self._d1(r_in) - r_in / (2.0 * self.t) - 0.5
        K[inside] = Ki
        K1[inside] = Ki * e1
        K2[inside] = Ki * (e1 * e1 + self._d2(r_in) - 1.0 / (2.0 * self.t))
        return K, K1, K2


@lru_cache(maxsize=64)
def _radial_cache(t: float, rho_max: float, rel_tol: float) -> RadialKernel:
    return RadialKernel(t, rho_max=rho_max, rel_tol=rel_tol)


def radial_kernel(t: float, rho_max: float, rel_tol: float = 1e-9) -> RadialKernel:
    # quantize rho_max so near-identical requests share a cache entry
    rmax = math.ceil(rho_max * 4.0) / 4.0 + 0.25
    return _radial_cache(t, rmax, rel_tol)


# ----------------------------------------------------------------------
# Truncation control
# ----------------------------------------------------------------------

def kernel_shell_bound(t: float, rho: float) -> float:
    """Upper bound for K(t; rho), valid for rho >= 0.35."""
    c2 = 4.0 * math.sqrt(2.0 * math.pi) * math.exp(-t / 4.0) / (4.0 * math.pi * t) ** 1.5
    ex = -rho / 2.0 - rho * rho / (4.0 * t)
    return c2 * (rho + 2.0) * math.exp(max(ex, -745.0))


def images_tail_bound(t: float, R: float, growth_const: float) -> float:
    """Certified bound on sum over d(z, gamma w) > R of K(t; .), given the
    counting premise N(r) <= growth_const * e^r."""
    if R < _KBOUND_RHO_MIN:
        raise DomainError("tail bound valid only for R >= 0.5")
    total = 0.0
    k = 0
    while True:
        rho = R + k
        term = growth_const * math.exp(min(rho + 1.0, 700.0)) * kernel_shell_bound(t, rho)
        total += term
        if term < 1e-4 * total or k > 400:
            break
        k += 1
    return total


def calibrate_growth(spec: GroupSpec, z: Point, w: Point,
                     cap: int = DEFAULT_ORBIT_CAP) -> float:
    """Empirical constant A with N(z, w; r) <= A e^r on sampled radii,
    inflated by a safety factor 4."""
    if spec.free:
        return 1.0
    data = orbit_arrays(spec, z, w, _CALIBRATION_RADIUS, cap)
    radii = np.arange(1.0, _CALIBRATION_RADIUS + 0.5, 0.5)
    ratio = 0.25
    for r in radii:
        n = int(np.count_nonzero(data.dist <= r))
        if n:
            ratio = max(ratio, n / math.exp(r))
    return 4.0 * ratio


def auto_radius(t: float, tail_eps: float, growth_const: float,
                r_floor: float = R_FLOOR, r_max: float = R_HARD_MAX) -> float:
    """Smallest R on a 1/4 grid with images_tail_bound <= tail_eps."""
    R = r_floor
    while R <= r_max:
        if images_tail_bound(t, R, growth_const) <= tail_eps:
            return R
        R += 0.25
    raise BudgetError(
        f"tail bound {tail_eps:g} unreachable at t={t} below R={r_max} "
        f"(growth const {growth_const:.3g})"
    )


# ----------------------------------------------------------------------
# Quotient kernel
# ----------------------------------------------------------------------

def images_dist(data: OrbitData, z: Point, w: Point) -> np.ndarray:
    """d(z, gamma w) for every enumerated gamma, vectorized.

    Valid for any (z, w); completeness of the set is only guaranteed for
    points near the pair the enumeration was run at.
    """
    zc, wc = z.z, w.z
    P = data.c * (zc * wc) + data.d * zc - data.a * wc - data.b
    u = (P.real**2 + P.imag**2) / (4.0 * z.y * w.y)
    small = u < 1e-8
    out = np.empty_like(u)
    ru = np.sqrt(u[small])
    out[small] = 2.0 * ru * (1.0 - u[small] / 6.0)
    out[~small] = np.arccosh(1.0 + 2.0 * u[~small])
    return out


def _sum_kernel(kern: RadialKernel, dists: np.ndarray) -> float:
    # fixed (sorted) order; numpy pairwise summation keeps this deterministic
    return float(np.sum(kern.eval(np.sort(dists))))


def khyp(spec: GroupSpec, params: HeatParams, z: Point, w: Point,
         cap: int = DEFAULT_ORBIT_CAP) -> KernelValue:
    """Quotient heat kernel by the method of images, with certified tail."""
    t = params.t
    if spec.free:
        val = khh(t, distance(z, w), params.quad_rel_tol)
        return KernelValue(val, 0.0, math.inf, 1)
    growth = calibrate_growth(spec, z, w, cap)
    if params.trunc_radius is not None:
        R = params.trunc_radius
        tail = images_tail_bound(t, R, growth)
    else:
        R = auto_radius(t, params.tail_eps, growth)
        tail = images_tail_bound(t, R, growth)
        if tail > params.tail_eps:
            raise BudgetError("auto radius failed to meet tail_eps")
    data = orbit_arrays(spec, z, w, R, cap)
    kern = radial_kernel(t, rho_max=R + 0.5, rel_tol=params.quad_rel_tol)
    val = _sum_kernel(kern, data.dist)
    return KernelValue(val, tail, R, len(data))


def khyp_at(spec: GroupSpec, t: float, z: Point, w: Point, data: OrbitData,
            kern: RadialKernel) -> float:
    """Kernel sum over a pre-enumerated orbit; z, w may differ slightly
    from the enumeration base (stencil evaluations)."""
    return _sum_kernel(kern, images_dist(data, z, w))


# ----------------------------------------------------------------------
# Heat equation check
# ----------------------------------------------------------------------

_D2_STENCIL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _laplacian_fd(fvals: np.ndarray, h: float, y: float) -> float:
    """-y^2 (f_xx + f_yy) from 9 samples: center, 4 x-offsets, 4 y-offsets.

    fvals layout: [f(-2h_x), f(-h_x), f(0), f(h_x), f(2h_x),
                   f(-2h_y), f(-h_y), f(h_y), f(2h_y)]
    Samples are centered on f(0) to avoid the common-offset cancellation.
    """
    v = fvals - fvals[2]
    fxx = (
        _D2_STENCIL[0] * v[0] + _D2_STENCIL[1] * v[1]
        + _D2_STENCIL[3] * v[3] + _D2_STENCIL[4] * v[4]
    ) / (h * h)
    fyy = (
        _D2_STENCIL[0] * v[5] + _D2_STENCIL[1] * v[6]
        + _D2_STENCIL[3] * v[7] + _D2_STENCIL[4] * v[8]
    ) / (h * h)
    return -y * y * (fxx + fyy)


def _stencil_points(z: Point, h: float) -> list[Point]:
    return [
        Point(z.x - 2 * h, z.y), Point(z.x - h, z.y), z,
        Point(z.x + h, z.y), Point(z.x + 2 * h, z.y),
        Point(z.x, z.y - 2 * h), Point(z.x, z.y - h),
        Point(z.x, z.y + h), Point(z.x, z.y + 2 * h),
    ]


def heat_equation_residual(spec: GroupSpec, params: HeatParams, z: Point,
                           w: Point, h_rel: float = 2e-3,
                           tau_rel: float = 1e-3,
                           cap: int = DEFAULT_ORBIT_CAP) -> float:
    """Relative residual |Delta_z K_hyp + dK_hyp/dt| / |dK_hyp/dt|.

    Central differences: 4th-order 5-point stencils in z (spacing h,
    scaled by height) and in t (spacing tau), one Richardson level in z.
    """
    t = params.t
    h = h_rel * z.y
    tau = tau_rel * t
    growth = calibrate_growth(spec, z, w, cap) if not spec.free else 1.0
    if params.trunc_radius is not None:
        R = params.trunc_radius
    elif spec.free:
        R = distance(z, w) + 1.0
    else:
        R = auto_radius(t + 2 * tau, params.tail_eps, growth)

    if spec.free:
        ident = OrbitData(
            np.array([1]), np.array([0]), np.array([0]), np.array([1]),
            np.array([distance(z, w)]), R,
        )
        data = ident
    else:
        data = orbit_arrays(spec, z, w, R + 0.1, cap)

    kerns = {
        dt: radial_kernel(t + dt, rho_max=R + 0.6, rel_tol=params.quad_rel_tol)
        for dt in (-2 * tau, -tau, 0.0, tau, 2 * tau)
    }

    def ksum(zz: Point, kern: RadialKernel) -> float:
        return _sum_kernel(kern, images_dist(data, zz, w))

    def lap(hh: float) -> float:
        vals = np.array([ksum(p, kerns[0.0]) for p in _stencil_points(z, hh)])
        return _laplacian_fd(vals, hh, z.y)

    lap_h = lap(h)
    lap_h2 = lap(h / 2.0)
    lap_rich = (16.0 * lap_h2 - lap_h) / 15.0

    tvals = np.array([ksum(z, kerns[dt]) for dt in (-2 * tau, -tau, 0.0, tau, 2 * tau)])
    dkdt = float(np.dot(_D1_STENCIL, tvals)) / tau

    if abs(dkdt) < 1e-300:
        raise DomainError("degenerate time derivative; move t away from a stationary point")
    return abs(lap_rich + dkdt) / abs(dkdt)
