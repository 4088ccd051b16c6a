"""Quadrature nodes over a fundamental set of Gamma_0(N).

X_0(N) is covered by the translated tiles r_j F of the modular triangle
F = {|u| <= 1/2, |w| >= 1} under right coset representatives r_j.  Nodes
are Gauss-Legendre tensor panels: the v direction is cut into geometric
panels (with a panel boundary pinned at v = 1 where the arc boundary
meets the strip), and for v < 1 the u range splits into the two lobes
outside the unit circle, so the curved bottom is integrated exactly.

Each row of nodes shares a fixed height v, which lets kernel consumers
enumerate group orbits once per row and reuse them along the row.

For prime level the cusp structure is exactly two ends: the id-tile part
{v > Y} is the cusp-infinity horoball at height Y, and the union over the
non-identity tiles of {v > N Y} is the cusp-zero horoball at local height
Y (each of the N remaining tiles contributes a 1/N slice of its width-1
cylinder).  Cutting tiles there and adding cylinder masses analytically
is therefore exact up to the analytic tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fuchsian import GroupSpec, coset_reps
from .hypgeom import GroupElement

_V_MIN = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class NodeRow:
    """One constant-height row of quadrature nodes on one tile."""

    tile: int
    rep: GroupElement
    v: float
    w: np.ndarray        # tile coordinates u + iv (complex)
    points: np.ndarray   # mapped points r_j(u + iv) (complex)
    weights: np.ndarray  # du dv / v^2 weights, ready to dot with values


def _gauss_panel(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _v_panels(cut: float, ratio: float) -> list[tuple[float, float, bool]]:
    """(v_lo, v_hi, use_theta) panels; the arc panel below v = 1 is
    parameterized by v = sin(theta) to keep the integrand smooth."""
    panels = []
    if cut <= 1.0:
        return [(_V_MIN, cut, True)] if cut > _V_MIN + 1e-12 else []
    panels.append((_V_MIN, 1.0, True))
    bounds = [1.0]
    v = 1.0
    while v * ratio < cut:
        v *= ratio
        bounds.append(v)
    bounds.append(cut)
    for i in range(len(bounds) - 1):
        if bounds[i + 1] > bounds[i] + 1e-12:
            panels.append((bounds[i], bounds[i + 1], False))
    return panels


def _mobius_many(rep: GroupElement, w: np.ndarray) -> np.ndarray:
    a, b, c, d = rep.entries
    return (a * w + b) / (c * w + d)


def tile_rows(
    spec: GroupSpec,
    cut_id: float,
    cut_other: float,
    n_u: int = 16,
    n_v: int = 8,
    v_ratio: float = 1.4,
) -> list[NodeRow]:
    """Node rows covering union_j r_j (F intersect {v <= cut_j})."""
    rows = []
    for j, rep in enumerate(coset_reps(spec)):
        is_id = rep.c % spec.level == 0 if spec.level > 1 else True
        cut = cut_id if is_id else cut_other
        for v0, v1, use_theta in _v_panels(cut, v_ratio):
            if use_theta:
                th, wth = _gauss_panel(math.asin(v0), math.asin(v1), n_v)
                vs, wv = np.sin(th), wth * np.cos(th)
            else:
                vs, wv = _gauss_panel(v0, v1, n_v)
            for v, wgt_v in zip(vs, wv):
                a = math.sqrt(max(0.0, 1.0 - v * v))
                if a >= 0.5:
                    continue
                segments = [(-0.5, -a), (a, 0.5)] if a > 0.0 else [(-0.5, 0.5)]
                us, wu = [], []
                for lo, hi in segments:
                    x, wx = _gauss_panel(lo, hi, n_u)
                    us.append(x)
                    wu.append(wx)
                u = np.concatenate(us)
                wu = np.concatenate(wu)
                w = u + 1j * v
                rows.append(
                    NodeRow(
                        tile=j,
                        rep=rep,
                        v=float(v),
                        w=w,
                        points=_mobius_many(rep, w),
                        weights=wu * (wgt_v / (v * v)),
                    )
                )
    return rows


def total_area(rows: list[NodeRow]) -> float:
    """Sum of weights: the hyperbolic area covered by the node rows."""
    return float(sum(np.sum(r.weights) for r in rows))


def horoball_area(height: float) -> float:
    """Area of a width-1 cusp cylinder above the given height."""
    return 1.0 / height
