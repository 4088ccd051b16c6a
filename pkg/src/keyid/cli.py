"""Command-line front end.

Commands: signature, heat, verify-surface, verify-product, coeffs.
Exit codes: 0 success, 2 usage/config error, 3 tolerance failure,
4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import report
from .config import RunConfig, apply_overrides, parse_config
from .cuspforms import data_dir, eta_product_basis, get_basis, read_table
from .errors import (
    BudgetError,
    ConfigError,
    DomainError,
    EnumerationCapError,
    KeyidError,
    QuadratureError,
    UnsupportedLevelError,
)
from .fuchsian import GroupSpec, signature, volume
from .heatkernel import HeatParams, khh, khyp
from .hypgeom import Point
from .identity import product_residual, surface_residual


def product_point_sets(cfg: RunConfig) -> tuple[list[Point], list[Point]]:
    """Deterministic per-surface samples: n points along the grid
    diagonal (x linear, y geometric)."""

    def diagonal(n: int) -> list[Point]:
        # alternate signs and keep |x| away from the density-suppressed
        # geodesic through the zero cusp
        hi = max(abs(cfg.x_min), abs(cfg.x_max))
        lo = hi / 3.0
        xs = [
            (lo + (hi - lo) * k / max(n - 1, 1)) * (-1.0 if k % 2 else 1.0)
            for k in range(n)
        ]
        ys = np.geomspace(cfg.y_min, cfg.y_max, n)
        return [Point(float(x), float(y)) for x, y in zip(xs, ys)]

    return diagonal(cfg.points1), diagonal(cfg.points2)


def _parse_point(text: str) -> Point:
    try:
        x, y = (float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}; expected `x,y`") from exc
    return Point(x, y)


def _parse_radius(text: str | None) -> tuple[str, float] | None:
    if text is None:
        return None
    try:
        if text.startswith("+"):
            return ("rel", float(text[1:]))
        return ("abs", float(text))
    except ValueError as exc:
        raise ConfigError(f"bad radius {text!r}") from exc


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    return apply_overrides(
        cfg,
        level1=getattr(args, "level", None),
        level2=getattr(args, "level2", None),
        out=args.out if getattr(args, "out", None) else None,
        threads=getattr(args, "threads", None),
        target=getattr(args, "tol", None),
        figures=(False if getattr(args, "no_figures", False) else None),
    )


def cmd_signature(args) -> int:
    spec = GroupSpec(args.level)
    sig = signature(spec)
    orders = ",".join(str(m) for m in sig.elliptic_orders) or "-"
    print(f"level {args.level}: genus {sig.genus}, cusps {sig.cusp_count}, "
          f"elliptic orders [{orders}]")
    print(f"volume {volume(sig):.12f}")
    return 0


def cmd_heat(args) -> int:
    z = _parse_point(args.z)
    w = _parse_point(args.w) if args.w else z
    radius = _parse_radius(args.radius)
    if args.free:
        from .hypgeom import distance

        val = khh(args.t, distance(z, w))
        print(f"khh({args.t:g}; z, w) = {val:.17g}")
        return 0
    spec = GroupSpec(args.level)
    params = HeatParams(t=args.t, tail_eps=args.tol or 1e-6)
    if radius is not None:
        if radius[0] == "abs":
            params = HeatParams(t=args.t, trunc_radius=radius[1],
                                tail_eps=params.tail_eps)
        else:
            from .heatkernel import auto_radius, calibrate_growth

            growth = calibrate_growth(spec, z, w)
            base = auto_radius(args.t, params.tail_eps, growth)
            params = HeatParams(t=args.t, trunc_radius=base + radius[1],
                                tail_eps=params.tail_eps)
    kv = khyp(spec, params, z, w)
    print(f"khyp({args.t:g}; z, w) = {kv.value:.17g}")
    print(f"tail bound {kv.tail_bound:.3g} at radius {kv.radius:g} "
          f"({kv.n_terms} group elements)")
    return 0


def _surface_grid(cfg: RunConfig) -> list[Point]:
    xs = np.linspace(cfg.x_min, cfg.x_max, cfg.nx)
    ys = np.geomspace(cfg.y_min, cfg.y_max, cfg.ny)
    return [Point(float(x), float(y)) for y in ys for x in xs]


def cmd_verify_surface(args) -> int:
    cfg = _load_config(args)
    spec = GroupSpec(cfg.level1)
    basis = get_basis(cfg.level1)
    grid = _surface_grid(cfg)

    def work(z: Point):
        return surface_residual(spec, basis, z, target=cfg.target, h_tol=cfg.h_tol)

    with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
        results = list(pool.map(work, grid))

    header = ["x", "y", "lhs", "rhs", "residual", "error_budget"]
    rows = [
        (z.x, z.y, dp.lhs, dp.rhs, dp.residual, dp.error_budget)
        for z, dp in zip(grid, results)
    ]
    csv_text = report.render_csv(header, rows)
    if cfg.out:
        report.write_csv(cfg.out, header, rows)
        if cfg.figures:
            fig = report.surface_figure(cfg.out, rows)
            print(f"wrote {cfg.out} and {fig}")
        else:
            print(f"wrote {cfg.out}")
    else:
        sys.stdout.write(csv_text)

    if any(dp.error_budget >= cfg.target for dp in results):
        print(f"budget violation: some error budgets exceed the target "
              f"{cfg.target:g}", file=sys.stderr)
        return 3
    if any(dp.residual > cfg.target for dp in results):
        print(f"residuals exceed the target {cfg.target:g}", file=sys.stderr)
        return 3
    return 0


def cmd_verify_product(args) -> int:
    cfg = _load_config(args)
    spec1, spec2 = GroupSpec(cfg.level1), GroupSpec(cfg.level2)
    basis1, basis2 = get_basis(cfg.level1), get_basis(cfg.level2)
    pts1, pts2 = product_point_sets(cfg)
    print(f"# product verification: levels ({cfg.level1},{cfg.level2}), "
          f"g1*g2 = {basis1.genus * basis2.genus}")

    pairs = [(z1, z2) for z1 in pts1 for z2 in pts2]

    def work(pair):
        z1, z2 = pair
        return product_residual(
            spec1, spec2, basis1, basis2, z1, z2,
            target=cfg.target_product, h_tol=cfg.h_tol,
        )

    with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
        results = list(pool.map(work, pairs))

    header = ["x1", "y1", "x2", "y2", "lhs", "term1", "term2", "term3",
              "term4", "residual", "error_budget"]
    rows = [
        (z1.x, z1.y, z2.x, z2.y, pr.lhs, *pr.terms, pr.residual, pr.error_budget)
        for (z1, z2), pr in zip(pairs, results)
    ]
    if cfg.out:
        report.write_csv(cfg.out, header, rows)
        if cfg.figures:
            fig = report.product_figure(cfg.out, rows, len(pts1), len(pts2))
            print(f"wrote {cfg.out} and {fig}")
        else:
            print(f"wrote {cfg.out}")
    else:
        sys.stdout.write(report.render_csv(header, rows))

    if any(pr.error_budget >= cfg.target_product for pr in results):
        print("budget violation on the product grid", file=sys.stderr)
        return 3
    if any(pr.residual > cfg.target_product for pr in results):
        print("product residuals exceed the target", file=sys.stderr)
        return 3
    return 0


def cmd_coeffs(args) -> int:
    level = args.level
    if level == 37:
        lvl, rows = read_table(data_dir() / "level37_weight2.txt")
        coeff_rows = rows
    else:
        forms = eta_product_basis(level)
        coeff_rows = [[int(c) for c in f.coeffs] for f in forms]
    lines = [f"level {level} dim {len(coeff_rows)} order {len(coeff_rows[0])}"]
    lines += [" ".join(str(c) for c in row) for row in coeff_rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="keyid",
        description="verify the canonical-vs-hyperbolic metric key identity "
        "on modular orbisurfaces and their products",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("signature", help="signature and volume of X_0(N)")
    ps.add_argument("--level", type=int, required=True)
    ps.set_defaults(func=cmd_signature)

    ph = sub.add_parser("heat", help="evaluate the quotient heat kernel")
    ph.add_argument("--level", type=int, default=11)
    ph.add_argument("--t", type=float, default=1.0)
    ph.add_argument("--z", type=str, default="0.2,1.4")
    ph.add_argument("--w", type=str, default=None)
    ph.add_argument("--free", action="store_true",
                    help="trivial group: print the free kernel only")
    ph.add_argument("--tol", type=float, default=None, help="tail bound target")
    ph.add_argument("--radius", type=str, default=None,
                    help="truncation radius; +X adds to the auto choice")
    ph.set_defaults(func=cmd_heat)

    for name, fn in (("verify-surface", cmd_verify_surface),
                     ("verify-product", cmd_verify_product)):
        pv = sub.add_parser(name, help=f"{name.replace('-', ' ')} report")
        pv.add_argument("--level", type=int, default=None)
        pv.add_argument("--level2", type=int, default=None)
        pv.add_argument("--config", type=str, default=None)
        pv.add_argument("--out", type=str, default=None)
        pv.add_argument("--threads", type=int, default=None)
        pv.add_argument("--tol", type=float, default=None,
                        help="residual target override")
        pv.add_argument("--radius", type=str, default=None)
        pv.add_argument("--no-figures", action="store_true",
                        help="skip the PNG figures next to the CSV")
        pv.set_defaults(func=fn)

    pc = sub.add_parser("coeffs", help="dump q-expansion coefficient tables")
    pc.add_argument("--level", type=int, required=True)
    pc.add_argument("--out", type=str, default=None)
    pc.set_defaults(func=cmd_coeffs)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, UnsupportedLevelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetError, QuadratureError, EnumerationCapError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except KeyidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
