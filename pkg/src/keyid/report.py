"""CSV reports and the figures rendered alongside them.

CSV is the machine contract: header row, `.` decimal, 17 significant
digits (round-trips doubles), fixed evaluation order, so identical
configurations produce byte-identical files.  Figures are PNG renderings
of the same rows written next to the delimited output.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def render_csv(header: list[str], rows: list[tuple]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    Path(path).write_text(render_csv(header, rows), encoding="ascii")


def _fig_path(out_path: str, suffix: str) -> Path:
    p = Path(out_path)
    return p.with_name(p.stem + suffix + ".png")


def surface_figure(out_path: str, rows: list[tuple]) -> Path:
    """Residual map and side-by-side densities for a surface report.

    Row layout: (x, y, lhs, rhs, residual, error_budget).
    """
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    lhs = np.array([r[2] for r in rows])
    rhs = np.array([r[3] for r in rows])
    res = np.array([r[4] for r in rows])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    sc = ax1.scatter(x, y, c=np.log10(np.maximum(res, 1e-18)), cmap="viridis", s=60)
    fig.colorbar(sc, ax=ax1, label=r"$\log_{10}$ residual")
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_title("key-identity residual over the grid")

    idx = np.arange(len(rows))
    ax2.semilogy(idx, np.abs(lhs), "o-", label="|lhs|  (canonical density)")
    ax2.semilogy(idx, np.abs(rhs), "s--", label="|rhs|  (heat-kernel side)")
    ax2.set_xlabel("grid point index")
    ax2.set_ylabel("density")
    ax2.set_title("both sides of the identity")
    ax2.legend()
    fig.tight_layout()
    path = _fig_path(out_path, "_residuals")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def product_figure(out_path: str, rows: list[tuple], n1: int, n2: int) -> Path:
    """Residual matrix and term magnitudes for a product report.

    Row layout: (x1, y1, x2, y2, lhs, t1, t2, t3, t4, residual, budget).
    """
    res = np.array([r[9] for r in rows]).reshape(n1, n2)
    worst = int(np.argmax([r[9] for r in rows]))
    terms = np.abs(np.array(rows[worst][5:9], dtype=float))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    im = ax1.imshow(np.log10(np.maximum(res, 1e-18)), cmap="magma", origin="lower")
    fig.colorbar(im, ax=ax1, label=r"$\log_{10}$ residual")
    ax1.set_xlabel("surface-2 sample")
    ax1.set_ylabel("surface-1 sample")
    ax1.set_title("product-identity residuals")

    ax2.bar(range(1, 5), terms, color="tab:blue")
    ax2.set_yscale("log")
    ax2.set_xticks(range(1, 5))
    ax2.set_xticklabels(["$A_1A_2$", r"$\frac{1}{2}A_1H_2$",
                         r"$\frac{1}{2}A_2H_1$", r"$\frac{1}{4}H_1H_2$"])
    ax2.set_title("four right-side terms at the worst point")
    fig.tight_layout()
    path = _fig_path(out_path, "_product")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
