"""Figure rendering for sweep artifacts.

Each renderer takes the structured sweep result and writes one PNG next
to the CSV.  The Agg backend is forced so the CLI works headless; the
CSV stays the authoritative artifact and every figure is a plain view of
its rows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .atoms import RasterImage

__all__ = [
    "render_siden_sweep",
    "render_error_sweep",
    "render_grid_count",
    "render_raster_pair",
]


def render_siden_sweep(result, path) -> None:
    rhos = result.column("rho")
    deltas = result.column("mean_delta_hat")
    omegas = result.column("mean_omega_hat")
    n_valid = result.column("n_valid")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(rhos, deltas, "o-", label="certified radius (mean)")
    known = [(r, o) for r, o in zip(rhos, omegas) if o is not None]
    if known:
        ax.plot(*zip(*known), "s--", label="located zero-crossing (mean)")
    ax.set_xlabel("filter size rho")
    ax.set_ylabel("descent radius")
    ax.set_title(f"descent region vs filter size ({n_valid[0]} valid trials)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def render_error_sweep(result, path) -> None:
    level_name = result.header[1]
    rows = result.rows
    rhos = sorted({row[0] for row in rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    colors = plt.cm.viridis(np.linspace(0.0, 0.85, len(rhos)))
    for rho, color in zip(rhos, colors):
        sub = sorted((r for r in rows if r[0] == rho), key=lambda r: r[1])
        levels = [r[1] for r in sub]
        ax.plot(levels, [r[2] for r in sub], "o-", color=color,
                label=f"rho = {rho:g}")
        certified = [(r[1], r[3]) for r in sub if r[3] is not None]
        if certified:
            ax.plot(*zip(*certified), "--", color=color, alpha=0.6)
    ax.set_xlabel(level_name)
    ax.set_ylabel("mean alignment error")
    ax.set_yscale("log")
    ax.set_title("alignment error (solid) and certified bound (dashed)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def render_grid_count(result, path) -> None:
    rhos = result.column("rho")
    counts = result.column("grid_points")
    products = result.column("product")
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    top.plot(rhos, counts, "o-")
    top.set_ylabel("grid points")
    median = float(np.median(products))
    bottom.plot(rhos, products, "o-")
    bottom.axhline(median, color="gray", lw=0.8)
    bottom.fill_between(
        [min(rhos), max(rhos)], 0.7 * median, 1.3 * median,
        color="gray", alpha=0.15,
    )
    bottom.set_xlabel("filter size rho")
    bottom.set_ylabel("count x (1 + rho^2)")
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def render_raster_pair(original: RasterImage, recon: RasterImage, path) -> None:
    """Side-by-side input and reconstruction on the shared domain."""
    e = original.extent
    lo = min(original.pixels.min(), recon.pixels.min())
    hi = max(original.pixels.max(), recon.pixels.max())
    fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 4.0))
    for ax, img, title in ((left, original, "input"), (right, recon, "reconstruction")):
        im = ax.imshow(
            img.pixels, cmap="gray", vmin=lo, vmax=hi, extent=(-e, e, -e, e)
        )
        ax.set_title(title)
    fig.colorbar(im, ax=(left, right), shrink=0.8)
    fig.savefig(Path(path))
    plt.close(fig)
