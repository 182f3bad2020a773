"""Matplotlib renderings of fields and cut loci.

Figures are a viewing convenience with no numeric contract; regression
testing diffs the CSV outputs instead.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_heatmap(grid, path, title="", mark_singular=True):
    """Field heatmap over the inside mask; singular cells marked with x."""
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    vals = np.where(grid.inside_mask, grid.values, np.nan)
    mesh = ax.pcolormesh(grid.xs, grid.ys, vals, shading="nearest",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, shrink=0.9)
    if mark_singular and np.any(grid.singular_mask):
        iy, ix = np.nonzero(grid.singular_mask)
        ax.scatter(grid.xs[ix], grid.ys[iy], marker="x", s=12, c="red",
                   linewidths=0.8, label="singular")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_cutlocus(curve, rows, path, title="cut locus", n_rays=32):
    """Boundary, a subsample of transport rays, and the cut polyline."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    thetas = np.linspace(0.0, 2.0 * np.pi, 512)
    bd = np.asarray(curve.point(thetas))
    ax.plot(bd[:, 0], bd[:, 1], "k-", lw=1.2, label="boundary")
    stride = max(1, len(rows) // n_rays)
    for theta, cut, _, _ in rows[::stride]:
        foot = np.asarray(curve.point(theta))
        ax.plot([foot[0], cut[0]], [foot[1], cut[1]], color="0.75", lw=0.5)
    cuts = np.array([np.asarray(c) for _, c, _, _ in rows])
    ax.plot(cuts[:, 0], cuts[:, 1], "r.", ms=2.0, label="cut points")
    ax.set_aspect("equal")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
