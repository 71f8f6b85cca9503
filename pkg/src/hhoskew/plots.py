"""Figure rendering for the report path (PNG files next to the tables)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import PolyCollection


def render_convergence(reports, path, title=None):
    """Log-log error-vs-meshsize figure for one convergence table."""
    hs = np.array([r.h for r in reports])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    series = [("EnergyError", "energy_error", "o-"),
              ("H1error", "h1_error", "s-"),
              ("L2error", "l2_error", "^-")]
    plotted = False
    for label, attr, style in series:
        ys = np.array([getattr(r, attr) for r in reports])
        if np.all(np.isfinite(ys)) and np.all(ys > 0.0):
            ax.loglog(hs, ys, style, label=label, markersize=4)
            plotted = True
    if plotted and len(reports) >= 2:
        k = reports[0].degree
        ref = np.array([r.energy_error for r in reports])
        if np.all(ref > 0.0):
            scale = ref[-1] / hs[-1] ** (k + 1)
            ax.loglog(hs, scale * hs ** (k + 1), "k--", linewidth=0.8,
                      label=f"h^{k + 1}")
    ax.set_xlabel("meshsize h")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_flatness_map(mesh, per_cell, path, label="flatness"):
    """Cells colored by a per-cell scalar (flatness, predicted factor, ...)."""
    polys = [mesh.vertices[loop] for loop in mesh.cell_loops]
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    coll = PolyCollection(polys, array=np.asarray(per_cell), cmap="viridis",
                          edgecolors="k", linewidths=0.15)
    ax.add_collection(coll)
    ax.set_xlim(mesh.vertices[:, 0].min(), mesh.vertices[:, 0].max())
    ax.set_ylim(mesh.vertices[:, 1].min(), mesh.vertices[:, 1].max())
    ax.set_aspect("equal")
    fig.colorbar(coll, ax=ax, label=label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
