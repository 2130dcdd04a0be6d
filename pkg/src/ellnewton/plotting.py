"""Matplotlib figures of rendered rasters (PNG report path)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402
import numpy as np  # noqa: E402

from . import lattice as lat  # noqa: E402
from . import render as rd  # noqa: E402
from .errors import IoFailure  # noqa: E402


def _legend_entries(r):
    counts = r.class_counts()
    if r.kind == "parameter":
        return [Patch(color=[c / 255 for c in col], label=f"{name} ({counts[name]})")
                for name, col in zip(rd.PARAM_CLASSES, rd.PARAM_COLORS) if counts[name]]
    cols = {
        "RootCapture": rd.ROOT_BASES[0],
        "DriftCycle": rd.DRIFT_BASES[0],
        "BoundCycle": rd.LIGHT_BLUE,
        "PrepoleHit": rd.WHITE,
        "Unresolved": rd.BLACK,
    }
    return [Patch(facecolor=[c / 255 for c in cols[k]], edgecolor="0.5", label=f"{k} ({n})")
            for k, n in counts.items() if n]


def raster_figure(r, title=None, lattice_points=True):
    cfg = r.config
    x0 = cfg.center.real - cfg.width / 2
    y0 = cfg.center.imag - cfg.height / 2
    extent = (x0, x0 + cfg.width, y0, y0 + cfg.height)
    fig, ax = plt.subplots(figsize=(6, 6 * cfg.pixels_y / cfg.pixels_x + 0.6))
    ax.imshow(rd.colorize(r), extent=extent, origin="upper", interpolation="nearest")
    if lattice_points and r.kind == "dynamical":
        L = r.lattice_snapshot
        a, b = lat.lattice_coords(cfg.center, L)
        k = int(max(cfg.width, cfg.height) / L.shortest_vector_len) + 2
        m, n = np.meshgrid(np.arange(-k, k + 1) + round(float(a)),
                           np.arange(-k, k + 1) + round(float(b)))
        pts = m * L.reduced_gen1 + n * L.reduced_gen2
        sel = (pts.real >= extent[0]) & (pts.real <= extent[1]) & \
              (pts.imag >= extent[2]) & (pts.imag <= extent[3])
        ax.plot(pts[sel].real, pts[sel].imag, "k+", ms=5, mew=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    if title:
        ax.set_title(title)
    ax.legend(handles=_legend_entries(r), loc="upper center", bbox_to_anchor=(0.5, -0.1),
              ncol=3, fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def save_figure(r, path, title=None, dpi=120):
    if not path:
        raise IoFailure("empty output path")
    fig = raster_figure(r, title=title)
    try:
        fig.savefig(path, dpi=dpi)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
