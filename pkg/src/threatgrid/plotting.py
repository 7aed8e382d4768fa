"""Static figures: top-down threat view and per-stage timing boxplot."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon  # noqa: E402

from .geometry import HullPolygon  # noqa: E402
from .grid import GridFrame, occupancy_probability_grid  # noqa: E402
from .threat import AttentionRaster, ThreatReport, ThreatStatus  # noqa: E402

# deterministic SVG output: fixed hash salt, no timestamp metadata
plt.rcParams["svg.hashsalt"] = "threatgrid"
_SVG_META = {"Date": None}


def _poly(ax, hull: HullPolygon, **kw):
    pts = hull.as_array()
    if len(pts) >= 3:
        ax.add_patch(Polygon(pts, closed=True, **kw))
    else:
        ax.plot(pts[:, 0], pts[:, 1], color=kw.get("edgecolor", "k"))


def plot_scene(path, frame: GridFrame, report: ThreatReport, raster: AttentionRaster | None = None,
               corridor: HullPolygon | None = None, p_occ_min: float = 0.6, v_min: float = 1.0,
               title: str | None = None):
    """Top-down view: mapped corridor, attention raster, occupied cells
    (moving ones coloured by velocity direction, static ones gray), predicted
    cluster areas and the ego hull."""
    fig, ax = plt.subplots(figsize=(8, 8))
    a = frame.cell_size
    x0 = frame.origin[0] - 0.5 * a
    y0 = frame.origin[1] - 0.5 * a
    extent = (x0, x0 + frame.width * a, y0, y0 + frame.height * a)

    if corridor is not None:
        _poly(ax, corridor, facecolor="0.93", edgecolor="0.6", lw=0.8, zorder=0)
    if raster is not None and raster.mask.any():
        ax.imshow(np.where(raster.mask, 1.0, np.nan), origin="lower", extent=extent, cmap="Greys",
                  vmin=0, vmax=1.4, alpha=0.8, interpolation="nearest", zorder=1)

    occ = occupancy_probability_grid(frame.m_occ, frame.m_free) >= p_occ_min
    moving = occ & (np.hypot(frame.vel[..., 0], frame.vel[..., 1]) >= v_min)
    static = occ & ~moving
    if static.any():
        ax.imshow(np.where(static, 1.0, np.nan), origin="lower", extent=extent, cmap="Greys",
                  vmin=0, vmax=2.5, interpolation="nearest", zorder=2)
    if moving.any():
        ang = np.arctan2(frame.vel[..., 1], frame.vel[..., 0])
        img = np.where(moving, (ang + math.pi) / (2 * math.pi), np.nan)
        ax.imshow(img, origin="lower", extent=extent, cmap="hsv", vmin=0, vmax=1,
                  interpolation="nearest", zorder=2)

    _poly(ax, report.ego_hull, facecolor=(0.1, 0.7, 0.2, 0.25), edgecolor="green", lw=1.5, zorder=3)
    for e in report.entries:
        threat = e.status is ThreatStatus.THREAT
        _poly(ax, e.hull, facecolor=(0.1, 0.3, 0.9, 0.2), edgecolor="blue",
              lw=1.8 if threat else 1.0, ls="-" if threat else "--", zorder=4)
        _poly(ax, e.attributes.box, facecolor="none", edgecolor="navy", lw=1.0, zorder=5)

    pts = np.vstack([report.ego_hull.as_array()] + [e.hull.as_array() for e in report.entries])
    ax.set_xlim(min(extent[0], pts[:, 0].min() - 1), max(extent[1], pts[:, 0].max() + 1))
    ax.set_ylim(min(extent[2], pts[:, 1].min() - 1), max(extent[3], pts[:, 1].max() + 1))
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title or f"t = {report.timestamp:.1f} s")
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META if str(path).endswith(".svg") else None)
    plt.close(fig)
    return Path(path)


def plot_stage_times(path, per_stage: dict[str, list[float]], title: str = "per-frame stage time"):
    """Boxplot of per-frame wall time (ms) for each stage."""
    names = list(per_stage)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.boxplot([np.asarray(per_stage[n]) * 1e3 for n in names], showfliers=False)
    ax.set_xticks(range(1, len(names) + 1), names, rotation=20)
    ax.set_ylabel("ms")
    ax.set_yscale("log")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, metadata=_SVG_META if str(path).endswith(".svg") else None)
    plt.close(fig)
    return Path(path)
