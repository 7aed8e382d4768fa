"""Cluster identification on a dynamic occupancy grid.

Pipeline per frame: :func:`search_mask` keeps occupied, moving cells;
:func:`dbscan` groups them; :func:`plausibilize` rejects artifacts;
:func:`cluster_attributes` derives position, heading, speed and an oriented
box for every surviving cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import HullPolygon
from .grid import CellState, GridFrame, occupancy_probability_grid

# relative slack on the DBSCAN radius so that lattice neighbours at exactly
# eps survive rounding in the cell-center arithmetic
EPS_SLACK = 1e-9


@dataclass(frozen=True)
class MaskConfig:
    v_min: float = 1.0
    p_occ_min: float = 0.6

    def __post_init__(self):
        if not self.v_min > 0:
            raise ValueError(f"v_min must be positive, got {self.v_min}")
        if not 0 < self.p_occ_min < 1:
            raise ValueError(f"p_occ_min must lie in (0, 1), got {self.p_occ_min}")


@dataclass(frozen=True)
class PlausibilityConfig:
    p_occ_min: float = 0.6
    p_move_min: float = 0.5
    var_max: float = 2.0
    n_min: int = 4
    n_max: int = 2000

    def __post_init__(self):
        for name in ("p_occ_min", "p_move_min", "var_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ValueError(f"need 2 <= n_min <= n_max, got {self.n_min}, {self.n_max}")


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 0.4
    min_pts: int = 3

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True, eq=False)
class Cluster:
    """Member cells of one cluster, sorted by ``(row, col)``.

    The per-member state arrays are gathered from the frame once so the
    statistics below stay vectorized.
    """

    id: int
    members: tuple[tuple[int, int], ...]
    positions: np.ndarray = field(repr=False)
    vel: np.ndarray = field(repr=False)
    vel_cov: np.ndarray = field(repr=False)
    m_occ: np.ndarray = field(repr=False)
    m_free: np.ndarray = field(repr=False)

    @classmethod
    def from_frame(cls, cid: int, frame: GridFrame, members) -> "Cluster":
        members = tuple(sorted((int(r), int(c)) for r, c in members))
        if not members:
            raise ValueError("cluster without members")
        rows = np.fromiter((m[0] for m in members), dtype=np.intp, count=len(members))
        cols = np.fromiter((m[1] for m in members), dtype=np.intp, count=len(members))
        return cls(
            cid, members, frame.positions[rows, cols], frame.vel[rows, cols],
            frame.vel_cov[rows, cols], frame.m_occ[rows, cols], frame.m_free[rows, cols],
        )

    def __len__(self):
        return len(self.members)

    @cached_property
    def states(self) -> list[CellState]:
        return [
            CellState(float(self.m_occ[i]), float(self.m_free[i]), tuple(self.positions[i].tolist()),
                      tuple(self.vel[i].tolist()), tuple(self.vel_cov[i].tolist()))
            for i in range(len(self.members))
        ]


@dataclass(frozen=True)
class ClusterAttributes:
    """Derived cluster state used by the prediction.

    ``box`` is the oriented rectangle as a hull; ``box_center``,
    ``half_length`` and ``half_width`` describe the same rectangle in its own
    frame (long axis along ``heading``).
    """

    position: tuple[float, float]
    heading: float
    speed: float
    box: HullPolygon
    box_center: tuple[float, float]
    half_length: float
    half_width: float


class ClusterAttributeError(ValueError):
    pass


def search_mask(frame: GridFrame, cfg: MaskConfig) -> np.ndarray:
    """Boolean ``(height, width)`` mask of occupied cells moving at least ``v_min``."""
    p_occ = occupancy_probability_grid(frame.m_occ, frame.m_free)
    speed2 = frame.vel[..., 0] ** 2 + frame.vel[..., 1] ** 2
    return (p_occ >= cfg.p_occ_min) & (speed2 >= cfg.v_min * cfg.v_min)


def mask_indices(mask: np.ndarray) -> np.ndarray:
    """``(n, 2)`` array of ``(row, col)`` in row-major (ascending index) order."""
    return np.argwhere(mask)


def dbscan_labels(positions: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN over points given in ascending cell-index order.

    Returns one label per point, ``-1`` for noise, clusters numbered by
    their smallest member index. The neighbourhood is the closed ball of
    radius ``eps`` and includes the point itself. A border point reachable
    from several clusters joins the one owning its lowest-index core
    neighbour, which makes the partition independent of visiting order.
    """
    n = len(positions)
    labels = np.full(n, -1, dtype=np.intp)
    if n == 0:
        return labels
    r = eps * (1 + EPS_SLACK)
    tree = cKDTree(positions)
    pairs = tree.query_pairs(r, output_type="ndarray")
    counts = np.ones(n, dtype=np.intp)
    if len(pairs):
        np.add.at(counts, pairs[:, 0], 1)
        np.add.at(counts, pairs[:, 1], 1)
    core = counts >= min_pts
    if not core.any():
        return labels

    core_idx = np.flatnonzero(core)
    if len(pairs):
        both = core[pairs[:, 0]] & core[pairs[:, 1]]
        cp = pairs[both]
    else:
        cp = np.empty((0, 2), dtype=np.intp)
    graph = coo_matrix((np.ones(len(cp), dtype=np.int8), (cp[:, 0], cp[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    # border rule: lowest-index core neighbour decides
    owner = np.full(n, -1, dtype=np.intp)
    owner[core_idx] = core_idx
    if len(pairs):
        for a, b in ((0, 1), (1, 0)):
            sel = ~core[pairs[:, a]] & core[pairs[:, b]]
            if sel.any():
                border, nb = pairs[sel, a], pairs[sel, b]
                best = np.full(n, n, dtype=np.intp)
                best[owner >= 0] = owner[owner >= 0]
                np.minimum.at(best, border, nb)
                update = best < n
                owner[update] = best[update]
    assigned = owner >= 0
    comp_of = np.full(n, -1, dtype=np.intp)
    comp_of[assigned] = comp[owner[assigned]]

    # renumber components by smallest member index
    seen: dict[int, int] = {}
    for i in np.flatnonzero(assigned):
        c = comp_of[i]
        if c not in seen:
            seen[c] = len(seen)
        labels[i] = seen[c]
    return labels


def dbscan_cells(indices, positions, eps: float, min_pts: int) -> list[frozenset]:
    """DBSCAN over ``(row, col)`` cells given in any order.

    Returns the clusters as frozensets of cell indices, ordered by their
    smallest member.
    """
    indices = np.asarray(indices, dtype=np.intp).reshape(-1, 2)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    order = np.lexsort((indices[:, 1], indices[:, 0]))
    labels = dbscan_labels(positions[order], eps, min_pts)
    idx = indices[order]
    n_clusters = labels.max() + 1 if len(labels) else 0
    return [frozenset(map(tuple, idx[labels == k].tolist())) for k in range(n_clusters)]


def dbscan(frame: GridFrame, mask: np.ndarray, eps: float, min_pts: int) -> list[Cluster]:
    """Cluster the masked cells of ``frame`` by cell-center distance."""
    idx = mask_indices(mask)
    if len(idx) == 0:
        return []
    pos = frame.positions[idx[:, 0], idx[:, 1]]
    labels = dbscan_labels(pos, eps, min_pts)
    out = []
    n_clusters = labels.max() + 1 if len(labels) else 0
    for k in range(n_clusters):
        out.append(Cluster.from_frame(k, frame, idx[labels == k]))
    return out


def movement_probability(vel: np.ndarray, vel_cov: np.ndarray) -> np.ndarray:
    """Confidence that a cell moves at all.

    The squared Mahalanobis distance of the velocity from zero is a chi-square
    variable with two degrees of freedom under the "standing still"
    hypothesis; its CDF ``1 - exp(-d2 / 2)`` is returned. A vanishing
    covariance means the velocity is exact: moving iff non-zero.
    """
    vel = np.atleast_2d(vel)
    cov = np.atleast_2d(vel_cov)
    xx, xy, yy = cov[:, 0], cov[:, 1], cov[:, 2]
    vx, vy = vel[:, 0], vel[:, 1]
    det = xx * yy - xy * xy
    scale = np.maximum(xx + yy, 1e-300)
    nonsingular = det > 1e-12 * scale * scale
    d2 = np.where(vx * vx + vy * vy > 0, np.inf, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (yy * vx * vx - 2 * xy * vx * vy + xx * vy * vy) / det
    d2 = np.where(nonsingular, q, d2)
    return -np.expm1(-0.5 * d2)


REJECT_ORDER = ("occupancy", "movement", "variance", "size")


@dataclass(frozen=True)
class Plausibility:
    accepted: bool
    reason: str | None = None

    def __bool__(self):
        return self.accepted


def plausibilize(cluster: Cluster, cfg: PlausibilityConfig) -> Plausibility:
    """Accept or reject a cluster on cluster-mean statistics.

    Criteria are checked in a fixed order (occupancy, movement, variance,
    size) and the first failure is reported.
    """
    if occupancy_probability_grid(cluster.m_occ, cluster.m_free).mean() < cfg.p_occ_min:
        return Plausibility(False, "occupancy")
    if movement_probability(cluster.vel, cluster.vel_cov).mean() < cfg.p_move_min:
        return Plausibility(False, "movement")
    if (0.5 * (cluster.vel_cov[:, 0] + cluster.vel_cov[:, 2])).mean() > cfg.var_max:
        return Plausibility(False, "variance")
    if not cfg.n_min <= len(cluster) <= cfg.n_max:
        return Plausibility(False, "size")
    return Plausibility(True)


def box_corners(center, heading: float, half_length: float, half_width: float) -> tuple:
    c, s = math.cos(heading), math.sin(heading)
    cx, cy = center
    return tuple(
        (cx + lx * c - ly * s, cy + lx * s + ly * c)
        for lx, ly in ((-half_length, -half_width), (half_length, -half_width),
                       (half_length, half_width), (-half_length, half_width))
    )


def cluster_attributes(cluster: Cluster, cell_size: float, v_min: float = 0.0) -> ClusterAttributes:
    """Position, heading, speed and heading-aligned box of a cluster.

    The box covers every member cell center and is inflated by half a cell
    on each side so it spans the cell footprints.

    Raises:
        ClusterAttributeError: if the mean velocity vanishes or falls below
            ``v_min`` (opposing cell velocities cancelled out).
    """
    pos = cluster.positions
    p = pos.mean(axis=0)
    v = cluster.vel.mean(axis=0)
    speed = math.hypot(v[0], v[1])
    if speed == 0.0 or speed < v_min:
        raise ClusterAttributeError(f"cluster {cluster.id}: mean speed {speed:.3g} m/s below {v_min} m/s")
    heading = math.atan2(v[1], v[0])
    c, s = math.cos(heading), math.sin(heading)
    lon = pos[:, 0] * c + pos[:, 1] * s
    lat = -pos[:, 0] * s + pos[:, 1] * c
    half = 0.5 * cell_size
    lo_lon, hi_lon = lon.min() - half, lon.max() + half
    lo_lat, hi_lat = lat.min() - half, lat.max() + half
    mid_lon, mid_lat = 0.5 * (lo_lon + hi_lon), 0.5 * (lo_lat + hi_lat)
    center = (mid_lon * c - mid_lat * s, mid_lon * s + mid_lat * c)
    hl, hw = 0.5 * (hi_lon - lo_lon), 0.5 * (hi_lat - lo_lat)
    box = HullPolygon(box_corners(center, heading, hl, hw))
    return ClusterAttributes((float(p[0]), float(p[1])), heading, speed, box, center, hl, hw)
