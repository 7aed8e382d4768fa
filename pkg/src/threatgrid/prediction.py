"""Occupied-area prediction for clusters and for the ego vehicle."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAttributes
from .geometry import EPS_GEOM, HullPolygon, convex_hull, rectangle_corners

EGO_SAMPLE_STEP = 0.1  # s


@dataclass(frozen=True)
class PredictionConfig:
    horizon: float = 3.0
    phi_u: float = 0.0  # rad

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.phi_u <= math.pi / 4:
            raise ValueError(f"phi_u must lie in [0, pi/4], got {self.phi_u}")


def predicted_area(corners, heading: float, speed: float, horizon: float, phi_u: float = 0.0) -> HullPolygon:
    """Hull swept by a box moving at constant velocity for ``horizon`` seconds.

    With ``phi_u > 0`` the end position fans out symmetrically: the box is
    shifted ``speed * horizon`` along ``heading`` and ``± speed * horizon *
    tan(phi_u)`` across it, i.e. along the rays at ``heading ± phi_u``. The
    box keeps its orientation. The result is a symmetric trapezoid whose far
    side contains every narrower fan, so the area grows monotonically in both
    ``horizon`` and ``phi_u``.
    """
    d = speed * horizon
    c, s = math.cos(heading), math.sin(heading)
    if phi_u > 0:
        lat = d * math.tan(phi_u)
        shifts = [(d * c + lat * s, d * s - lat * c), (d * c - lat * s, d * s + lat * c)]
    else:
        shifts = [(d * c, d * s)]
    pts = list(corners)
    for dx, dy in shifts:
        pts.extend((x + dx, y + dy) for x, y in corners)
    return convex_hull(pts)


def predict_cluster_area(attrs: ClusterAttributes, cfg: PredictionConfig) -> HullPolygon:
    return predicted_area(attrs.box.points, attrs.heading, attrs.speed, cfg.horizon, cfg.phi_u)


class PlanCoverageError(ValueError):
    pass


class PlanParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class EgoPlan:
    """Time-ordered poses of a rectangular vehicle.

    ``positions`` are footprint centers and ``headings`` point along the
    vehicle's long axis. Poses between samples are interpolated linearly,
    headings along the shorter arc.
    """

    times: np.ndarray
    positions: np.ndarray
    headings: np.ndarray
    length: float
    width: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        h = np.asarray(self.headings, dtype=float)
        if len(t) == 0 or len(p) != len(t) or len(h) != len(t):
            raise ValueError("plan needs matching, non-empty times/positions/headings")
        if not (np.isfinite(t).all() and np.isfinite(p).all() and np.isfinite(h).all()):
            raise ValueError("plan contains non-finite values")
        if len(t) > 1 and not (np.diff(t) > 0).all():
            raise ValueError("plan times must be strictly increasing")
        if not (self.length > 0 and self.width > 0):
            raise ValueError("footprint dimensions must be positive")
        for name, arr in (("times", t), ("positions", p), ("headings", h)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_unwrapped", np.unwrap(h))
        straight, run = _straight_runs(p, self._unwrapped)
        object.__setattr__(self, "_runs", (straight, run))
        # plain-list copies for the scalar fast path in predict_ego_area
        object.__setattr__(self, "_tlist", t.tolist())
        object.__setattr__(self, "_plist", p.tolist())
        object.__setattr__(self, "_hlist", self._unwrapped.tolist())

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def pose_at(self, t):
        """Interpolated ``(positions, headings)`` at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.interp(t, self.times, self.positions[:, 0])
        y = np.interp(t, self.times, self.positions[:, 1])
        h = np.interp(t, self.times, self._unwrapped)
        return np.column_stack([x, y]), h

    def footprint_at(self, t: float) -> HullPolygon:
        pos, h = self.pose_at(t)
        corners = rectangle_corners(pos, h, self.length, self.width)[0]
        return HullPolygon(tuple(map(tuple, corners.tolist())))

    def __eq__(self, other):
        if not isinstance(other, EgoPlan):
            return NotImplemented
        return (self.length == other.length and self.width == other.width
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.headings, other.headings))

    __hash__ = None


def ego_sample_times(t_now: float, horizon: float, step: float = EGO_SAMPLE_STEP) -> np.ndarray:
    k = max(int(math.ceil(horizon / step - 1e-9)), 0)
    ts = t_now + step * np.arange(k + 1)
    ts[-1] = t_now + horizon
    return ts


def predict_ego_area(plan: EgoPlan, t_now: float, horizon: float, step: float = EGO_SAMPLE_STEP) -> HullPolygon:
    """Convex hull of the ego footprint sampled along the plan over ``[t_now, t_now + horizon]``.

    Raises:
        PlanCoverageError: if the plan does not span the whole interval.
    """
    t_end = t_now + horizon
    slack = 1e-9
    gaps = []
    if plan.t_start > t_now + slack:
        gaps.append((t_now, plan.t_start))
    if plan.t_end < t_end - slack:
        gaps.append((plan.t_end, t_end))
    if gaps:
        desc = ", ".join(f"[{a:.3f}, {b:.3f}] s" for a, b in gaps)
        raise PlanCoverageError(f"plan covers [{plan.t_start:.3f}, {plan.t_end:.3f}] s; missing {desc}")
    if len(plan.times) >= 2:
        straight, run = plan._runs
        last = len(plan.times) - 2
        k0 = min(max(bisect.bisect_right(plan._tlist, t_now) - 1, 0), last)
        k1 = min(max(bisect.bisect_right(plan._tlist, t_end) - 1, 0), last)
        if straight[k0] and straight[k1] and run[k0] == run[k1]:
            # every sample in between is redundant; only the end footprints count
            corners = _footprint_corners(plan, t_now, k0) + _footprint_corners(plan, t_end, k1)
            return convex_hull(corners)
    ts = ego_sample_times(t_now, horizon, step)
    keep = _needed_samples(plan, ts)
    pos, h = plan.pose_at(ts[keep])
    corners = rectangle_corners(pos, h, plan.length, plan.width)
    return convex_hull(corners.reshape(-1, 2))


def _footprint_corners(plan: EgoPlan, t: float, k: int) -> list:
    t0, t1 = plan._tlist[k], plan._tlist[k + 1]
    f = (t - t0) / (t1 - t0)
    (x0, y0), (x1, y1) = plan._plist[k], plan._plist[k + 1]
    h0, h1 = plan._hlist[k], plan._hlist[k + 1]
    x, y, h = x0 + f * (x1 - x0), y0 + f * (y1 - y0), h0 + f * (h1 - h0)
    c, s = math.cos(h), math.sin(h)
    hl, hw = 0.5 * plan.length, 0.5 * plan.width
    return [(x + lx * c - ly * s, y + lx * s + ly * c)
            for lx, ly in ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw))]


def _straight_runs(pos: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per plan segment: whether the heading is constant along it, and an id
    shared by consecutive constant-heading segments on one straight line."""
    n_seg = max(len(h) - 1, 1)
    if len(h) < 2:
        return np.ones(1, dtype=bool), np.zeros(1, dtype=np.intp)
    straight = np.abs(np.diff(h)) <= 1e-12
    cont = np.zeros(n_seg, dtype=bool)
    if n_seg > 1:
        d = np.diff(pos, axis=0)
        d1, d2 = d[:-1], d[1:]
        cr = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        dot = d1[:, 0] * d2[:, 0] + d1[:, 1] * d2[:, 1]
        cont[1:] = straight[:-1] & straight[1:] & (np.abs(cr) <= EPS_GEOM) & (dot >= 0)
    return straight, np.cumsum(~cont)


def _needed_samples(plan: EgoPlan, ts: np.ndarray) -> np.ndarray:
    """Mask of sample times whose footprint can contribute a hull vertex.

    A sample flanked by samples on the same straight, constant-heading run
    of the plan has every corner on the segment between the neighbours'
    matching corners, so it is dropped. Straight stretches shrink to their
    end samples; curved stretches keep every sample.
    """
    keep = np.ones(len(ts), dtype=bool)
    if len(ts) < 3 or len(plan.times) < 2:
        return keep
    straight, run = plan._runs
    seg = np.clip(np.searchsorted(plan.times, ts, side="right") - 1, 0, len(plan.times) - 2)
    ok = straight[seg] & (run[seg] == run[seg[0]])
    if ok.all():
        keep[1:-1] = False
        return keep
    same = straight[seg[:-2]] & straight[seg[2:]] & (run[seg[:-2]] == run[seg[2:]])
    keep[1:-1] = ~same
    return keep


# ---------------------------------------------------------------------------
# PLAN v1 text format

def serialize_plan(plan: EgoPlan) -> str:
    lines = [f"PLAN v1 {plan.length!r} {plan.width!r}"]
    for t, (x, y), h in zip(plan.times.tolist(), plan.positions.tolist(), plan.headings.tolist()):
        lines.append(f"{t!r} {x!r} {y!r} {h!r}")
    return "\n".join(lines) + "\n"


def parse_plan(text: str) -> EgoPlan:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise PlanParseError("empty plan file", line=1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 4 or parts[:2] != ["PLAN", "v1"]:
        raise PlanParseError(f"expected 'PLAN v1 <length> <width>', got {header.strip()!r}", line=lineno)
    try:
        length, width = float(parts[2]), float(parts[3])
    except ValueError as exc:
        raise PlanParseError(str(exc), line=lineno) from None
    rows = []
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise PlanParseError(f"expected '<t> <x> <y> <heading>', got {ln.strip()!r}", line=lineno)
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise PlanParseError(str(exc), line=lineno) from None
        if len(rows) > 1 and not rows[-1][0] > rows[-2][0]:
            raise PlanParseError("times must be strictly increasing", line=lineno)
    if not rows:
        raise PlanParseError("plan has no poses", line=lines[0][0])
    data = np.array(rows)
    try:
        return EgoPlan(data[:, 0], data[:, 1:3], data[:, 3], length, width)
    except ValueError as exc:
        raise PlanParseError(str(exc)) from None
