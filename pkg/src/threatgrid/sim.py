"""Scripted collision scenarios, synthetic grid frames and reaction-time metrics.

World frame: the ego drives along +x on the lane centred at y = 0; the
opposite/adjacent lane is centred at y = +3.5 m. Every built-in scenario
ends in a collision (nobody brakes), and the time of collision is located by
a footprint-overlap sweep refined by bisection.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .geometry import HullPolygon, point_in_convex, segments_intersect, separation
from .grid import DEFAULT_CELL_SIZE, GridFrame
from .pipeline import PipelineConfig, identify_clusters, process_frame
from .prediction import EgoPlan
from .threat import ThreatReport, ThreatStatus

FRAME_PERIOD = 0.1  # s
TRACK_STEP = 0.01  # s, resolution of the scripted actor track
TOC_SWEEP_STEP = 0.01  # s
TOC_TOLERANCE = 1e-3  # s
LANE_WIDTH = 3.5  # m
PLAN_TAIL = 10.0  # s of ego plan beyond the scenario end, so any horizon fits

# static clutter: fixed world rectangles (x0, x1, y0, y1), never moving
CLUTTER = (
    (-8.0, -2.0, 9.0, 15.0),
    (12.0, 26.0, 7.5, 8.5),
    (-9.0, 3.0, -14.0, -10.0),
    (42.0, 48.0, 14.0, 24.0),
    (6.0, 7.0, -27.0, -18.0),
)
CLUTTER_VEL_SIGMA = 0.15  # m/s
CLUTTER_VEL_MAX = 0.5  # m/s, kept below the default v_min


class ScenarioError(ValueError):
    """Scenario parameters that cannot produce the scripted collision."""


class ScenarioKind(enum.Enum):
    TURNING_IN = "turning-in"
    TURNING_OVER = "turning-over"
    STRAIGHT_CROSSING = "straight-crossing"


@dataclass(frozen=True)
class ScenarioParams:
    """Geometry knobs. Fields irrelevant to a scenario kind are ignored.

    ``actor_speed=None`` selects the kind's default (8 m/s turning in and
    crossing, 10 m/s turning over).
    """

    ego_speed: float = 10.0
    ego_start_x: float = 0.0
    actor_speed: float | None = None
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    duration: float = 5.0
    # turning-in: actor finishes a right-hand arc into the ego lane at t_merge,
    # merge_gap metres ahead of the ego's front bumper
    t_merge: float = 3.5
    merge_gap: float = -1.0
    merge_radius: float = 8.0
    # turning-over: actor drives parallel, lateral_offset metres to the left
    # and lead metres ahead (center to center), then turns right across the
    # ego lane at t_turn
    t_turn: float = 2.5
    lead: float = 8.0
    turn_radius: float = 7.5
    lateral_offset: float = 7.0
    # straight-crossing: actor reaches y = 0 at crossing_x, crossing_delay
    # seconds after the ego center would pass crossing_x
    crossing_x: float = 35.0
    crossing_delay: float = -0.15
    # grid
    cell_size: float = DEFAULT_CELL_SIZE
    grid_width: int = 300
    grid_height: int = 300
    grid_x0: float = -10.0
    grid_y0: float = -30.0

    def __post_init__(self):
        for name in ("ego_speed", "vehicle_length", "vehicle_width", "duration", "merge_radius",
                     "turn_radius", "cell_size"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ScenarioError(f"{name} must be positive, got {v}")
        if self.actor_speed is not None and not self.actor_speed > 0:
            raise ScenarioError(f"actor_speed must be positive, got {self.actor_speed}")
        if self.grid_width < 1 or self.grid_height < 1:
            raise ScenarioError("grid dimensions must be positive")

    def speed_for(self, kind: ScenarioKind) -> float:
        if self.actor_speed is not None:
            return self.actor_speed
        return 10.0 if kind is ScenarioKind.TURNING_OVER else 8.0


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    cell_size: float
    width: int
    height: int


@dataclass(frozen=True, eq=False)
class Scenario:
    kind: ScenarioKind
    params: ScenarioParams
    ego: EgoPlan
    actor: EgoPlan
    actor_speed: float
    duration: float
    toc: float
    corridor: HullPolygon
    grid: GridSpec


@dataclass(frozen=True)
class NoiseConfig:
    sigma_v: float = 0.2
    sigma_m: float = 0.05
    lag: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if self.sigma_v < 0 or self.sigma_m < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if not 0 <= self.lag <= 1:
            raise ValueError(f"lag gain must lie in [0, 1], got {self.lag}")


NOISELESS = NoiseConfig(0.0, 0.0, 0.0, 0)


# ---------------------------------------------------------------------------
# scripted paths

def _path_poses(start, heading: float, segments, s: np.ndarray):
    """Poses at arc lengths ``s`` along a path of ``(length, curvature)``
    segments; the path continues straight after the last segment and before
    the start."""
    s = np.asarray(s, dtype=float)
    x = np.empty_like(s)
    y = np.empty_like(s)
    h = np.empty_like(s)
    px, py, ph, s0 = float(start[0]), float(start[1]), float(heading), 0.0
    pieces = list(segments) + [(math.inf, 0.0)]
    done = np.zeros(s.shape, dtype=bool)
    before = s < 0
    x[before] = px + s[before] * math.cos(ph)
    y[before] = py + s[before] * math.sin(ph)
    h[before] = ph
    done |= before
    for length, k in pieces:
        sel = ~done & (s <= s0 + length)
        u = s[sel] - s0
        if k == 0.0:
            x[sel] = px + u * math.cos(ph)
            y[sel] = py + u * math.sin(ph)
            h[sel] = ph
        else:
            hh = ph + k * u
            x[sel] = px + (np.sin(hh) - math.sin(ph)) / k
            y[sel] = py - (np.cos(hh) - math.cos(ph)) / k
            h[sel] = hh
        done |= sel
        if math.isinf(length):
            break
        if k == 0.0:
            px, py = px + length * math.cos(ph), py + length * math.sin(ph)
        else:
            nh = ph + k * length
            px, py = px + (math.sin(nh) - math.sin(ph)) / k, py - (math.cos(nh) - math.cos(ph)) / k
            ph = nh
        s0 += length
    return np.column_stack([x, y]), h


def _ego_plan(p: ScenarioParams) -> EgoPlan:
    n = int(round((p.duration + PLAN_TAIL) / FRAME_PERIOD))
    t = np.arange(n + 1) * FRAME_PERIOD
    pos = np.column_stack([p.ego_start_x + p.ego_speed * t, np.zeros_like(t)])
    return EgoPlan(t, pos, np.zeros_like(t), p.vehicle_length, p.vehicle_width)


def _actor_track(p: ScenarioParams, start, heading, segments, s_start: float, speed: float) -> EgoPlan:
    n = int(round((p.duration + PLAN_TAIL) / TRACK_STEP))
    t = np.arange(n + 1) * TRACK_STEP
    pos, h = _path_poses(start, heading, segments, s_start + speed * t)
    return EgoPlan(t, pos, h, p.vehicle_length, p.vehicle_width)


def _turning_in(p: ScenarioParams, speed: float):
    """Actor comes up from the right (+y), arcs right into the ego lane and
    ends up ahead of the ego heading +x."""
    r = p.merge_radius
    arc = 0.5 * math.pi * r
    x_ego = p.ego_start_x + p.ego_speed * p.t_merge
    x_merge = x_ego + p.vehicle_length + p.merge_gap
    approach = speed * p.t_merge - arc
    if approach < 0:
        raise ScenarioError(f"t_merge={p.t_merge} s too short to drive the {arc:.1f} m arc")
    start = (x_merge - r, -r - approach)
    return start, 0.5 * math.pi, [(approach, 0.0), (arc, -1.0 / r)], 0.0


def _turning_over(p: ScenarioParams, speed: float):
    """Actor drives parallel in the left lane, then turns right across the
    ego lane."""
    r = p.turn_radius
    x_turn = p.ego_start_x + p.ego_speed * p.t_turn + p.lead
    lead_in = speed * p.t_turn
    start = (x_turn - lead_in, p.lateral_offset)
    return start, 0.0, [(lead_in, 0.0), (0.5 * math.pi * r, -1.0 / r)], 0.0


def _straight_crossing(p: ScenarioParams, speed: float):
    t_cross = (p.crossing_x - p.ego_start_x) / p.ego_speed + p.crossing_delay
    return (p.crossing_x, -speed * t_cross), 0.5 * math.pi, [], 0.0


_BUILDERS = {
    ScenarioKind.TURNING_IN: _turning_in,
    ScenarioKind.TURNING_OVER: _turning_over,
    ScenarioKind.STRAIGHT_CROSSING: _straight_crossing,
}


OVERLAP_TOL = 1e-9  # m


def footprints_overlap(a: HullPolygon, b: HullPolygon) -> bool:
    """Interiors overlap. Unlike the proper-crossing rule used for threat
    classification, this also catches aligned boxes whose edges are
    collinear."""
    return separation(a, b) < -OVERLAP_TOL


def time_of_collision(ego: EgoPlan, actor: EgoPlan, t_max: float,
                      step: float = TOC_SWEEP_STEP, tol: float = TOC_TOLERANCE) -> float | None:
    """First footprint overlap in ``[0, t_max]``, bisected to ``tol``; None if never."""
    def hit(t):
        return footprints_overlap(ego.footprint_at(t), actor.footprint_at(t))

    n = int(math.floor(t_max / step + 1e-9))
    prev = 0.0
    if hit(0.0):
        return 0.0
    for k in range(1, n + 1):
        t = min(k * step, t_max)
        if hit(t):
            lo, hi = prev, t
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if hit(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = t
    return None


def build_scenario(kind: ScenarioKind | str, params: ScenarioParams | None = None) -> Scenario:
    """Construct a deterministic scenario and locate its collision.

    Raises:
        ScenarioError: when the geometry yields no collision within the
            duration, or the ego and actor already overlap at t = 0.
    """
    kind = ScenarioKind(kind)
    p = params or ScenarioParams()
    speed = p.speed_for(kind)
    start, heading, segments, s0 = _BUILDERS[kind](p, speed)
    ego = _ego_plan(p)
    actor = _actor_track(p, start, heading, segments, s0, speed)
    toc = time_of_collision(ego, actor, p.duration)
    if toc is None:
        raise ScenarioError(f"{kind.value}: no collision within {p.duration} s")
    if toc == 0.0:
        raise ScenarioError(f"{kind.value}: ego and actor overlap at t = 0")
    x_far = p.grid_x0 + p.cell_size * p.grid_width
    # the mapped ego lane
    corridor = HullPolygon(((p.grid_x0, -0.5 * LANE_WIDTH), (x_far, -0.5 * LANE_WIDTH),
                            (x_far, 0.5 * LANE_WIDTH), (p.grid_x0, 0.5 * LANE_WIDTH)))
    a = p.cell_size
    grid = GridSpec((p.grid_x0 + 0.5 * a, p.grid_y0 + 0.5 * a), a, p.grid_width, p.grid_height)
    return Scenario(kind, p, ego, actor, speed, p.duration, toc, corridor, grid)


# ---------------------------------------------------------------------------
# frame synthesis

def lagged_headings(scenario: Scenario, lag: float, n_frames: int,
                    frame_period: float = FRAME_PERIOD) -> np.ndarray:
    """First-order filtered actor heading at frames ``0 .. n_frames - 1``.

    ``h[k] = h[k-1] + (1 - lag) * wrap(true[k] - h[k-1])``, started at the
    true heading. ``lag = 0`` follows the truth exactly.
    """
    _, true = scenario.actor.pose_at(np.arange(n_frames) * frame_period)
    out = np.empty(n_frames)
    if n_frames == 0:
        return out
    out[0] = true[0]
    g = 1.0 - lag
    for k in range(1, n_frames):
        d = math.remainder(true[k] - out[k - 1], 2 * math.pi)
        out[k] = out[k - 1] + g * d
    return out


def _frame_index(t: float, frame_period: float) -> int:
    n = int(round(t / frame_period))
    if abs(n * frame_period - t) > 1e-9:
        raise ValueError(f"t={t} is not on the {frame_period} s frame lattice")
    return n


def actor_cells(scenario: Scenario, t: float) -> np.ndarray:
    """Boolean grid of cells whose centers lie inside the actor's true box."""
    g = scenario.grid
    pos, h = scenario.actor.pose_at(t)
    cx, cy = pos[0]
    c, s = math.cos(h[0]), math.sin(h[0])
    hl, hw = 0.5 * scenario.actor.length, 0.5 * scenario.actor.width
    mask = np.zeros((g.height, g.width), dtype=bool)
    reach = math.hypot(hl, hw)
    j0 = max(int(math.floor((cx - reach - g.origin[0]) / g.cell_size)), 0)
    j1 = min(int(math.ceil((cx + reach - g.origin[0]) / g.cell_size)) + 1, g.width)
    i0 = max(int(math.floor((cy - reach - g.origin[1]) / g.cell_size)), 0)
    i1 = min(int(math.ceil((cy + reach - g.origin[1]) / g.cell_size)) + 1, g.height)
    if j0 >= j1 or i0 >= i1:
        return mask
    xs = g.origin[0] + np.arange(j0, j1) * g.cell_size - cx
    ys = g.origin[1] + np.arange(i0, i1) * g.cell_size - cy
    lon = xs[None, :] * c + ys[:, None] * s
    lat = -xs[None, :] * s + ys[:, None] * c
    mask[i0:i1, j0:j1] = (np.abs(lon) <= hl) & (np.abs(lat) <= hw)
    return mask


def clutter_cells(grid: GridSpec) -> np.ndarray:
    xs = grid.origin[0] + np.arange(grid.width) * grid.cell_size
    ys = grid.origin[1] + np.arange(grid.height) * grid.cell_size
    mask = np.zeros((grid.height, grid.width), dtype=bool)
    for x0, x1, y0, y1 in CLUTTER:
        mask |= ((xs >= x0) & (xs <= x1))[None, :] & ((ys >= y0) & (ys <= y1))[:, None]
    return mask


def synthesize_frame(scenario: Scenario, t: float, noise: NoiseConfig,
                     frame_period: float = FRAME_PERIOD) -> GridFrame:
    """Rasterize the scene at time ``t`` into a grid frame.

    Actor cells carry the actor speed along its lagged heading plus
    per-axis Gaussian noise; static clutter carries small velocity noise
    below ``CLUTTER_VEL_MAX``; all other cells are unknown. The random stream
    depends only on the seed and the frame index.
    """
    n = _frame_index(t, frame_period)
    heading = lagged_headings(scenario, noise.lag, n + 1, frame_period)[n]
    return _synthesize(scenario, t, n, heading, noise)


def _synthesize(scenario: Scenario, t: float, n: int, heading: float, noise: NoiseConfig) -> GridFrame:
    g = scenario.grid
    rng = np.random.default_rng([noise.seed, n])
    shape = (g.height, g.width)
    m_occ = np.zeros(shape)
    m_free = np.zeros(shape)
    vel = np.zeros(shape + (2,))
    cov = np.zeros(shape + (3,))

    static = clutter_cells(g)
    k = int(static.sum())
    v = rng.normal(0.0, CLUTTER_VEL_SIGMA, (k, 2))
    speed = np.hypot(v[:, 0], v[:, 1])
    v *= np.minimum(1.0, CLUTTER_VEL_MAX / np.maximum(speed, 1e-12))[:, None]
    m_occ[static] = 0.85
    m_free[static] = 0.05
    vel[static] = v
    cov[static] = (CLUTTER_VEL_SIGMA ** 2, 0.0, CLUTTER_VEL_SIGMA ** 2)

    actor = actor_cells(scenario, t)
    k = int(actor.sum())
    if k:
        occ = np.clip(0.9 - np.abs(rng.normal(0.0, noise.sigma_m, k)), 0.5, 0.95)
        free = np.minimum(np.abs(rng.normal(0.0, noise.sigma_m, k)), 1.0 - occ)
        v = np.empty((k, 2))
        v[:, 0] = scenario.actor_speed * math.cos(heading)
        v[:, 1] = scenario.actor_speed * math.sin(heading)
        v += rng.normal(0.0, noise.sigma_v, (k, 2))
        m_occ[actor] = occ
        m_free[actor] = free
        vel[actor] = v
        cov[actor] = (noise.sigma_v ** 2, 0.0, noise.sigma_v ** 2)
    return GridFrame(t, g.origin, g.cell_size, m_occ, m_free, vel, cov, validate=False)


def frame_times(scenario: Scenario, frame_period: float = FRAME_PERIOD) -> np.ndarray:
    n = int(math.floor(scenario.duration / frame_period + 1e-9))
    return np.round(np.arange(n + 1) * frame_period, 9)


def iter_frames(scenario: Scenario, noise: NoiseConfig, frame_period: float = FRAME_PERIOD):
    """Yield every frame of the scenario in time order."""
    ts = frame_times(scenario, frame_period)
    headings = lagged_headings(scenario, noise.lag, len(ts), frame_period)
    for n, t in enumerate(ts):
        yield _synthesize(scenario, float(t), n, headings[n], noise)


# ---------------------------------------------------------------------------
# metrics

class UndefinedRiTTR(ValueError):
    pass


def rittr(ttr_ours: float, ttr_prior: float) -> float:
    """Relative increase of the time to react over the prior-map baseline.

    ``ttr_ours / ttr_prior - 1`` with both times to react measured as
    ``ToC - ToD``; 4.25 means a 425 % longer reaction window.
    """
    if not ttr_prior > 0:
        raise UndefinedRiTTR(f"time to react of the baseline must be positive, got {ttr_prior}")
    if ttr_ours < 0:
        raise UndefinedRiTTR(f"negative time to react: {ttr_ours}")
    return ttr_ours / ttr_prior - 1.0


@dataclass(frozen=True)
class ScenarioResult:
    scenario: str
    horizon: float
    phi_u_deg: float
    seed: int
    toc: float | None
    tod_prior: float | None
    tod_ours: float | None
    ttr_prior: float | None
    ttr_ours: float | None
    rittr: float | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScenarioResult":
        data = json.loads(text)
        return cls(**{f.name: data[f.name] for f in fields(cls)})


@dataclass
class RunOutput:
    result: ScenarioResult
    reports: list[ThreatReport] = field(default_factory=list)
    frames: list[GridFrame] = field(default_factory=list)


def box_meets_hull(box: HullPolygon, hull: HullPolygon) -> bool:
    """A corner of ``box`` lies in ``hull`` (boundary inclusive) or an edge
    of ``box`` properly crosses an edge of ``hull``."""
    if any(point_in_convex(p, hull) for p in box.points):
        return True
    edges = hull.edges()
    return any(segments_intersect(e, f) for e in box.edges() for f in edges)


def _prior_contact(report: ThreatReport) -> bool:
    return any(box_meets_hull(e.attributes.box, report.ego_hull) for e in report.entries)


def run_scenario(scenario: Scenario, noise: NoiseConfig, cfg: PipelineConfig,
                 frame_period: float = FRAME_PERIOD, keep_frames: bool = False) -> RunOutput:
    """Run the full per-frame pipeline and derive ToD/TTR/riTTR.

    ``tod_ours`` is the first frame (not after the collision) with a THREAT
    cluster; ``tod_prior`` the first frame where any cluster box touches or
    overlaps the ego hull.
    """
    tod_ours = tod_prior = None
    out = RunOutput(result=None)  # type: ignore[arg-type]
    for frame in iter_frames(scenario, noise, frame_period):
        report = process_frame(frame, scenario.ego, cfg)
        out.reports.append(report)
        if keep_frames:
            out.frames.append(frame)
        t = frame.timestamp
        if t > scenario.toc:
            continue
        if tod_ours is None and any(e.status is ThreatStatus.THREAT for e in report.entries):
            tod_ours = t
        if tod_prior is None and _prior_contact(report):
            tod_prior = t
    toc = scenario.toc
    ttr_ours = None if tod_ours is None else toc - tod_ours
    ttr_prior = None if tod_prior is None else toc - tod_prior
    try:
        r = rittr(ttr_ours, ttr_prior) if ttr_ours is not None and ttr_prior is not None else None
    except UndefinedRiTTR:
        r = None
    out.result = ScenarioResult(
        scenario.kind.value, cfg.prediction.horizon, math.degrees(cfg.prediction.phi_u), noise.seed,
        toc, tod_prior, tod_ours, ttr_prior, ttr_ours, r,
    )
    return out


def cluster_heading_lag(scenario: Scenario, noise: NoiseConfig, cfg: PipelineConfig,
                        frame_period: float = FRAME_PERIOD) -> np.ndarray:
    """Per frame: absolute difference between the largest cluster's heading
    and the actor's true heading (NaN where no cluster survives)."""
    lags = []
    for frame in iter_frames(scenario, noise, frame_period):
        clusters = identify_clusters(frame, cfg)
        if not clusters:
            lags.append(math.nan)
            continue
        _, attrs = max(clusters, key=lambda ca: len(ca[0]))
        _, h = scenario.actor.pose_at(frame.timestamp)
        lags.append(abs(math.remainder(attrs.heading - h[0], 2 * math.pi)))
    return np.array(lags)


__all__ = [
    "FRAME_PERIOD", "ScenarioError", "ScenarioKind", "ScenarioParams", "Scenario", "NoiseConfig",
    "NOISELESS", "build_scenario", "time_of_collision", "footprints_overlap", "lagged_headings",
    "actor_cells", "synthesize_frame", "iter_frames", "frame_times", "rittr", "UndefinedRiTTR",
    "ScenarioResult", "RunOutput", "run_scenario", "cluster_heading_lag",
]
