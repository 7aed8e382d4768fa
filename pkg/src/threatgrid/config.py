"""Flat ``key = value`` run configuration shared by the config file and the CLI flags."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .clustering import DbscanConfig, MaskConfig, PlausibilityConfig
from .pipeline import PipelineConfig
from .prediction import PredictionConfig
from .sim import NoiseConfig, ScenarioKind, ScenarioParams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "turning-in"
    horizon: float = 3.0
    phi_u: float = 0.0  # degrees
    seed: int = 0
    sigma_v: float = 0.2
    sigma_m: float = 0.05
    lag: float = 0.85
    # search mask and clustering
    v_min: float = 1.0
    p_occ_min: float = 0.6
    eps: float = 0.4
    min_pts: int = 3
    # plausibilization
    cluster_p_occ_min: float = 0.6
    p_move_min: float = 0.5
    var_max: float = 2.0
    n_min: int = 4
    n_max: int = 2000
    margin: float = 1.0
    # scenario geometry
    ego_speed: float = 10.0
    actor_speed: float = 0.0  # 0 selects the scenario's default
    duration: float = 5.0
    t_merge: float = 3.5
    merge_gap: float = -1.0
    merge_radius: float = 8.0
    t_turn: float = 2.5
    lead: float = 8.0
    turn_radius: float = 7.5
    lateral_offset: float = 7.0
    crossing_x: float = 35.0
    crossing_delay: float = -0.15
    # inputs (detect) and outputs
    frames: str = ""
    plan: str = ""
    out: str = "out"
    emit_frames: bool = False
    emit_svg: bool = False
    n_frames: int = 300

    # grouping of keys by the component that validates them
    _GROUPS = {
        "mask": ("v_min", "p_occ_min"),
        "dbscan": ("eps", "min_pts"),
        "plausibility": ("cluster_p_occ_min", "p_move_min", "var_max", "n_min", "n_max"),
        "prediction": ("horizon", "phi_u"),
        "noise": ("sigma_v", "sigma_m", "lag", "seed"),
        "scenario": ("ego_speed", "actor_speed", "duration", "t_merge", "merge_gap", "merge_radius",
                     "t_turn", "lead", "turn_radius", "lateral_offset", "crossing_x", "crossing_delay"),
    }

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    # -- component configs --------------------------------------------------

    def mask_config(self) -> MaskConfig:
        return MaskConfig(v_min=self.v_min, p_occ_min=self.p_occ_min)

    def dbscan_config(self) -> DbscanConfig:
        return DbscanConfig(eps=self.eps, min_pts=self.min_pts)

    def plausibility_config(self) -> PlausibilityConfig:
        return PlausibilityConfig(p_occ_min=self.cluster_p_occ_min, p_move_min=self.p_move_min,
                                  var_max=self.var_max, n_min=self.n_min, n_max=self.n_max)

    def prediction_config(self) -> PredictionConfig:
        return PredictionConfig(horizon=self.horizon, phi_u=math.radians(self.phi_u))

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(sigma_v=self.sigma_v, sigma_m=self.sigma_m, lag=self.lag, seed=self.seed)

    def scenario_params(self) -> ScenarioParams:
        return ScenarioParams(
            ego_speed=self.ego_speed, actor_speed=self.actor_speed or None, duration=self.duration,
            t_merge=self.t_merge, merge_gap=self.merge_gap, merge_radius=self.merge_radius,
            t_turn=self.t_turn, lead=self.lead, turn_radius=self.turn_radius,
            lateral_offset=self.lateral_offset, crossing_x=self.crossing_x,
            crossing_delay=self.crossing_delay,
        )

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(self.mask_config(), self.dbscan_config(), self.plausibility_config(),
                              self.prediction_config(), self.margin)

    def scenario_kind(self) -> ScenarioKind:
        return ScenarioKind(self.scenario)

    def validate(self) -> "RunConfig":
        """Build every component config; raise ConfigError naming the offending key."""
        try:
            self.scenario_kind()
        except ValueError:
            kinds = ", ".join(k.value for k in ScenarioKind)
            raise ConfigError("scenario", f"unknown scenario {self.scenario!r} (choose from {kinds})") from None
        if self.margin < 0:
            raise ConfigError("margin", "must be non-negative")
        if self.n_frames < 1:
            raise ConfigError("n_frames", "must be positive")
        if self.actor_speed < 0:
            raise ConfigError("actor_speed", "must be non-negative")
        builders = {
            "mask": RunConfig.mask_config, "dbscan": RunConfig.dbscan_config,
            "plausibility": RunConfig.plausibility_config, "prediction": RunConfig.prediction_config,
            "noise": RunConfig.noise_config, "scenario": RunConfig.scenario_params,
        }
        default = RunConfig()
        for group, build in builders.items():
            try:
                build(self)
            except ValueError as exc:
                keys = self._GROUPS[group]
                # blame the first key that fails on its own, else the whole group
                for key in keys:
                    try:
                        build(replace(default, **{key: getattr(self, key)}))
                    except ValueError:
                        raise ConfigError(key, str(exc)) from None
                changed = [k for k in keys if getattr(self, k) != getattr(default, k)]
                raise ConfigError(",".join(changed or keys), str(exc)) from None
        return self

    # -- text form ----------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(f"expected a finite number, got {raw!r}")
            return v
        return raw
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def parse_config_text(text: str) -> dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys raise."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(key, "unknown key")
        out[key] = _convert(key, value)
    return out


def build_config(file_values: dict[str, object] | None = None,
                 overrides: dict[str, object] | None = None) -> RunConfig:
    """Defaults, then file values, then flag overrides; validated."""
    values: dict[str, object] = {}
    for src in (file_values or {}, overrides or {}):
        for key, v in src.items():
            if key not in _TYPES:
                raise ConfigError(key, "unknown key")
            if v is None:
                continue
            values[key] = _convert(key, v) if isinstance(v, str) and _TYPES[key] != "str" else v
    return RunConfig(**values).validate()
