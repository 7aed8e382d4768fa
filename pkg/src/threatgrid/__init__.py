"""Collision threat detection on dynamic occupancy grids.

Moving cells are clustered, each cluster's occupied area is predicted with a
constant-velocity model and intersected with the ego vehicle's swept hull.
"""

from .clustering import Cluster, ClusterAttributes, DbscanConfig, MaskConfig, PlausibilityConfig
from .geometry import HullPolygon, Relation, convex_hull, hulls_relate, segments_intersect
from .grid import GridFrame, parse_frame, parse_frames, serialize_frame
from .pipeline import PipelineConfig, identify_clusters, process_frame
from .prediction import EgoPlan, PredictionConfig, predict_cluster_area, predict_ego_area
from .sim import NoiseConfig, ScenarioKind, ScenarioParams, build_scenario, rittr, run_scenario
from .threat import ThreatReport, ThreatStatus, attention_raster, evaluate

__version__ = "0.1.0"

__all__ = [
    "Cluster", "ClusterAttributes", "DbscanConfig", "MaskConfig", "PlausibilityConfig",
    "HullPolygon", "Relation", "convex_hull", "hulls_relate", "segments_intersect",
    "GridFrame", "parse_frame", "parse_frames", "serialize_frame",
    "PipelineConfig", "identify_clusters", "process_frame",
    "EgoPlan", "PredictionConfig", "predict_cluster_area", "predict_ego_area",
    "NoiseConfig", "ScenarioKind", "ScenarioParams", "build_scenario", "rittr", "run_scenario",
    "ThreatReport", "ThreatStatus", "attention_raster", "evaluate",
]
