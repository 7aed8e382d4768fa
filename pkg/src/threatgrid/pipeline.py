"""Per-frame processing chain: mask -> DBSCAN -> plausibilize -> attributes
-> ego/cluster prediction -> threat evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .clustering import (
    Cluster, ClusterAttributeError, ClusterAttributes, DbscanConfig, MaskConfig, PlausibilityConfig,
    cluster_attributes, dbscan, plausibilize, search_mask,
)
from .grid import GridFrame
from .prediction import EgoPlan, PredictionConfig, predict_ego_area
from .threat import DEFAULT_MARGIN, ThreatReport, evaluate

CLUSTER_STAGES = ("mask", "dbscan", "plausibilize", "attributes")
THREAT_STAGES = ("ego_prediction", "evaluate")
STAGES = CLUSTER_STAGES + THREAT_STAGES


@dataclass(frozen=True)
class PipelineConfig:
    mask: MaskConfig = field(default_factory=MaskConfig)
    dbscan: DbscanConfig = field(default_factory=DbscanConfig)
    plausibility: PlausibilityConfig = field(default_factory=PlausibilityConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    margin: float = DEFAULT_MARGIN


class _Stopwatch:
    def __init__(self, sink: dict | None):
        self.sink = sink
        self.t = time.perf_counter() if sink is not None else 0.0

    def lap(self, name: str):
        if self.sink is not None:
            now = time.perf_counter()
            self.sink[name] = self.sink.get(name, 0.0) + (now - self.t)
            self.t = now


def identify_clusters(frame: GridFrame, cfg: PipelineConfig, timings: dict | None = None,
                      rejected: list | None = None) -> list[tuple[Cluster, ClusterAttributes]]:
    """Plausibilized clusters of ``frame`` with their attributes, by ascending id.

    Rejections are appended to ``rejected`` as ``(cluster, reason)`` when a list
    is supplied.
    """
    sw = _Stopwatch(timings)
    mask = search_mask(frame, cfg.mask)
    sw.lap("mask")
    clusters = dbscan(frame, mask, cfg.dbscan.eps, cfg.dbscan.min_pts)
    sw.lap("dbscan")
    kept = []
    for c in clusters:
        verdict = plausibilize(c, cfg.plausibility)
        if verdict:
            kept.append(c)
        elif rejected is not None:
            rejected.append((c, verdict.reason))
    sw.lap("plausibilize")
    out = []
    for c in kept:
        try:
            out.append((c, cluster_attributes(c, frame.cell_size, cfg.mask.v_min)))
        except ClusterAttributeError:
            if rejected is not None:
                rejected.append((c, "attributes"))
    sw.lap("attributes")
    return out


def process_frame(frame: GridFrame, plan: EgoPlan, cfg: PipelineConfig,
                  timings: dict | None = None) -> ThreatReport:
    clusters = identify_clusters(frame, cfg, timings)
    sw = _Stopwatch(timings)
    ego = predict_ego_area(plan, frame.timestamp, cfg.prediction.horizon)
    sw.lap("ego_prediction")
    report = evaluate(clusters, ego, cfg.prediction, frame.timestamp)
    sw.lap("evaluate")
    return report
