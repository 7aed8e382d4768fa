"""Threat classification of predicted cluster areas against the ego hull."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .clustering import Cluster, ClusterAttributes
from .geometry import HullPolygon, Relation, edge_contacts, hulls_relate
from .grid import GridFrame, format_header, parse_header
from .prediction import PredictionConfig, predict_cluster_area

DEFAULT_MARGIN = 1.0  # m


class ThreatStatus(enum.Enum):
    THREAT = "threat"
    ON_TRAJECTORY = "on_trajectory"
    NO_THREAT = "no_threat"


_STATUS_OF = {
    Relation.EDGE_INTERSECT: ThreatStatus.THREAT,
    Relation.H1_CONTAINS_H2: ThreatStatus.THREAT,       # cluster area engulfs the ego area
    Relation.H2_CONTAINS_H1: ThreatStatus.ON_TRAJECTORY,
    Relation.DISJOINT: ThreatStatus.NO_THREAT,
}


@dataclass(frozen=True)
class ClusterEntry:
    cluster_id: int
    n_cells: int
    attributes: ClusterAttributes
    hull: HullPolygon
    status: ThreatStatus
    contacts: int = 0


@dataclass(frozen=True)
class ThreatReport:
    timestamp: float
    ego_hull: HullPolygon
    entries: tuple[ClusterEntry, ...]

    @property
    def threats(self) -> list[ClusterEntry]:
        return [e for e in self.entries if e.status is ThreatStatus.THREAT]

    @property
    def collinear_contacts(self) -> int:
        return sum(e.contacts for e in self.entries)

    def status_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in ThreatStatus}
        for e in self.entries:
            counts[e.status.value] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "ego_hull": _pts(self.ego_hull),
            "clusters": [
                {
                    "id": e.cluster_id,
                    "status": e.status.value,
                    "n_cells": e.n_cells,
                    "position": list(e.attributes.position),
                    "heading": e.attributes.heading,
                    "speed": e.attributes.speed,
                    "box": _pts(e.attributes.box),
                    "hull": _pts(e.hull),
                    "contacts": e.contacts,
                }
                for e in self.entries
            ],
            "collinear_contacts": self.collinear_contacts,
        }

    def to_json(self) -> str:
        """One-line JSON document; key order is fixed, floats round-trip exactly."""
        return json.dumps(self.to_dict(), separators=(",", ":"))


def _pts(h: HullPolygon) -> list[list[float]]:
    return [[x, y] for x, y in h.points]


def classify(pred: HullPolygon, ego_hull: HullPolygon) -> tuple[ThreatStatus, int]:
    """Status of one predicted cluster area, plus its count of non-proper
    edge contacts with the ego hull (only counted when not a threat)."""
    status = _STATUS_OF[hulls_relate(pred, ego_hull)]
    contacts = 0 if status is ThreatStatus.THREAT else edge_contacts(pred, ego_hull)
    return status, contacts


def evaluate(clusters, ego_hull: HullPolygon, cfg: PredictionConfig, timestamp: float = 0.0) -> ThreatReport:
    """Predict and classify every ``(Cluster, ClusterAttributes)`` pair.

    Entries keep the input order, which is ascending cluster id when fed
    from the clustering stage.
    """
    entries = []
    for cluster, attrs in clusters:
        pred = predict_cluster_area(attrs, cfg)
        status, contacts = classify(pred, ego_hull)
        entries.append(ClusterEntry(cluster.id, len(cluster), attrs, pred, status, contacts))
    return ThreatReport(float(timestamp), ego_hull, tuple(entries))


# ---------------------------------------------------------------------------
# attention raster

@dataclass(frozen=True, eq=False)
class AttentionRaster:
    timestamp: float
    origin: tuple[float, float]
    cell_size: float
    mask: np.ndarray

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AttentionRaster):
            return NotImplemented
        return (self.timestamp == other.timestamp and self.origin == other.origin
                and self.cell_size == other.cell_size and np.array_equal(self.mask, other.mask))

    __hash__ = None


def attention_raster(report: ThreatReport, frame: GridFrame, margin: float = DEFAULT_MARGIN) -> AttentionRaster:
    """Mark every cell whose center lies in a threat cluster's box grown by ``margin``."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    mask = np.zeros(frame.shape, dtype=bool)
    threats = report.threats
    if threats:
        pos = frame.positions
        for e in threats:
            a = e.attributes
            c, s = math.cos(a.heading), math.sin(a.heading)
            dx = pos[..., 0] - a.box_center[0]
            dy = pos[..., 1] - a.box_center[1]
            lon = dx * c + dy * s
            lat = -dx * s + dy * c
            tol = 1e-9
            mask |= (np.abs(lon) <= a.half_length + margin + tol) & (np.abs(lat) <= a.half_width + margin + tol)
    mask.setflags(write=False)
    return AttentionRaster(frame.timestamp, frame.origin, frame.cell_size, mask)


RASTER_MAGIC = "ATTN"


def serialize_raster(raster: AttentionRaster) -> str:
    lines = [format_header(RASTER_MAGIC, raster.timestamp, raster.origin, raster.cell_size,
                           raster.width, raster.height)]
    lines.extend("1" if v else "0" for v in raster.mask.ravel().tolist())
    return "\n".join(lines) + "\n"


def parse_raster(text: str) -> AttentionRaster:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty raster")
    t, origin, a, w, h = parse_header(lines[0], 1, magic=RASTER_MAGIC)
    body = lines[1:1 + w * h]
    if len(body) != w * h or any(v not in ("0", "1") for v in body):
        raise ValueError(f"raster body must hold {w * h} lines of 0/1")
    mask = np.array([v == "1" for v in body], dtype=bool).reshape(h, w)
    return AttentionRaster(t, origin, a, mask)

