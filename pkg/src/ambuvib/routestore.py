"""Directory-backed store of classified routes.

Each route lives in its own text document: a one-line signature, a
one-line JSON header, then the tagged telemetry as CSV.  ``index.json``
maps route ids to their endpoints so candidate lookup never opens the
route documents.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .scoring import (
    ClassifiedTrip,
    RouteComparison,
    RouteMetrics,
    Weights,
    area_durations,
    compare_routes,
)
from .telemetry import AreaLabel, TelemetryLog, haversine_m, parse_log, serialize_log

RECORD_SIGNATURE = "#ambuvib-route"
RECORD_VERSION = 1
DEFAULT_RADIUS_M = 100.0
DEFAULT_LOOKAHEAD_S = 5
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class RouteStoreError(ValueError):
    pass


class NoRouteError(RouteStoreError):
    """No stored route joins the requested endpoints."""


@dataclass(frozen=True)
class RouteRecord:
    id: str
    origin: tuple[float, float]
    destination: tuple[float, float]
    trip: ClassifiedTrip
    metrics: RouteMetrics
    created_at: int
    meta: dict = field(default_factory=dict)

    def check(self) -> None:
        if not _ID_RE.match(self.id):
            raise RouteStoreError(f"invalid route id {self.id!r}")
        samples = self.trip.log.samples
        if not samples:
            raise RouteStoreError("route has no samples")
        if self.origin != (samples[0].lat, samples[0].lon):
            raise RouteStoreError("origin is not the first sample position")
        if self.destination != (samples[-1].lat, samples[-1].lon):
            raise RouteStoreError("destination is not the last sample position")
        expected = RouteMetrics.of(area_durations(self.trip), self.metrics.weights)
        if expected != self.metrics:
            raise RouteStoreError(f"metrics inconsistent with trip labels for route {self.id!r}")


def make_record(
    route_id: str,
    trip: ClassifiedTrip,
    weights: Weights = Weights(),
    created_at: int | None = None,
    meta: dict | None = None,
) -> RouteRecord:
    """Build a record whose endpoints and metrics derive from ``trip``.

    ``created_at`` defaults to the last timestamp of the trip so that
    records are reproducible.  Ground-truth tags on the log are dropped;
    the trip labels are what the record keeps.
    """
    samples = trip.log.samples
    if not samples:
        raise RouteStoreError("route has no samples")
    trip = ClassifiedTrip(TelemetryLog(samples), trip.labels)
    return RouteRecord(
        id=route_id,
        origin=(samples[0].lat, samples[0].lon),
        destination=(samples[-1].lat, samples[-1].lon),
        trip=trip,
        metrics=RouteMetrics.of(area_durations(trip), weights),
        created_at=samples[-1].t if created_at is None else int(created_at),
        meta=dict(meta or {}),
    )


def dumps_record(rec: RouteRecord) -> str:
    header = {
        "version": RECORD_VERSION,
        "id": rec.id,
        "origin": list(rec.origin),
        "destination": list(rec.destination),
        "created_at": rec.created_at,
        "metrics": rec.metrics.to_dict(),
        "meta": rec.meta,
    }
    return f"{RECORD_SIGNATURE}\n#{json.dumps(header, sort_keys=True)}\n" + serialize_log(rec.trip.log, rec.trip.labels)


def loads_record(text: str) -> RouteRecord:
    lines = text.split("\n", 2)
    if len(lines) < 3 or lines[0] != RECORD_SIGNATURE or not lines[1].startswith("#"):
        raise RouteStoreError("not a route record document")
    header = json.loads(lines[1][1:])
    if header.get("version") != RECORD_VERSION:
        raise RouteStoreError(f"unsupported route record version {header.get('version')}")
    log = parse_log(lines[2], require_area=True)
    trip = ClassifiedTrip(TelemetryLog(log.samples), log.labels)
    return RouteRecord(
        id=header["id"],
        origin=tuple(header["origin"]),
        destination=tuple(header["destination"]),
        trip=trip,
        metrics=RouteMetrics.from_dict(header["metrics"]),
        created_at=int(header["created_at"]),
        meta=header.get("meta", {}),
    )


class RouteStore:
    """Single-writer, many-reader route database rooted at ``path``."""

    def __init__(self, path):
        self.root = Path(path)
        self.routes = self.root / "routes"
        self.index_path = self.root / "index.json"

    @contextmanager
    def _write_lock(self) -> Iterator[None]:
        self.routes.mkdir(parents=True, exist_ok=True)
        with open(self.root / ".lock", "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _read_index(self) -> dict:
        if not self.index_path.exists():
            return {}
        with open(self.index_path, encoding="utf-8") as fh:
            return json.load(fh)

    @staticmethod
    def _atomic_write(path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)

    def put(self, rec: RouteRecord) -> str:
        rec.check()
        text = dumps_record(rec)
        digest = hashlib.sha256(text.encode()).hexdigest()
        with self._write_lock():
            index = self._read_index()
            if rec.id in index:
                if index[rec.id]["sha256"] == digest:
                    return rec.id
                raise RouteStoreError(f"route id {rec.id!r} already stored with different content")
            fname = f"{rec.id}.route"
            self._atomic_write(self.routes / fname, text)
            index[rec.id] = {
                "file": fname,
                "origin": list(rec.origin),
                "destination": list(rec.destination),
                "sha256": digest,
            }
            self._atomic_write(self.index_path, json.dumps(index, sort_keys=True, indent=1) + "\n")
        return rec.id

    def get(self, route_id: str) -> RouteRecord:
        entry = self._read_index().get(route_id)
        if entry is None:
            raise RouteStoreError(f"unknown route id {route_id!r}")
        with open(self.routes / entry["file"], encoding="utf-8") as fh:
            return loads_record(fh.read())

    def ids(self) -> list[str]:
        return sorted(self._read_index())

    def find_candidates(
        self,
        origin: tuple[float, float],
        destination: tuple[float, float],
        radius: float = DEFAULT_RADIUS_M,
    ) -> list[RouteRecord]:
        """Routes starting near ``origin`` and ending near ``destination``.

        Direction matters: a route driven the other way is not a match.
        """
        if radius <= 0:
            raise RouteStoreError("radius must be positive")
        hits = [
            rid
            for rid, e in self._read_index().items()
            if haversine_m(tuple(e["origin"]), origin) <= radius
            and haversine_m(tuple(e["destination"]), destination) <= radius
        ]
        return [self.get(rid) for rid in sorted(hits)]


def reported_scores(records: Sequence[RouteRecord]) -> dict:
    return {r.id: r.meta["reported_score"] for r in records if "reported_score" in r.meta}


def recommend(
    store: RouteStore,
    origin: tuple[float, float],
    destination: tuple[float, float],
    weights: Weights = Weights(),
    radius: float = DEFAULT_RADIUS_M,
) -> RouteComparison:
    records = store.find_candidates(origin, destination, radius)
    if not records:
        raise NoRouteError("no known route between the given endpoints")
    return compare_routes([(r.id, r.metrics.durations) for r in records], weights, allow_single=True)


# --------------------------------------------------------------------------
# alerts


@dataclass(frozen=True)
class AlertEvent:
    t_alert: int
    t_entry: int
    zone: AreaLabel


def alert_replay(trip: ClassifiedTrip, lookahead: int = DEFAULT_LOOKAHEAD_S) -> list[AlertEvent]:
    """Alerts raised ahead of every entry into a rougher A2 or A3 zone."""
    if lookahead < 0:
        raise ValueError("lookahead must be >= 0")
    samples = trip.log.samples
    if not samples:
        return []
    start = samples[0].t
    events = []
    prev = None
    for s, zone in zip(samples, trip.labels):
        if zone != AreaLabel.A1 and (prev is None or zone > prev):
            events.append(AlertEvent(max(start, s.t - lookahead), s.t, zone))
        prev = zone
    return events


def render_alerts(events: Sequence[AlertEvent]) -> str:
    lines = ["t_alert,t_entry,zone"]
    lines += [f"{e.t_alert},{e.t_entry},{e.zone.name}" for e in events]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# GeoJSON


def to_geojson(trip: ClassifiedTrip, route_id: str | None = None) -> dict:
    features = [
        {
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
            "properties": {"area": a.name, "t": s.t, "v_kmh": s.v},
        }
        for s, a in zip(trip.log.samples, trip.labels)
    ]
    doc = {"type": "FeatureCollection", "features": features}
    if route_id is not None:
        doc["properties"] = {"route": route_id}
    return doc


def validate_geojson(doc: dict) -> int:
    """Check the point-per-sample layout; returns the feature count."""
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise ValueError("not a FeatureCollection")
    for i, f in enumerate(doc["features"]):
        geom = f.get("geometry") or {}
        coords = geom.get("coordinates")
        if f.get("type") != "Feature" or geom.get("type") != "Point":
            raise ValueError(f"feature {i}: expected a Point feature")
        if not (isinstance(coords, list) and len(coords) == 2):
            raise ValueError(f"feature {i}: bad coordinates")
        lon, lat = coords
        if not (-180 <= lon <= 180 and -90 <= lat <= 90):
            raise ValueError(f"feature {i}: coordinates out of range")
        props = f.get("properties") or {}
        if props.get("area") not in ("A1", "A2", "A3") or "t" not in props or "v_kmh" not in props:
            raise ValueError(f"feature {i}: missing area/t/v_kmh properties")
    return len(doc["features"])

