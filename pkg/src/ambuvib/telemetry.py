"""1 Hz telemetry logs: parsing, serialization, segmentation and synthesis.

A log is an ordered run of registers (time, position, velocity, three-axis
acceleration) sampled once per second.  Tagged logs carry one mobility-area
label per register.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6371008.8
CADENCE_S = 1
DEFAULT_MAX_GAP = 2

BASE_COLUMNS = ("t", "lat", "lon", "v_kmh", "ax", "ay", "az")
AREA_COLUMN = "area"


class AreaLabel(IntEnum):
    """Mobility area, ordered by vibration severity."""

    A1 = 1
    A2 = 2
    A3 = 3

    @classmethod
    def parse(cls, text: str) -> "AreaLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown mobility area {text!r}") from None


AREAS = (AreaLabel.A1, AreaLabel.A2, AreaLabel.A3)


class TelemetryError(ValueError):
    """Raised for malformed or out-of-range telemetry input."""


@dataclass(frozen=True)
class TelemetrySample:
    t: int
    lat: float
    lon: float
    v: float
    ax: float
    ay: float
    az: float

    def check(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise TelemetryError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise TelemetryError(f"lon out of range: {self.lon}")
        if not (self.v >= 0.0 and math.isfinite(self.v)):
            raise TelemetryError(f"v_kmh out of range: {self.v}")
        for name in ("ax", "ay", "az"):
            if not math.isfinite(getattr(self, name)):
                raise TelemetryError(f"{name} is not finite")


@dataclass(frozen=True)
class TelemetryLog:
    samples: tuple[TelemetrySample, ...]
    labels: tuple[AreaLabel, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.samples):
                raise TelemetryError("labels length differs from samples length")
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur.t <= prev.t:
                raise TelemetryError(f"timestamps not strictly increasing at t={cur.t}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def tagged(self) -> bool:
        return self.labels is not None

    def column(self, name: str) -> np.ndarray:
        """Return one field across all samples as a float array."""
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=np.int64)


@dataclass(frozen=True)
class Segment:
    """Half-open index range ``[start, stop)`` of a log without recording gaps."""

    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start

    def indices(self) -> range:
        return range(self.start, self.stop)


def _parse_int_seconds(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"timestamp {text!r} is not an integer number of seconds")
    return int(value)


def parse_log(text: str | Iterable[str], require_area: bool = False, meta: dict | None = None) -> TelemetryLog:
    """Parse telemetry CSV text into a log.

    The header must contain ``t,lat,lon,v_kmh,ax,ay,az`` and optionally
    ``area``.  Errors name the offending line (1-based, header is line 1).
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TelemetryError("empty telemetry file (no header)") from None
    missing = [c for c in BASE_COLUMNS if c not in header]
    if missing:
        raise TelemetryError(f"missing column(s): {', '.join(missing)}")
    has_area = AREA_COLUMN in header
    if require_area and not has_area:
        raise TelemetryError(f"missing column: {AREA_COLUMN} (tagged data required)")
    pos = {name: header.index(name) for name in BASE_COLUMNS}
    area_pos = header.index(AREA_COLUMN) if has_area else None

    samples: list[TelemetrySample] = []
    labels: list[AreaLabel] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise TelemetryError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            sample = TelemetrySample(
                t=_parse_int_seconds(row[pos["t"]]),
                lat=float(row[pos["lat"]]),
                lon=float(row[pos["lon"]]),
                v=float(row[pos["v_kmh"]]),
                ax=float(row[pos["ax"]]),
                ay=float(row[pos["ay"]]),
                az=float(row[pos["az"]]),
            )
            sample.check()
            if area_pos is not None:
                labels.append(AreaLabel.parse(row[area_pos]))
        except (ValueError, TelemetryError) as exc:
            raise TelemetryError(f"line {lineno}: {exc}") from None
        if samples and sample.t <= samples[-1].t:
            raise TelemetryError(f"line {lineno}: non-monotonic timestamp {sample.t}")
        samples.append(sample)
    return TelemetryLog(samples, tuple(labels) if has_area else None, dict(meta or {}))


def read_log(path, require_area: bool = False) -> TelemetryLog:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_log(fh, require_area=require_area, meta={"source": str(path)})


def serialize_log(log: TelemetryLog, labels: Sequence[AreaLabel] | None = None) -> str:
    """Render a log as CSV; floats use ``repr`` so parsing round-trips exactly."""
    labels = log.labels if labels is None else labels
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BASE_COLUMNS + ((AREA_COLUMN,) if labels is not None else ()))
    for i, s in enumerate(log.samples):
        row = [str(s.t), repr(s.lat), repr(s.lon), repr(s.v), repr(s.ax), repr(s.ay), repr(s.az)]
        if labels is not None:
            row.append(labels[i].name)
        writer.writerow(row)
    return out.getvalue()


def write_log(log: TelemetryLog, path, labels: Sequence[AreaLabel] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(serialize_log(log, labels))


def segment(log: TelemetryLog, max_gap: int = DEFAULT_MAX_GAP) -> list[Segment]:
    """Split a log wherever consecutive timestamps differ by more than ``max_gap``."""
    if max_gap < 1:
        raise ValueError("max_gap must be >= 1")
    n = len(log)
    if n == 0:
        return []
    gaps = np.flatnonzero(np.diff(log.times) > max_gap) + 1
    bounds = [0, *gaps.tolist(), n]
    return [Segment(a, b) for a, b in zip(bounds, bounds[1:])]


# --------------------------------------------------------------------------
# synthetic routes


@dataclass(frozen=True)
class AreaNoise:
    ax_sd: float
    ay_sd: float
    az_sd: float
    v_mean: float
    v_sd: float
    bump_rate: float = 0.0


def _default_noise() -> dict:
    return {
        AreaLabel.A1: AreaNoise(ax_sd=0.10, ay_sd=0.05, az_sd=0.05, v_mean=70.0, v_sd=12.0),
        AreaLabel.A2: AreaNoise(ax_sd=0.25, ay_sd=0.20, az_sd=0.30, v_mean=55.0, v_sd=12.0),
        AreaLabel.A3: AreaNoise(ax_sd=0.45, ay_sd=0.60, az_sd=0.90, v_mean=35.0, v_sd=12.0, bump_rate=0.1),
    }


@dataclass(frozen=True)
class NoiseSpec:
    """Per-area noise levels used by :func:`synth_route`.

    Velocity follows an AR(1) process around ``v_mean`` so that it varies
    smoothly between seconds.  Acceleration noise levels are scaled by a
    slow log-normal drift (``drift_sd``) since pavement is never uniform
    within one area.  Bumps are impulses of 3 to 6 m/s^2 on the
    vertical axis arriving as a Poisson process.
    """

    areas: dict = field(default_factory=_default_noise)
    gravity: float = 9.81
    bump_min: float = 3.0
    bump_max: float = 6.0
    v_corr: float = 0.9
    drift_sd: float = 0.35
    drift_corr: float = 0.95

    def __getitem__(self, area: AreaLabel) -> AreaNoise:
        return self.areas[area]


def _destination(lat: float, lon: float, bearing_deg: float, dist_m: float) -> tuple[float, float]:
    phi1, lam1 = math.radians(lat), math.radians(lon)
    theta = math.radians(bearing_deg)
    delta = dist_m / EARTH_RADIUS_M
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return math.degrees(phi2), (math.degrees(lam2) + 540.0) % 360.0 - 180.0


def _along_polyline(waypoints: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    # planar interpolation in degrees is adequate at route scale
    legs = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(legs)])
    if cum[-1] == 0.0:
        return np.repeat(waypoints[:1], len(fractions), axis=0)
    target = fractions * cum[-1]
    lat = np.interp(target, cum, waypoints[:, 0])
    lon = np.interp(target, cum, waypoints[:, 1])
    return np.column_stack([lat, lon])


def synth_route(
    profile: Sequence[tuple[AreaLabel, int]],
    noise: NoiseSpec | None = None,
    seed: int = 0,
    *,
    t0: int = 0,
    start: tuple[float, float] = (38.97, -0.18),
    end: tuple[float, float] | None = None,
    via: Sequence[tuple[float, float]] = (),
    name: str = "synthetic",
) -> TelemetryLog:
    """Generate a tagged log following ``profile`` (area, seconds) pairs.

    Without ``end`` the vehicle heads due east from ``start`` by the distance
    its velocity implies; with ``end`` the track is stretched along
    ``start -> via... -> end`` so routes can share endpoints exactly.
    """
    if not profile:
        raise ValueError("empty profile")
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(seed)

    labels: list[AreaLabel] = []
    for area, duration in profile:
        area = AreaLabel.parse(area) if isinstance(area, str) else AreaLabel(area)
        if duration < 1 or int(duration) != duration:
            raise ValueError(f"duration must be a positive integer, got {duration}")
        labels.extend([area] * int(duration))
    n = len(labels)

    v = np.empty(n)
    ax = np.empty(n)
    ay = np.empty(n)
    az = np.empty(n)
    rho = noise.v_corr
    rd = noise.drift_corr
    dev = drift = 0.0
    for i, area in enumerate(labels):
        p = noise[area]
        dev = rho * dev + math.sqrt(1.0 - rho * rho) * rng.standard_normal()
        drift = rd * drift + math.sqrt(1.0 - rd * rd) * rng.standard_normal()
        scale = math.exp(noise.drift_sd * drift)
        v[i] = max(0.0, p.v_mean + p.v_sd * dev)
        ax[i] = scale * p.ax_sd * rng.standard_normal()
        ay[i] = scale * p.ay_sd * rng.standard_normal()
        az[i] = noise.gravity + scale * p.az_sd * rng.standard_normal()
        if p.bump_rate > 0.0:
            for _ in range(rng.poisson(p.bump_rate)):
                az[i] += rng.choice((-1.0, 1.0)) * rng.uniform(noise.bump_min, noise.bump_max)

    travelled = np.concatenate([[0.0], np.cumsum(v[:-1] / 3.6)])
    if end is None:
        coords = np.array([_destination(start[0], start[1], 90.0, d) for d in travelled])
    else:
        waypoints = np.array([start, *via, end], dtype=float)
        frac = travelled / travelled[-1] if travelled[-1] > 0 else np.linspace(0.0, 1.0, n)
        coords = _along_polyline(waypoints, frac)

    samples = [
        TelemetrySample(
            t=t0 + i * CADENCE_S,
            lat=float(coords[i, 0]),
            lon=float(coords[i, 1]),
            v=float(v[i]),
            ax=float(ax[i]),
            ay=float(ay[i]),
            az=float(az[i]),
        )
        for i in range(n)
    ]
    return TelemetryLog(samples, tuple(labels), {"name": name, "seed": seed})


def parse_profile(text: str) -> list[tuple[AreaLabel, int]]:
    """Parse ``"A1:600,A2:600,A3:600"`` into a synth profile."""
    profile = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        area, _, seconds = chunk.partition(":")
        if not seconds:
            raise ValueError(f"profile entry {chunk!r} must look like A1:60")
        profile.append((AreaLabel.parse(area), int(seconds)))
    if not profile:
        raise ValueError("empty profile")
    return profile


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in metres between two (lat, lon) points."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))
