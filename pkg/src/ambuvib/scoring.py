"""Route index and score from time spent in each mobility area.

The index is travel time with A2 and A3 seconds weighted up (defaults 1.5
and 2); the recommended route is the one with the lowest index.  The score
is the index divided by total time, a length-free vibration measure that
lies between the smallest and largest weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .telemetry import AREAS, CADENCE_S, AreaLabel, Segment, TelemetryLog


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    w1: float = 1.0
    w2: float = 1.5
    w3: float = 2.0

    def __post_init__(self):
        if not 1.0 <= self.w1 <= self.w2 <= self.w3:
            raise ScoringError(f"weights must satisfy 1 <= w1 <= w2 <= w3, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)

    @classmethod
    def parse(cls, text: str) -> "Weights":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ScoringError("weights need three comma-separated values")
        return cls(*parts)


@dataclass(frozen=True)
class AreaDurations:
    t1: int
    t2: int
    t3: int

    def __post_init__(self):
        if min(self.t1, self.t2, self.t3) < 0:
            raise ScoringError("durations must be non-negative")

    @property
    def total(self) -> int:
        return self.t1 + self.t2 + self.t3

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.t1, self.t2, self.t3)

    def __add__(self, other: "AreaDurations") -> "AreaDurations":
        return AreaDurations(self.t1 + other.t1, self.t2 + other.t2, self.t3 + other.t3)


@dataclass(frozen=True)
class RouteMetrics:
    durations: AreaDurations
    index: float
    score: float
    weights: Weights = Weights()

    @classmethod
    def of(cls, d: AreaDurations, w: Weights = Weights()) -> "RouteMetrics":
        return cls(d, route_index(d, w), route_score(d, w), w)

    def to_dict(self) -> dict:
        return {
            "t1": self.durations.t1,
            "t2": self.durations.t2,
            "t3": self.durations.t3,
            "total": self.durations.total,
            "index": self.index,
            "score": self.score,
            "weights": list(self.weights.as_tuple()),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RouteMetrics":
        return cls(AreaDurations(int(d["t1"]), int(d["t2"]), int(d["t3"])), float(d["index"]), float(d["score"]), Weights(*d["weights"]))


def route_index(d: AreaDurations, w: Weights = Weights()) -> float:
    return w.w1 * d.t1 + w.w2 * d.t2 + w.w3 * d.t3


def route_score(d: AreaDurations, w: Weights = Weights()) -> float:
    if d.total <= 0:
        raise ScoringError("score undefined for a zero-length route")
    return route_index(d, w) / d.total


@dataclass(frozen=True)
class ClassifiedTrip:
    """A telemetry log with one mobility area per sample."""

    log: TelemetryLog
    labels: tuple[AreaLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(AreaLabel(a) for a in self.labels))
        if len(self.labels) != len(self.log):
            raise ScoringError("labels length differs from samples length")


def pad_labels(n: int, centers: Sequence[int], assigned: Sequence[int], segments: Sequence[Segment]) -> list[AreaLabel]:
    """Spread window labels to every sample of the log.

    A sample without its own label takes the label of the nearest labelled
    sample in its segment (the earlier one on a tie).  Segments too short to
    hold any window borrow from the nearest labelled sample in the log.
    """
    if not len(centers):
        raise ScoringError("no classified samples to pad from")
    known = np.zeros(n, dtype=np.int64)
    known[np.asarray(centers, dtype=np.int64)] = np.asarray(assigned, dtype=np.int64)
    out = known.copy()
    all_idx = np.flatnonzero(known)

    def fill(positions: range, pool: np.ndarray) -> None:
        for i in positions:
            if out[i]:
                continue
            j = np.searchsorted(pool, i)
            cands = [pool[k] for k in (j - 1, j) if 0 <= k < len(pool)]
            best = min(cands, key=lambda c: (abs(c - i), c))
            out[i] = known[best]

    for seg in segments:
        idx = seg.indices()
        pool = all_idx[(all_idx >= seg.start) & (all_idx < seg.stop)]
        fill(idx, pool if len(pool) else all_idx)
    if np.any(out == 0):
        raise ScoringError("unlabelled samples remain after padding")
    return [AreaLabel(int(a)) for a in out]


def area_durations(trip: ClassifiedTrip) -> AreaDurations:
    if len(trip.labels) == 0:
        raise ScoringError("empty trip")
    counts = [sum(1 for a in trip.labels if a == area) * CADENCE_S for area in AREAS]
    return AreaDurations(*counts)


def trip_from_counts(counts: Sequence[int], log: TelemetryLog) -> ClassifiedTrip:
    """Label a log with consecutive runs of A1, A2 and A3 of the given lengths."""
    labels = [area for area, k in zip(AREAS, counts) for _ in range(int(k))]
    return ClassifiedTrip(log, tuple(labels))


@dataclass(frozen=True)
class RouteComparison:
    ranked: tuple[tuple[str, RouteMetrics], ...]
    no_alternative: bool = False

    @property
    def recommended(self) -> str:
        return self.ranked[0][0]

    def metrics(self, route_id: str) -> RouteMetrics:
        return dict(self.ranked)[route_id]

    @property
    def shortest(self) -> str:
        return min(self.ranked, key=lambda r: (r[1].durations.total, r[0]))[0]

    def to_dict(self, reported_scores: dict | None = None) -> dict:
        rows = []
        for rid, m in self.ranked:
            row = {"route": rid, **m.to_dict(), "shortest": rid == self.shortest, "preferred": rid == self.recommended}
            flag = score_deviation(m.score, (reported_scores or {}).get(rid))
            if flag:
                row["score_flag"] = flag
            rows.append(row)
        return {"recommended": self.recommended, "no_alternative": self.no_alternative, "routes": rows}


def _rank_key(item):
    rid, m = item
    return (m.index, m.score, m.durations.total, rid)


def compare_routes(candidates: Sequence[tuple[str, AreaDurations]], w: Weights = Weights(), allow_single: bool = False) -> RouteComparison:
    """Rank routes by ascending index; ties by score, total time, then id."""
    if len(candidates) < 2 and not (allow_single and len(candidates) == 1):
        raise ScoringError("need at least two candidate routes to compare")
    ranked = sorted(((rid, RouteMetrics.of(d, w)) for rid, d in candidates), key=_rank_key)
    return RouteComparison(tuple(ranked), no_alternative=len(ranked) == 1)


def score_deviation(score: float, reported: float | None, tol: float = 0.01) -> str | None:
    """Describe a mismatch between a computed score and a printed one.

    ``tol`` allows for scores printed with two decimals or fewer.
    """
    if reported is None or abs(score - reported) <= tol:
        return None
    return f"reported score {reported:.2f} disagrees with index/total = {score:.4f}"


HEADER = ("Route", "Total Time (s)", "No. A1", "No. A2", "No. A3", "Index (s)", "Shorten Route", "Preferred Route", "Score")


def render_comparison(cmp: RouteComparison, reported_scores: dict | None = None) -> str:
    """Plain-text comparison table followed by any score flags."""
    rows = [HEADER]
    notes = []
    for rid, m in cmp.ranked:
        d = m.durations
        rows.append((
            rid,
            str(d.total),
            str(d.t1),
            str(d.t2),
            str(d.t3),
            f"{m.index:g}",
            "x" if rid == cmp.shortest else "",
            "x" if rid == cmp.recommended else "",
            f"{m.score:.4f}",
        ))
        flag = score_deviation(m.score, (reported_scores or {}).get(rid))
        if flag:
            notes.append(f"! {rid}: {flag}")
    widths = [max(len(r[i]) for r in rows) for i in range(len(HEADER))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in rows]
    lines.append(f"Recommended route: {cmp.recommended}" + (" (no alternative)" if cmp.no_alternative else ""))
    return "\n".join(lines + notes)


def comparison_csv(cmp: RouteComparison) -> str:
    lines = ["route,total,t1,t2,t3,index,score,shortest,preferred"]
    for rid, m in cmp.ranked:
        d = m.durations
        lines.append(
            f"{rid},{d.total},{d.t1},{d.t2},{d.t3},{m.index!r},{m.score!r},"
            f"{int(rid == cmp.shortest)},{int(rid == cmp.recommended)}"
        )
    return "\n".join(lines) + "\n"

