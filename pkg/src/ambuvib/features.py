"""Classifier inputs: raw-axis vectors and windowed standard deviations."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .telemetry import AreaLabel, Segment, TelemetryLog, segment as split_segments

BUFFERS = (5, 9, 15, 29)


class Variant(str, Enum):
    RAW_XYZ_V = "raw-xyz"
    RAW_XZ_V = "raw-xz"
    RAW_YZ_V = "raw-yz"
    STD_YZ_V = "std-yz"

    @property
    def width(self) -> int:
        return 4 if self is Variant.RAW_XYZ_V else 3


_RAW_COLUMNS = {
    Variant.RAW_XYZ_V: ("ax", "ay", "az", "v"),
    Variant.RAW_XZ_V: ("ax", "az", "v"),
    Variant.RAW_YZ_V: ("ay", "az", "v"),
}


@dataclass(frozen=True)
class FeatureConfig:
    variant: Variant = Variant.STD_YZ_V
    buffer: int = 29

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.STD_YZ_V:
            if self.buffer < 3 or self.buffer % 2 == 0:
                raise ValueError(f"buffer must be odd and >= 3, got {self.buffer}")

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "buffer": self.buffer}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(Variant(d["variant"]), int(d["buffer"]))


@dataclass(frozen=True)
class FeatureSet:
    """Feature matrix with the log index of the sample each row describes."""

    values: np.ndarray  # (n, width)
    center_index: np.ndarray  # (n,) int
    labels: np.ndarray | None = None  # (n,) int area values, when tagged

    def __len__(self) -> int:
        return len(self.center_index)


def window_stddev(series: Sequence[float], buffer: int) -> list[tuple[int, float]]:
    """Sample standard deviation over every fully contained centred window.

    Returns ``(center_index, stddev)`` pairs; ``len(series) - buffer + 1``
    of them, or none when the series is shorter than the window.
    """
    if buffer < 1 or buffer % 2 == 0:
        raise ValueError(f"buffer must be a positive odd integer, got {buffer}")
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < buffer:
        return []
    windows = np.lib.stride_tricks.sliding_window_view(x, buffer)
    sd = windows.std(axis=1, ddof=1) if buffer > 1 else np.zeros(n)
    half = buffer // 2
    return [(i + half, float(s)) for i, s in enumerate(sd)]


def build_features(
    log: TelemetryLog,
    segments: Sequence[Segment] | None,
    cfg: FeatureConfig,
) -> FeatureSet:
    """Feature vectors for ``log`` under ``cfg``, ordered by center index.

    Raw variants give one vector per sample.  The windowed variant computes
    the standard deviation of ay and az per segment, so windows never span
    a recording gap, and pairs it with the velocity at the window centre.
    """
    if segments is None:
        segments = split_segments(log)
    width = cfg.variant.width
    if cfg.variant is Variant.STD_YZ_V:
        ay, az, v = log.column("ay"), log.column("az"), log.column("v")
        rows, centers = [], []
        for seg in segments:
            sl = slice(seg.start, seg.stop)
            sd_y = window_stddev(ay[sl], cfg.buffer)
            sd_z = window_stddev(az[sl], cfg.buffer)
            for (c, sy), (_, sz) in zip(sd_y, sd_z):
                idx = seg.start + c
                rows.append((sy, sz, v[idx]))
                centers.append(idx)
        values = np.array(rows, dtype=float).reshape(-1, width)
        center_index = np.array(centers, dtype=np.int64)
    else:
        cols = _RAW_COLUMNS[cfg.variant]
        idx = np.array(sorted(i for seg in segments for i in seg.indices()), dtype=np.int64)
        full = np.column_stack([log.column(c) for c in cols]) if len(log) else np.empty((0, width))
        values = full[idx].reshape(-1, width)
        center_index = idx
    labels = None
    if log.labels is not None:
        labels = np.array([int(log.labels[i]) for i in center_index], dtype=np.int64)
    return FeatureSet(values, center_index, labels)


@dataclass(frozen=True)
class NormalizationRanges:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise ValueError("invalid normalization ranges")

    def to_dict(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationRanges":
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))

    @classmethod
    def identity(cls, width: int) -> "NormalizationRanges":
        return cls(np.zeros(width), np.ones(width))


def fit_ranges(values: np.ndarray) -> NormalizationRanges:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or len(values) == 0:
        raise ValueError("cannot fit ranges on an empty feature set")
    return NormalizationRanges(values.min(axis=0), values.max(axis=0))


def apply_ranges(ranges: NormalizationRanges, values: np.ndarray) -> np.ndarray:
    """Min-max scale each column; no clamping, constant columns map to 0.5."""
    values = np.asarray(values, dtype=float)
    span = ranges.hi - ranges.lo
    flat = span == 0
    out = (values - ranges.lo) / np.where(flat, 1.0, span)
    if np.any(flat):
        out[..., flat] = 0.5
    return out


def feature_table(fs: FeatureSet, log: TelemetryLog) -> str:
    """CSV dump with columns ``center_t,f1..fk[,area]``."""
    width = fs.values.shape[1]
    head = ["center_t"] + [f"f{i + 1}" for i in range(width)] + (["area"] if fs.labels is not None else [])
    lines = [",".join(head)]
    for row, (vals, c) in enumerate(zip(fs.values, fs.center_index)):
        cells = [str(log.samples[c].t)] + [repr(float(x)) for x in vals]
        if fs.labels is not None:
            cells.append(AreaLabel(int(fs.labels[row])).name)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
