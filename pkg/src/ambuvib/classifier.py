"""Three-class probabilistic neural network for mobility areas.

The network has a pattern layer (one Gaussian kernel per training vector)
and a summation layer (mean kernel response per class).  The output picks
the class with the largest prior * cost * density.  The only free parameter
is the kernel width ``sigma`` (the sphere of influence), tuned by
leave-one-out accuracy on min-max normalized features.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .features import (
    FeatureConfig,
    FeatureSet,
    NormalizationRanges,
    apply_ranges,
    build_features,
    fit_ranges,
)
from .scoring import ClassifiedTrip, pad_labels
from .telemetry import AREAS, AreaLabel, TelemetryLog, segment

MODEL_FORMAT = "ambuvib-pnn"
MODEL_VERSION = 1
SIGMA_STEP = 1.0 / 1280.0
COARSE_POINTS = 20
_CHUNK = 256


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class PnnModel:
    patterns: np.ndarray  # normalized, (n, d)
    labels: np.ndarray  # area values 1..3, (n,)
    sigma: float
    ranges: NormalizationRanges
    cfg: FeatureConfig
    priors: tuple = (1.0, 1.0, 1.0)
    costs: tuple = (1.0, 1.0, 1.0)
    loo_accuracy: float | None = field(default=None, compare=False)

    def __post_init__(self):
        patterns = np.asarray(self.patterns, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ClassifierError(f"sigma must be positive, got {self.sigma}")
        if patterns.ndim != 2 or len(patterns) != len(labels) or len(labels) == 0:
            raise ClassifierError("patterns and labels must be nonempty and aligned")
        if len(self.priors) != 3 or len(self.costs) != 3:
            raise ClassifierError("priors and costs need one value per area")
        if min(self.priors) <= 0 or min(self.costs) <= 0:
            raise ClassifierError("priors and costs must be positive")
        missing = [a.name for a in AREAS if not np.any(labels == a)]
        if missing:
            raise ClassifierError(f"missing class(es): {', '.join(missing)}")

    @property
    def dim(self) -> int:
        return self.patterns.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.array([np.count_nonzero(self.labels == a) for a in AREAS], dtype=float)


def _sq_dist(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)


def _check_dim(model: PnnModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.dim:
        raise ClassifierError(f"feature dimension {x.shape[-1]} does not match model dimension {model.dim}")


def class_density(model: PnnModel, x: Sequence[float], k: AreaLabel) -> float:
    """Mean Gaussian kernel response of class ``k`` at normalized point ``x``."""
    x = np.asarray(x, dtype=float)
    _check_dim(model, x)
    members = model.patterns[model.labels == int(k)]
    d2 = ((members - x) ** 2).sum(axis=1)
    return float(np.exp(-d2 / (2.0 * model.sigma**2)).mean())


def _log_scores(model: PnnModel, xn: np.ndarray) -> np.ndarray:
    """log(prior * cost * density) per class for normalized queries, (m, 3)."""
    out = np.empty((len(xn), 3))
    weight = np.log(np.array(model.priors)) + np.log(np.array(model.costs)) - np.log(model.class_counts())
    inv = 1.0 / (2.0 * model.sigma**2)
    for start in range(0, len(xn), _CHUNK):
        q = xn[start : start + _CHUNK]
        a = -_sq_dist(q, model.patterns) * inv
        for j, area in enumerate(AREAS):
            block = a[:, model.labels == area]
            top = block.max(axis=1)
            out[start : start + len(q), j] = top + np.log(np.exp(block - top[:, None]).sum(axis=1))
    return out + weight


def _posteriors(log_scores: np.ndarray) -> np.ndarray:
    top = log_scores.max(axis=1, keepdims=True)
    e = np.exp(log_scores - top)
    return e / e.sum(axis=1, keepdims=True)


def classify_normalized(model: PnnModel, xn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels (1..3) and posteriors for already-normalized queries."""
    xn = np.atleast_2d(np.asarray(xn, dtype=float))
    _check_dim(model, xn)
    ls = _log_scores(model, xn)
    # argmax returns the first maximum, i.e. the least severe area on ties
    return np.argmax(ls, axis=1) + 1, _posteriors(ls)


def classify_many(model: PnnModel, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    _check_dim(model, values)
    return classify_normalized(model, apply_ranges(model.ranges, values))


def classify(model: PnnModel, x: Sequence[float]) -> tuple[AreaLabel, dict]:
    """Classify one raw-scale feature vector.

    Returns the winning area and the posterior of every area.
    """
    labels, post = classify_many(model, np.asarray(x, dtype=float)[None, :])
    return AreaLabel(int(labels[0])), {a: float(post[0, j]) for j, a in enumerate(AREAS)}


# --------------------------------------------------------------------------
# leave-one-out tuning


def _check_training(values: np.ndarray, labels: np.ndarray) -> None:
    for a in AREAS:
        n = np.count_nonzero(labels == a)
        if n == 0:
            raise ClassifierError(f"missing class {a.name}")
        if n < 2:
            raise ClassifierError(f"class {a.name} has a single pattern; leave-one-out needs at least two")


def _pairwise_sq(values: np.ndarray) -> np.ndarray:
    n = len(values)
    d = np.empty((n, n))
    for start in range(0, n, _CHUNK):
        d[start : start + _CHUNK] = _sq_dist(values[start : start + _CHUNK], values)
    return d


def _loo_accuracy(d2: np.ndarray, labels: np.ndarray, sigma: float, weight: np.ndarray) -> float:
    n = len(labels)
    onehot = (labels[:, None] == np.array(AREAS)[None, :]).astype(float)
    counts = onehot.sum(axis=0)[None, :] - onehot
    a = -d2 / (2.0 * sigma**2)
    np.fill_diagonal(a, -np.inf)
    # per-row shift cancels in the argmax and keeps tiny sigmas from underflowing
    a -= a.max(axis=1, keepdims=True)
    sums = np.exp(a) @ onehot
    with np.errstate(divide="ignore"):
        scores = np.log(sums) - np.log(counts) + weight
    pred = np.argmax(scores, axis=1) + 1
    return float(np.count_nonzero(pred == labels)) / n


def jackknife_accuracy(
    values: np.ndarray,
    labels: np.ndarray,
    sigma: float,
    priors: Sequence[float] = (1.0, 1.0, 1.0),
    costs: Sequence[float] = (1.0, 1.0, 1.0),
) -> float:
    """Leave-one-out accuracy of the network on normalized ``values``."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    _check_training(values, labels)
    if not sigma > 0:
        raise ClassifierError("sigma must be positive")
    weight = np.log(np.asarray(priors, dtype=float)) + np.log(np.asarray(costs, dtype=float))
    return _loo_accuracy(_pairwise_sq(values), labels, sigma, weight)


def coarse_grid(points: int = COARSE_POINTS) -> list[int]:
    """Log-spaced grid over [1/1280, 1] as integer multiples of 1/1280."""
    steps = []
    for k in np.rint(np.logspace(0.0, math.log10(1280.0), points)).astype(int).tolist():
        # rounding merges the smallest points; keep them distinct
        steps.append(max(k, steps[-1] + 1) if steps else k)
    return steps


def select_sigma(
    values: np.ndarray,
    labels: np.ndarray,
    grid: Iterable[int] | None = None,
    priors: Sequence[float] = (1.0, 1.0, 1.0),
    costs: Sequence[float] = (1.0, 1.0, 1.0),
    trace: dict | None = None,
) -> tuple[float, float]:
    """Pick the sigma with the best leave-one-out accuracy.

    ``grid`` holds multiples of 1/1280.  After the coarse pass every
    multiple strictly between the winner's coarse neighbours is tried.
    Ties go to the smaller sigma.  ``trace``, when given, receives every
    evaluated ``sigma -> accuracy``.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    _check_training(values, labels)
    steps = sorted(set(grid)) if grid is not None else coarse_grid()
    if not steps or steps[0] < 1:
        raise ClassifierError("sigma grid must contain positive multiples of 1/1280")
    d2 = _pairwise_sq(values)
    weight = np.log(np.asarray(priors, dtype=float)) + np.log(np.asarray(costs, dtype=float))
    seen: dict[int, float] = {}

    def run(ks):
        for k in ks:
            if k not in seen:
                seen[k] = _loo_accuracy(d2, labels, k * SIGMA_STEP, weight)

    def best() -> int:
        return min(seen, key=lambda k: (-seen[k], k))

    run(steps)
    k0 = best()
    pos = steps.index(k0)
    lo = steps[pos - 1] if pos > 0 else 0
    hi = steps[pos + 1] if pos + 1 < len(steps) else k0 + 1
    run(range(lo + 1, hi))
    k = best()
    if trace is not None:
        trace.update({kk * SIGMA_STEP: acc for kk, acc in sorted(seen.items())})
    return k * SIGMA_STEP, seen[k]


# --------------------------------------------------------------------------
# training and evaluation


def labelled_features(logs: Sequence[TelemetryLog], cfg: FeatureConfig, max_gap: int = 2) -> FeatureSet:
    """Concatenate features of several tagged logs."""
    parts = []
    for log in logs:
        if log.labels is None:
            raise ClassifierError("training data must be tagged (area column)")
        parts.append(build_features(log, segment(log, max_gap), cfg))
    width = cfg.variant.width
    values = np.concatenate([p.values for p in parts]) if parts else np.empty((0, width))
    labels = np.concatenate([p.labels for p in parts]) if parts else np.empty(0, dtype=np.int64)
    centers = np.concatenate([p.center_index for p in parts]) if parts else np.empty(0, dtype=np.int64)
    return FeatureSet(values.reshape(-1, width), centers, labels)


def train(
    logs: Sequence[TelemetryLog] | TelemetryLog,
    cfg: FeatureConfig,
    max_gap: int = 2,
    grid: Iterable[int] | None = None,
    trace: dict | None = None,
) -> PnnModel:
    if isinstance(logs, TelemetryLog):
        logs = [logs]
    fs = labelled_features(logs, cfg, max_gap)
    if len(fs) == 0:
        raise ClassifierError("no features: every segment is shorter than the time buffer")
    missing = [a.name for a in AREAS if not np.any(fs.labels == a)]
    if missing:
        raise ClassifierError(f"missing class(es) in training data: {', '.join(missing)}")
    ranges = fit_ranges(fs.values)
    xn = apply_ranges(ranges, fs.values)
    sigma, acc = select_sigma(xn, fs.labels, grid=grid, trace=trace)
    return PnnModel(xn, fs.labels, sigma, ranges, cfg, loo_accuracy=acc)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are tagged areas, columns assigned areas."""

    counts: np.ndarray

    @classmethod
    def from_labels(cls, truth: Sequence[int], assigned: Sequence[int]) -> "ConfusionMatrix":
        m = np.zeros((3, 3), dtype=np.int64)
        for t, a in zip(truth, assigned):
            m[int(t) - 1, int(a) - 1] += 1
        return cls(m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def row_percent(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros((3, 3)), where=rows > 0)

    def render(self, sigma: float | None = None) -> str:
        pct = self.row_percent()
        lines = [
            f"{'Tagged Mobility Area':<22}{'A1':>18}{'A2':>18}{'A3':>18}  % Correctly Assigned",
        ]
        for i, a in enumerate(AREAS):
            head = f"{a.name} ({int(self.counts[i].sum())})"
            cells = "".join(f"{f'{self.counts[i, j]} ({pct[i, j]:.2f}%)':>18}" for j in range(3))
            tail = f"  {100.0 * self.accuracy:.2f}%" if i == 0 else ""
            lines.append(f"{head:<22}{cells}{tail}")
        if sigma is not None:
            lines.append(f"Sphere of influence equal to {sigma:.7g}.")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "areas": [a.name for a in AREAS],
            "counts": self.counts.tolist(),
            "row_percent": self.row_percent().tolist(),
            "accuracy": self.accuracy,
            "total": self.total,
        }


def evaluate(model: PnnModel, fs: FeatureSet) -> tuple[ConfusionMatrix, np.ndarray]:
    """Confusion matrix of ``model`` on tagged features, plus the assignments."""
    if fs.labels is None or len(fs) == 0:
        raise ClassifierError("evaluation needs a nonempty tagged feature set")
    assigned, _ = classify_many(model, fs.values)
    return ConfusionMatrix.from_labels(fs.labels, assigned), assigned


def classify_trip(model: PnnModel, log: TelemetryLog, max_gap: int = 2) -> tuple[ClassifiedTrip, np.ndarray, np.ndarray]:
    """Label every sample of ``log``.

    Returns the padded trip plus the window centres and their raw assignments.
    """
    segs = segment(log, max_gap)
    fs = build_features(log, segs, model.cfg)
    if len(fs) == 0:
        raise ClassifierError("no features: every segment is shorter than the time buffer")
    assigned, _ = classify_many(model, fs.values)
    labels = pad_labels(len(log), fs.center_index, assigned, segs)
    return ClassifiedTrip(log, tuple(labels)), fs.center_index, assigned


# --------------------------------------------------------------------------
# model file


def model_to_dict(model: PnnModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "features": model.cfg.to_dict(),
        "ranges": model.ranges.to_dict(),
        "sigma": model.sigma,
        "priors": list(model.priors),
        "costs": list(model.costs),
        "loo_accuracy": model.loo_accuracy,
        "labels": [AreaLabel(int(k)).name for k in model.labels],
        "patterns": model.patterns.tolist(),
    }


def model_from_dict(d: dict) -> PnnModel:
    if d.get("format") != MODEL_FORMAT:
        raise ClassifierError("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise ClassifierError(f"unsupported model version {d.get('version')}")
    cfg = FeatureConfig.from_dict(d["features"])
    patterns = np.array(d["patterns"], dtype=float).reshape(-1, cfg.variant.width)
    return PnnModel(
        patterns=patterns,
        labels=np.array([int(AreaLabel.parse(s)) for s in d["labels"]], dtype=np.int64),
        sigma=float(d["sigma"]),
        ranges=NormalizationRanges.from_dict(d["ranges"]),
        cfg=cfg,
        priors=tuple(d["priors"]),
        costs=tuple(d["costs"]),
        loo_accuracy=d.get("loo_accuracy"),
    )


def dumps_model(model: PnnModel) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":")) + "\n"


def loads_model(text: str) -> PnnModel:
    return model_from_dict(json.loads(text))


def save_model(model: PnnModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> PnnModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
