"""Vibration-aware route recommendation for ambulances.

Telemetry logs are labelled into three mobility areas (A1 smooth, A2
regular, A3 rough) by a probabilistic neural network; candidate routes are
then ranked by a travel-time index that weights rough seconds up.
"""

__version__ = "0.1.0"

from .classifier import (  # noqa: E402
    ConfusionMatrix,
    PnnModel,
    class_density,
    classify,
    classify_trip,
    evaluate,
    jackknife_accuracy,
    select_sigma,
    train,
)
from .features import FeatureConfig, Variant, apply_ranges, build_features, fit_ranges, window_stddev  # noqa: E402
from .routestore import AlertEvent, RouteRecord, RouteStore, alert_replay, recommend  # noqa: E402
from .scoring import (  # noqa: E402
    AreaDurations,
    ClassifiedTrip,
    RouteComparison,
    RouteMetrics,
    Weights,
    area_durations,
    compare_routes,
    route_index,
    route_score,
)
from .telemetry import AreaLabel, NoiseSpec, TelemetryLog, TelemetrySample, parse_log, segment, synth_route  # noqa: E402
