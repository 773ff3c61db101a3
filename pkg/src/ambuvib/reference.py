"""Field results of the two route-choice scenarios, as fixtures.

Durations are seconds spent in A1, A2 and A3 by each candidate route.
``printed_score`` is the score as published alongside those durations.
"""

from __future__ import annotations

from .routestore import RouteStore, make_record
from .scoring import AreaDurations, ClassifiedTrip, RouteComparison, Weights, compare_routes
from .telemetry import AREAS, synth_route

SCENARIOS = {
    "scenario-1": {
        "origin": (39.0510, -0.2620),
        "destination": (39.0300, -0.2330),
        "routes": {
            "light-blue": {"durations": AreaDurations(32, 95, 135), "printed_score": 1.70, "via": (39.0520, -0.2400)},
            "dark-blue": {"durations": AreaDurations(21, 50, 149), "printed_score": 1.80, "via": (39.0380, -0.2550)},
        },
    },
    "scenario-3": {
        "origin": (38.9680, -0.1830),
        "destination": (38.9950, -0.1580),
        "routes": {
            "light-blue": {"durations": AreaDurations(173, 200, 120), "printed_score": 1.43, "via": (38.9700, -0.1550)},
            "dark-blue": {"durations": AreaDurations(104, 164, 197), "printed_score": 1.49, "via": (38.9900, -0.1800)},
        },
    },
}


def compare_scenario(name: str, weights: Weights = Weights()) -> RouteComparison:
    routes = SCENARIOS[name]["routes"]
    return compare_routes([(rid, r["durations"]) for rid, r in routes.items()], weights)


def printed_scores(name: str) -> dict:
    return {rid: r["printed_score"] for rid, r in SCENARIOS[name]["routes"].items()}


def scenario_trip(name: str, route_id: str, seed: int = 0) -> ClassifiedTrip:
    """A synthetic drive whose labels reproduce the scenario's durations."""
    sc = SCENARIOS[name]
    r = sc["routes"][route_id]
    profile = [(a, k) for a, k in zip(AREAS, r["durations"].as_tuple()) if k > 0]
    log = synth_route(profile, seed=seed, start=sc["origin"], end=sc["destination"], via=[r["via"]], name=f"{name}/{route_id}")
    return ClassifiedTrip(log, log.labels)


def build_scenario_store(store: RouteStore, name: str, seed: int = 0) -> list[str]:
    ids = []
    for rid, r in SCENARIOS[name]["routes"].items():
        rec = make_record(rid, scenario_trip(name, rid, seed), meta={"scenario": name, "reported_score": r["printed_score"]})
        ids.append(store.put(rec))
    return ids
