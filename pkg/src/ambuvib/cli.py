"""``ambuvib`` command line.

Mode 1 (gather and tag):  synth -> train -> classify (stores the route).
Mode 2 (choose a route):  recommend, then replay the alerts of the pick.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .classifier import (
    ClassifierError,
    classify_trip,
    evaluate,
    labelled_features,
    load_model,
    save_model,
    train,
)
from .features import BUFFERS, FeatureConfig, Variant
from .routestore import (
    DEFAULT_LOOKAHEAD_S,
    DEFAULT_RADIUS_M,
    RouteStore,
    alert_replay,
    make_record,
    recommend,
    render_alerts,
    reported_scores,
    to_geojson,
)
from .scoring import Weights, comparison_csv, render_comparison
from .telemetry import DEFAULT_MAX_GAP, AreaLabel, parse_profile, read_log, synth_route, write_log, serialize_log

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DOMAIN = 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    store: str = "routes"
    model: str = "model.json"
    variant: str = Variant.STD_YZ_V.value
    buffer: int = 29
    weights: str = "1,1.5,2"
    max_gap: int = DEFAULT_MAX_GAP
    radius: float = DEFAULT_RADIUS_M
    lookahead: int = DEFAULT_LOOKAHEAD_S
    seed: int = 0

    @classmethod
    def resolve(cls, args) -> "RunConfig":
        """Defaults, overridden by the config file, overridden by flags."""
        cfg = cls()
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
            for k, v in data.items():
                setattr(cfg, k, v)
        for f in fields(cls):
            v = getattr(args, f.name, None)
            if v is not None:
                setattr(cfg, f.name, v)
        if cfg.max_gap < 1 or cfg.radius <= 0 or cfg.lookahead < 0:
            raise UsageError("max_gap >= 1, radius > 0 and lookahead >= 0 are required")
        return cfg

    def features(self) -> FeatureConfig:
        return FeatureConfig(Variant(self.variant), int(self.buffer))

    def weight_set(self) -> Weights:
        return Weights.parse(self.weights) if isinstance(self.weights, str) else Weights(*self.weights)


def _latlon(text: str) -> tuple[float, float]:
    try:
        lat, lon = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LAT,LON, got {text!r}") from None
    return lat, lon


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _figures_dir(args) -> Path | None:
    if not args.figures:
        return None
    d = Path(args.figures)
    d.mkdir(parents=True, exist_ok=True)
    return d


# --------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: RunConfig) -> int:
    log = synth_route(
        parse_profile(args.profile),
        seed=int(cfg.seed),
        t0=args.t0,
        start=args.start or (38.97, -0.18),
        end=args.end,
        via=args.via or (),
        name=args.name,
    )
    if args.out:
        write_log(log, args.out)
    else:
        sys.stdout.write(serialize_log(log))
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    logs = [read_log(p, require_area=True) for p in args.csv]
    trace: dict = {}
    model = train(logs, cfg.features(), max_gap=int(cfg.max_gap), trace=trace)
    save_model(model, cfg.model)
    n = len(model.labels)
    print(f"features: {cfg.features().variant.value}" + (f" buffer {cfg.buffer} s" if cfg.features().variant is Variant.STD_YZ_V else ""))
    print(f"training cases: {n}")
    print(f"sphere of influence: {model.sigma:.7g}")
    print(f"jackknife accuracy: {100 * model.loo_accuracy:.2f}%")
    print(f"model written to {cfg.model}")
    if args.report:
        _write_json(args.report, {
            "features": cfg.features().to_dict(),
            "cases": n,
            "sigma": model.sigma,
            "jackknife_accuracy": model.loo_accuracy,
            "sigma_trace": [[s, a] for s, a in sorted(trace.items())],
        })
    figs = _figures_dir(args)
    if figs:
        from .plotting import sigma_curve

        sigma_curve(trace, model.sigma, figs / "sigma_search.png")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    log = read_log(args.csv, require_area=True)
    if len(log) == 0:
        raise ClassifierError(f"{args.csv}: no telemetry rows")
    fs = labelled_features([log], model.cfg, int(cfg.max_gap))
    cm, assigned = evaluate(model, fs)
    print(cm.render(model.sigma))
    if args.report:
        doc = cm.to_dict()
        doc["sigma"] = model.sigma
        doc["assignments"] = [
            {"center_t": log.samples[c].t, "tagged": AreaLabel(int(t)).name, "assigned": AreaLabel(int(a)).name}
            for c, t, a in zip(fs.center_index, fs.labels, assigned)
        ]
        _write_json(args.report, doc)
    figs = _figures_dir(args)
    if figs:
        from .plotting import confusion_heatmap

        confusion_heatmap(cm, figs / "confusion.png")
    return EXIT_OK


def cmd_classify(args, cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    log = read_log(args.csv)
    trip, _, _ = classify_trip(model, log, int(cfg.max_gap))
    route_id = args.id or Path(args.csv).stem
    rec = make_record(route_id, trip, cfg.weight_set(), meta={"source": Path(args.csv).name})
    RouteStore(cfg.store).put(rec)
    m = rec.metrics
    d = m.durations
    print(f"route {route_id}: total {d.total} s, A1 {d.t1} s, A2 {d.t2} s, A3 {d.t3} s, index {m.index:g} s, score {m.score:.4f}")
    geo = args.geojson or str(Path(cfg.store) / f"{route_id}.geojson")
    _write_json(geo, to_geojson(rec.trip, route_id))
    print(f"GeoJSON written to {geo}")
    figs = _figures_dir(args)
    if figs:
        from .plotting import route_map

        route_map(rec.trip, figs / f"{route_id}_map.png", title=route_id)
    return EXIT_OK


def cmd_recommend(args, cfg: RunConfig) -> int:
    store = RouteStore(cfg.store)
    cmp = recommend(store, args.origin, args.destination, cfg.weight_set(), float(cfg.radius))
    flags = reported_scores(store.find_candidates(args.origin, args.destination, float(cfg.radius)))
    print(render_comparison(cmp, flags))
    if args.report:
        _write_json(args.report, cmp.to_dict(flags))
    if args.csv:
        Path(args.csv).write_text(comparison_csv(cmp), encoding="utf-8")
    figs = _figures_dir(args)
    if figs:
        from .plotting import route_bars

        route_bars(cmp, figs / "route_comparison.png")
    return EXIT_OK


def cmd_replay(args, cfg: RunConfig) -> int:
    rec = RouteStore(cfg.store).get(args.route_id)
    sys.stdout.write(render_alerts(alert_replay(rec.trip, int(cfg.lookahead))))
    return EXIT_OK


def cmd_export_geojson(args, cfg: RunConfig) -> int:
    rec = RouteStore(cfg.store).get(args.route_id)
    doc = to_geojson(rec.trip, rec.id)
    if args.out:
        _write_json(args.out, doc)
    else:
        json.dump(doc, sys.stdout)
        sys.stdout.write("\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON file with defaults; flags override it")
    shared.add_argument("--model", help="model file")
    shared.add_argument("--store", help="route store directory")
    shared.add_argument("--buffer", type=int, choices=BUFFERS, help="time buffer (s) for std-yz")
    shared.add_argument("--variant", choices=[v.value for v in Variant])
    shared.add_argument("--weights", help="w1,w2,w3 (default 1,1.5,2)")
    shared.add_argument("--radius", type=float, help="endpoint match radius in metres")
    shared.add_argument("--lookahead", type=int, help="alert lead time in seconds")
    shared.add_argument("--max-gap", dest="max_gap", type=int, help="largest timestamp step inside a segment")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--report", help="write a JSON report here")
    shared.add_argument("--figures", help="directory for PNG figures")

    p = argparse.ArgumentParser(prog="ambuvib", description="Ambulance route vibration toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[shared], help="generate a tagged synthetic drive")
    s.add_argument("--profile", default="A1:600,A2:600,A3:600", help="e.g. A1:600,A2:600,A3:600")
    s.add_argument("--out")
    s.add_argument("--t0", type=int, default=0)
    s.add_argument("--start", type=_latlon)
    s.add_argument("--end", type=_latlon)
    s.add_argument("--via", type=_latlon, action="append")
    s.add_argument("--name", default="synthetic")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[shared], help="train a classifier on tagged CSV files")
    s.add_argument("csv", nargs="+")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[shared], help="confusion matrix on a tagged CSV")
    s.add_argument("csv")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("classify", parents=[shared], help="classify a drive and store it as a route")
    s.add_argument("csv")
    s.add_argument("--id")
    s.add_argument("--geojson")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("recommend", parents=[shared], help="compare stored routes between two points")
    s.add_argument("--origin", type=_latlon, required=True)
    s.add_argument("--destination", type=_latlon, required=True)
    s.add_argument("--csv", help="write the comparison table as CSV")
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("replay", parents=[shared], help="print the alert timeline of a stored route")
    s.add_argument("route_id")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("export-geojson", parents=[shared], help="export a stored route as GeoJSON points")
    s.add_argument("route_id")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_geojson)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"ambuvib: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ambuvib: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ambuvib: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
