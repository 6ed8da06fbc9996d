"""Command-line entry points: simulate, twin, sweep, metrics, ingest."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .reports import (emit_reports, ingest_detector_csv, metrics_between_trace_files)
from .scenario import ConfigError, ScenarioConfig, parse_config
from .twin import max_workers, penetration_sweep, run_scenario, run_twin_protocol


def _load_config(args) -> ScenarioConfig:
    if args.config:
        config = parse_config(Path(args.config).read_text())
    else:
        config = ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "penetration", None) is not None:
        overrides["ev_penetration"] = args.penetration
    if getattr(args, "interval", None) is not None:
        overrides["emission_interval_s"] = args.interval
    if getattr(args, "seeds", None) is not None:
        overrides["sweep_seeds"] = args.seeds
    return replace(config, **overrides) if overrides else config


def _add_common(parser, with_out=True):
    parser.add_argument("--config", metavar="PATH", help="scenario config file")
    parser.add_argument("--seed", type=int, metavar="N", help="override the master seed")
    parser.add_argument("--penetration", type=float, metavar="X",
                        help="override the EV penetration fraction")
    parser.add_argument("--interval", type=float, metavar="S",
                        help="override the emission interval [s]")
    if with_out:
        parser.add_argument("--out", metavar="DIR", required=True,
                            help="output directory for reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinway",
        description="Motorway digital-twin simulator: mixed ICEV/EV traffic, "
                    "emission/energy costing, and twin validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and emit traces/costs")
    _add_common(p)

    p = sub.add_parser("twin", help="run physical + CIDT + PIDT and emit validation reports")
    _add_common(p)

    p = sub.add_parser("sweep", help="run the EV-penetration sweep")
    _add_common(p)
    p.add_argument("--seeds", type=int, metavar="N", help="replications per level")

    p = sub.add_parser("metrics", help="divergences between two trace CSV files")
    p.add_argument("trace_a", metavar="a.csv")
    p.add_argument("trace_b", metavar="b.csv")

    p = sub.add_parser("ingest", help="validate an external detector CSV file")
    p.add_argument("detector_csv", metavar="file.csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            config = _load_config(args)
            manifest = emit_reports(run_scenario(config), args.out)
            print(f"wrote {manifest}")
        elif args.command == "twin":
            config = _load_config(args)
            result = run_twin_protocol(config)
            manifest = emit_reports(result, args.out)
            rep = result.pidt_report
            print(f"PIDT vs physical: speed accuracy {rep.speed_accuracy_pct:.1f}%, "
                  f"trip length accuracy {rep.trip_length_accuracy_pct:.1f}%, "
                  f"count accuracy {rep.count_accuracy_pct:.1f}%")
            print(f"wrote {manifest}")
        elif args.command == "sweep":
            config = _load_config(args)
            report = penetration_sweep(config, workers=max_workers())
            manifest = emit_reports(report, args.out)
            print(f"wrote {manifest}")
        elif args.command == "metrics":
            divs = metrics_between_trace_files(args.trace_a, args.trace_b)
            for key, value in divs.items():
                print(f"{key} = {value:.9g}")
        elif args.command == "ingest":
            readings = ingest_detector_csv(args.detector_csv)
            nonzero = sum(1 for r in readings if r.count)
            print(f"ok: {len(readings)} readings ({nonzero} with traffic)")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
