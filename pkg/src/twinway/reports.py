"""Report emission: delimited tables, JSON reports, rendered figures and the
run manifest that ties every output to its hash and resolved configuration.

All float serialization uses repr() (shortest round-trip form) so repeated
emissions of a deterministic run hash identically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .fleet import VehicleSpec, fleet_to_csv
from .metrics import divergence_suite
from .microsim import DetectorReading, SimOutput, TraceSample
from .scenario import ScenarioConfig, emit_config
from .seeding import stream_seed_entropy
from .twin import SimRunBundle, SweepReport, TwinProtocolResult
from . import figures

TRACE_CSV_HEADER = ["vehicle_id", "t_s", "pos_m", "lane", "speed_mps"]
COST_CSV_HEADER = ["vehicle_id", "kind", "class_or_alpha_summary", "trip_km",
                   "mean_speed_mps", "cost"]
DETECTOR_CSV_HEADER = ["station_m", "window_start_s", "window_len_s", "count",
                       "mean_speed_mps"]
DIVERGENCE_CSV_HEADER = ["emission_interval_s", "kl", "js", "wasserstein", "bhattacharyya"]
SWEEP_CSV_HEADER = ["level", "mode", "co2_g", "energy", "co2_rel_err", "energy_rel_err"]


def _r(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Table writers / readers
# ---------------------------------------------------------------------------

def write_trace_csv(output: SimOutput, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_CSV_HEADER)
        for trace in output.traces:
            for s in trace.samples:
                w.writerow([trace.vehicle_id, _r(s.t_s), _r(s.pos_m), s.lane, _r(s.speed_mps)])


def read_trace_csv(path: str | Path) -> dict[int, list[TraceSample]]:
    """Samples per vehicle, in file order; malformed rows name their line."""
    by_vehicle: dict[int, list[TraceSample]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header}")
        for lineno, row in enumerate(reader, start=2):
            try:
                vid = int(row[0])
                sample = TraceSample(float(row[1]), float(row[2]), int(row[3]), float(row[4]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed trace row {row!r}") from exc
            by_vehicle.setdefault(vid, []).append(sample)
    return by_vehicle


def trip_mean_speeds_from_csv(path: str | Path) -> list[float]:
    """Space-mean speed per vehicle from a trace CSV, in vehicle-id order."""
    by_vehicle = read_trace_csv(path)
    speeds = []
    for vid in sorted(by_vehicle):
        samples = by_vehicle[vid]
        first, last = samples[0], samples[-1]
        if last.t_s > first.t_s:
            speeds.append((last.pos_m - first.pos_m) / (last.t_s - first.t_s))
    return speeds


def write_cost_csv(output: SimOutput, fleet: list[VehicleSpec], path: str | Path) -> None:
    from .powertrain import trip_cost
    specs = {s.vehicle_id: s for s in fleet}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COST_CSV_HEADER)
        for trace in output.traces:
            spec = specs[trace.vehicle_id]
            if spec.is_ev:
                p = spec.powertrain.params
                summary = f"a0={p.alpha0:.4f};a2={p.alpha2:.6f};a3={p.alpha3:.3e};n={p.n_pass}"
                kind = "ev"
            else:
                summary = spec.powertrain.euro_class.value
                kind = "icev"
            w.writerow([trace.vehicle_id, kind, summary, _r(trace.trip_length_m / 1000.0),
                        _r(trace.mean_speed_mps), _r(trip_cost(trace, spec))])


def write_detector_csv(readings: list[DetectorReading], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DETECTOR_CSV_HEADER)
        for r in readings:
            speed = "" if r.mean_speed_mps is None else _r(r.mean_speed_mps)
            w.writerow([_r(r.station_m), _r(r.window_start_s), _r(r.window_len_s),
                        r.count, speed])


def ingest_detector_csv(path: str | Path) -> list[DetectorReading]:
    """Read and validate external detector data; exact inverse of the writer."""
    readings = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DETECTOR_CSV_HEADER:
            raise ValueError(f"{path}: unexpected detector header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(DETECTOR_CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(DETECTOR_CSV_HEADER)} fields")
            try:
                count = int(row[3])
                reading = DetectorReading(
                    station_m=float(row[0]),
                    window_start_s=float(row[1]),
                    window_len_s=float(row[2]),
                    count=count,
                    mean_speed_mps=float(row[4]) if row[4] else None,
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed detector row {row!r}") from exc
            if reading.count < 0:
                raise ValueError(f"{path}:{lineno}: negative count {reading.count}")
            if reading.count == 0 and reading.mean_speed_mps is not None:
                raise ValueError(f"{path}:{lineno}: zero count rows must omit mean speed")
            if reading.mean_speed_mps is not None and reading.mean_speed_mps < 0:
                raise ValueError(f"{path}:{lineno}: negative mean speed")
            readings.append(reading)
    return readings


def write_divergence_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIVERGENCE_CSV_HEADER)
        for r in sorted(rows, key=lambda r: r["emission_interval_s"]):
            w.writerow([_r(r["emission_interval_s"]), _r(r["kl_nats"]), _r(r["js_nats"]),
                        _r(r["wasserstein_mps"]), _r(r["bhattacharyya"])])


def write_sweep_csv(report: SweepReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_CSV_HEADER)
        for row in report.rows:
            for mode in ("physical", "cidt", "pidt"):
                co2 = getattr(row, f"{mode}_co2_g")
                energy = getattr(row, f"{mode}_energy")
                co2_err = getattr(row, f"{mode}_co2_rel_err", None)
                energy_err = getattr(row, f"{mode}_energy_rel_err", None)
                w.writerow([_r(row.level), mode, _r(co2), _r(energy),
                            "" if co2_err is None else _r(co2_err),
                            "" if energy_err is None else _r(energy_err)])


def _write_json(payload: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


class _Emitter:
    """Collects written files and finishes with the manifest."""

    def __init__(self, config: ScenarioConfig, outdir: str | Path):
        self.outdir = Path(outdir)
        self.config = config
        self.written: list[Path] = []
        self.outdir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.outdir, os.W_OK):
            raise PermissionError(f"output directory {self.outdir} is not writable")

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.written.append(p)
        return p

    def write_manifest(self) -> Path:
        manifest = {
            "tool": "twinway",
            "version": __version__,
            "master_seed": self.config.master_seed,
            "stream_seed_entropy": stream_seed_entropy(self.config.master_seed),
            "resolved_config": emit_config(self.config),
            "outputs": {p.name: _sha256(p) for p in sorted(self.written)},
        }
        path = self.outdir / "run_manifest.json"
        _write_json(manifest, path)
        return path


def emit_simulate_reports(bundle: SimRunBundle, outdir: str | Path) -> Path:
    em = _Emitter(bundle.config, outdir)
    write_trace_csv(bundle.output, em.path("traces.csv"))
    write_cost_csv(bundle.output, bundle.fleet, em.path("costs.csv"))
    write_detector_csv(bundle.output.detector_readings, em.path("detectors.csv"))
    fleet_to_csv(bundle.fleet, em.path("fleet.csv"))
    _write_json({"mode": bundle.mode, **asdict(bundle.costs)}, em.path("cost_totals.json"))
    if bundle.output.traces:
        figures.save_speed_histogram(
            {bundle.mode: bundle.output.trip_mean_speeds()}, em.path("speed_histogram.png"))
    return em.write_manifest()


def emit_twin_reports(result: TwinProtocolResult, outdir: str | Path) -> Path:
    em = _Emitter(result.truth.config, outdir)
    write_trace_csv(result.truth.output, em.path("traces_physical.csv"))
    write_trace_csv(result.cidt.output, em.path("traces_cidt.csv"))
    write_trace_csv(result.pidt.output, em.path("traces_pidt.csv"))
    fleet_to_csv(result.truth.fleet, em.path("fleet_physical.csv"))
    fleet_to_csv(result.pidt.fleet, em.path("fleet_pidt.csv"))
    write_detector_csv(result.truth.observations.detector_readings,
                       em.path("detectors_observed.csv"))
    write_cost_csv(result.truth.output, result.truth.fleet, em.path("costs_physical.csv"))
    write_cost_csv(result.pidt.output, result.pidt.fleet, em.path("costs_pidt.csv"))
    _write_json(result.pidt_report.as_dict(), em.path("validation_pidt.json"))
    _write_json(result.cidt_report.as_dict(), em.path("validation_cidt.json"))
    write_divergence_csv(result.divergence_by_interval, em.path("divergence_vs_interval.csv"))
    figures.save_speed_histogram(
        {"physical": result.truth.output.trip_mean_speeds(),
         "pidt": result.pidt.output.trip_mean_speeds()},
        em.path("speed_histogram.png"))
    figures.save_divergence_vs_interval(result.divergence_by_interval,
                                        em.path("divergence_vs_interval.png"))
    return em.write_manifest()


def emit_sweep_reports(report: SweepReport, outdir: str | Path) -> Path:
    em = _Emitter(report.config, outdir)
    if not report.rows:  # nothing to tabulate: manifest only
        return em.write_manifest()
    write_sweep_csv(report, em.path("sweep.csv"))
    payload = {
        "levels": list(report.levels),
        "seeds": list(report.seeds),
        "by_level": {_r(r.level): asdict(r) for r in report.rows},
    }
    _write_json(payload, em.path("sweep.json"))
    figures.save_sweep_lines(report.rows, "co2_g", "total CO2 [g]",
                             em.path("sweep_co2.png"))
    figures.save_sweep_lines(report.rows, "energy", "total EV energy [units]",
                             em.path("sweep_energy.png"))
    return em.write_manifest()


def emit_reports(results, outdir: str | Path) -> Path:
    """Write every report for a run bundle; returns the manifest path."""
    if isinstance(results, TwinProtocolResult):
        return emit_twin_reports(results, outdir)
    if isinstance(results, SweepReport):
        return emit_sweep_reports(results, outdir)
    if isinstance(results, SimRunBundle):
        return emit_simulate_reports(results, outdir)
    raise TypeError(f"cannot emit reports for {type(results).__name__}")


def metrics_between_trace_files(path_a: str | Path, path_b: str | Path) -> dict[str, float]:
    """The four divergences between the speed distributions of two trace CSVs."""
    speeds_a = trip_mean_speeds_from_csv(path_a)
    speeds_b = trip_mean_speeds_from_csv(path_b)
    if not speeds_a or not speeds_b:
        raise ValueError("both trace files must contain at least one completed vehicle")
    return divergence_suite(speeds_a, speeds_b)
