"""Three-scenario twin protocol.

The physical run is the full-information ground truth; CIDT replays it with
exact knowledge (and shared seeds, making it an exact replay); PIDT rebuilds
demand and vehicle knowledge from the noisy sensor picture and re-simulates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .fleet import VehicleSpec, compose_fleet, degrade_to_partial
from .metrics import ValidationReport, divergence_suite, validation_report
from .microsim import DetectorReading, InsertionOrder, SimOutput, build_insertion_plan, run
from .powertrain import CostAggregate, fleet_totals
from .scenario import ScenarioConfig
from .seeding import derive_streams


@dataclass(frozen=True)
class EntryObservation:
    """One vehicle the sensor network saw entering the corridor."""

    vehicle_id: int
    time_s: float
    origin_m: float
    dest_m: float
    kind: str  # "icev" | "ev"


@dataclass
class Observations:
    """Sensor-derived picture of a physical run (noisy, possibly incomplete)."""

    entries: list[EntryObservation]
    detector_readings: list[DetectorReading]
    probe_speeds_mps: list[float]


@dataclass
class GroundTruth:
    config: ScenarioConfig
    plan: list[InsertionOrder]
    fleet: list[VehicleSpec]
    output: SimOutput
    observations: Observations


@dataclass
class TwinRunResult:
    mode: str
    output: SimOutput
    fleet: list[VehicleSpec]
    costs: CostAggregate


def _observe(config: ScenarioConfig, output: SimOutput,
             fleet: list[VehicleSpec], rng) -> Observations:
    """Derive the sensor picture: entry events thinned by the count drop rate,
    detector readings with thinned counts and noisy speeds, and noisy per-trip
    probe speeds. Draw order is fixed (entries, detectors, probes)."""
    drop = config.count_drop_rate
    sigma = config.speed_noise_sigma_mps
    specs = {s.vehicle_id: s for s in fleet}

    entries = []
    for vid, t_ins, origin, dest in output.insertion_log:
        if drop > 0 and float(rng.random()) < drop:
            continue
        kind = "ev" if specs[vid].is_ev else "icev"
        entries.append(EntryObservation(vid, t_ins, origin, dest, kind))

    readings = []
    for r in output.detector_readings:
        count = int(rng.binomial(r.count, 1.0 - drop)) if (drop > 0 and r.count) else r.count
        speed = None
        if count > 0 and r.mean_speed_mps is not None:
            speed = r.mean_speed_mps + (float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0)
        readings.append(replace(r, count=count, mean_speed_mps=speed))

    probes = [tr.mean_speed_mps + (float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0)
              for tr in output.traces]
    return Observations(entries=entries, detector_readings=readings,
                        probe_speeds_mps=probes)


def run_physical(config: ScenarioConfig, seed: int | None = None) -> GroundTruth:
    """Full-information ground-truth run plus its derived sensor observations."""
    if seed is not None:
        config = replace(config, master_seed=seed)
    streams = derive_streams(config.master_seed)
    plan = build_insertion_plan(config, streams.demand)
    fleet = compose_fleet(len(plan), config.ev_penetration, streams,
                          base_dynamics=config.dynamics,
                          jitter_frac=config.v0_jitter_frac,
                          speed_cap=config.corridor.speed_limit_mps)
    output = run(config, fleet, plan)
    observations = _observe(config, output, fleet, streams.noise)
    return GroundTruth(config=config, plan=plan, fleet=fleet, output=output,
                       observations=observations)


def _costs(output: SimOutput, fleet: list[VehicleSpec], label: str) -> CostAggregate:
    return fleet_totals(output.traces, {s.vehicle_id: s for s in fleet}, label)


def run_cidt(truth: GroundTruth, config: ScenarioConfig | None = None) -> TwinRunResult:
    """Complete-information twin: exact fleet knowledge, seed-shared demand.

    With the ground truth's own config this is an exact replay; a perturbed
    master seed re-draws routing while keeping the fleet knowledge intact.
    """
    config = truth.config if config is None else config
    if config.corridor != truth.config.corridor:
        raise ValueError("CIDT corridor differs from the ground truth corridor")
    plan = build_insertion_plan(config, derive_streams(config.master_seed).demand)
    output = run(config, truth.fleet, plan)
    return TwinRunResult("cidt", output, truth.fleet, _costs(output, truth.fleet, "cidt"))


def run_pidt(truth: GroundTruth, config: ScenarioConfig | None = None) -> TwinRunResult:
    """Partial-information twin: rebuild demand from observed entries, degrade
    per-vehicle knowledge to prior draws, and re-simulate.

    Per-vehicle desired speeds reach the twin only through the speed sensor:
    each is perturbed by the configured Gaussian noise (with zero noise the
    trajectories replay exactly)."""
    config = truth.config if config is None else config
    if config.corridor != truth.config.corridor:
        raise ValueError("PIDT corridor differs from the ground truth corridor")
    entries = truth.observations.entries
    if not entries:
        raise ValueError("no observed entries: cannot reconstruct demand")
    specs = {s.vehicle_id: s for s in truth.fleet}
    observed = [specs[e.vehicle_id] for e in entries]
    streams = derive_streams(config.master_seed, "pidt")
    degraded = degrade_to_partial(observed, streams)
    sigma = config.speed_noise_sigma_mps
    if sigma > 0:
        cap = config.corridor.speed_limit_mps
        noisy = []
        for spec in degraded:
            v0 = spec.dynamics.desired_speed + float(streams.jitter.normal(0.0, sigma))
            v0 = min(max(v0, 1.0), cap)
            noisy.append(replace(spec, dynamics=replace(spec.dynamics, desired_speed=v0)))
        degraded = noisy
    interval = config.emission_interval_s
    plan = [InsertionOrder(math.floor(e.time_s / interval) * interval, e.origin_m, e.dest_m)
            for e in entries]
    output = run(config, degraded, plan)
    return TwinRunResult("pidt", output, degraded, _costs(output, degraded, "pidt"))


# ---------------------------------------------------------------------------
# Protocol bundles
# ---------------------------------------------------------------------------

@dataclass
class TwinProtocolResult:
    truth: GroundTruth
    cidt: TwinRunResult
    pidt: TwinRunResult
    pidt_report: ValidationReport
    cidt_report: ValidationReport
    divergence_by_interval: list[dict]  # one row per validation interval


def run_twin_protocol(config: ScenarioConfig) -> TwinProtocolResult:
    """Physical + CIDT + PIDT at the configured interval, plus a PIDT-vs-physical
    divergence row at every validation interval."""
    truth = run_physical(config)
    cidt = run_cidt(truth)
    pidt = run_pidt(truth)
    rows = []
    for interval in config.validation_intervals_s:
        cfg_i = replace(config, emission_interval_s=float(interval))
        truth_i = run_physical(cfg_i)
        pidt_i = run_pidt(truth_i)
        divs = divergence_suite(pidt_i.output.trip_mean_speeds(),
                                truth_i.output.trip_mean_speeds())
        rows.append({"emission_interval_s": float(interval), **divs})
    return TwinProtocolResult(
        truth=truth,
        cidt=cidt,
        pidt=pidt,
        pidt_report=validation_report(pidt.output, truth.output),
        cidt_report=validation_report(cidt.output, truth.output),
        divergence_by_interval=rows,
    )


@dataclass(frozen=True)
class SweepRow:
    """Seed-averaged totals for one penetration level across the three modes."""

    level: float
    physical_co2_g: float
    cidt_co2_g: float
    pidt_co2_g: float
    physical_energy: float
    cidt_energy: float
    pidt_energy: float
    cidt_co2_rel_err: float | None
    pidt_co2_rel_err: float | None
    cidt_energy_rel_err: float | None
    pidt_energy_rel_err: float | None


@dataclass
class SweepReport:
    config: ScenarioConfig
    levels: tuple[float, ...]
    seeds: tuple[int, ...]
    rows: list[SweepRow]


def _sweep_cell(args) -> tuple[float, int, tuple[float, ...]]:
    config, level, seed = args
    cfg = replace(config, ev_penetration=level, master_seed=seed)
    truth = run_physical(cfg)
    cidt = run_cidt(truth)
    pidt = run_pidt(truth)
    phys = _costs(truth.output, truth.fleet, "physical")
    return (level, seed, (phys.total_co2_g, phys.total_energy,
                          cidt.costs.total_co2_g, cidt.costs.total_energy,
                          pidt.costs.total_co2_g, pidt.costs.total_energy))


def _rel_err(twin: float, ref: float) -> float | None:
    return (twin - ref) / ref if ref != 0 else None


def max_workers() -> int:
    """Sweep parallelism cap from TWINWAY_THREADS (default: serial)."""
    raw = os.environ.get("TWINWAY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def penetration_sweep(config: ScenarioConfig,
                      levels: tuple[float, ...] | None = None,
                      seeds: tuple[int, ...] | None = None,
                      workers: int | None = None) -> SweepReport:
    """Run physical/CIDT/PIDT per (level, seed) and tabulate seed-mean totals.

    Cells are independent and run in a process pool when workers > 1; results
    are aggregated in sorted (level, seed) order either way, so the report is
    identical for any worker count.
    """
    levels = tuple(config.sweep_levels) if levels is None else tuple(levels)
    seeds = tuple(range(1, config.sweep_seeds + 1)) if seeds is None else tuple(seeds)
    if not levels:
        raise ValueError("sweep needs at least one penetration level")
    for lv in levels:
        if not 0.0 <= lv <= 1.0:
            raise ValueError(f"penetration level {lv} outside [0, 1]")
    workers = max_workers() if workers is None else workers

    jobs = [(config, level, seed) for level in levels for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(job) for job in jobs]

    by_level: dict[float, list[tuple[float, ...]]] = {lv: [] for lv in levels}
    for level, seed, totals in sorted(cells, key=lambda c: (c[0], c[1])):
        by_level[level].append(totals)
    rows = []
    for level in sorted(by_level):
        totals = by_level[level]
        mean = [sum(col) / len(col) for col in zip(*totals)]
        p_co2, p_en, c_co2, c_en, q_co2, q_en = mean
        rows.append(SweepRow(
            level=level,
            physical_co2_g=p_co2, cidt_co2_g=c_co2, pidt_co2_g=q_co2,
            physical_energy=p_en, cidt_energy=c_en, pidt_energy=q_en,
            cidt_co2_rel_err=_rel_err(c_co2, p_co2),
            pidt_co2_rel_err=_rel_err(q_co2, p_co2),
            cidt_energy_rel_err=_rel_err(c_en, p_en),
            pidt_energy_rel_err=_rel_err(q_en, p_en),
        ))
    return SweepReport(config=config, levels=tuple(sorted(levels)), seeds=seeds, rows=rows)


@dataclass
class SimRunBundle:
    """One scenario run as the CLI's `simulate` sees it."""

    config: ScenarioConfig
    mode: str
    output: SimOutput
    fleet: list[VehicleSpec]
    costs: CostAggregate


def run_scenario(config: ScenarioConfig) -> SimRunBundle:
    """Run a single scenario honoring config.info_mode.

    physical runs directly; cidt and pidt first build the ground truth and
    then run the corresponding twin.
    """
    truth = run_physical(config)
    if config.info_mode == "physical":
        return SimRunBundle(config, "physical", truth.output, truth.fleet,
                            _costs(truth.output, truth.fleet, "physical"))
    result = run_cidt(truth) if config.info_mode == "cidt" else run_pidt(truth)
    return SimRunBundle(config, result.mode, result.output, result.fleet, result.costs)
