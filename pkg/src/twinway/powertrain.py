"""Average-speed cost functions: ICEV CO2 per km and EV energy per km,
evaluated pointwise, per trip, and aggregated per fleet."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fleet import EuroClass, EuroCoefficients, EvParams, VehicleSpec
from .microsim import TripTrace

# Both rate curves diverge at zero speed; motorway traces rarely clamp.
MIN_ICEV_SPEED_KMH = 5.0
MIN_EV_SPEED_MPS = 1.0

MPS_TO_KMH = 3.6


@dataclass
class ClampDiagnostics:
    """Counts of below-threshold speed evaluations, reported with aggregates."""

    icev_clamps: int = 0
    ev_clamps: int = 0


def icev_co2_per_km(s_kmh: float, coeff: EuroCoefficients,
                    diagnostics: ClampDiagnostics | None = None) -> float:
    """CO2 emission rate [g/km] at average speed s_kmh for one coefficient row.

    Evaluates k * (a + b s + c s^2 + d s^3 + e s^4 + f s^5 + g s^6) / s.
    Speeds at or below the clamp threshold are evaluated at the threshold.
    """
    if not math.isfinite(s_kmh):
        raise ValueError(f"non-finite speed {s_kmh!r}")
    if s_kmh < MIN_ICEV_SPEED_KMH:
        s_kmh = MIN_ICEV_SPEED_KMH
        if diagnostics is not None:
            diagnostics.icev_clamps += 1
    s = s_kmh
    poly = (coeff.a + coeff.b * s + coeff.c * s ** 2 + coeff.d * s ** 3
            + coeff.e * s ** 4 + coeff.f * s ** 5 + coeff.g * s ** 6)
    return coeff.k * poly / s


def ev_energy_per_km(v_mps: float, p: EvParams,
                     diagnostics: ClampDiagnostics | None = None) -> float:
    """EV consumption rate [energy units/km] at speed v_mps.

    Evaluates alpha0/v + alpha1 + alpha2 v + alpha3 v^2, with v clamped below
    at the threshold (the ancillary term diverges at standstill).
    """
    if not math.isfinite(v_mps):
        raise ValueError(f"non-finite speed {v_mps!r}")
    if v_mps < MIN_EV_SPEED_MPS:
        v_mps = MIN_EV_SPEED_MPS
        if diagnostics is not None:
            diagnostics.ev_clamps += 1
    v = v_mps
    return p.alpha0 / v + p.alpha1 + p.alpha2 * v + p.alpha3 * v * v


def trip_cost(trace: TripTrace, spec: VehicleSpec,
              diagnostics: ClampDiagnostics | None = None) -> float:
    """Total CO2 [g] (ICEV) or energy [units] (EV) over one trip.

    Sums rate(segment mean speed) * segment distance over consecutive trace
    samples; zero-distance segments contribute nothing. Empty or single-sample
    traces cost zero.
    """
    samples = trace.samples
    if len(samples) < 2:
        return 0.0
    is_ev = spec.is_ev
    total = 0.0
    for k in range(1, len(samples)):
        prev, cur = samples[k - 1], samples[k]
        dist_m = cur.pos_m - prev.pos_m
        dt = cur.t_s - prev.t_s
        if dist_m <= 0.0 or dt <= 0.0:
            continue
        v_mps = dist_m / dt
        dist_km = dist_m / 1000.0
        if is_ev:
            total += ev_energy_per_km(v_mps, spec.powertrain.params, diagnostics) * dist_km
        else:
            total += icev_co2_per_km(v_mps * MPS_TO_KMH, spec.powertrain.coefficients,
                                     diagnostics) * dist_km
    return total


@dataclass
class CostAggregate:
    """Fleet-level totals for one run; CO2 counts ICEVs only, energy EVs only."""

    label: str
    total_co2_g: float = 0.0
    total_energy: float = 0.0
    co2_by_class_g: dict[str, float] = field(default_factory=dict)
    icev_count: int = 0
    ev_count: int = 0
    clamp_events: int = 0


def fleet_totals(traces: list[TripTrace], specs: dict[int, VehicleSpec],
                 label: str = "") -> CostAggregate:
    """Sum per-trip costs over a run. Every trace must have a spec."""
    agg = CostAggregate(label=label)
    diag = ClampDiagnostics()
    by_class: dict[str, float] = {c.value: 0.0 for c in EuroClass}
    for trace in traces:
        spec = specs.get(trace.vehicle_id)
        if spec is None:
            raise ValueError(f"no vehicle spec for trace id {trace.vehicle_id}")
        cost = trip_cost(trace, spec, diag)
        if spec.is_ev:
            agg.total_energy += cost
            agg.ev_count += 1
        else:
            agg.total_co2_g += cost
            by_class[spec.powertrain.euro_class.value] += cost
            agg.icev_count += 1
    agg.co2_by_class_g = by_class
    agg.clamp_events = diag.icev_clamps + diag.ev_clamps
    return agg
