"""Motorway digital-twin simulator for mixed ICEV/EV fleets."""

__version__ = "0.1.0"

from .fleet import (EuroClass, EvParams, VehicleSpec, compose_fleet,
                    degrade_to_partial, sample_euro_class, sample_ev_params)
from .metrics import (SpeedHistogram, ValidationReport, accuracy, bhattacharyya,
                      build_histogram, js_divergence, kl_divergence,
                      validation_report, wasserstein1)
from .microsim import (CollisionError, Corridor, DynamicsParams, SimOutput,
                       TripTrace, idm_acceleration, mobil_decision, run,
                       schedule_demand)
from .powertrain import ev_energy_per_km, fleet_totals, icev_co2_per_km, trip_cost
from .scenario import ScenarioConfig, parse_config, emit_config
from .twin import (GroundTruth, SweepReport, penetration_sweep, run_cidt,
                   run_physical, run_pidt, run_scenario, run_twin_protocol)

__all__ = [name for name in dir() if not name.startswith("_")]
