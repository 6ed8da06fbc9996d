"""Fleet composition: ICEV Euro classes, EV consumption parameters, and the
partial-information degradation used by the PIDT scenario."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .microsim import DynamicsParams
from .seeding import RngStreams

# National passenger-car registration mix used as the classification prior.
EURO_CLASS_PRIORS = {"euro4": 0.148, "euro5": 0.218, "euro6": 0.634}

EV_ALPHA1 = 5e-4
EV_CURB_MASS_KG = 1235.0
EV_PASSENGER_MASS_KG = 80.0
EV_AERO_OFFSET = 4e-6
EV_AERO_MEAN = 3.12e-5
EV_AERO_STD = 5e-6


class EuroClass(Enum):
    EURO4 = "euro4"
    EURO5 = "euro5"
    EURO6 = "euro6"


@dataclass(frozen=True)
class EuroCoefficients:
    """Emission polynomial coefficients; speed in km/h, output g/km."""

    a: float
    b: float
    c: float
    d: float
    e: float = 0.0
    f: float = 0.0
    g: float = 0.0
    k: float = 1.0


EURO_COEFFICIENTS = {
    EuroClass.EURO4: EuroCoefficients(a=3747.3, b=155.99, c=-0.8527, d=0.010318),
    EuroClass.EURO5: EuroCoefficients(a=3747.3, b=128.77, c=-0.8527, d=0.010318),
    EuroClass.EURO6: EuroCoefficients(a=3747.3, b=105.71, c=-0.8527, d=0.010318),
}


def rolling_resistance_alpha2(n_pass: int) -> float:
    """Rolling-resistance coefficient for a loaded car (n_pass in 1..4)."""
    if n_pass not in (1, 2, 3, 4):
        raise ValueError(f"n_pass must be 1..4, got {n_pass}")
    mass = EV_CURB_MASS_KG + EV_PASSENGER_MASS_KG * n_pass
    return 0.0293 + 0.05 * (mass / EV_CURB_MASS_KG)


@dataclass(frozen=True)
class EvParams:
    alpha0: float  # ancillary power term
    alpha1: float  # drivetrain loss term
    alpha2: float  # rolling resistance term
    alpha3: float  # aerodynamic term
    n_pass: int

    def __post_init__(self):
        if not 0.2 <= self.alpha0 <= 2.2:
            raise ValueError(f"alpha0 {self.alpha0} outside [0.2, 2.2]")
        if self.alpha3 <= 0.0:
            raise ValueError(f"alpha3 {self.alpha3} must be positive")


@dataclass(frozen=True)
class IcevPowertrain:
    euro_class: EuroClass
    coefficients: EuroCoefficients


@dataclass(frozen=True)
class EvPowertrain:
    params: EvParams


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: int
    powertrain: IcevPowertrain | EvPowertrain
    dynamics: DynamicsParams

    @property
    def is_ev(self) -> bool:
        return isinstance(self.powertrain, EvPowertrain)


def sample_euro_class(rng: np.random.Generator) -> EuroClass:
    """Draw a Euro class from the registration priors."""
    u = float(rng.random())
    cum = 0.0
    for cls in (EuroClass.EURO4, EuroClass.EURO5, EuroClass.EURO6):
        cum += EURO_CLASS_PRIORS[cls.value]
        if u < cum:
            return cls
    return EuroClass.EURO6


def sample_ev_params(rng: np.random.Generator) -> EvParams:
    """Draw per-vehicle EV loss terms.

    alpha0 = 0.2 + U(0, 2.0); alpha1 fixed; alpha2 from a uniform 1..4
    passenger load; alpha3 = 4e-6 plus a Gaussian aero draw, resampled while
    non-positive (negative aerodynamic loss is non-physical).
    """
    alpha0 = 0.2 + float(rng.uniform(0.0, 2.0))
    n_pass = int(rng.integers(1, 5))
    alpha2 = rolling_resistance_alpha2(n_pass)
    p_aer = float(rng.normal(EV_AERO_MEAN, EV_AERO_STD))
    while p_aer <= 0.0:
        p_aer = float(rng.normal(EV_AERO_MEAN, EV_AERO_STD))
    return EvParams(alpha0=alpha0, alpha1=EV_ALPHA1, alpha2=alpha2,
                    alpha3=p_aer + EV_AERO_OFFSET, n_pass=n_pass)


def _jittered(base: DynamicsParams, jitter_frac: float, cap: float,
              rng: np.random.Generator) -> DynamicsParams:
    if jitter_frac <= 0.0:
        return base
    v0 = base.desired_speed * (1.0 + float(rng.uniform(-jitter_frac, jitter_frac)))
    return replace(base, desired_speed=min(v0, cap))


def compose_fleet(n: int, ev_penetration: float, streams: RngStreams,
                  base_dynamics: DynamicsParams = DynamicsParams(),
                  jitter_frac: float = 0.05,
                  speed_cap: float = math.inf) -> list[VehicleSpec]:
    """Build n vehicle specs with exactly round(n * penetration) EVs.

    The EV count is rounded half-up and is deterministic; which slots are EVs
    is drawn from the assignment stream. ICEV classes, EV parameters and the
    per-vehicle desired-speed jitter come from their own streams.
    """
    if n < 0:
        raise ValueError("fleet size must be >= 0")
    if not 0.0 <= ev_penetration <= 1.0:
        raise ValueError(f"ev_penetration {ev_penetration} outside [0, 1]")
    n_ev = int(math.floor(n * ev_penetration + 0.5))
    ev_slots = set(streams.assignment.permutation(n)[:n_ev].tolist()) if n else set()
    specs = []
    for i in range(n):
        dyn = _jittered(base_dynamics, jitter_frac, speed_cap, streams.jitter)
        if i in ev_slots:
            powertrain = EvPowertrain(sample_ev_params(streams.ev_params))
        else:
            cls = sample_euro_class(streams.euro_class)
            powertrain = IcevPowertrain(cls, EURO_COEFFICIENTS[cls])
        specs.append(VehicleSpec(vehicle_id=i, powertrain=powertrain, dynamics=dyn))
    return specs


def degrade_to_partial(fleet: list[VehicleSpec], streams: RngStreams) -> list[VehicleSpec]:
    """Replace per-vehicle knowledge with prior draws, as a sensor network sees it.

    The powertrain kind is observable (toll/camera classification) and is
    preserved; the Euro class and the EV loss parameters are not, so they are
    re-sampled from the priors. Ids and dynamics are untouched.
    """
    degraded = []
    for spec in fleet:
        if spec.is_ev:
            powertrain = EvPowertrain(sample_ev_params(streams.ev_params))
        else:
            cls = sample_euro_class(streams.euro_class)
            powertrain = IcevPowertrain(cls, EURO_COEFFICIENTS[cls])
        degraded.append(replace(spec, powertrain=powertrain))
    return degraded


# ---------------------------------------------------------------------------
# Fleet CSV (CIDT replay interchange format)
# ---------------------------------------------------------------------------

FLEET_CSV_HEADER = ["id", "kind", "euro_class", "alpha0", "alpha1", "alpha2",
                    "alpha3", "n_pass", "v0"]


def fleet_to_csv(fleet: list[VehicleSpec], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLEET_CSV_HEADER)
        for spec in fleet:
            if spec.is_ev:
                p = spec.powertrain.params
                row = [spec.vehicle_id, "ev", "", repr(p.alpha0), repr(p.alpha1),
                       repr(p.alpha2), repr(p.alpha3), p.n_pass,
                       repr(spec.dynamics.desired_speed)]
            else:
                row = [spec.vehicle_id, "icev", spec.powertrain.euro_class.value,
                       "", "", "", "", "", repr(spec.dynamics.desired_speed)]
            writer.writerow(row)


def fleet_from_csv(path: str | Path,
                   base_dynamics: DynamicsParams = DynamicsParams()) -> list[VehicleSpec]:
    """Inverse of fleet_to_csv; non-v0 dynamics come from base_dynamics."""
    specs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != FLEET_CSV_HEADER:
            raise ValueError(f"unexpected fleet CSV header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(FLEET_CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(FLEET_CSV_HEADER)} fields")
            vid, kind = int(row[0]), row[1]
            dyn = replace(base_dynamics, desired_speed=float(row[8]))
            if kind == "ev":
                params = EvParams(alpha0=float(row[3]), alpha1=float(row[4]),
                                  alpha2=float(row[5]), alpha3=float(row[6]),
                                  n_pass=int(row[7]))
                powertrain = EvPowertrain(params)
            elif kind == "icev":
                cls = EuroClass(row[2])
                powertrain = IcevPowertrain(cls, EURO_COEFFICIENTS[cls])
            else:
                raise ValueError(f"{path}:{lineno}: unknown kind {kind!r}")
            specs.append(VehicleSpec(vehicle_id=vid, powertrain=powertrain, dynamics=dyn))
    return specs
