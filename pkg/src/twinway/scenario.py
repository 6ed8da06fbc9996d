"""Scenario configuration: the run-defining record plus a flat key=value text
format with strict key validation and exact round-tripping."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .microsim import Corridor, DynamicsParams, Ramp

INFO_MODES = ("physical", "cidt", "pidt")


class ConfigError(ValueError):
    """Malformed or semantically invalid configuration input."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one run needs: geometry, dynamics, demand, knowledge mode,
    seeds and noise levels."""

    corridor: Corridor = Corridor.default_m50()
    dynamics: DynamicsParams = DynamicsParams()
    horizon_s: float = 3600.0
    emission_interval_s: float = 100.0
    batch_size: int = 4
    ev_penetration: float = 0.5
    info_mode: str = "physical"
    master_seed: int = 1
    speed_noise_sigma_mps: float = 0.5
    count_drop_rate: float = 0.02
    dt_s: float = 0.5
    trace_sample_dt_s: float = 1.0
    detector_window_s: float = 60.0
    v0_jitter_frac: float = 0.05
    sweep_levels: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    sweep_seeds: int = 20
    validation_intervals_s: tuple[float, ...] = (10.0, 40.0, 80.0, 100.0)

    def __post_init__(self):
        if not 0.0 <= self.ev_penetration <= 1.0:
            raise ConfigError(f"ev_penetration: {self.ev_penetration} outside [0, 1]")
        if self.emission_interval_s <= 0:
            raise ConfigError("emission_interval_s: must be positive")
        if self.info_mode not in INFO_MODES:
            raise ConfigError(f"info_mode: {self.info_mode!r} not one of {INFO_MODES}")
        if self.horizon_s < 0:
            raise ConfigError("horizon_s: must be >= 0")
        if self.dt_s <= 0 or self.trace_sample_dt_s <= 0 or self.detector_window_s <= 0:
            raise ConfigError("dt_s, trace_sample_dt_s, detector_window_s must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size: must be >= 1")
        if not 0.0 <= self.count_drop_rate <= 1.0:
            raise ConfigError(f"noise.count_drop_rate: {self.count_drop_rate} outside [0, 1]")
        if self.speed_noise_sigma_mps < 0:
            raise ConfigError("noise.speed_sigma_mps: must be >= 0")
        if not 0.0 <= self.v0_jitter_frac < 1.0:
            raise ConfigError("v0_jitter_frac: must be in [0, 1)")
        if self.dynamics.desired_speed > self.corridor.speed_limit_mps:
            raise ConfigError(
                f"dynamics.desired_speed_mps: {self.dynamics.desired_speed} exceeds "
                f"corridor.speed_limit_mps {self.corridor.speed_limit_mps}")
        for lv in self.sweep_levels:
            if not 0.0 <= lv <= 1.0:
                raise ConfigError(f"sweep.levels: {lv} outside [0, 1]")
        if self.sweep_seeds < 1:
            raise ConfigError("sweep.seeds: must be >= 1")


# ---------------------------------------------------------------------------
# Flat key=value format
# ---------------------------------------------------------------------------

def _parse_ramps(value: str, kind: str) -> tuple[Ramp, ...]:
    ramps = []
    if value.strip():
        for part in value.split(","):
            pos, _, share = part.strip().partition(":")
            if not share:
                raise ConfigError(f"ramp entry {part!r} must be 'position:share'")
            ramps.append(Ramp(float(pos), kind, float(share)))
    return tuple(ramps)


def _fmt_ramps(ramps: tuple[Ramp, ...]) -> str:
    return ",".join(f"{repr(r.position_m)}:{repr(r.demand_share)}" for r in ramps)


def _parse_floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip()) if value.strip() else ()


def _fmt_floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


# key -> (parser, formatter); parsers return override fragments applied onto
# the defaults, formatters read back from a resolved ScenarioConfig.
_SCALARS = {
    "seed": ("master_seed", int),
    "horizon_s": ("horizon_s", float),
    "emission_interval_s": ("emission_interval_s", float),
    "batch_size": ("batch_size", int),
    "ev_penetration": ("ev_penetration", float),
    "info_mode": ("info_mode", str),
    "dt_s": ("dt_s", float),
    "trace_sample_dt_s": ("trace_sample_dt_s", float),
    "detector_window_s": ("detector_window_s", float),
    "v0_jitter_frac": ("v0_jitter_frac", float),
    "noise.speed_sigma_mps": ("speed_noise_sigma_mps", float),
    "noise.count_drop_rate": ("count_drop_rate", float),
    "sweep.seeds": ("sweep_seeds", int),
}

_CORRIDOR = {
    "corridor.length_m": ("length_m", float),
    "corridor.lane_count": ("lane_count", int),
    "corridor.speed_limit_mps": ("speed_limit_mps", float),
}

_DYNAMICS = {
    "dynamics.desired_speed_mps": ("desired_speed", float),
    "dynamics.max_accel_mps2": ("max_accel", float),
    "dynamics.comfort_decel_mps2": ("comfort_decel", float),
    "dynamics.headway_s": ("headway", float),
    "dynamics.min_gap_m": ("min_gap", float),
    "dynamics.accel_exponent": ("accel_exponent", float),
    "dynamics.politeness": ("politeness", float),
    "dynamics.change_threshold_mps2": ("change_threshold", float),
    "dynamics.safe_decel_mps2": ("safe_decel", float),
}

_LIST_KEYS = ("corridor.on_ramps", "corridor.off_ramps", "corridor.detectors_m",
              "sweep.levels", "validation.intervals_s")

KNOWN_KEYS = tuple(_SCALARS) + tuple(_CORRIDOR) + tuple(_DYNAMICS) + _LIST_KEYS


def parse_config(text: str) -> ScenarioConfig:
    """Parse the flat key=value document; unknown keys and bad values are
    rejected with the offending key and line number."""
    scalars: dict = {}
    corridor_over: dict = {}
    dynamics_over: dict = {}
    on_ramps = off_ramps = detectors = None
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            if key in _SCALARS:
                field_name, cast = _SCALARS[key]
                scalars[field_name] = cast(value)
            elif key in _CORRIDOR:
                field_name, cast = _CORRIDOR[key]
                corridor_over[field_name] = cast(value)
            elif key in _DYNAMICS:
                field_name, cast = _DYNAMICS[key]
                dynamics_over[field_name] = cast(value)
            elif key == "corridor.on_ramps":
                on_ramps = _parse_ramps(value, "on")
            elif key == "corridor.off_ramps":
                off_ramps = _parse_ramps(value, "off")
            elif key == "corridor.detectors_m":
                detectors = _parse_floats(value)
            elif key == "sweep.levels":
                scalars["sweep_levels"] = _parse_floats(value)
            elif key == "validation.intervals_s":
                scalars["validation_intervals_s"] = _parse_floats(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from exc

    base = Corridor.default_m50()
    length = corridor_over.get("length_m", base.length_m)
    # Defaulted ramps/detectors are part of the default geometry: when the
    # corridor is shortened they are trimmed, while explicit positions are
    # validated strictly against the new length.
    ons = on_ramps if on_ramps is not None else tuple(
        r for r in base.on_ramps if r.position_m <= length)
    offs = off_ramps if off_ramps is not None else tuple(
        r for r in base.off_ramps if r.position_m <= length)
    corridor_over["ramps"] = tuple(sorted(ons + offs, key=lambda r: r.position_m))
    if detectors is None:
        detectors = tuple(s for s in base.detector_stations_m if s <= length)
    corridor_over["detector_stations_m"] = detectors
    try:
        corridor = replace(base, **corridor_over)
        dynamics = DynamicsParams(**dynamics_over)
        return ScenarioConfig(corridor=corridor, dynamics=dynamics, **scalars)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def emit_config(config: ScenarioConfig) -> str:
    """Render the resolved configuration; parse(emit(c)) == c exactly."""
    c, d = config.corridor, config.dynamics
    lines = ["# twinway scenario (resolved)"]
    values = {
        "seed": str(config.master_seed),
        "horizon_s": repr(config.horizon_s),
        "emission_interval_s": repr(config.emission_interval_s),
        "batch_size": str(config.batch_size),
        "ev_penetration": repr(config.ev_penetration),
        "info_mode": config.info_mode,
        "dt_s": repr(config.dt_s),
        "trace_sample_dt_s": repr(config.trace_sample_dt_s),
        "detector_window_s": repr(config.detector_window_s),
        "v0_jitter_frac": repr(config.v0_jitter_frac),
        "corridor.length_m": repr(c.length_m),
        "corridor.lane_count": str(c.lane_count),
        "corridor.speed_limit_mps": repr(c.speed_limit_mps),
        "corridor.on_ramps": _fmt_ramps(c.on_ramps),
        "corridor.off_ramps": _fmt_ramps(c.off_ramps),
        "corridor.detectors_m": _fmt_floats(c.detector_stations_m),
        "dynamics.desired_speed_mps": repr(d.desired_speed),
        "dynamics.max_accel_mps2": repr(d.max_accel),
        "dynamics.comfort_decel_mps2": repr(d.comfort_decel),
        "dynamics.headway_s": repr(d.headway),
        "dynamics.min_gap_m": repr(d.min_gap),
        "dynamics.accel_exponent": repr(d.accel_exponent),
        "dynamics.politeness": repr(d.politeness),
        "dynamics.change_threshold_mps2": repr(d.change_threshold),
        "dynamics.safe_decel_mps2": repr(d.safe_decel),
        "noise.speed_sigma_mps": repr(config.speed_noise_sigma_mps),
        "noise.count_drop_rate": repr(config.count_drop_rate),
        "sweep.levels": _fmt_floats(config.sweep_levels),
        "sweep.seeds": str(config.sweep_seeds),
        "validation.intervals_s": _fmt_floats(config.validation_intervals_s),
    }
    lines += [f"{key} = {values[key]}" for key in KNOWN_KEYS]
    return "\n".join(lines) + "\n"
