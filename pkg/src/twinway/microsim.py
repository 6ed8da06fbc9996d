"""Multi-lane motorway microsimulation.

IDM car-following, MOBIL lane changing, deterministic batch demand with
on/off-ramps, virtual loop detectors, and trip-trace extraction. A single
run is strictly single-threaded and deterministic for a fixed insertion
plan and fleet.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import NamedTuple

log = logging.getLogger(__name__)

VEHICLE_LENGTH_M = 5.0
EMERGENCY_DECEL_MPS2 = -8.0  # clamp for degenerate gaps, non-physical below this
RAMP_ENTRY_SPEED_MPS = 22.0
MIN_INSERT_SPEED_MPS = 5.0
EXIT_PRESSURE_RANGE_M = 1500.0  # off-ramp vehicles start drifting kerbside here
EXIT_URGENCY_GAIN_MPS2 = 3.0
LANE_CHANGE_PERIOD_S = 1.0
LANE_CHANGE_COOLDOWN_S = 4.0
STANDARD_EMISSION_INTERVALS_S = (10.0, 40.0, 80.0, 100.0)


class SimulationError(RuntimeError):
    """Base class for unrecoverable simulation failures."""


class CollisionError(SimulationError):
    """Vehicles overlap: indicates invalid parameters, not a recoverable state."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ramp:
    position_m: float
    kind: str  # "on" | "off"
    demand_share: float

    def __post_init__(self):
        if self.kind not in ("on", "off"):
            raise ValueError(f"ramp kind must be 'on' or 'off', got {self.kind!r}")
        if not 0.0 <= self.demand_share <= 1.0:
            raise ValueError(f"ramp demand_share {self.demand_share} outside [0, 1]")


@dataclass(frozen=True)
class Corridor:
    """Geometry of the simulated motorway section."""

    length_m: float = 7000.0
    lane_count: int = 4
    ramps: tuple[Ramp, ...] = ()
    detector_stations_m: tuple[float, ...] = ()
    speed_limit_mps: float = 36.11  # 130 km/h cap on desired speeds

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("corridor length must be positive")
        if self.lane_count < 1:
            raise ValueError("lane_count must be >= 1")
        for r in self.ramps:
            if not 0.0 <= r.position_m <= self.length_m:
                raise ValueError(f"ramp position {r.position_m} outside corridor")
        for s in self.detector_stations_m:
            if not 0.0 <= s <= self.length_m:
                raise ValueError(f"detector position {s} outside corridor")
        if sum(r.demand_share for r in self.on_ramps) > 1.0 + 1e-12:
            raise ValueError("on-ramp demand shares sum to more than 1")

    @property
    def on_ramps(self) -> tuple[Ramp, ...]:
        return tuple(r for r in self.ramps if r.kind == "on")

    @property
    def off_ramps(self) -> tuple[Ramp, ...]:
        return tuple(r for r in self.ramps if r.kind == "off")

    @classmethod
    def default_m50(cls) -> "Corridor":
        """7 km, 4 lanes, two interchanges (off-ramp then on-ramp each)."""
        return cls(
            length_m=7000.0,
            lane_count=4,
            ramps=(
                Ramp(1600.0, "off", 0.10),
                Ramp(2000.0, "on", 0.15),
                Ramp(4600.0, "off", 0.10),
                Ramp(5000.0, "on", 0.15),
            ),
            detector_stations_m=(500.0, 1500.0, 2500.0, 3500.0, 4500.0, 5500.0, 6500.0),
        )


@dataclass(frozen=True)
class DynamicsParams:
    """IDM + MOBIL parameters for one vehicle."""

    desired_speed: float = 33.33   # v0 [m/s]
    max_accel: float = 1.0         # a [m/s^2]
    comfort_decel: float = 2.0     # b [m/s^2]
    headway: float = 1.2           # T [s]
    min_gap: float = 2.0           # s0 [m]
    accel_exponent: float = 4.0    # delta
    politeness: float = 0.3        # MOBIL p
    change_threshold: float = 0.2  # MOBIL incentive threshold [m/s^2]
    safe_decel: float = 3.0        # MOBIL b_safe [m/s^2]

    def __post_init__(self):
        for name in ("desired_speed", "max_accel", "comfort_decel", "headway",
                     "min_gap", "accel_exponent", "change_threshold", "safe_decel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.politeness <= 1.0:
            raise ValueError("politeness must be in [0, 1]")


class TraceSample(NamedTuple):
    t_s: float
    pos_m: float
    lane: int
    speed_mps: float


@dataclass(frozen=True)
class TripTrace:
    """Completed trip: sampled trajectory plus space-mean summary."""

    vehicle_id: int
    samples: tuple[TraceSample, ...]
    trip_length_m: float
    duration_s: float
    mean_speed_mps: float  # trip_length / duration


@dataclass(frozen=True)
class DetectorReading:
    station_m: float
    window_start_s: float
    window_len_s: float
    count: int
    mean_speed_mps: float | None  # absent when count == 0


class InsertionOrder(NamedTuple):
    """One planned vehicle: when and where it enters, and where it leaves."""

    time_s: float
    origin_m: float  # 0.0 = mainline entry, else on-ramp position
    dest_m: float    # corridor length, or an off-ramp position


@dataclass
class SimOutput:
    traces: list[TripTrace]
    detector_readings: list[DetectorReading]
    scheduled: int
    inserted: int
    completed: int
    active_at_end: int
    aborted: int = 0
    never_inserted: int = 0
    missed_exits: int = 0
    # (vehicle_id, insertion time, origin, destination) in insertion order
    insertion_log: list[tuple[int, float, float, float]] = field(default_factory=list)

    def trip_mean_speeds(self) -> list[float]:
        return [tr.mean_speed_mps for tr in self.traces]


# ---------------------------------------------------------------------------
# Car-following and lane-change models
# ---------------------------------------------------------------------------

def idm_acceleration(v: float, gap: float, dv: float, p: DynamicsParams) -> float:
    """IDM acceleration [m/s^2] for speed v, net gap to leader, closing speed dv.

    dv = own speed minus leader speed (positive while approaching). gap may be
    math.inf on a free road. The dynamic desired-gap term is floored at zero so
    a fast-receding leader cannot produce phantom braking; the result is
    clamped below at the emergency deceleration.
    """
    if not (math.isfinite(v) and math.isfinite(dv)):
        raise ValueError(f"non-finite IDM input: v={v!r}, dv={dv!r}")
    if v < 0.0:
        raise ValueError(f"negative speed {v!r}")
    if gap <= 0.0:
        raise CollisionError(f"non-positive gap {gap!r} m")
    free = (v / p.desired_speed) ** p.accel_exponent
    if math.isinf(gap):
        interaction = 0.0
    elif not math.isfinite(gap):
        raise ValueError(f"non-finite gap {gap!r}")
    else:
        brake_term = 2.0 * math.sqrt(p.max_accel * p.comfort_decel)
        s_star = p.min_gap + max(0.0, v * p.headway + v * dv / brake_term)
        interaction = (s_star / gap) ** 2
    acc = p.max_accel * (1.0 - free - interaction)
    return acc if acc > EMERGENCY_DECEL_MPS2 else EMERGENCY_DECEL_MPS2


class Neighbor(NamedTuple):
    """Net bumper gap [m] to an adjacent vehicle and its speed; inf gap = absent."""

    gap: float
    speed: float


FREE_ROAD = Neighbor(math.inf, 0.0)


def _delta_follower(foll: Neighbor, old_lead: Neighbor, subject_speed: float,
                    p: DynamicsParams) -> float:
    """Change in a follower's IDM acceleration when the subject leaves its lane."""
    before = idm_acceleration(foll.speed, foll.gap, foll.speed - subject_speed, p)
    after_gap = foll.gap + VEHICLE_LENGTH_M + old_lead.gap
    after = idm_acceleration(foll.speed, after_gap, foll.speed - old_lead.speed, p)
    return after - before


def mobil_decision(
    v: float,
    p: DynamicsParams,
    lead: Neighbor,
    foll: Neighbor,
    left: tuple[Neighbor, Neighbor] | None,
    right: tuple[Neighbor, Neighbor] | None,
    right_bias: float = 0.0,
) -> str:
    """MOBIL lane-change decision: returns 'stay', 'left' or 'right'.

    'right' is toward lane 0 (the kerbside lane carrying the ramps), 'left'
    toward the median. left/right are (leader, follower) neighbor views of the
    target lane, or None when that lane does not exist. A change is returned
    only if the new follower (and the subject) can brake within safe_decel and
    the politeness-weighted acceleration gain exceeds change_threshold.
    right_bias is added to the rightward incentive (off-ramp pressure).
    """
    a_self = idm_acceleration(v, lead.gap, v - lead.speed, p)
    best = "stay"
    best_incentive = p.change_threshold
    for direction, target, bias in (("right", right, right_bias), ("left", left, 0.0)):
        if target is None:
            continue
        t_lead, t_foll = target
        if t_lead.gap <= 0.0 or t_foll.gap <= 0.0:
            continue  # no physical room alongside
        a_self_new = idm_acceleration(v, t_lead.gap, v - t_lead.speed, p)
        if a_self_new < -p.safe_decel:
            continue
        d_new = 0.0
        if not math.isinf(t_foll.gap):
            a_foll_new = idm_acceleration(t_foll.speed, t_foll.gap, t_foll.speed - v, p)
            if a_foll_new < -p.safe_decel:
                continue
            before_gap = t_foll.gap + VEHICLE_LENGTH_M + t_lead.gap
            a_foll_before = idm_acceleration(
                t_foll.speed, before_gap, t_foll.speed - t_lead.speed, p)
            d_new = a_foll_new - a_foll_before
        d_old = 0.0
        if not math.isinf(foll.gap):
            d_old = _delta_follower(foll, lead, v, p)
        incentive = (a_self_new - a_self) + p.politeness * (d_new + d_old) + bias
        if incentive > best_incentive:
            best, best_incentive = direction, incentive
    return best


# ---------------------------------------------------------------------------
# Demand
# ---------------------------------------------------------------------------

def schedule_demand(config) -> list[tuple[float, float]]:
    """Insertion schedule: (time_s, origin_m) tuples, one batch per interval.

    Batches of config.batch_size vehicles are released at t = 0, I, 2I, ...
    below the horizon; within each batch, origins are apportioned between the
    mainline entry and the on-ramps by demand share with a deterministic
    weighted round-robin, so per-batch totals are exact and long-run origin
    fractions match the shares.
    """
    interval = float(config.emission_interval_s)
    horizon = float(config.horizon_s)
    batch = int(config.batch_size)
    if interval <= 0:
        raise ValueError("emission_interval_s must be positive")
    if batch < 1:
        raise ValueError("batch_size must be >= 1")
    if interval not in STANDARD_EMISSION_INTERVALS_S:
        log.warning("emission interval %.0f s is outside the standard set %s",
                    interval, STANDARD_EMISSION_INTERVALS_S)
    if horizon <= 0:
        return []

    on_ramps = config.corridor.on_ramps
    origins = [0.0] + [r.position_m for r in on_ramps]
    shares = [1.0 - sum(r.demand_share for r in on_ramps)]
    shares += [r.demand_share for r in on_ramps]

    schedule: list[tuple[float, float]] = []
    acc = [0.0] * len(origins)
    n_batches = math.ceil(horizon / interval)
    for k in range(n_batches):
        t = k * interval
        if t >= horizon:
            break
        for _ in range(batch):
            for i, s in enumerate(shares):
                acc[i] += s
            pick = max(range(len(acc)), key=lambda i: (acc[i], -i))
            acc[pick] -= 1.0
            schedule.append((t, origins[pick]))
    return schedule


def build_insertion_plan(config, rng) -> list[InsertionOrder]:
    """Attach a sampled destination to every scheduled insertion.

    Destinations are drawn per vehicle from the off-ramp demand shares among
    off-ramps sufficiently downstream of the origin; the remainder exits at
    the corridor end. rng draws happen in schedule order, so the plan is
    deterministic for a fixed seed.
    """
    corridor = config.corridor
    plan = []
    for t, origin in schedule_demand(config):
        eligible = [r for r in corridor.off_ramps if r.position_m > origin + 500.0]
        dest = corridor.length_m
        u = float(rng.random())
        cum = 0.0
        for r in eligible:
            cum += r.demand_share
            if u < cum:
                dest = r.position_m
                break
        plan.append(InsertionOrder(t, origin, dest))
    return plan


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class VehicleState:
    """Mutable per-vehicle state while on the road."""

    __slots__ = ("vid", "lane", "pos", "speed", "entry_time", "entry_pos", "dest",
                 "dyn", "accel", "samples", "next_station", "lc_cooldown_until")

    def __init__(self, vid: int, lane: int, pos: float, speed: float,
                 entry_time: float, dest: float, dyn: DynamicsParams):
        self.vid = vid
        self.lane = lane
        self.pos = pos
        self.speed = speed
        self.entry_time = entry_time
        self.entry_pos = pos
        self.dest = dest
        self.dyn = dyn
        self.accel = 0.0
        self.samples: list[TraceSample] = [TraceSample(entry_time, pos, lane, speed)]
        self.next_station = 0
        self.lc_cooldown_until = -math.inf


class Simulation:
    """Discrete-time (default 0.5 s) motorway world.

    Phases per step: insertion-queue drain, lane changes, accelerations,
    ballistic integration (with detector crossings and retirements), sampling,
    collision scan. Fully deterministic: the engine itself draws no random
    numbers; all stochastic choices live in the insertion plan and fleet.
    """

    def __init__(self, config, fleet, plan: list[InsertionOrder]):
        if len(fleet) < len(plan):
            raise ValueError(
                f"fleet has {len(fleet)} specs but the plan schedules {len(plan)} insertions")
        self.corridor: Corridor = config.corridor
        self.dt = float(config.dt_s)
        if self.dt <= 0:
            raise ValueError("dt_s must be positive")
        self.horizon = float(config.horizon_s)
        self.window = float(config.detector_window_s)
        self.sample_every = max(1, round(float(config.trace_sample_dt_s) / self.dt))
        if any(plan[i].time_s > plan[i + 1].time_s for i in range(len(plan) - 1)):
            raise ValueError("insertion plan must be time-ordered (fleet[i] pairs with plan[i])")
        self.plan = list(plan)
        self.fleet = fleet
        self.stations = sorted(self.corridor.detector_stations_m)

        self.t = 0.0
        self.steps = 0
        self.lanes: list[list[VehicleState]] = [[] for _ in range(self.corridor.lane_count)]
        self.cars: list[VehicleState] = []  # insertion order, active only
        self.queues: dict[float, list[int]] = {}  # origin_m -> plan indices, FIFO
        self._next_plan = 0
        self._crossings: dict[tuple[int, int], list] = {}  # (station, window) -> [count, speed_sum]
        self._lc_period_steps = max(1, round(LANE_CHANGE_PERIOD_S / self.dt))

        self.traces: list[TripTrace] = []
        self.inserted = 0
        self.missed_exits = 0
        self.insertion_log: list[tuple[int, float, float, float]] = []

    # -- insertion ----------------------------------------------------------

    def _neighbors_at(self, lane: int, pos: float):
        """(leader, follower) VehicleStates around a position, either may be None."""
        row = self.lanes[lane]
        idx = bisect_right(row, pos, key=lambda c: c.pos)
        leader = row[idx] if idx < len(row) else None
        follower = row[idx - 1] if idx > 0 else None
        return leader, follower

    def _try_insert(self, order: InsertionOrder, spec) -> bool:
        dyn: DynamicsParams = spec.dynamics
        is_ramp = order.origin_m > 0.0
        lanes = (0,) if is_ramp else tuple(range(self.corridor.lane_count))
        best_lane, best_gap, best_speed = -1, -1.0, 0.0
        for lane in lanes:
            leader, follower = self._neighbors_at(lane, order.origin_m)
            lead_gap = (leader.pos - order.origin_m - VEHICLE_LENGTH_M) if leader else math.inf
            foll_gap = (order.origin_m - follower.pos - VEHICLE_LENGTH_M) if follower else math.inf
            if lead_gap <= dyn.min_gap + 0.5 or foll_gap <= dyn.min_gap + 0.5:
                continue
            v_ins = dyn.desired_speed
            if leader is not None:
                v_ins = min(v_ins, (lead_gap - dyn.min_gap) / dyn.headway)
            if is_ramp:
                v_ins = min(v_ins, RAMP_ENTRY_SPEED_MPS)
            if v_ins < MIN_INSERT_SPEED_MPS:
                continue
            if follower is not None:
                a_foll = idm_acceleration(follower.speed, foll_gap,
                                          follower.speed - v_ins, follower.dyn)
                if a_foll < -follower.dyn.safe_decel:
                    continue
            if lead_gap > best_gap:
                best_lane, best_gap, best_speed = lane, lead_gap, v_ins
        if best_lane < 0:
            return False
        car = VehicleState(spec.vehicle_id, best_lane, order.origin_m, best_speed,
                           self.t, order.dest_m, dyn)
        car.next_station = bisect_right(self.stations, order.origin_m)
        row = self.lanes[best_lane]
        row.insert(bisect_right(row, car.pos, key=lambda c: c.pos), car)
        self.cars.append(car)
        self.inserted += 1
        self.insertion_log.append((car.vid, self.t, order.origin_m, order.dest_m))
        return True

    def _drain_insertions(self):
        while self._next_plan < len(self.plan) and self.plan[self._next_plan].time_s <= self.t + 1e-9:
            origin = self.plan[self._next_plan].origin_m
            self.queues.setdefault(origin, []).append(self._next_plan)
            self._next_plan += 1
        for origin in sorted(self.queues):
            q = self.queues[origin]
            while q:
                idx = q[0]
                if not self._try_insert(self.plan[idx], self.fleet[idx]):
                    break  # head-of-line blocks this origin until space opens
                q.pop(0)

    # -- lane changes ---------------------------------------------------------

    def _neighbor_view(self, car: VehicleState, lane: int) -> tuple[Neighbor, Neighbor]:
        leader, follower = self._neighbors_at(lane, car.pos)
        lead = Neighbor(leader.pos - car.pos - VEHICLE_LENGTH_M, leader.speed) if leader else FREE_ROAD
        foll = Neighbor(car.pos - follower.pos - VEHICLE_LENGTH_M, follower.speed) if follower else FREE_ROAD
        return lead, foll

    def _lane_change_phase(self):
        n_lanes = self.corridor.lane_count
        if n_lanes == 1:
            return
        for car in list(self.cars):
            if (self.steps + car.vid) % self._lc_period_steps != 0:
                continue
            if self.t < car.lc_cooldown_until:
                continue
            row = self.lanes[car.lane]
            i = row.index(car)
            lead = Neighbor(row[i + 1].pos - car.pos - VEHICLE_LENGTH_M, row[i + 1].speed) \
                if i + 1 < len(row) else FREE_ROAD
            foll = Neighbor(car.pos - row[i - 1].pos - VEHICLE_LENGTH_M, row[i - 1].speed) \
                if i > 0 else FREE_ROAD

            right_bias = 0.0
            exit_bound = car.dest < self.corridor.length_m
            if exit_bound:
                dist = car.dest - car.pos
                if dist < EXIT_PRESSURE_RANGE_M:
                    right_bias = EXIT_URGENCY_GAIN_MPS2 * (1.0 - dist / EXIT_PRESSURE_RANGE_M)
            right = self._neighbor_view(car, car.lane - 1) if car.lane > 0 else None
            left = None
            if car.lane + 1 < n_lanes and right_bias == 0.0:
                left = self._neighbor_view(car, car.lane + 1)

            decision = mobil_decision(car.speed, car.dyn, lead, foll, left, right,
                                      right_bias=right_bias)
            if decision == "stay":
                continue
            target = car.lane - 1 if decision == "right" else car.lane + 1
            row.remove(car)
            dest_row = self.lanes[target]
            dest_row.insert(bisect_right(dest_row, car.pos, key=lambda c: c.pos), car)
            car.lane = target
            car.lc_cooldown_until = self.t + LANE_CHANGE_COOLDOWN_S

    # -- longitudinal dynamics ------------------------------------------------

    def _acceleration_phase(self):
        for row in self.lanes:
            for i, car in enumerate(row):
                if i + 1 < len(row):
                    leader = row[i + 1]
                    gap = leader.pos - car.pos - VEHICLE_LENGTH_M
                    car.accel = idm_acceleration(car.speed, gap,
                                                 car.speed - leader.speed, car.dyn)
                else:
                    car.accel = idm_acceleration(car.speed, math.inf, 0.0, car.dyn)

    def _integrate_and_retire(self):
        dt = self.dt
        t0 = self.t
        retired: list[VehicleState] = []
        for row in self.lanes:
            for car in row:
                v0 = car.speed
                v1 = v0 + car.accel * dt
                if v1 < 0.0:
                    dx = 0.0 if car.accel >= 0.0 else -v0 * v0 / (2.0 * car.accel)
                    v1 = 0.0
                else:
                    dx = 0.5 * (v0 + v1) * dt
                old_pos = car.pos
                car.pos = old_pos + dx
                car.speed = v1

                while car.next_station < len(self.stations) and car.pos >= self.stations[car.next_station]:
                    st = self.stations[car.next_station]
                    frac = (st - old_pos) / dx if dx > 0 else 0.0
                    t_cross = t0 + frac * dt
                    v_cross = v0 + (v1 - v0) * frac
                    key = (car.next_station, int(t_cross // self.window))
                    cell = self._crossings.get(key)
                    if cell is None:
                        self._crossings[key] = [1, v_cross]
                    else:
                        cell[0] += 1
                        cell[1] += v_cross
                    car.next_station += 1

                boundary = min(car.dest, self.corridor.length_m)
                if car.pos >= boundary:
                    if car.dest < self.corridor.length_m and car.lane != 0:
                        # missed the exit: carry on to the corridor end
                        car.dest = self.corridor.length_m
                        self.missed_exits += 1
                        if car.pos >= self.corridor.length_m:
                            retired.append(self._finish(car, self.corridor.length_m,
                                                        old_pos, v0, v1, dx, t0))
                    else:
                        retired.append(self._finish(car, boundary, old_pos, v0, v1, dx, t0))
        for car in retired:
            self.lanes[car.lane].remove(car)
            self.cars.remove(car)

    def _finish(self, car: VehicleState, boundary: float, old_pos: float,
                v0: float, v1: float, dx: float, t0: float) -> VehicleState:
        frac = (boundary - old_pos) / dx if dx > 0 else 1.0
        t_exit = t0 + frac * self.dt
        v_exit = v0 + (v1 - v0) * frac
        car.samples.append(TraceSample(t_exit, boundary, car.lane, v_exit))
        length = boundary - car.entry_pos
        duration = t_exit - car.entry_time
        if duration <= 0:
            raise SimulationError(f"vehicle {car.vid} retired with duration {duration}")
        self.traces.append(TripTrace(
            vehicle_id=car.vid,
            samples=tuple(car.samples),
            trip_length_m=length,
            duration_s=duration,
            mean_speed_mps=length / duration,
        ))
        return car

    # -- bookkeeping ------------------------------------------------------------

    def _record_samples(self):
        if self.steps % self.sample_every != 0:
            return
        for car in self.cars:
            car.samples.append(TraceSample(self.t, car.pos, car.lane, car.speed))

    def _collision_scan(self):
        for lane, row in enumerate(self.lanes):
            for i in range(1, len(row)):
                gap = row[i].pos - row[i - 1].pos - VEHICLE_LENGTH_M
                if gap <= 0.0:
                    raise CollisionError(
                        f"t={self.t:.1f}s lane={lane}: vehicle {row[i - 1].vid} at "
                        f"{row[i - 1].pos:.2f} m overlaps {row[i].vid} at {row[i].pos:.2f} m")

    def step(self):
        """Advance the world by one dt."""
        self._drain_insertions()
        self._lane_change_phase()
        self._acceleration_phase()
        self._integrate_and_retire()
        self.steps += 1
        self.t = self.steps * self.dt
        self._record_samples()
        self._collision_scan()

    def _detector_readings(self) -> list[DetectorReading]:
        n_windows = math.ceil(self.horizon / self.window) if self.horizon > 0 else 0
        readings = []
        for si, station in enumerate(self.stations):
            for wi in range(n_windows):
                cell = self._crossings.get((si, wi))
                count = cell[0] if cell else 0
                speed = cell[1] / count if count else None
                readings.append(DetectorReading(station, wi * self.window,
                                                self.window, count, speed))
        return readings

    def finish(self) -> SimOutput:
        queued = sum(len(q) for q in self.queues.values()) + (len(self.plan) - self._next_plan)
        return SimOutput(
            traces=self.traces,
            detector_readings=self._detector_readings(),
            scheduled=len(self.plan),
            inserted=self.inserted,
            completed=len(self.traces),
            active_at_end=len(self.cars),
            aborted=0,
            never_inserted=queued,
            missed_exits=self.missed_exits,
            insertion_log=self.insertion_log,
        )


def run(config, fleet, plan: list[InsertionOrder] | None = None) -> SimOutput:
    """Run one scenario to its horizon and collect traces and detector readings.

    fleet[i] supplies the spec for plan[i]; when plan is omitted it is built
    from the config's demand schedule with destinations drawn from the
    config-seeded demand stream. Deterministic: identical (config, fleet,
    plan) give identical outputs.
    """
    if plan is None:
        from .seeding import derive_streams
        plan = build_insertion_plan(config, derive_streams(config.master_seed).demand)
    sim = Simulation(config, fleet, plan)
    n_steps = math.ceil(sim.horizon / sim.dt - 1e-9)
    for _ in range(n_steps):
        sim.step()
    return sim.finish()
