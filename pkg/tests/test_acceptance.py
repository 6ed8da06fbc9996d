"""Acceptance gate: one test per numbered criterion, each printing a
PASS/FAIL line (visible with `pytest -s` or `-rA`) and enforcing its runtime
budget. Expected values come from independent oracles computed inside the
tests, never from the code under test.
"""

import hashlib
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from twinway.fleet import (EURO_COEFFICIENTS, EuroClass, EvParams,
                           rolling_resistance_alpha2)
from twinway.metrics import (SpeedHistogram, bhattacharyya, build_histogram,
                             divergence_suite, js_divergence, kl_divergence,
                             wasserstein1)
from twinway.powertrain import ev_energy_per_km, fleet_totals, icev_co2_per_km
from twinway.reports import write_detector_csv, write_trace_csv
from twinway.scenario import ScenarioConfig
from twinway.twin import penetration_sweep, run_cidt, run_physical, run_pidt

# Frozen on the first full run of criterion 6 (20-seed standard set): observed
# mean signed errors were -0.0227 (CO2) and -0.0303 (energy). These regression
# bands are deliberately tighter than the specified |err| <= 5% / 7.5% covers.
REGRESSION_CO2_BAND = (-0.045, 0.000)
REGRESSION_ENERGY_BAND = (-0.055, 0.000)


def _finish(name: str, ok: bool, elapsed: float, limit: float, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {name}: {status} ({elapsed:.2f}s) {detail}")
    assert ok, f"{name}: {detail}"
    assert elapsed < limit, f"{name}: runtime {elapsed:.1f}s exceeds {limit:.0f}s budget"


def _standard_config(**kw) -> ScenarioConfig:
    kw.setdefault("horizon_s", 600.0)
    kw.setdefault("emission_interval_s", 40.0)
    kw.setdefault("batch_size", 4)
    kw.setdefault("ev_penetration", 0.5)
    return ScenarioConfig(**kw)


def test_criterion_1_icev_cost_oracle():
    """Emission-rate evaluation matches a direct polynomial oracle on the speed grid."""
    t0 = time.time()
    worst = 0.0
    for cls in EuroClass:
        c = EURO_COEFFICIENTS[cls]
        for s in range(5, 145, 5):
            expected = c.k * sum(
                coef * float(s) ** i
                for i, coef in enumerate([c.a, c.b, c.c, c.d, c.e, c.f, c.g])) / float(s)
            got = icev_co2_per_km(float(s), c)
            worst = max(worst, abs(got - expected) / abs(expected))
    spots = {
        EuroClass.EURO4: 211.373,
        EuroClass.EURO5: 184.153,
        EuroClass.EURO6: 161.093,
    }
    spot_ok = all(
        icev_co2_per_km(100.0, EURO_COEFFICIENTS[cls]) == pytest.approx(v, abs=1e-9)
        for cls, v in spots.items())
    elapsed = time.time() - t0
    _finish("C1 ICEV cost oracle", worst <= 1e-9 and spot_ok, elapsed, 1.0,
            f"max rel err {worst:.2e}")


def test_criterion_2_ev_cost_oracle():
    """Consumption-rate evaluation matches the four-term sum on 1000 in-range draws."""
    t0 = time.time()
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(1000):
        alpha0 = 0.2 + float(rng.uniform(0.0, 2.0))
        alpha2 = rolling_resistance_alpha2(int(rng.integers(1, 5)))
        p_aer = float(rng.normal(3.12e-5, 5e-6))
        while p_aer <= 0.0:
            p_aer = float(rng.normal(3.12e-5, 5e-6))
        p = EvParams(alpha0=alpha0, alpha1=5e-4, alpha2=alpha2,
                     alpha3=p_aer + 4e-6, n_pass=1)
        v = float(rng.uniform(1.0, 40.0))
        expected = p.alpha0 / v + p.alpha1 + p.alpha2 * v + p.alpha3 * v ** 2
        got = ev_energy_per_km(v, p)
        worst = max(worst, abs(got - expected) / abs(expected))
    spot_p = EvParams(alpha0=1.0, alpha1=5e-4, alpha2=0.0825389, alpha3=3.5e-5, n_pass=1)
    spot = ev_energy_per_km(30.0, spot_p)
    spot_ok = abs(spot - 2.5415010) < 1e-6
    elapsed = time.time() - t0
    _finish("C2 EV cost oracle", worst <= 1e-12 and spot_ok, elapsed, 1.0,
            f"max rel err {worst:.2e}, spot {spot:.7f}")


def test_criterion_3_metric_oracles():
    """Hand-computed divergences plus the sorted-pairing Wasserstein oracle."""
    t0 = time.time()
    checks = []

    p = SpeedHistogram(np.array([0.0, 1.0, 2.0]), np.array([0.3, 0.7]), 1)
    checks.append(abs(kl_divergence(p, p)) <= 1e-12)
    checks.append(abs(js_divergence(p, p)) <= 1e-12)
    checks.append(abs(wasserstein1(p, p)) <= 1e-12)
    checks.append(abs(bhattacharyya(p, p)) <= 1e-12)

    edges = np.array([0.0, 1.0, 2.0])
    one = SpeedHistogram(edges, np.array([1.0, 0.0]), 1)
    other = SpeedHistogram(edges, np.array([0.0, 1.0]), 1)
    checks.append(abs(js_divergence(one, other) - math.log(2.0)) <= 1e-12)

    half = SpeedHistogram(edges, np.array([0.5, 0.5]), 1)
    skew = SpeedHistogram(edges, np.array([0.25, 0.75]), 1)
    checks.append(abs(kl_divergence(half, skew) - 0.1438410) <= 1e-6)
    checks.append(abs(bhattacharyya(half, skew) - 0.0346683) <= 1e-6)

    rng = np.random.default_rng(777)
    w1_ok = True
    for _ in range(100):
        n = int(rng.integers(50, 500))
        a = rng.normal(rng.uniform(20, 35), rng.uniform(0.5, 4.0), size=n)
        b = rng.normal(rng.uniform(20, 35), rng.uniform(0.5, 4.0), size=n)
        hp, hq = build_histogram(a, b)
        oracle = float(np.mean(np.abs(np.sort(a) - np.sort(b))))
        if abs(wasserstein1(hp, hq) - oracle) > hp.bin_width:
            w1_ok = False
            break
    checks.append(w1_ok)
    elapsed = time.time() - t0
    _finish("C3 metric oracles", all(checks), elapsed, 5.0)


def test_criterion_4_simulation_invariants(tmp_path):
    """50 randomized scenarios: no collisions, conservation, speed bounds,
    and bit-identical serialized reruns per seed."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    failures = []
    for case in range(50):
        config = _standard_config(
            horizon_s=float(rng.integers(200, 401)),
            emission_interval_s=float(rng.choice([10.0, 40.0, 80.0, 100.0])),
            batch_size=int(rng.integers(2, 5)),
            ev_penetration=float(rng.integers(0, 11)) / 10.0,
            master_seed=int(rng.integers(0, 1_000_000)),
        )
        digests = []
        for rerun in range(2):
            truth = run_physical(config)  # any collision aborts loudly here
            out = truth.output
            if out.inserted != out.completed + out.active_at_end + out.aborted:
                failures.append(f"case {case}: count conservation broken")
            if out.scheduled != out.inserted + out.never_inserted:
                failures.append(f"case {case}: scheduling ledger broken")
            vmax = max(s.dynamics.desired_speed for s in truth.fleet) + 0.1
            for trace in out.traces:
                if any(not (0.0 <= smp.speed_mps <= vmax) for smp in trace.samples):
                    failures.append(f"case {case}: speed bound violated")
                    break
            trace_path = tmp_path / f"case{case}_{rerun}.csv"
            det_path = tmp_path / f"case{case}_{rerun}_det.csv"
            write_trace_csv(out, trace_path)
            write_detector_csv(out.detector_readings, det_path)
            digests.append(hashlib.sha256(
                trace_path.read_bytes() + det_path.read_bytes()).hexdigest())
        if digests[0] != digests[1]:
            failures.append(f"case {case}: rerun not bit-identical")
    elapsed = time.time() - t0
    _finish("C4 simulation invariants", not failures, elapsed, 120.0,
            "; ".join(failures[:3]))


def test_criterion_5_cidt_replay_exactness():
    """CIDT totals equal physical totals to 1e-12 relative on 10 seeds."""
    t0 = time.time()
    worst = 0.0
    for seed in range(1, 11):
        config = _standard_config(horizon_s=400.0, master_seed=seed)
        truth = run_physical(config)
        cidt = run_cidt(truth)
        phys = fleet_totals(truth.output.traces, {s.vehicle_id: s for s in truth.fleet})
        for twin_v, phys_v in ((cidt.costs.total_co2_g, phys.total_co2_g),
                               (cidt.costs.total_energy, phys.total_energy)):
            if phys_v != 0.0:
                worst = max(worst, abs(twin_v - phys_v) / abs(phys_v))
            elif twin_v != 0.0:
                worst = math.inf
    elapsed = time.time() - t0
    _finish("C5 CIDT replay exactness", worst <= 1e-12, elapsed, 60.0,
            f"max rel gap {worst:.2e}")


def test_criterion_6_pidt_error_bands():
    """Mean signed PIDT errors over 20 seeds stay inside the loose covers
    (5% CO2, 7.5% energy) and the frozen regression bands."""
    t0 = time.time()
    co2_errs, energy_errs = [], []
    for seed in range(1, 21):
        config = _standard_config(master_seed=seed)
        truth = run_physical(config)
        pidt = run_pidt(truth)
        phys = fleet_totals(truth.output.traces, {s.vehicle_id: s for s in truth.fleet})
        co2_errs.append((pidt.costs.total_co2_g - phys.total_co2_g) / phys.total_co2_g)
        energy_errs.append(
            (pidt.costs.total_energy - phys.total_energy) / phys.total_energy)
    mean_co2 = sum(co2_errs) / len(co2_errs)
    mean_energy = sum(energy_errs) / len(energy_errs)
    ok = (abs(mean_co2) <= 0.05 and abs(mean_energy) <= 0.075
          and REGRESSION_CO2_BAND[0] <= mean_co2 <= REGRESSION_CO2_BAND[1]
          and REGRESSION_ENERGY_BAND[0] <= mean_energy <= REGRESSION_ENERGY_BAND[1])
    elapsed = time.time() - t0
    _finish("C6 PIDT error bands", ok, elapsed, 300.0,
            f"mean co2 {mean_co2:+.4f}, mean energy {mean_energy:+.4f}")


def test_criterion_7_divergence_volume_trend():
    """Seed-averaged JS and W1 against the physical run are non-increasing as
    the emission interval shrinks 100 -> 80 -> 40 -> 10 s (more vehicles),
    with at most one inversion of <= 5% of the range."""
    t0 = time.time()
    intervals = (100.0, 80.0, 40.0, 10.0)
    seeds = range(1, 7)
    means = {"js_nats": [], "wasserstein_mps": []}
    for interval in intervals:
        values = {m: [] for m in means}
        for seed in seeds:
            config = _standard_config(emission_interval_s=interval, master_seed=seed)
            truth = run_physical(config)
            pidt = run_pidt(truth)
            divs = divergence_suite(pidt.output.trip_mean_speeds(),
                                    truth.output.trip_mean_speeds())
            for m in means:
                values[m].append(divs[m])
        for m in means:
            means[m].append(sum(values[m]) / len(values[m]))
    ok = True
    detail = []
    for metric, series in means.items():
        span = max(series) - min(series)
        inversions = [max(0.0, series[i + 1] - series[i]) for i in range(len(series) - 1)]
        bad = [x for x in inversions if x > 0]
        if len(bad) > 1 or any(x > 0.05 * span for x in bad):
            ok = False
        detail.append(f"{metric}: " + " -> ".join(f"{v:.4f}" for v in series))
    elapsed = time.time() - t0
    _finish("C7 divergence volume trend", ok, elapsed, 300.0, "; ".join(detail))


def test_criterion_8_sweep_monotonicity():
    """Seed-averaged total CO2 strictly falls and EV energy strictly rises
    across the standard penetration grid."""
    t0 = time.time()
    config = _standard_config(horizon_s=400.0)
    report = penetration_sweep(config, levels=(0.0, 0.25, 0.5, 0.75, 1.0),
                               seeds=tuple(range(1, 21)), workers=1)
    co2 = [r.physical_co2_g for r in report.rows]
    energy = [r.physical_energy for r in report.rows]
    co2_ok = all(a > b for a, b in zip(co2, co2[1:]))
    energy_ok = all(a < b for a, b in zip(energy, energy[1:]))
    elapsed = time.time() - t0
    _finish("C8 sweep monotonicity", co2_ok and energy_ok, elapsed, 300.0,
            f"co2 {['%0.0f' % v for v in co2]}, energy {['%0.1f' % v for v in energy]}")
