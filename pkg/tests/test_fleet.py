"""Fleet sampling, degradation and CSV round-trip tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinway.fleet import (
    EURO_CLASS_PRIORS,
    EURO_COEFFICIENTS,
    EV_ALPHA1,
    EuroClass,
    EvParams,
    EvPowertrain,
    IcevPowertrain,
    VehicleSpec,
    compose_fleet,
    degrade_to_partial,
    fleet_from_csv,
    fleet_to_csv,
    rolling_resistance_alpha2,
    sample_euro_class,
    sample_ev_params,
)
from twinway.microsim import DynamicsParams
from twinway.seeding import derive_streams

# Endpoints of the alpha2 range, straight from the loading formula.
ALPHA2_MIN = 0.0293 + 0.05 * ((1235 + 80 * 1) / 1235)
ALPHA2_MAX = 0.0293 + 0.05 * ((1235 + 80 * 4) / 1235)


class TestEuroClassSampling:
    def test_priors_sum_to_one(self):
        assert sum(EURO_CLASS_PRIORS.values()) == pytest.approx(1.0, abs=1e-12)
        assert EURO_CLASS_PRIORS == {"euro4": 0.148, "euro5": 0.218, "euro6": 0.634}

    def test_frequencies_converge_to_priors(self):
        rng = np.random.default_rng(42)
        n = 100_000
        counts = {c: 0 for c in EuroClass}
        for _ in range(n):
            counts[sample_euro_class(rng)] += 1
        for cls in EuroClass:
            assert counts[cls] / n == pytest.approx(EURO_CLASS_PRIORS[cls.value], abs=0.005)

    def test_three_sigma_band_across_seeds(self):
        """Binomial concentration: nearly every seed lands inside 3 sigma."""
        n = 20_000
        failures = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            draws = [sample_euro_class(rng) for _ in range(n)]
            for cls in EuroClass:
                p = EURO_CLASS_PRIORS[cls.value]
                bound = 3.0 * math.sqrt(p * (1 - p) / n)
                if abs(draws.count(cls) / n - p) >= bound:
                    failures += 1
                    break
        assert failures <= 1

    def test_coefficient_rows_match_published_factors(self):
        for cls, b in ((EuroClass.EURO4, 155.99), (EuroClass.EURO5, 128.77),
                       (EuroClass.EURO6, 105.71)):
            row = EURO_COEFFICIENTS[cls]
            assert (row.a, row.b, row.c, row.d) == (3747.3, b, -0.8527, 0.010318)
            assert row.e == row.f == row.g == 0.0
            assert row.k == 1.0


class TestEvParamSampling:
    def test_alpha2_formula_endpoints(self):
        """Direct evaluation of the loading formula at 1 and 4 passengers."""
        assert rolling_resistance_alpha2(1) == pytest.approx(ALPHA2_MIN, rel=1e-15)
        assert rolling_resistance_alpha2(4) == pytest.approx(ALPHA2_MAX, rel=1e-15)
        assert ALPHA2_MIN == pytest.approx(0.0825389, abs=5e-7)
        assert ALPHA2_MAX == pytest.approx(0.0922555, abs=5e-7)

    def test_invalid_passenger_count_rejected(self):
        with pytest.raises(ValueError):
            rolling_resistance_alpha2(0)
        with pytest.raises(ValueError):
            rolling_resistance_alpha2(5)

    def test_sampled_params_respect_ranges(self):
        rng = np.random.default_rng(7)
        allowed_alpha2 = {rolling_resistance_alpha2(n) for n in (1, 2, 3, 4)}
        for _ in range(5000):
            p = sample_ev_params(rng)
            assert 0.2 <= p.alpha0 <= 2.2
            assert p.alpha1 == EV_ALPHA1
            assert p.alpha2 in allowed_alpha2
            assert p.alpha3 > 4e-6
            assert p.n_pass in (1, 2, 3, 4)

    def test_passenger_counts_roughly_uniform(self):
        rng = np.random.default_rng(3)
        counts = {n: 0 for n in (1, 2, 3, 4)}
        for _ in range(40_000):
            counts[sample_ev_params(rng).n_pass] += 1
        for n in counts:
            assert counts[n] / 40_000 == pytest.approx(0.25, abs=0.01)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            EvParams(alpha0=0.1, alpha1=EV_ALPHA1, alpha2=ALPHA2_MIN, alpha3=1e-5, n_pass=1)
        with pytest.raises(ValueError):
            EvParams(alpha0=1.0, alpha1=EV_ALPHA1, alpha2=ALPHA2_MIN, alpha3=-1e-9, n_pass=1)


class TestComposeFleet:
    def test_pure_icev(self):
        fleet = compose_fleet(100, 0.0, derive_streams(1))
        assert len(fleet) == 100
        assert all(not s.is_ev for s in fleet)

    def test_pure_ev(self):
        fleet = compose_fleet(100, 1.0, derive_streams(1))
        assert all(s.is_ev for s in fleet)

    def test_exact_half(self):
        fleet = compose_fleet(100, 0.5, derive_streams(1))
        assert sum(s.is_ev for s in fleet) == 50

    def test_count_exactness_grid(self):
        """EV count is exactly round-half-up(n * penetration) on the full grid."""
        streams = derive_streams(5)
        for n in (0, 1, 3, 7, 10, 55, 99, 100, 1234, 10_000):
            for tenths in range(11):
                p = tenths / 10.0
                fleet = compose_fleet(n, p, streams)
                assert sum(s.is_ev for s in fleet) == int(math.floor(n * p + 0.5))

    def test_ids_sequential_and_jitter_bounded(self):
        base = DynamicsParams()
        fleet = compose_fleet(500, 0.3, derive_streams(9), base_dynamics=base,
                              jitter_frac=0.05)
        assert [s.vehicle_id for s in fleet] == list(range(500))
        v0s = {s.dynamics.desired_speed for s in fleet}
        assert len(v0s) > 400  # per-vehicle jitter actually applied
        assert all(abs(v - base.desired_speed) <= 0.05 * base.desired_speed + 1e-12
                   for v in v0s)

    def test_speed_cap_respected(self):
        fleet = compose_fleet(200, 0.0, derive_streams(2), jitter_frac=0.05,
                              speed_cap=33.5)
        assert all(s.dynamics.desired_speed <= 33.5 for s in fleet)


class TestDegradeToPartial:
    def test_preserves_id_dynamics_kind(self):
        truth = compose_fleet(300, 0.4, derive_streams(11))
        partial = degrade_to_partial(truth, derive_streams(11, "pidt"))
        assert len(partial) == len(truth)
        for a, b in zip(truth, partial):
            assert a.vehicle_id == b.vehicle_id
            assert a.dynamics == b.dynamics
            assert a.is_ev == b.is_ev

    def test_ev_alphas_are_fresh_draws(self):
        truth = compose_fleet(100, 1.0, derive_streams(13))
        partial = degrade_to_partial(truth, derive_streams(13, "pidt"))
        changed = sum(a.powertrain.params != b.powertrain.params
                      for a, b in zip(truth, partial))
        assert changed > 90  # continuous draws collide with probability ~0

    def test_class_marginals_match_priors(self):
        """All-Euro6 truth degrades to the prior mix in expectation."""
        cls6 = IcevPowertrain(EuroClass.EURO6, EURO_COEFFICIENTS[EuroClass.EURO6])
        truth = [VehicleSpec(i, cls6, DynamicsParams()) for i in range(2000)]
        frac6 = []
        for seed in range(10):
            partial = degrade_to_partial(truth, derive_streams(seed, "pidt"))
            frac6.append(sum(s.powertrain.euro_class == EuroClass.EURO6
                             for s in partial) / len(partial))
        assert sum(frac6) / len(frac6) == pytest.approx(0.634, abs=0.02)

    def test_empty_fleet(self):
        assert degrade_to_partial([], derive_streams(1, "pidt")) == []


class TestFleetCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        fleet = compose_fleet(250, 0.5, derive_streams(21))
        path = tmp_path / "fleet.csv"
        fleet_to_csv(fleet, path)
        restored = fleet_from_csv(path)
        assert restored == fleet

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,kind\n1,ev\n")
        with pytest.raises(ValueError, match="header"):
            fleet_from_csv(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        fleet_to_csv(compose_fleet(1, 0.0, derive_streams(1)), path)
        text = path.read_text().replace("icev", "hybrid")
        path.write_text(text)
        with pytest.raises(ValueError, match="kind"):
            fleet_from_csv(path)


class TestStreamIsolation:
    def test_changing_one_dimension_leaves_others_alone(self):
        """Same seed, different penetration: ICEV classes drawn for the shared
        prefix of ICEV slots must not shift."""
        a = compose_fleet(50, 0.0, derive_streams(3))
        b = compose_fleet(50, 0.0, derive_streams(3))
        assert a == b
        jitter_a = [s.dynamics.desired_speed for s in compose_fleet(50, 0.0, derive_streams(3))]
        jitter_b = [s.dynamics.desired_speed for s in compose_fleet(50, 1.0, derive_streams(3))]
        assert jitter_a == jitter_b  # jitter stream independent of powertrain draws


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=0, max_value=400),
       pct=st.integers(min_value=0, max_value=100),
       seed=st.integers(min_value=0, max_value=10_000))
def test_compose_count_property(n: int, pct: int, seed: int):
    fleet = compose_fleet(n, pct / 100.0, derive_streams(seed))
    assert len(fleet) == n
    assert sum(s.is_ev for s in fleet) == int(math.floor(n * pct / 100.0 + 0.5))
