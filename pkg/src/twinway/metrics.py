"""Distributional comparison of speed samples: shared-bin histograms, the
four divergence measures, accuracy percentages, and the validation report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SMOOTHING_EPS = 1e-9
MIN_BINS = 20

# Declared conventions, echoed into every report so downstream consumers
# cannot silently assume a different arithmetic.
CONVENTIONS = {
    "log_base": "e (nats)",
    "binning": f"freedman-diaconis on the pooled sample, >= {MIN_BINS} bins, shared edges",
    "smoothing": f"add {SMOOTHING_EPS:g} per bin, renormalize",
    "accuracy": "100 * (1 - |sim - ref| / ref)",
}


@dataclass(frozen=True)
class SpeedHistogram:
    """Binned speed distribution on uniform shared edges."""

    edges: np.ndarray
    probabilities: np.ndarray
    sample_count: int

    def __post_init__(self):
        if len(self.edges) != len(self.probabilities) + 1:
            raise ValueError("edges must be one longer than probabilities")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        if np.any(self.probabilities < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(self.probabilities.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])


def _shared_edges(pooled: np.ndarray) -> np.ndarray:
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    iqr = float(np.subtract(*np.percentile(pooled, [75, 25])))
    if iqr > 0:
        width = 2.0 * iqr * len(pooled) ** (-1.0 / 3.0)
        n_bins = max(MIN_BINS, math.ceil((hi - lo) / width))
    else:
        n_bins = MIN_BINS
    return np.linspace(lo, hi, n_bins + 1)


def _smooth(counts: np.ndarray) -> np.ndarray:
    probs = counts / counts.sum() + SMOOTHING_EPS
    return probs / probs.sum()


def build_histogram(samples: list[float] | np.ndarray,
                    paired: list[float] | np.ndarray) -> tuple[SpeedHistogram, SpeedHistogram]:
    """Histogram both sample sets on common edges spanning their union support.

    Epsilon smoothing keeps every bin strictly positive so KL and Bhattacharyya
    stay finite on disjoint supports.
    """
    a = np.asarray(samples, dtype=float)
    b = np.asarray(paired, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("cannot build a histogram from an empty sample list")
    edges = _shared_edges(np.concatenate([a, b]))
    ca, _ = np.histogram(a, bins=edges)
    cb, _ = np.histogram(b, bins=edges)
    return (SpeedHistogram(edges, _smooth(ca.astype(float)), int(a.size)),
            SpeedHistogram(edges, _smooth(cb.astype(float)), int(b.size)))


def _check_edges(p: SpeedHistogram, q: SpeedHistogram):
    if not np.array_equal(p.edges, q.edges):
        raise ValueError("histograms do not share bin edges")


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise ValueError("q has zero mass where p is positive; smooth first")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(p: SpeedHistogram, q: SpeedHistogram) -> float:
    """KL(p || q) in nats; asymmetric, >= 0, with 0 ln 0 := 0."""
    _check_edges(p, q)
    return _kl(p.probabilities, q.probabilities)


def js_divergence(p: SpeedHistogram, q: SpeedHistogram) -> float:
    """Jensen-Shannon divergence in nats; symmetric, in [0, ln 2]."""
    _check_edges(p, q)
    m = 0.5 * (p.probabilities + q.probabilities)
    return 0.5 * _kl(p.probabilities, m) + 0.5 * _kl(q.probabilities, m)


def wasserstein1(p: SpeedHistogram, q: SpeedHistogram) -> float:
    """1-Wasserstein distance [speed units] via the CDF-difference formula."""
    _check_edges(p, q)
    cdf_gap = np.cumsum(p.probabilities) - np.cumsum(q.probabilities)
    return float(np.sum(np.abs(cdf_gap)) * p.bin_width)


def bhattacharyya(p: SpeedHistogram, q: SpeedHistogram) -> float:
    """Bhattacharyya distance: -ln of the overlap coefficient."""
    _check_edges(p, q)
    coefficient = float(np.sum(np.sqrt(p.probabilities * q.probabilities)))
    return -math.log(coefficient)


def accuracy(sim_value: float, ref_value: float) -> float | None:
    """Relative-error complement in percent; None when the reference is zero."""
    if ref_value == 0:
        return None
    return 100.0 * (1.0 - abs(sim_value - ref_value) / ref_value)


@dataclass(frozen=True)
class SummaryStats:
    mean_speed_mps: float
    mean_trip_length_m: float
    vehicle_count: int

    @classmethod
    def from_output(cls, output) -> "SummaryStats":
        traces = output.traces
        if not traces:
            raise ValueError("no completed trips to summarize")
        return cls(
            mean_speed_mps=sum(t.mean_speed_mps for t in traces) / len(traces),
            mean_trip_length_m=sum(t.trip_length_m for t in traces) / len(traces),
            vehicle_count=len(traces),
        )


@dataclass(frozen=True)
class ValidationReport:
    twin: SummaryStats
    reference: SummaryStats
    speed_accuracy_pct: float
    trip_length_accuracy_pct: float
    count_accuracy_pct: float
    kl_nats: float
    js_nats: float
    wasserstein_mps: float
    bhattacharyya_dist: float
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def as_dict(self) -> dict:
        return {
            "conventions": self.conventions,
            "twin": vars(self.twin).copy(),
            "reference": vars(self.reference).copy(),
            "accuracy_pct": {
                "mean_speed": self.speed_accuracy_pct,
                "mean_trip_length": self.trip_length_accuracy_pct,
                "vehicle_count": self.count_accuracy_pct,
            },
            "divergence": {
                "kl_nats": self.kl_nats,
                "js_nats": self.js_nats,
                "wasserstein_mps": self.wasserstein_mps,
                "bhattacharyya": self.bhattacharyya_dist,
            },
        }


def divergence_suite(twin_speeds, ref_speeds) -> dict[str, float]:
    """All four divergences between two speed samples on shared bins."""
    p, q = build_histogram(twin_speeds, ref_speeds)
    return {
        "kl_nats": kl_divergence(p, q),
        "js_nats": js_divergence(p, q),
        "wasserstein_mps": wasserstein1(p, q),
        "bhattacharyya": bhattacharyya(p, q),
    }


def validation_report(twin_output, ref_output) -> ValidationReport:
    """Compare a twin run against a reference run on completed trips.

    Count accuracy is computed on exact integers, so it reads 100% only when
    the counts agree exactly.
    """
    twin_stats = SummaryStats.from_output(twin_output)
    ref_stats = SummaryStats.from_output(ref_output)
    divs = divergence_suite(twin_output.trip_mean_speeds(), ref_output.trip_mean_speeds())
    return ValidationReport(
        twin=twin_stats,
        reference=ref_stats,
        speed_accuracy_pct=accuracy(twin_stats.mean_speed_mps, ref_stats.mean_speed_mps),
        trip_length_accuracy_pct=accuracy(twin_stats.mean_trip_length_m,
                                          ref_stats.mean_trip_length_m),
        count_accuracy_pct=accuracy(twin_stats.vehicle_count, ref_stats.vehicle_count),
        kl_nats=divs["kl_nats"],
        js_nats=divs["js_nats"],
        wasserstein_mps=divs["wasserstein_mps"],
        bhattacharyya_dist=divs["bhattacharyya"],
    )
