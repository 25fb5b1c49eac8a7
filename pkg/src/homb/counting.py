"""Photon-counting layer: Poisson coincidences, jitter capture, accidentals.

Turns a normalized trace into integer count records the way a
time-interval analyzer with a single coincidence histogram bin would log
them.  Every delay gets its own random stream derived from the master seed
and the delay index, so records are reproducible and order independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import AnalysisError, DomainError
from .interference import HomTrace
from .spectral import FWHM_TO_SIGMA


@dataclass(frozen=True)
class DetectorModel:
    combined_jitter_fwhm: float = 110.0  # ps
    efficiency_product: float = 1.0
    dark_coincidence_rate: float = 0.0  # counts/s

    def __post_init__(self):
        if not 0 < self.efficiency_product <= 1:
            raise DomainError(f"efficiency product must lie in (0, 1], got {self.efficiency_product}")
        if self.combined_jitter_fwhm < 0 or self.dark_coincidence_rate < 0:
            raise DomainError("jitter and dark rate must be non-negative")


@dataclass(frozen=True)
class CountingConfig:
    pair_rate: float  # pairs/s
    integration_time: float = 1.0  # s per delay step
    histogram_bin_width: float = 256.0  # ps
    accidental_rate: float = 0.0  # counts/s
    seed: int = 0
    wavepacket_fwhm: float = 60.0  # ps
    norm_factor: float = 1.0

    def __post_init__(self):
        if min(self.pair_rate, self.integration_time, self.accidental_rate, self.wavepacket_fwhm) < 0:
            raise DomainError("rates and times must be non-negative")
        if not self.histogram_bin_width > 0:
            raise DomainError("histogram bin width must be positive")


@dataclass(frozen=True)
class CountRecord:
    delay: float
    counts: int
    sigma: float

    @property
    def value(self) -> float:
        return float(self.counts)


@dataclass(frozen=True)
class NetCountRecord:
    """Background-subtracted record; ``net`` keeps the unclamped value."""

    delay: float
    counts: float  # clamped at zero for display
    net: float
    sigma: float
    clamped: bool

    @property
    def value(self) -> float:
        return self.net


def capture_probability(jitter_fwhm: float, wavepacket_fwhm: float, bin_width: float) -> float:
    """Probability that a true coincidence lands in the centered histogram bin.

    The arrival-time difference is Gaussian with jitter and wavepacket FWHMs
    added in quadrature.
    """
    if min(jitter_fwhm, wavepacket_fwhm, bin_width) < 0:
        raise DomainError("timescales must be non-negative")
    sigma = math.hypot(jitter_fwhm, wavepacket_fwhm) * FWHM_TO_SIGMA
    if sigma == 0 or math.isinf(bin_width):
        return 1.0
    return float(erf(0.5 * bin_width / (sigma * math.sqrt(2.0))))


def background_mean(det: DetectorModel, cfg: CountingConfig) -> float:
    return (cfg.accidental_rate + det.dark_coincidence_rate) * cfg.integration_time


def expected_counts(trace: HomTrace, det: DetectorModel, cfg: CountingConfig) -> np.ndarray:
    """Mean coincidences per delay step, signal plus uncorrelated background."""
    cap = capture_probability(det.combined_jitter_fwhm, cfg.wavepacket_fwhm, cfg.histogram_bin_width)
    # the 1/2 is the coincidence probability of distinguishable photons
    signal = cfg.pair_rate * det.efficiency_product * cap * cfg.integration_time * 0.5 * cfg.norm_factor
    # quadrature roundoff can push a perfect dip a hair below zero
    return np.maximum(signal * np.asarray(trace.values) / trace.baseline, 0.0) + background_mean(det, cfg)


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def simulate_counts(trace: HomTrace, det: DetectorModel, cfg: CountingConfig) -> list[CountRecord]:
    mean = expected_counts(trace, det, cfg)
    out = []
    for i, (tau, mu) in enumerate(zip(trace.delays, mean)):
        n = int(_stream(cfg.seed, i).poisson(mu))
        out.append(CountRecord(float(tau), n, math.sqrt(n)))
    return out


def subtract_background(records, accidental_mean: float, accidental_variance: float | None = None):
    """Remove a known mean background from raw records.

    The error bar adds the background variance (Poisson by default) to the
    raw count variance.
    """
    if accidental_mean < 0:
        raise DomainError("accidental mean must be non-negative")
    var = accidental_mean if accidental_variance is None else accidental_variance
    out = []
    for r in records:
        net = r.counts - accidental_mean
        out.append(NetCountRecord(r.delay, max(net, 0.0), net, math.sqrt(r.counts + var), net < 0))
    return out


def estimate_visibility(records, baseline_from: float | None = None) -> tuple[float, float]:
    """Dip visibility and its uncertainty from count records.

    The baseline is the mean over records with ``|delay| >= baseline_from``
    (default: the outer fifth of the scanned span on each side).  The
    uncertainty propagates the Poisson sigma of a single baseline record and
    of the minimum record through ``(B - m) / B`` with ``B`` as fixed
    normalization, which is how per-point error bars are usually quoted.
    """
    records = list(records)
    if not records:
        raise AnalysisError("no records")
    delays = np.array([r.delay for r in records])
    vals = np.array([r.value for r in records])
    sig = np.array([r.sigma for r in records])
    if baseline_from is None:
        lo, hi = delays.min(), delays.max()
        baseline_from = max(abs(lo), abs(hi)) - 0.2 * (hi - lo)
    far = np.abs(delays) >= baseline_from
    if far.sum() < 3:
        raise AnalysisError(f"need at least 3 baseline records, found {int(far.sum())}")
    b = float(vals[far].mean())
    if b <= 0:
        raise AnalysisError("baseline is not positive")
    i = int(np.argmin(vals))
    sigma_b = float(np.sqrt(np.mean(sig[far] ** 2)))
    v = (b - vals[i]) / b
    return float(v), float(math.hypot(sigma_b, sig[i]) / b)
