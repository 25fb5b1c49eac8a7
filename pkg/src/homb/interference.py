"""HOM coincidence traces from three independent routes.

* closed form per comb-line pair, summed with pair probabilities;
* a single spectral integral over the sampled joint amplitude,
  ``C(tau) = 1 - Re int psi(W) psi*(-W) exp(-2i W tau) dW``;
* a two-time oracle that propagates the amplitude through the 50:50 beam
  splitter and integrates ``|<E_C(t+T) E_D(t)>|^2`` over both times.

All traces are normalized to the distinguishable-photon level: a perfect dip
reaches 0 and perfect antibunching reaches 2.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import AnalysisError, DomainError, SamplingError, TruncationError
from .spectral import BinGrid, LineshapeKind, SpectralFunction, pair_separation
from .states import (
    BfcState,
    CombLinePair,
    MixedState,
    PhaseMask,
    Placement,
    Polynomial,
    apply_phase_mask,
    joint_spectral_amplitude,
)

DELAY_CHUNK = 64


@dataclass(frozen=True)
class DelayAxis:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"delay step must be positive, got {self.step}")
        if self.stop < self.start:
            raise DomainError("delay axis stop lies before start")

    @property
    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


def _delays(delays) -> np.ndarray:
    if isinstance(delays, DelayAxis):
        return delays.values
    return np.atleast_1d(np.asarray(delays, dtype=float))


@dataclass(frozen=True, eq=False)
class HomTrace:
    delays: np.ndarray
    values: np.ndarray
    baseline: float = 1.0
    envelope_fwhm: float | None = None

    def __add__(self, other: "HomTrace") -> "HomTrace":
        return HomTrace(self.delays, self.values + other.values, self.baseline, self.envelope_fwhm)

    def scaled(self, k: float) -> "HomTrace":
        return HomTrace(self.delays, k * self.values, k * self.baseline, self.envelope_fwhm)


# ---------------------------------------------------------------- envelope


def envelope(lineshape: SpectralFunction, tau) -> np.ndarray:
    """E(tau) = int |f|^2 exp(-2i W tau) dW, real because |f|^2 is even."""
    tau = np.asarray(tau, dtype=float)
    if lineshape.kind is LineshapeKind.GAUSSIAN:
        s = lineshape.sigma
        return np.exp(-2.0 * s * s * tau * tau)
    if lineshape.kind is LineshapeKind.SINC_SQUARED:
        return np.clip(1.0 - 2.0 * np.abs(tau) / lineshape.duration, 0.0, None)
    inten = np.abs(lineshape.values) ** 2
    grid = lineshape.grid
    out = _spectral_transform(inten.astype(complex), grid.omega, grid.step, np.ravel(tau)).real
    return (out / grid.integrate(inten)).reshape(tau.shape)


def envelope_fwhm(lineshape: SpectralFunction) -> float:
    if lineshape.kind is LineshapeKind.GAUSSIAN:
        return 2.0 * math.sqrt(math.log(2.0) / 2.0) / lineshape.sigma
    if lineshape.kind is LineshapeKind.SINC_SQUARED:
        return lineshape.duration / 2.0
    raise DomainError("envelope width is only tabulated for analytic lineshapes")


# ---------------------------------------------------------------- closed form


def analytic_pair_trace(pair: CombLinePair, bins: BinGrid, lineshape: SpectralFunction, delays) -> HomTrace:
    """Normalized trace of one pair: ``1 - cos(s_p tau - alpha_p) E(tau)``."""
    tau = _delays(delays)
    s = pair_separation(pair.p, bins)
    alpha = 0.0 if pair.p == 0 else pair.alpha
    values = 1.0 - np.cos(s * tau - alpha) * envelope(lineshape, tau)
    return HomTrace(tau, values, 1.0, _fwhm_or_none(lineshape))


def _fwhm_or_none(lineshape):
    try:
        return envelope_fwhm(lineshape)
    except DomainError:
        return None


def superposition_trace(state: BfcState, delays) -> HomTrace:
    """Pair-probability-weighted sum of closed-form pair traces.

    Only ``|c_p|`` and ``alpha_p`` enter; coefficient phases are never read.
    Continuous masks contribute through their bin-center phases, which is
    exact unless photon B alone sees an odd polynomial phase: that shifts
    the envelope inside each bin, and only the sampled engines model it.
    """
    for m in state.masks:
        if m.placement is Placement.ARM_B and isinstance(m.spec, Polynomial) and (m.spec.phi1 or m.spec.phi3):
            raise DomainError("odd arm-B polynomial phase has no closed form; use the numeric engine")
    tau = _delays(delays)
    weights = state.pair_weights()
    total = np.zeros_like(tau)
    for t in state.effective_terms():
        total = total + weights[t.p] * analytic_pair_trace(t.pair, state.bins, state.lineshape, tau).values
    return HomTrace(tau, total, 1.0, _fwhm_or_none(state.lineshape))


# ---------------------------------------------------------------- spectral integral


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("HOMB_THREADS", "1")))
    except ValueError:
        return 1


def _spectral_transform(g: np.ndarray, omega: np.ndarray, step: float, tau: np.ndarray) -> np.ndarray:
    """Trapezoid sum of g(W) exp(-2i W tau) for every tau."""
    wts = np.full(len(omega), step)
    wts[0] = wts[-1] = 0.5 * step
    gw = g * wts

    def chunk(sl):
        return np.exp(-2j * np.outer(tau[sl], omega)) @ gw

    slices = [slice(i, i + DELAY_CHUNK) for i in range(0, len(tau), DELAY_CHUNK)]
    threads = _thread_count()
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(chunk, slices))
    else:
        parts = [chunk(sl) for sl in slices]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def numeric_trace(psi: SpectralFunction, delays, envelope_fwhm: float | None = None) -> HomTrace:
    """Trace of an arbitrary sampled joint amplitude by direct quadrature."""
    tau = _delays(delays)
    grid = psi.grid
    v = np.asarray(psi.values, dtype=complex)
    g = v * np.conj(v[::-1])  # grid is symmetric, so v[::-1] samples psi(-W)
    norm = grid.integrate(np.abs(v) ** 2)
    values = 1.0 - _spectral_transform(g, grid.omega, grid.step, tau).real / norm
    return HomTrace(tau, values, 1.0, envelope_fwhm)


# ---------------------------------------------------------------- two-time oracle


def _temporal_amplitude(psi: SpectralFunction, shift: float):
    """chi(s) = int psi(W) exp(i W shift) exp(-i W s) dW on the FFT time grid.

    Returns (s, chi) for s_j = j ds, j = -(n/2 - 1) .. n/2 - 1 so that the
    grid is symmetric and chi(-s) is available.
    """
    grid = psi.grid
    n = grid.n_points
    dw = grid.step
    w = grid.omega
    a = np.asarray(psi.values, dtype=complex) * np.exp(1j * w * shift)
    ds = 2.0 * math.pi / (n * dw)
    j = np.arange(-(n // 2 - 1), n // 2)
    spec = np.fft.fft(a)[j % n]
    # omega_k = (k - (n-1)/2) dw  ->  carrier factor for the half-sample origin
    chi = dw * spec * np.exp(1j * math.pi * j * (n - 1) / n)
    return j * ds, chi


def time_domain_oracle(
    psi: SpectralFunction, tau: float, window: float | None = None, n_t: int = 9, carrier: float = 0.0
) -> float:
    """Slow ground truth for a single delay.

    Builds the two-time detection amplitude at the two beam-splitter outputs,
    ``A(t + T, t) = [chi(T + tau) - chi(-T + tau)] / 2`` times the carrier,
    from the field operators, squares it on a (t, T) grid and integrates by
    trapezoid over the coincidence window ``window`` in t and the full
    temporal support in T.  Normalized by the same integral with the
    exchange term removed (distinguishable photons).

    Path A's delay enters as ``exp(-i w tau)`` so that positive ``tau`` has
    the same meaning as in :func:`numeric_trace`.
    """
    s, chi = _temporal_amplitude(psi, -tau)
    peak = np.abs(chi).max()
    edge = max(abs(chi[0]), abs(chi[-1]))
    if peak == 0 or edge > 1e-6 * peak:
        raise TruncationError(
            f"temporal window clips the wavepacket at tau={tau:g} ps (edge/peak = {edge / max(peak, 1e-300):.2e})"
        )
    direct = chi  # photon A to detector C, photon B to detector D
    exchanged = chi[::-1]  # photon A to detector D, photon B to detector C
    window = (s[-1] - s[0]) if window is None else window
    t = np.linspace(0.0, window, n_t)
    tt, ss = np.meshgrid(t, s, indexing="ij")
    phase = np.exp(-1j * carrier * (2.0 * tt + ss + tau))
    amp = 0.5 * (direct[None, :] - exchanged[None, :]) * phase
    dist = 0.25 * (np.abs(direct) ** 2 + np.abs(exchanged) ** 2)[None, :] * np.ones_like(tt)
    num = np.trapezoid(np.trapezoid(np.abs(amp) ** 2, s, axis=1), t)
    den = np.trapezoid(np.trapezoid(dist, s, axis=1), t)
    return float(num / den)


def oracle_trace(psi: SpectralFunction, delays, **kwargs) -> HomTrace:
    tau = _delays(delays)
    return HomTrace(tau, np.array([time_domain_oracle(psi, float(x), **kwargs) for x in tau]))


# ---------------------------------------------------------------- mixtures and averaging


def state_trace(state: BfcState, delays, engine: str = "analytic", spdc_model: str = "bin_center") -> HomTrace:
    if engine == "analytic":
        return superposition_trace(state, delays)
    psi = joint_spectral_amplitude(state, spdc_model=spdc_model)
    if engine == "numeric":
        return numeric_trace(psi, delays, _fwhm_or_none(state.lineshape))
    if engine == "oracle":
        tr = oracle_trace(psi, delays)
        return HomTrace(tr.delays, tr.values, 1.0, _fwhm_or_none(state.lineshape))
    raise DomainError(f"unknown engine {engine!r}")


def mixture_trace(mix: MixedState, delays, engine: str = "analytic") -> HomTrace:
    """Weighted sum of component traces (no cross terms exist in a mixture)."""
    tau = _delays(delays)
    total = np.zeros_like(tau)
    fwhm = None
    for w, s in mix.components:
        tr = state_trace(s, tau, engine)
        total = total + w * tr.values
        fwhm = fwhm or tr.envelope_fwhm
    return HomTrace(tau, total, 1.0, fwhm)


def phase_average_trace(state: BfcState, masks: Sequence[PhaseMask], delays, engine: str = "numeric") -> HomTrace:
    """Mean of traces over masks switched during one integration window."""
    masks = list(masks)
    if not masks:
        raise DomainError("need at least one mask to average over")
    tau = _delays(delays)
    total = np.zeros_like(tau)
    for m in masks:
        total = total + state_trace(apply_phase_mask(state, m), tau, engine).values
    return HomTrace(tau, total / len(masks), 1.0, _fwhm_or_none(state.lineshape))


# ---------------------------------------------------------------- analysis


def measured_baseline(trace: HomTrace, baseline_from: float | None = None) -> float:
    if baseline_from is None:
        if trace.envelope_fwhm is None:
            raise AnalysisError("trace carries no envelope width; pass baseline_from explicitly")
        baseline_from = 5.0 * trace.envelope_fwhm
    far = np.abs(trace.delays) >= baseline_from
    if far.sum() < 3:
        raise AnalysisError(f"fewer than 3 delays beyond {baseline_from:.4g} ps to establish a baseline")
    return float(np.mean(trace.values[far]))


def visibility(trace: HomTrace, baseline_from: float | None = None) -> tuple[float, float]:
    """(dip visibility, peak visibility) relative to the far-delay baseline."""
    b = measured_baseline(trace, baseline_from)
    v = trace.values
    return float((b - v.min()) / b), float((v.max() - b) / b)


def trace_fourier(
    trace: HomTrace,
    max_fringe_ghz: float | None = None,
    min_fringe_ghz: float | None = None,
    pad: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Fourier magnitude of ``baseline - values`` against fringe frequency in GHz."""
    tau = trace.delays
    if len(tau) < 4:
        raise AnalysisError("trace too short for a Fourier analysis")
    step = float(tau[1] - tau[0])
    if max_fringe_ghz is not None and step > 1.0 / (4.0 * max_fringe_ghz * 1e-3):
        raise SamplingError(f"delay step {step:g} ps aliases fringes up to {max_fringe_ghz:g} GHz")
    span = float(tau[-1] - tau[0])
    if min_fringe_ghz is not None and span < 4.0 / (min_fringe_ghz * 1e-3):
        raise AnalysisError(f"delay span {span:g} ps covers fewer than 4 periods at {min_fringe_ghz:g} GHz")
    y = trace.baseline - trace.values
    n = pad * len(y)
    mag = np.abs(np.fft.rfft(y, n)) * step
    freq = np.fft.rfftfreq(n, step) * 1e3
    return freq, mag


def fourier_peaks(freq: np.ndarray, mag: np.ndarray, rel_height: float = 0.05) -> np.ndarray:
    """Locations (GHz) of local maxima above ``rel_height`` of the largest."""
    idx, _ = find_peaks(mag, height=rel_height * mag.max())
    if mag[0] >= rel_height * mag.max() and mag[0] > mag[1]:
        idx = np.concatenate([[0], idx])
    return freq[idx]


def fringe_frequencies_ghz(state: BfcState) -> dict[int, float]:
    return {p: pair_separation(p, state.bins) / (2.0 * math.pi) * 1e3 for p in state.indices}
