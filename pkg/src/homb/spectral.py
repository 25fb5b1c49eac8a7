"""Frequency grids, SPDC spectra, comb-bin geometry and lineshapes.

Internal units: angular frequency offsets in rad/ps, delays in ps.  Ordinary
frequencies in GHz only appear at the boundary, converted with
:func:`ghz_to_rad_ps`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GeometryError, ResolutionError

log = logging.getLogger(__name__)

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
DEFAULT_MAX_OVERLAP = 1e-3
WEAK_BIN_FRACTION = 1e-6


def ghz_to_rad_ps(nu_ghz):
    return np.multiply(nu_ghz, 2e-3 * math.pi)


def rad_ps_to_ghz(omega):
    return np.divide(omega, 2e-3 * math.pi)


def _sinc(x):
    # unnormalized sin(x)/x
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform baseband grid symmetric about zero offset.

    Sample ``k`` sits at ``(k - (n_points - 1)/2) * step``; the half-integer
    offsets make ``omega[::-1] == -omega`` hold exactly in floating point.
    """

    span: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise DomainError(f"grid needs at least 2 points, got {self.n_points}")
        if not self.span > 0:
            raise DomainError(f"grid span must be positive, got {self.span}")

    @property
    def center_offset(self) -> float:
        return 0.0

    @property
    def step(self) -> float:
        return self.span / (self.n_points - 1)

    @cached_property
    def omega(self) -> np.ndarray:
        k = np.arange(self.n_points) - (self.n_points - 1) / 2.0
        return k * self.step

    def integrate(self, values) -> float | complex:
        """Trapezoid quadrature of samples on this grid."""
        return np.trapezoid(values, dx=self.step)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(n, 1)))))


class Convention(enum.Enum):
    """Placement of the degeneracy point relative to the comb lines."""

    HALF_OFFSET = "half_offset"  # degeneracy between bins -1 and +1
    CENTERED = "centered"  # degeneracy on the central bin p = 0


@dataclass(frozen=True)
class BinGrid:
    fsr: float
    convention: Convention = Convention.HALF_OFFSET
    occupied_indices: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.fsr > 0:
            raise DomainError(f"FSR must be positive, got {self.fsr}")
        object.__setattr__(self, "occupied_indices", frozenset(int(p) for p in self.occupied_indices))
        for p in self.occupied_indices:
            _check_index(p, self.convention)

    def with_indices(self, indices) -> "BinGrid":
        return BinGrid(self.fsr, self.convention, frozenset(indices))

    def physical_bins(self) -> list[int]:
        """Signed bin indices occupied by the pairs in ``occupied_indices``."""
        out = set()
        for p in self.occupied_indices:
            out.update({p, -p})
        return sorted(out, key=lambda q: bin_offset(q, self))


def _check_index(p: int, convention: Convention) -> None:
    if int(p) != p:
        raise DomainError(f"bin index must be an integer, got {p!r}")
    if convention is Convention.HALF_OFFSET and p == 0:
        raise DomainError("bin index 0 does not exist when the degeneracy point lies between bins")


def bin_offset(p: int, bins: BinGrid) -> float:
    """Baseband offset of bin ``p`` in rad/ps."""
    _check_index(p, bins.convention)
    if bins.convention is Convention.CENTERED:
        return p * bins.fsr
    if p > 0:
        return (p - 0.5) * bins.fsr
    return (p + 0.5) * bins.fsr


def pair_separation(p: int, bins: BinGrid) -> float:
    """Frequency spacing between the two bins of pair ``p`` (the fringe frequency)."""
    if p == 0:
        return 0.0
    return bin_offset(p, bins) - bin_offset(-p, bins)


def nearest_bin(omega, bins: BinGrid) -> np.ndarray:
    """Index of the bin whose passband contains each offset.

    Odd under ``omega -> -omega`` so that symmetric masks stay symmetric.
    """
    x = np.asarray(omega, dtype=float) / bins.fsr
    if bins.convention is Convention.CENTERED:
        return np.rint(x).astype(int)
    mag = np.floor(np.abs(x)).astype(int) + 1
    return np.where(x < 0, -mag, mag)


class LineshapeKind(enum.Enum):
    SINC_SQUARED = "sinc2"
    GAUSSIAN = "gaussian"
    SAMPLED = "sampled"
    FLAT = "flat"


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex amplitude as a function of baseband offset.

    Analytic kinds can be evaluated anywhere; ``scale`` multiplies the raw
    analytic form (it carries the grid-quadrature normalization for
    lineshapes).  Sampled functions only exist on their grid.
    """

    kind: LineshapeKind
    grid: FrequencyGrid
    intensity_fwhm: float | None = None
    scale: float = 1.0
    samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is LineshapeKind.SAMPLED:
            if self.samples is None or len(self.samples) != self.grid.n_points:
                raise DomainError("sampled spectral function needs one sample per grid point")
        elif self.kind is not LineshapeKind.FLAT and not (self.intensity_fwhm and self.intensity_fwhm > 0):
            raise DomainError(f"intensity FWHM must be positive, got {self.intensity_fwhm}")

    @property
    def sigma(self) -> float:
        """Standard deviation of the Gaussian intensity profile."""
        return self.intensity_fwhm * FWHM_TO_SIGMA

    @property
    def duration(self) -> float:
        """Parameter ``T`` of |f|^2 ~ sinc^2(omega T / 2)."""
        return 2.0 * SINC2_HALF_MAX / (0.5 * self.intensity_fwhm)

    def _raw(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind is LineshapeKind.GAUSSIAN:
            s = self.sigma
            return (2.0 * np.pi * s * s) ** -0.25 * np.exp(-omega * omega / (4.0 * s * s))
        if self.kind is LineshapeKind.SINC_SQUARED:
            t = self.duration
            return math.sqrt(t / (2.0 * np.pi)) * _sinc(omega * t / 2.0)
        if self.kind is LineshapeKind.FLAT:
            return np.ones_like(omega)
        raise DomainError("sampled spectral functions cannot be evaluated off their grid")

    def __call__(self, omega):
        return self.scale * self._raw(omega)

    @cached_property
    def values(self) -> np.ndarray:
        if self.kind is LineshapeKind.SAMPLED:
            return np.asarray(self.samples)
        return self(self.grid.omega)

    def at(self, omega: float) -> complex:
        """Value at a single offset; sampled functions are interpolated."""
        if self.kind is not LineshapeKind.SAMPLED:
            return complex(self(omega))
        w = self.grid.omega
        v = self.values
        return complex(np.interp(omega, w, v.real) + 1j * np.interp(omega, w, v.imag))

    def norm2(self) -> float:
        return float(self.grid.integrate(np.abs(self.values) ** 2))

    def even(self) -> bool:
        v = self.values
        return bool(np.allclose(v, v[::-1], rtol=0, atol=1e-15 * max(1.0, np.abs(v).max())))


SINC2_HALF_MAX = brentq(lambda x: math.sin(x) ** 2 / (x * x) - 0.5, 0.5, 2.5)


def make_lineshape(kind: LineshapeKind, intensity_fwhm: float, grid: FrequencyGrid) -> SpectralFunction:
    """Even bin lineshape normalized to unit L2 norm on ``grid``."""
    kind = LineshapeKind(kind)
    if kind not in (LineshapeKind.GAUSSIAN, LineshapeKind.SINC_SQUARED):
        raise DomainError(f"no analytic lineshape of kind {kind.value!r}")
    if not intensity_fwhm > 0:
        raise DomainError(f"intensity FWHM must be positive, got {intensity_fwhm}")
    if grid.span < 6.0 * intensity_fwhm:
        raise ResolutionError(f"grid span {grid.span:.4g} rad/ps is below 6x the FWHM {intensity_fwhm:.4g} rad/ps")
    per_fwhm = intensity_fwhm / grid.step
    if per_fwhm < 8:
        raise ResolutionError(f"only {per_fwhm:.1f} grid points across the FWHM, need 8")
    raw = SpectralFunction(kind, grid, intensity_fwhm)
    return SpectralFunction(kind, grid, intensity_fwhm, scale=1.0 / math.sqrt(raw.norm2()))


def spdc_duration(intensity_fwhm: float) -> float:
    """``T`` such that sinc^2(omega T/2) has the given intensity FWHM."""
    return SpectralFunction(LineshapeKind.SINC_SQUARED, FrequencyGrid(1.0, 2), intensity_fwhm).duration


def make_spdc_spectrum(intensity_fwhm: float, grid: FrequencyGrid) -> SpectralFunction:
    """Real, even two-photon amplitude with ``|Phi|^2 = sinc^2(omega T/2)``, peak 1."""
    if not intensity_fwhm > 0:
        raise DomainError(f"intensity FWHM must be positive, got {intensity_fwhm}")
    shape = SpectralFunction(LineshapeKind.SINC_SQUARED, grid, intensity_fwhm)
    return SpectralFunction(LineshapeKind.SINC_SQUARED, grid, intensity_fwhm, scale=1.0 / float(shape._raw(0.0)))


def flat_spectrum(grid: FrequencyGrid) -> SpectralFunction:
    return SpectralFunction(LineshapeKind.FLAT, grid)


def comb_grid(bins: BinGrid, intensity_fwhm: float, n_min: int = 2**14) -> FrequencyGrid:
    """Default grid for a carved comb: 8x the comb width, power-of-two size."""
    offsets = [abs(bin_offset(q, bins)) for q in bins.physical_bins()] or [0.0]
    width = 2.0 * max(offsets) + intensity_fwhm
    span = 8.0 * width
    n = next_pow2(max(n_min, int(math.ceil(16.0 * span / intensity_fwhm)) + 1))
    return FrequencyGrid(span, n)


def spdc_grid(intensity_fwhm: float, lobes: int = 256, n_points: int = 2**15) -> FrequencyGrid:
    """Grid for an unfiltered sinc^2 spectrum ending on a spectral zero.

    Truncating where sinc^2 has a double zero keeps the discarded tail from
    ringing into the delay domain.
    """
    t = spdc_duration(intensity_fwhm)
    return FrequencyGrid(2.0 * lobes * 2.0 * math.pi / t, n_points)


def measure_fwhm(x, y) -> float:
    """Full width at half maximum with linear interpolation of the crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    lo = i
    while lo > 0 and y[lo - 1] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi + 1] > half:
        hi += 1
    if lo == 0 or hi == len(y) - 1:
        raise ResolutionError("half-maximum crossing lies outside the sampled range")
    xl = np.interp(half, [y[lo - 1], y[lo]], [x[lo - 1], x[lo]])
    xr = np.interp(half, [y[hi + 1], y[hi]], [x[hi + 1], x[hi]])
    return float(xr - xl)


def bin_overlaps(bins: BinGrid, f: SpectralFunction) -> dict[tuple[int, int], float]:
    """Overlap integral of |f_p||f_q| for every pair of spectrally adjacent bins."""
    w = f.grid.omega
    phys = bins.physical_bins()
    out = {}
    for a, b in zip(phys, phys[1:]):
        fa = np.abs(f(w - bin_offset(a, bins)))
        fb = np.abs(f(w - bin_offset(b, bins)))
        out[(a, b)] = float(f.grid.integrate(fa * fb))
    return out


BinWeights = Mapping[int, float]


def carve_comb(
    phi: SpectralFunction,
    bins: BinGrid,
    f: SpectralFunction,
    max_overlap: float = DEFAULT_MAX_OVERLAP,
) -> dict[int, float]:
    """Relative pair probabilities ``K_p ~ |Phi(Omega_p)|^2``, summing to one.

    Raises :class:`GeometryError` when adjacent bins overlap by more than
    ``max_overlap``, since the closed-form traces assume disjoint bins.
    """
    overlaps = bin_overlaps(bins, f)
    if overlaps:
        (a, b), worst = max(overlaps.items(), key=lambda kv: kv[1])
        if worst > max_overlap:
            raise GeometryError(
                f"bins {a} and {b} overlap by {worst:.3g} (threshold {max_overlap:.3g})", overlap=worst
            )
    raw = {p: abs(phi.at(bin_offset(p, bins))) ** 2 for p in sorted(bins.occupied_indices)}
    total = sum(raw.values())
    if total <= 0:
        raise GeometryError("all occupied bins sit on spectral zeros", overlap=None)
    peak = max(raw.values())
    for p, k in raw.items():
        if k < WEAK_BIN_FRACTION * peak:
            log.warning("pair %d carries only %.3g of the strongest pair's weight", p, k / peak)
    return {p: k / total for p, k in raw.items()}


def marginal_spectrum(psi: SpectralFunction, photon: str = "B") -> tuple[np.ndarray, np.ndarray]:
    """Single-photon spectrum (GHz offset, intensity normalized to peak 1)."""
    inten = np.abs(np.asarray(psi.values)) ** 2
    if photon == "B":
        inten = inten[::-1]  # photon B sits at -Omega
    elif photon != "A":
        raise DomainError(f"photon must be 'A' or 'B', got {photon!r}")
    peak = inten.max()
    return rad_ps_to_ghz(psi.grid.omega), inten / peak if peak > 0 else inten


def scan_filter(nu, intensity, width: float, step: float, span: float | None = None, n_sub: int = 129):
    """Counts behind a rectangular passband of ``width`` scanned in ``step`` increments.

    Scan centers are multiples of ``step`` that keep the passband inside the
    sampled range (or inside ``+-span/2`` when given).
    """
    nu = np.asarray(nu, dtype=float)
    if not (width > 0 and step > 0):
        raise DomainError("filter width and scan step must be positive")
    lo, hi = nu[0] + width / 2, nu[-1] - width / 2
    if span is not None:
        lo, hi = max(lo, -span / 2), min(hi, span / 2)
    centers = step * np.arange(math.ceil(lo / step), math.floor(hi / step) + 1)
    offs = np.linspace(-width / 2, width / 2, n_sub)
    sub = np.interp(centers[:, None] + offs[None, :], nu, intensity)
    return centers, np.trapezoid(sub, offs, axis=1)
