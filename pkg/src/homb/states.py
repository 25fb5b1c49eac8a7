"""Comb-line pairs, superpositions, mixtures and pulse-shaper phase masks.

A pure state is a list of pair terms ``c_p |psi_p(alpha_p)>`` together with
the comb it is carved from.  Phase masks are kept as spectral phase functions
and applied to the sampled joint amplitude; their bin-center values are
folded into the bookkeeping view returned by :meth:`BfcState.effective_terms`.

The joint amplitude is flattened onto the anti-diagonal: ``psi(Omega)`` is the
amplitude for photon A at ``w0 + Omega`` and photon B at ``w0 - Omega``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ResolutionError
from .spectral import (
    DEFAULT_MAX_OVERLAP,
    BinGrid,
    Convention,
    FrequencyGrid,
    LineshapeKind,
    SpectralFunction,
    bin_offset,
    carve_comb,
    comb_grid,
    flat_spectrum,
    ghz_to_rad_ps,
    make_lineshape,
    make_spdc_spectrum,
    nearest_bin,
)

TWO_PI = 2.0 * math.pi
# {0, pi/12, pi/6, ..., 2pi}
PHASE_STEPS = tuple(k * math.pi / 12.0 for k in range(25))


class Placement(enum.Enum):
    ARM_B = "arm_b"  # shaper acts on photon B only
    BEFORE_PBS = "before_pbs"  # shaper acts on both photons


@dataclass(frozen=True)
class PerBin:
    """Piecewise-constant phase: every frequency in bin ``q`` gets ``phases[q]``."""

    phases: Mapping[int, float]

    def center_phase(self, q: int, bins: BinGrid) -> float:
        return float(self.phases.get(q, 0.0))

    def photon_phase(self, nu, bins: BinGrid) -> np.ndarray:
        idx = nearest_bin(nu, bins)
        out = np.zeros(np.shape(nu))
        for q, theta in self.phases.items():
            out[idx == q] = theta
        return out


@dataclass(frozen=True)
class Polynomial:
    """phi(W) = phi1 W + phi2 W^2 / 2 + phi3 W^3 / 6 (ps, ps^2, ps^3)."""

    phi1: float = 0.0
    phi2: float = 0.0
    phi3: float = 0.0

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        return self.phi1 * w + 0.5 * self.phi2 * w * w + self.phi3 * w * w * w / 6.0

    def center_phase(self, q: int, bins: BinGrid) -> float:
        return float(self(bin_offset(q, bins)))

    def photon_phase(self, nu, bins: BinGrid) -> np.ndarray:
        return self(nu)


def draw_phases(seed: int, n: int, allowed: Sequence[float] = PHASE_STEPS) -> np.ndarray:
    """``n`` phases drawn uniformly from ``allowed``; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    return np.asarray(allowed)[rng.integers(0, len(allowed), size=n)]


@dataclass(frozen=True)
class RandomPerBin:
    seed: int
    allowed: tuple = PHASE_STEPS

    def resolve(self, indices: Iterable[int]) -> PerBin:
        idx = sorted(indices)
        draws = draw_phases(self.seed, len(idx), self.allowed)
        return PerBin({q: float(t) for q, t in zip(idx, draws)})


MaskSpec = Union[PerBin, Polynomial, RandomPerBin]


@dataclass(frozen=True)
class PhaseMask:
    placement: Placement
    spec: MaskSpec

    def joint_phase(self, omega, bins: BinGrid) -> np.ndarray:
        """Phase acquired by the joint amplitude at anti-diagonal offset ``omega``."""
        spec = self.spec
        if isinstance(spec, RandomPerBin):
            raise DomainError("random masks must be resolved against a state before use")
        if self.placement is Placement.ARM_B:
            return spec.photon_phase(-np.asarray(omega), bins)
        return spec.photon_phase(omega, bins) + spec.photon_phase(-np.asarray(omega), bins)


def random_phase_mask(seed: int, placement: Placement = Placement.BEFORE_PBS) -> PhaseMask:
    return PhaseMask(Placement(placement), RandomPerBin(int(seed)))


@dataclass(frozen=True)
class CombLinePair:
    p: int
    alpha: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise DomainError(f"pair index must be a non-negative integer, got {self.p!r}")
        alpha = 0.0 if self.p == 0 else math.fmod(self.alpha, TWO_PI)
        if alpha < 0:
            alpha += TWO_PI
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class Term:
    pair: CombLinePair
    c: complex

    @property
    def p(self) -> int:
        return self.pair.p

    @property
    def alpha(self) -> float:
        return self.pair.alpha


@dataclass(frozen=True)
class Comb:
    """Carving parameters shared by the states built on one comb (rad/ps)."""

    fsr: float
    bin_fwhm: float
    convention: Convention = Convention.HALF_OFFSET
    lineshape_kind: LineshapeKind = LineshapeKind.GAUSSIAN
    spdc_fwhm: float | None = None
    max_overlap: float = DEFAULT_MAX_OVERLAP
    grid: FrequencyGrid | None = None

    def bins(self, indices=()) -> BinGrid:
        return BinGrid(self.fsr, self.convention, frozenset(indices))


def make_comb(
    fsr_ghz: float = 90.0,
    bin_fwhm_ghz: float = 17.0,
    convention: Convention = Convention.HALF_OFFSET,
    spdc_fwhm_ghz: float | None = None,
    lineshape_kind: LineshapeKind = LineshapeKind.GAUSSIAN,
    max_overlap: float = DEFAULT_MAX_OVERLAP,
    grid: FrequencyGrid | None = None,
) -> Comb:
    """Comb parameters given in GHz, converted to internal units."""
    return Comb(
        fsr=float(ghz_to_rad_ps(fsr_ghz)),
        bin_fwhm=float(ghz_to_rad_ps(bin_fwhm_ghz)),
        convention=Convention(convention),
        lineshape_kind=LineshapeKind(lineshape_kind),
        spdc_fwhm=None if spdc_fwhm_ghz is None else float(ghz_to_rad_ps(spdc_fwhm_ghz)),
        max_overlap=max_overlap,
        grid=grid,
    )


DEFAULT_COMB = make_comb()


@dataclass(frozen=True, eq=False)
class BfcState:
    terms: tuple
    comb: Comb = DEFAULT_COMB
    masks: tuple = ()

    @property
    def indices(self) -> list[int]:
        return [t.p for t in self.terms]

    @cached_property
    def bins(self) -> BinGrid:
        return self.comb.bins(self.indices)

    @cached_property
    def grid(self) -> FrequencyGrid:
        if self.comb.grid is not None:
            return self.comb.grid
        return comb_grid(self.bins, self.comb.bin_fwhm)

    @cached_property
    def lineshape(self) -> SpectralFunction:
        return make_lineshape(self.comb.lineshape_kind, self.comb.bin_fwhm, self.grid)

    @cached_property
    def spdc(self) -> SpectralFunction:
        if self.comb.spdc_fwhm is None:
            return flat_spectrum(self.grid)
        return make_spdc_spectrum(self.comb.spdc_fwhm, self.grid)

    @cached_property
    def bin_weights(self) -> dict[int, float]:
        return carve_comb(self.spdc, self.bins, self.lineshape, self.comb.max_overlap)

    def pair_weights(self) -> dict[int, float]:
        """Probability of each pair, ``|c_p|^2 K_p`` renormalized.  Reads only ``|c_p|``."""
        k = self.bin_weights
        raw = {t.p: abs(t.c) ** 2 * k[t.p] for t in self.terms}
        total = sum(raw.values())
        return {p: v / total for p, v in raw.items()}

    def effective_terms(self) -> tuple:
        """Terms with every applied mask reduced to its bin-center phases."""
        out = []
        for t in self.terms:
            p = t.p
            dc = 0.0
            dalpha = 0.0
            for m in self.masks:
                th_p = m.spec.center_phase(p, self.bins)
                th_m = m.spec.center_phase(-p, self.bins)
                if m.placement is Placement.ARM_B:
                    # |-p,p> has photon B in bin p, |p,-p> has it in bin -p
                    dc += th_p
                    dalpha += th_m - th_p
                else:
                    dc += th_p + th_m
            out.append(Term(CombLinePair(p, t.alpha + dalpha), t.c * cmath.exp(1j * dc)))
        return tuple(out)

    def intra_pair_phases(self) -> dict[int, float]:
        return {t.p: t.alpha for t in self.effective_terms()}

    @property
    def has_masks(self) -> bool:
        return bool(self.masks)


@dataclass(frozen=True, eq=False)
class MixedState:
    components: tuple  # of (weight, BfcState)

    @property
    def weights(self) -> list[float]:
        return [w for w, _ in self.components]


def _check_comb_covers(indices, comb: Comb) -> None:
    if comb.grid is None:
        return
    bins = comb.bins(indices)
    edge = max(abs(bin_offset(q, bins)) for q in bins.physical_bins()) + 3.0 * comb.bin_fwhm
    if edge > comb.grid.span / 2:
        raise ResolutionError(f"grid half-span {comb.grid.span / 2:.4g} rad/ps does not cover bins out to {edge:.4g}")


def make_pair(p: int, alpha: float = 0.0, comb: Comb | None = None) -> BfcState:
    """Single comb-line pair ``|-p,p> + e^{i alpha}|p,-p>``."""
    return make_superposition([(p, 1.0, alpha)], comb)


def make_superposition(terms, comb: Comb | None = None) -> BfcState:
    """Normalized ``sum_p c_p |psi_p(alpha_p)>`` from ``(p, c_p, alpha_p)`` triples."""
    comb = DEFAULT_COMB if comb is None else comb
    terms = list(terms)
    if not terms:
        raise DomainError("a superposition needs at least one term")
    seen = set()
    built = []
    for p, c, alpha in terms:
        pair = CombLinePair(p, alpha)
        if pair.p in seen:
            raise DomainError(f"pair {pair.p} appears twice")
        seen.add(pair.p)
        comb.bins([pair.p])  # validates the index against the convention
        built.append((pair, complex(c)))
    norm = math.sqrt(sum(abs(c) ** 2 for _, c in built))
    if norm == 0:
        raise DomainError("all coefficients are zero")
    _check_comb_covers(seen, comb)
    return BfcState(tuple(Term(pair, c / norm) for pair, c in built), comb)


def make_mixture(components) -> MixedState:
    """Convex combination of pure states from ``(weight, state)`` pairs."""
    components = [(float(w), s) for w, s in components]
    if not components:
        raise DomainError("a mixture needs at least one component")
    if any(w < 0 for w, _ in components):
        raise DomainError("mixture weights must be non-negative")
    total = sum(w for w, _ in components)
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise DomainError(f"mixture weights sum to {total}, expected 1")
    return MixedState(tuple((w / total, s) for w, s in components))


def mixture_of_pairs(state: BfcState) -> MixedState:
    """Incoherent counterpart of a superposition: each pair with its own probability."""
    weights = state.pair_weights()
    return make_mixture(
        (weights[t.p], BfcState((Term(t.pair, 1.0),), state.comb, state.masks)) for t in state.terms
    )


def apply_phase_mask(state: BfcState, mask: PhaseMask) -> BfcState:
    spec = mask.spec
    phys = state.bins.physical_bins()
    if isinstance(spec, RandomPerBin):
        mask = PhaseMask(mask.placement, spec.resolve(phys))
    elif isinstance(spec, PerBin):
        missing = set(spec.phases) - set(phys)
        if missing:
            raise DomainError(f"mask addresses bins {sorted(missing)} that the state does not occupy")
    return replace(state, masks=state.masks + (mask,))


def joint_spectral_amplitude(
    state: BfcState, grid: FrequencyGrid | None = None, spdc_model: str = "bin_center"
) -> SpectralFunction:
    """Sampled, L2-normalized anti-diagonal amplitude ``psi(Omega)``.

    ``spdc_model="bin_center"`` weights each bin by ``Phi(Omega_p)``, the
    approximation under which the closed-form traces hold; ``"full"``
    multiplies by ``Phi(Omega)`` point by point.
    """
    if isinstance(state, MixedState):
        raise DomainError("a mixed state has no single joint amplitude; treat its components separately")
    if spdc_model not in ("bin_center", "full"):
        raise DomainError(f"unknown spdc model {spdc_model!r}")
    grid = state.grid if grid is None else grid
    if state.comb.bin_fwhm / grid.step < 8:
        raise ResolutionError(f"grid step {grid.step:.4g} rad/ps does not resolve the bin lineshape")
    w = grid.omega
    f = state.lineshape
    bins = state.bins
    psi = np.zeros(grid.n_points, dtype=complex)
    for t in state.terms:
        p = t.p
        if p == 0:
            mode = f(w - bin_offset(0, bins)).astype(complex)
        else:
            mode = (f(w - bin_offset(-p, bins)) + cmath.exp(1j * t.alpha) * f(w - bin_offset(p, bins))) / math.sqrt(2.0)
        if spdc_model == "bin_center":
            psi += t.c * state.spdc.at(bin_offset(p, bins)) * mode
        else:
            psi += t.c * mode
    if spdc_model == "full":
        psi *= state.spdc(w) if state.spdc.kind is not LineshapeKind.SAMPLED else state.spdc.values
    if state.masks:
        phase = np.zeros(grid.n_points)
        for m in state.masks:
            phase = phase + m.joint_phase(w, bins)
        psi *= np.exp(1j * phase)
    norm = math.sqrt(grid.integrate(np.abs(psi) ** 2))
    if norm == 0:
        raise DomainError("joint amplitude vanishes on the grid")
    return SpectralFunction(LineshapeKind.SAMPLED, grid, samples=psi / norm)


def unfiltered_amplitude(phi: SpectralFunction) -> SpectralFunction:
    """Joint amplitude of the bare down-conversion spectrum (no carving)."""
    v = np.asarray(phi.values, dtype=complex)
    return SpectralFunction(LineshapeKind.SAMPLED, phi.grid, samples=v / math.sqrt(phi.grid.integrate(np.abs(v) ** 2)))


def apply_spectral_phase(psi: SpectralFunction, mask: PhaseMask, bins: BinGrid | None = None) -> SpectralFunction:
    """Apply a continuous mask directly to a sampled amplitude."""
    if isinstance(mask.spec, (PerBin, RandomPerBin)) and bins is None:
        raise DomainError("per-bin masks need a bin grid")
    phase = mask.joint_phase(psi.grid.omega, bins)
    return SpectralFunction(LineshapeKind.SAMPLED, psi.grid, samples=psi.values * np.exp(1j * phase))


def random_superposition(rng: np.random.Generator, max_index: int = 8, comb: Comb | None = None) -> BfcState:
    """Random pure state over a random subset of pairs ``1..max_index``.

    Without ``comb`` the Gaussian-bin comb is drawn as well, including
    whether the source bandwidth is finite.
    """
    if comb is None:
        comb = make_comb(
            fsr_ghz=90.0,
            bin_fwhm_ghz=float(rng.choice([12.0, 17.0])),
            convention=rng.choice(list(Convention)),
            spdc_fwhm_ghz=None if rng.random() < 0.5 else 1500.0,
        )
    k = int(rng.integers(1, max_index + 1))
    indices = sorted(rng.choice(np.arange(1, max_index + 1), size=k, replace=False).tolist())
    terms = []
    for p in indices:
        c = complex(rng.normal(), rng.normal())
        terms.append((int(p), c, float(rng.uniform(0, 2 * np.pi))))
    if comb.convention is Convention.CENTERED and rng.random() < 0.5:
        terms.append((0, complex(rng.normal(), rng.normal()), 0.0))
    return make_superposition(terms, comb)
