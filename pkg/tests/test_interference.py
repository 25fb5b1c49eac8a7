import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from homb.errors import AnalysisError, DomainError, SamplingError, TruncationError
from homb.interference import (
    DelayAxis,
    analytic_pair_trace,
    envelope,
    envelope_fwhm,
    fourier_peaks,
    fringe_frequencies_ghz,
    mixture_trace,
    numeric_trace,
    oracle_trace,
    phase_average_trace,
    state_trace,
    superposition_trace,
    time_domain_oracle,
    trace_fourier,
    visibility,
)
from homb.spectral import Convention, FrequencyGrid, LineshapeKind, SpectralFunction, bin_offset, measure_fwhm
from homb.states import (
    BfcState,
    CombLinePair,
    Term,
    PerBin,
    PhaseMask,
    Placement,
    Polynomial,
    apply_phase_mask,
    joint_spectral_amplitude,
    make_comb,
    make_mixture,
    make_pair,
    make_superposition,
    random_superposition,
)

TAU = np.linspace(-120.0, 120.0, 481)


def test_delay_axis_inclusive():
    assert np.allclose(DelayAxis(-1.0, 1.0, 0.5).values, [-1, -0.5, 0, 0.5, 1])
    with pytest.raises(DomainError):
        DelayAxis(0, 1, 0)


# closed form -----------------------------------------------------------------


def test_gaussian_envelope_fwhm_17ghz():
    s = make_pair(1)
    # 2 ln2 / (pi * 0.017 ps^-1)
    assert envelope_fwhm(s.lineshape) == pytest.approx(2 * math.log(2) / (math.pi * 0.017), rel=1e-12)
    assert envelope_fwhm(s.lineshape) == pytest.approx(26.0, abs=0.05)
    tau = np.linspace(-40, 40, 8001)
    assert measure_fwhm(tau, envelope(s.lineshape, tau)) == pytest.approx(25.96, abs=0.02)


def test_envelope_bounds():
    s = make_pair(1)
    e = envelope(s.lineshape, TAU)
    assert envelope(s.lineshape, 0.0) == pytest.approx(1.0)
    assert np.all(np.abs(e) <= 1.0 + 1e-15)


def test_sampled_envelope_matches_gaussian():
    s = make_pair(1)
    f = s.lineshape
    sampled = SpectralFunction(LineshapeKind.SAMPLED, f.grid, samples=f.values)
    assert np.allclose(envelope(sampled, TAU[::8]), envelope(f, TAU[::8]), atol=1e-9)


def test_pair_trace_dip_and_peak():
    s = make_pair(1)
    dip = analytic_pair_trace(CombLinePair(1, 0.0), s.bins, s.lineshape, [0.0])
    peak = analytic_pair_trace(CombLinePair(1, math.pi), s.bins, s.lineshape, [0.0])
    assert dip.values[0] == pytest.approx(0.0, abs=1e-15)
    assert peak.values[0] == pytest.approx(2.0)


def test_equal_superposition_dips_at_zero():
    s = make_superposition([(1, 1, 0), (2, 1, 0)])
    assert superposition_trace(s, [0.0]).values[0] == pytest.approx(0.0, abs=1e-15)


def test_fringe_frequencies_follow_geometry():
    half = make_superposition([(1, 1, 0), (2, 1, 0)])
    cent = make_superposition([(1, 1, 0), (2, 1, 0)], make_comb(convention=Convention.CENTERED))
    assert fringe_frequencies_ghz(half) == pytest.approx({1: 90.0, 2: 270.0})
    assert fringe_frequencies_ghz(cent) == pytest.approx({1: 180.0, 2: 360.0})


_exact_rotations = st.sampled_from([lambda c: c, lambda c: 1j * c, lambda c: -c, lambda c: -1j * c, np.conj])


@given(st.lists(_exact_rotations, min_size=8, max_size=8), st.integers(0, 10**6))
def test_coefficient_phases_never_read(rotations, seed):
    # rotations by multiples of pi/2 and conjugation keep |c| bit-identical
    base = random_superposition(np.random.default_rng(seed))
    terms = tuple(Term(t.pair, complex(r(t.c))) for t, r in zip(base.terms, rotations))
    rotated = BfcState(terms, base.comb)
    a = superposition_trace(base, TAU).values
    b = superposition_trace(rotated, TAU).values
    assert np.array_equal(a, b)


@given(st.lists(st.floats(0, 2 * math.pi), min_size=8, max_size=8), st.integers(0, 10**6))
def test_coefficient_phases_invisible_numerically(phases, seed):
    base = random_superposition(np.random.default_rng(seed), max_index=4)
    rotated = make_superposition(
        [(t.p, t.c * cmath.exp(1j * ph), t.alpha) for t, ph in zip(base.terms, phases)], base.comb
    )
    assert np.abs(superposition_trace(base, TAU).values - superposition_trace(rotated, TAU).values).max() < 1e-12
    tau = TAU[::8]
    assert np.abs(state_trace(base, tau, "numeric").values - state_trace(rotated, tau, "numeric").values).max() < 1e-6


def test_mixture_weights_combine_pair_traces():
    c1 = state_trace(make_pair(1), TAU).values
    c2 = state_trace(make_pair(2), TAU).values
    mix = make_mixture([(0.3, make_pair(1)), (0.7, make_pair(2))])
    assert np.allclose(mixture_trace(mix, TAU).values, 0.3 * c1 + 0.7 * c2, atol=1e-15)
    single = make_mixture([(1.0, make_pair(2))])
    assert np.array_equal(mixture_trace(single, TAU).values, c2)


# numeric engine ---------------------------------------------------------------


@pytest.mark.parametrize("convention", list(Convention))
@pytest.mark.parametrize("p,alpha", [(1, 0.0), (2, math.pi / 3), (3, math.pi)])
def test_numeric_matches_closed_form_gaussian(convention, p, alpha):
    s = make_pair(p, alpha, make_comb(convention=convention))
    a = analytic_pair_trace(CombLinePair(p, alpha), s.bins, s.lineshape, TAU).values
    n = numeric_trace(joint_spectral_amplitude(s), TAU).values
    assert np.abs(a - n).max() < 1e-6


@pytest.mark.parametrize("p", [1, 2, 4])
def test_sinc_lineshape_closed_form_error_bounded_by_overlap(p):
    # sinc^2 bins have 1/W amplitude tails; the closed form drops the
    # f_{-p} f_p cross term, whose magnitude is at most twice their overlap
    s = make_pair(p, 0.4, make_comb(lineshape_kind=LineshapeKind.SINC_SQUARED, max_overlap=1.0))
    f = s.lineshape
    w = f.grid.omega
    lo, hi = (np.abs(f(w - bin_offset(q, s.bins))) for q in (-p, p))
    bound = 2.0 * f.grid.integrate(lo * hi)
    a = state_trace(s, TAU, "analytic").values
    n = state_trace(s, TAU, "numeric").values
    assert np.abs(a - n).max() <= bound + 1e-6


def test_numeric_thread_pool_is_deterministic(monkeypatch):
    psi = joint_spectral_amplitude(make_superposition([(1, 1, 0), (2, 1, 0.5)]))
    serial = numeric_trace(psi, TAU).values
    monkeypatch.setenv("HOMB_THREADS", "4")
    assert np.array_equal(numeric_trace(psi, TAU).values, serial)


@given(st.integers(0, 2**32 - 1))
def test_real_coefficients_zero_alpha_give_symmetric_trace(seed):
    rng = np.random.default_rng(seed)
    s = random_superposition(rng, max_index=4)
    s = make_superposition([(t.p, abs(t.c) * rng.choice([-1, 1]), 0.0) for t in s.terms], s.comb)
    tau = np.linspace(0, 100, 101)
    pos = state_trace(s, tau, "numeric").values
    neg = state_trace(s, -tau, "numeric").values
    assert np.abs(pos - neg).max() < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_trace_range(seed):
    s = random_superposition(np.random.default_rng(seed), max_index=5)
    v = state_trace(s, TAU[::4], "numeric").values
    assert v.min() >= -1e-9 and v.max() <= 2 + 1e-9


def test_baseline_far_from_overlap():
    s = make_superposition([(1, 1, 0.3), (2, 1, 1.0)])
    tr = state_trace(s, np.linspace(130, 200, 15), "numeric")
    assert np.abs(tr.values - 1.0).max() < 1e-3


# oracle --------------------------------------------------------------------


def test_oracle_pair_extremes():
    psi = joint_spectral_amplitude(make_pair(1))
    assert abs(time_domain_oracle(psi, 0.0)) < 1e-4
    assert abs(time_domain_oracle(psi, 200.0) - 1.0) < 1e-4


def test_oracle_matches_numeric_with_mask():
    s = apply_phase_mask(make_superposition([(1, 1, 0.2), (2, 0.7, 1.0)]), PhaseMask(Placement.ARM_B, PerBin({-2: 1.0})))
    psi = joint_spectral_amplitude(s)
    tau = np.linspace(-30, 30, 7)
    assert np.abs(oracle_trace(psi, tau).values - numeric_trace(psi, tau).values).max() < 1e-4


def test_oracle_flags_truncated_window():
    # coarse spectral sampling: the temporal support 2 pi / step clips the wavepacket
    g = FrequencyGrid(20.0, 64)
    psi = SpectralFunction(LineshapeKind.SAMPLED, g, samples=np.exp(-(g.omega**2) / 0.04).astype(complex))
    with pytest.raises(TruncationError):
        time_domain_oracle(psi, 0.0)


# visibility and Fourier ---------------------------------------------------------


def test_visibility_ideal_and_scaled(wide_delays):
    tr = state_trace(make_pair(1), wide_delays)
    dip, peak = visibility(tr)
    assert dip == pytest.approx(1.0, abs=1e-12)
    scaled = tr.scaled(37.0)
    assert visibility(scaled) == pytest.approx((dip, peak), abs=1e-12)


def test_visibility_needs_baseline():
    with pytest.raises(AnalysisError):
        visibility(state_trace(make_pair(1), np.linspace(-60, 60, 121)))


def test_fourier_single_pair():
    tr = state_trace(make_pair(1), TAU)
    f, mag = trace_fourier(tr, max_fringe_ghz=100.0)
    pk = fourier_peaks(f, mag)
    assert len(pk) == 1
    assert pk[0] == pytest.approx(90.0, abs=f[1] - f[0])


def test_fourier_aliasing_and_span_guards():
    tr = state_trace(make_pair(2), np.arange(-100, 100, 2.0))
    with pytest.raises(SamplingError):
        trace_fourier(tr, max_fringe_ghz=270.0)
    with pytest.raises(AnalysisError):
        trace_fourier(state_trace(make_pair(1), np.linspace(-10, 10, 81)), min_fringe_ghz=90.0)


def test_fourier_independent_of_beta():
    mags = []
    for beta in (0.0, math.pi / 2, math.pi):
        s = make_superposition([(1, cmath.exp(1j * beta), 0), (2, 1, 0)])
        mags.append(trace_fourier(state_trace(s, TAU))[1])
    assert np.allclose(mags[0], mags[1], atol=1e-12) and np.allclose(mags[0], mags[2], atol=1e-12)


# averaging -----------------------------------------------------------------


def test_identity_masks_average_exactly():
    s = make_superposition([(1, 1, 0), (2, 1, 0)])
    ident = [PhaseMask(Placement.BEFORE_PBS, PerBin({}))] * 3
    avg = phase_average_trace(s, ident, TAU).values
    # identical summands; only the rounding of the mean remains
    assert np.abs(avg - state_trace(s, TAU, "numeric").values).max() <= 4 * np.finfo(float).eps
    with pytest.raises(DomainError):
        phase_average_trace(s, [], TAU)


def test_closed_form_refuses_odd_arm_b_polynomials():
    s = make_superposition([(1, 1, 0), (2, 1, 0)])
    for spec in (Polynomial(phi1=3.0), Polynomial(phi3=5.1)):
        with pytest.raises(DomainError):
            superposition_trace(apply_phase_mask(s, PhaseMask(Placement.ARM_B, spec)), TAU)
    # even or common phases reduce exactly to their bin-center values
    for m in (PhaseMask(Placement.ARM_B, Polynomial(phi2=3.3)), PhaseMask(Placement.BEFORE_PBS, Polynomial(1.0, 3.3, 5.1))):
        masked = apply_phase_mask(s, m)
        a = superposition_trace(masked, TAU).values
        n = state_trace(masked, TAU, "numeric").values
        assert np.abs(a - n).max() < 1e-6
