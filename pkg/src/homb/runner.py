"""Turn scenario configs into traces and CSV output."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import (
    CountingBlock,
    DelayBlock,
    MaskBlock,
    ScenarioConfig,
    SpectrumBlock,
    StateBlock,
    TermSpec,
    load_config,
    serialize_config,
)
from .counting import CountingConfig, DetectorModel, capture_probability, simulate_counts
from .errors import DomainError
from .interference import (
    DelayAxis,
    HomTrace,
    envelope,
    mixture_trace,
    numeric_trace,
    oracle_trace,
    state_trace,
)
from .spectral import (
    Convention,
    LineshapeKind,
    SpectralFunction,
    FrequencyGrid,
    flat_spectrum,
    ghz_to_rad_ps,
    make_spdc_spectrum,
    marginal_spectrum,
    scan_filter,
    spdc_grid,
)
from .states import (
    BfcState,
    PerBin,
    PhaseMask,
    Placement,
    Polynomial,
    RandomPerBin,
    apply_phase_mask,
    apply_spectral_phase,
    joint_spectral_amplitude,
    make_comb,
    make_superposition,
    mixture_of_pairs,
    unfiltered_amplitude,
)


@dataclass(frozen=True, eq=False)
class Unfiltered:
    """Bare down-conversion biphoton, optionally with continuous masks."""

    psi: SpectralFunction
    spectrum: SpectralFunction


# ---------------------------------------------------------------- building


def build_mask(m: MaskBlock) -> PhaseMask:
    placement = Placement(m.placement)
    if m.kind == "per_bin":
        return PhaseMask(placement, PerBin(dict(m.per_bin)))
    if m.kind == "random":
        return PhaseMask(placement, RandomPerBin(m.random_seed))
    return PhaseMask(placement, Polynomial(m.phi1_ps, m.phi2_ps2, m.phi3_ps3))


def build_pure(sb: StateBlock) -> BfcState:
    comb = make_comb(
        fsr_ghz=sb.fsr_ghz,
        bin_fwhm_ghz=sb.bin_fwhm_ghz,
        convention=Convention(sb.convention),
        spdc_fwhm_ghz=sb.spdc_fwhm_ghz,
        lineshape_kind=LineshapeKind(sb.lineshape),
        max_overlap=sb.max_overlap,
    )
    terms = [(t.p, t.magnitude * complex(math.cos(t.phase), math.sin(t.phase)), t.alpha) for t in sb.terms]
    if sb.central_bin is not None:
        mag, phase = sb.central_bin
        terms.insert(0, (0, mag * complex(math.cos(phase), math.sin(phase)), 0.0))
    return make_superposition(terms, comb)


def build_unfiltered(sb: StateBlock) -> Unfiltered:
    if sb.spdc_fwhm_ghz is None:
        phi = flat_spectrum(FrequencyGrid(float(ghz_to_rad_ps(2000.0)), 4096))
    else:
        fwhm = float(ghz_to_rad_ps(sb.spdc_fwhm_ghz))
        phi = make_spdc_spectrum(fwhm, spdc_grid(fwhm))
    return Unfiltered(unfiltered_amplitude(phi), phi)


def realize(cfg: ScenarioConfig, extra: MaskBlock | None = None):
    """Build the object a config describes, with its masks (and ``extra``) applied."""
    blocks = list(cfg.masks) + ([extra] if extra is not None else [])
    sb = cfg.state
    if sb.unfiltered:
        u = build_unfiltered(sb)
        psi = u.psi
        for b in blocks:
            if b.kind != "polynomial":
                raise DomainError("per-bin masks need a carved comb")
            psi = apply_spectral_phase(psi, build_mask(b))
        return Unfiltered(psi, u.spectrum)
    state = build_pure(sb)
    for b in blocks:
        state = apply_phase_mask(state, build_mask(b))
    return mixture_of_pairs(state) if sb.mixture else state


def _trace_of(obj, delays, engine: str, spdc_model: str) -> HomTrace:
    if isinstance(obj, Unfiltered):
        if engine == "analytic":
            s = obj.spectrum
            if s.kind is not LineshapeKind.SINC_SQUARED or not np.allclose(obj.psi.values.imag, 0):
                raise DomainError("no closed form for this unfiltered amplitude")
            return HomTrace(delays, 1.0 - envelope(replace(s, scale=1.0), delays), 1.0, s.duration / 2.0)
        if engine == "numeric":
            return numeric_trace(obj.psi, delays, obj.spectrum.duration / 2.0 if obj.spectrum.intensity_fwhm else None)
        return oracle_trace(obj.psi, delays)
    if isinstance(obj, BfcState):
        if engine == "analytic":
            return state_trace(obj, delays, "analytic")
        return state_trace(obj, delays, engine, spdc_model)
    return mixture_trace(obj, delays, engine)


def compute_traces(cfg: ScenarioConfig) -> dict[str, HomTrace]:
    delays = DelayAxis(cfg.delay.start_ps, cfg.delay.stop_ps, cfg.delay.step_ps).values
    engines = ("analytic", "numeric", "oracle") if cfg.engine == "all" else (cfg.engine,)
    out = {}
    for engine in engines:
        if cfg.average:
            traces = [_trace_of(realize(cfg, m), delays, engine, cfg.state.spdc_model) for m in cfg.average]
            out[engine] = HomTrace(delays, np.mean([t.values for t in traces], axis=0), 1.0, traces[0].envelope_fwhm)
        else:
            out[engine] = _trace_of(realize(cfg), delays, engine, cfg.state.spdc_model)
    return out


def counting_models(cb: CountingBlock) -> tuple[DetectorModel, CountingConfig]:
    det = DetectorModel(cb.jitter_ps, cb.efficiency, cb.dark_rate)
    cfg = CountingConfig(cb.pair_rate, cb.integration_s, cb.bin_width_ps, cb.accidental_rate, cb.seed, cb.wavepacket_ps)
    return det, cfg


# ---------------------------------------------------------------- output


def _write_csv(path, header, columns) -> None:
    rows = [",".join(header)]
    for row in zip(*columns):
        rows.append(",".join(str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row))
    Path(path).write_text("\n".join(rows) + "\n")


def write_svg(path, delays, series: dict[str, np.ndarray]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, y in series.items():
        ax.plot(delays, y, lw=1, label=name)
    ax.set_xlabel("delay (ps)")
    ax.set_ylabel("normalized coincidences")
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def run_config(cfg: ScenarioConfig, output, svg=None, err=None) -> dict[str, HomTrace]:
    err = err or sys.stderr
    traces = compute_traces(cfg)
    delays = next(iter(traces.values())).delays
    if cfg.engine == "all":
        header = ["delay_ps", "analytic", "numeric", "oracle"]
        columns = [delays] + [traces[k].values for k in ("analytic", "numeric", "oracle")]
        an = np.abs(traces["analytic"].values - traces["numeric"].values).max()
        no = np.abs(traces["numeric"].values - traces["oracle"].values).max()
        print(f"max deviation analytic-numeric {an:.3e} numeric-oracle {no:.3e}", file=err)
        reference = traces["numeric"]
    else:
        header = ["delay_ps", "value"]
        reference = traces[cfg.engine]
        columns = [delays, reference.values]
    if cfg.counting is not None:
        det, ccfg = counting_models(cfg.counting)
        records = simulate_counts(reference, det, ccfg)
        header += ["counts", "sigma"]
        columns += [[r.counts for r in records], [r.sigma for r in records]]
    _write_csv(output, header, columns)
    if svg:
        write_svg(svg, delays, {k: t.values for k, t in traces.items()})
    return traces


def run_scenario(config_path, output_path, svg=None) -> int:
    """Exit status: 0 ok, 2 parse error, 3 physics precondition, 4 I/O."""
    from .cli import guarded

    return guarded(lambda: run_config(load_config(config_path), output_path, svg) and 0)


def spectrum_data(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    obj = realize(cfg)
    if isinstance(obj, Unfiltered):
        psi = obj.psi
    elif isinstance(obj, BfcState):
        psi = joint_spectral_amplitude(obj, spdc_model=cfg.state.spdc_model)
    else:
        parts = [(w, joint_spectral_amplitude(s, spdc_model=cfg.state.spdc_model)) for w, s in obj.components]
        nu = marginal_spectrum(parts[0][1])[0]
        inten = sum(w * np.abs(p.values[::-1]) ** 2 for w, p in parts)
        return _window(nu, inten / inten.max(), cfg.spectrum)
    nu, inten = marginal_spectrum(psi, "B")
    return _window(nu, inten, cfg.spectrum)


def _window(nu, inten, sb: SpectrumBlock | None):
    sb = sb or SpectrumBlock()
    if sb.filter_ghz is not None:
        centers, vals = scan_filter(nu, inten, sb.filter_ghz, sb.scan_step_ghz, sb.range_ghz)
        return centers, vals / vals.max()
    if sb.range_ghz is not None:
        keep = np.abs(nu) <= sb.range_ghz / 2
        return nu[keep], inten[keep]
    return nu, inten


def spectrum_config(cfg: ScenarioConfig, output) -> None:
    nu, inten = spectrum_data(cfg)
    _write_csv(output, ["freq_ghz", "intensity"], [nu, inten])


# ---------------------------------------------------------------- built-in scenarios

FIG3_BASELINE = 7000.0
FIG3_VISIBILITY = 0.996
HALF_PI = math.pi / 2


def _fig3_counting() -> CountingBlock:
    # presentation rates: ~7000 baseline counts and a residual floor of 0.4%
    eff = 0.25
    cap = capture_probability(110.0, 60.0, 256.0)
    signal = FIG3_BASELINE * FIG3_VISIBILITY
    return CountingBlock(
        pair_rate=2.0 * signal / (eff * cap),
        accidental_rate=FIG3_BASELINE - signal,
        efficiency=eff,
        seed=3,
    )


def _counting(baseline: float, car: float | None = None, seed: int = 0, eff: float = 0.25) -> CountingBlock:
    """Counting block giving ``baseline`` signal counts per step and optional total:accidental ``car``."""
    cap = capture_probability(110.0, 60.0, 256.0)
    acc = 0.0 if car is None else baseline / (car - 1.0)
    return CountingBlock(pair_rate=2.0 * baseline / (eff * cap), accidental_rate=acc, efficiency=eff, seed=seed)


def _four_bin(alpha1: float = 0.0, bins=(1, 2), bin_fwhm: float = 17.0) -> StateBlock:
    terms = tuple(TermSpec(p, 1.0, 0.0, alpha1 if p == 1 else 0.0) for p in bins)
    return StateBlock(fsr_ghz=90.0, bin_fwhm_ghz=bin_fwhm, spdc_fwhm_ghz=310.0, terms=terms)


FIG456_DELAY = DelayBlock(-150.0, 150.0, 0.25)
FIG7_DELAY = DelayBlock(-100.0, 100.0, 0.25)


def shaper_sequence(seed: int = 1) -> tuple:
    """Nine shaper settings per integration window: polynomial phases, then random per-bin draws."""
    quad = MaskBlock(placement="before_pbs", kind="polynomial", phi2_ps2=3.3)
    cubic = MaskBlock(placement="before_pbs", kind="polynomial", phi3_ps3=5.1)
    rand = tuple(MaskBlock(placement="before_pbs", kind="random", random_seed=seed + k) for k in range(3))
    return (quad, quad, quad, cubic, cubic, cubic) + rand


def builtin_scenario(name: str) -> dict[str, ScenarioConfig]:
    """Sub-run configs of one built-in scenario, keyed by run name."""
    if name == "fig3b":
        state = StateBlock(spdc_fwhm_ghz=310.0, unfiltered=True)
        return {
            "unfiltered": ScenarioConfig(
                state,
                DelayBlock(-10.0, 10.0, 0.1),
                engine="numeric",
                counting=_fig3_counting(),
                spectrum=SpectrumBlock(filter_ghz=18.0, scan_step_ghz=6.0, range_ghz=1200.0),
            )
        }
    if name == "fig4":
        out = {}
        for label, beta in (("beta_0", 0.0), ("beta_pi_2", HALF_PI), ("beta_pi", math.pi)):
            mask = MaskBlock(placement="arm_b", kind="per_bin", per_bin=((-1, beta), (1, beta)))
            out[label] = ScenarioConfig(_four_bin(), FIG456_DELAY, masks=(mask,), engine="numeric", counting=_counting(1000.0, seed=4))
        return out
    if name == "fig5":
        return {
            "superposition": ScenarioConfig(_four_bin(), FIG456_DELAY, engine="numeric", counting=_counting(1000.0, seed=5)),
            "pair_1": ScenarioConfig(_four_bin(bins=(1,)), FIG456_DELAY, engine="numeric", counting=_counting(1000.0, seed=6)),
            "pair_2": ScenarioConfig(_four_bin(bins=(2,)), FIG456_DELAY, engine="numeric", counting=_counting(1000.0, seed=7)),
            "mixture": ScenarioConfig(replace(_four_bin(), mixture=True), FIG456_DELAY, engine="numeric", counting=_counting(1000.0, seed=8)),
        }
    if name == "fig6":
        out = {}
        for label, a in (("alpha_0", 0.0), ("alpha_pi_2", HALF_PI)):
            mask = MaskBlock(placement="arm_b", kind="per_bin", per_bin=((-1, a),))
            out[f"superposition_{label}"] = ScenarioConfig(_four_bin(), FIG456_DELAY, masks=(mask,), engine="numeric", counting=_counting(1000.0, seed=9))
            out[f"pair_1_{label}"] = ScenarioConfig(_four_bin(bins=(1,)), FIG456_DELAY, masks=(mask,), engine="numeric", counting=_counting(1000.0, seed=10))
        out["pair_2"] = ScenarioConfig(_four_bin(bins=(2,)), FIG456_DELAY, engine="numeric", counting=_counting(1000.0, seed=11))
        return out
    if name == "fig7":
        # 31 GHz Gaussian bins on a 90 GHz grid overlap by ~3e-3
        four = replace(_four_bin(bin_fwhm=31.0), max_overlap=1e-2)
        nine = StateBlock(
            convention="centered",
            fsr_ghz=90.0,
            bin_fwhm_ghz=31.0,
            spdc_fwhm_ghz=310.0,
            terms=tuple(TermSpec(p) for p in range(1, 5)),
            central_bin=(1.0, 0.0),
            max_overlap=1e-2,
        )
        counting = _counting(200.0, car=2.0, seed=12, eff=0.02)
        masks = shaper_sequence()
        return {
            "bins4": ScenarioConfig(four, FIG7_DELAY, engine="numeric", counting=counting),
            "bins4_averaged": ScenarioConfig(four, FIG7_DELAY, average=masks, engine="numeric", counting=counting),
            "bins9": ScenarioConfig(nine, FIG7_DELAY, engine="numeric", counting=counting),
            "bins9_averaged": ScenarioConfig(nine, FIG7_DELAY, average=masks, engine="numeric", counting=counting),
        }
    raise KeyError(name)


SCENARIOS = ("fig3b", "fig4", "fig5", "fig6", "fig7")


def write_scenario(name: str, outdir, svg: bool = False) -> dict[str, dict[str, HomTrace]]:
    runs = builtin_scenario(name)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = {}
    for label, cfg in runs.items():
        (outdir / f"{label}.cfg").write_text(serialize_config(cfg))
        results[label] = run_config(cfg, outdir / f"{label}.csv", outdir / f"{label}.svg" if svg else None)
        if cfg.spectrum is not None:
            spectrum_config(cfg, outdir / f"{label}_spectrum.csv")
    return results
