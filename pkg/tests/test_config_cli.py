import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from homb.cli import main
from homb.config import (
    CountingBlock,
    DelayBlock,
    MaskBlock,
    ScenarioConfig,
    StateBlock,
    TermSpec,
    parse_config,
    parse_number,
    serialize_config,
)
from homb.errors import ParseError
from homb.runner import SCENARIOS, builtin_scenario
from homb.spectral import measure_fwhm, spdc_duration, spdc_grid

from conftest import rad

BASIC = """
# two pairs on the default comb
[state]
spdc_fwhm_ghz = 310
term = 1, 1, 0, 0
term = 2, 1, pi/2, 0

[delay]
start_ps = -20
stop_ps = 20
step_ps = 1

[run]
engine = analytic
"""


def _write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])


# parsing ---------------------------------------------------------------------


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.state.terms == (TermSpec(1, 1.0, 0.0, 0.0), TermSpec(2, 1.0, math.pi / 2, 0.0))
    assert cfg.delay == DelayBlock(-20.0, 20.0, 1.0)
    assert cfg.engine == "analytic" and cfg.counting is None


def test_parse_number_expressions():
    assert parse_number("pi/2") == pytest.approx(math.pi / 2)
    assert parse_number("-3*2+1") == -5.0
    for bad in ("__import__('os')", "2**3", "nan", "1/0", "x"):
        with pytest.raises(ParseError):
            parse_number(bad)


def test_unknown_key_reports_line():
    text = BASIC.replace("step_ps = 1", "step_ps = 1\nstepps = 2")
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == text.splitlines().index("stepps = 2") + 1


@pytest.mark.parametrize(
    "text",
    [
        BASIC.replace("[run]", "[bogus]"),
        BASIC.replace("fsr_ghz", "fsr").replace("[state]", "[state]\nfsr = 1"),
        BASIC.replace("engine = analytic", "engine = fast"),
        BASIC.replace("term = 1, 1, 0, 0\nterm = 2, 1, pi/2, 0", ""),
        BASIC.replace("step_ps = 1", "step_ps = 1\nstep_ps = 2"),
        BASIC + "\n[delay]\nstart_ps = 0\nstop_ps = 1\nstep_ps = 1\n",
        BASIC.replace("term = 1, 1, 0, 0", "term = 1, 1, 0"),
        BASIC + "\n[mask]\nplacement = arm_b\nphi1_ps = 1\nrandom_seed = 3\n",
    ],
)
def test_malformed_configs_rejected(text):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line is not None


@pytest.mark.parametrize("name", SCENARIOS)
def test_builtin_round_trip(name):
    for cfg in builtin_scenario(name).values():
        assert parse_config(serialize_config(cfg)) == cfg


_floats = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@given(
    st.lists(st.tuples(st.integers(1, 8), st.floats(0.01, 10), _floats, _floats), min_size=1, max_size=5, unique_by=lambda t: t[0]),
    st.sampled_from(["half_offset", "centered"]),
    st.one_of(st.none(), st.floats(50, 5000)),
    st.lists(
        st.one_of(
            st.builds(MaskBlock, st.sampled_from(["arm_b", "before_pbs"]), st.just("polynomial"), st.just(()), _floats, _floats, _floats),
            st.builds(lambda d: MaskBlock(kind="per_bin", per_bin=tuple(sorted(d.items()))), st.dictionaries(st.integers(-9, 9), _floats, min_size=1, max_size=4)),
            st.builds(lambda s: MaskBlock(kind="random", random_seed=s), st.integers(0, 2**31)),
        ),
        max_size=3,
    ),
    st.booleans(),
)
def test_serialize_parse_round_trip(terms, convention, spdc, masks, counting):
    cfg = ScenarioConfig(
        StateBlock(convention=convention, spdc_fwhm_ghz=spdc, terms=tuple(TermSpec(*t) for t in terms)),
        DelayBlock(-1.5, 2.25, 0.125),
        masks=tuple(masks),
        average=tuple(masks[:1]),
        engine="numeric",
        counting=CountingBlock(pair_rate=1234.5, seed=7) if counting else None,
    )
    assert parse_config(serialize_config(cfg)) == cfg


# run command -----------------------------------------------------------------


def _fig4(tmp_path, label, delay=DelayBlock(-60.0, 60.0, 0.5)):
    cfg = replace(builtin_scenario("fig4")[label], delay=delay, counting=None)
    return _write(tmp_path, serialize_config(cfg), f"{label}.cfg")


def test_fig4_beta_half_pi_matches_beta_zero(tmp_path):
    outs = []
    for label in ("beta_0", "beta_pi_2"):
        out = tmp_path / f"{label}.csv"
        assert main(["run", str(_fig4(tmp_path, label)), "-o", str(out)]) == 0
        outs.append(_csv(out))
    assert outs[0][0] == ["delay_ps", "value"]
    assert np.abs(outs[0][1] - outs[1][1]).max() < 1e-12


def test_engine_all_reports_deviation(tmp_path, capsys):
    text = BASIC.replace("term = 2, 1, pi/2, 0\n", "").replace("engine = analytic", "engine = all")
    out = tmp_path / "all.csv"
    assert main(["run", str(_write(tmp_path, text)), "-o", str(out)]) == 0
    header, data = _csv(out)
    assert header == ["delay_ps", "analytic", "numeric", "oracle"]
    err = capsys.readouterr().err
    devs = [float(x) for x in err.split() if x[0].isdigit()]
    assert len(devs) == 2 and max(devs) < 1e-4
    assert np.all(np.diff(data[:, 0]) > 0)


def test_counting_columns_and_determinism(tmp_path):
    text = BASIC + "\n[counting]\npair_rate = 20000\nseed = 5\n"
    path = _write(tmp_path, text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(path), "-o", str(a)]) == 0
    assert main(["run", str(path), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header, data = _csv(a)
    assert header == ["delay_ps", "value", "counts", "sigma"]
    assert np.allclose(data[:, 3] ** 2, data[:, 2])


def test_values_written_at_full_precision(tmp_path):
    out = tmp_path / "o.csv"
    main(["run", str(_write(tmp_path, BASIC)), "-o", str(out)])
    row = out.read_text().splitlines()[3].split(",")
    assert float(row[1]) == float(repr(float(row[1])))
    assert len(row[1].lstrip("0.-")) > 10


def test_exit_codes(tmp_path, capsys):
    empty = BASIC.replace("term = 1, 1, 0, 0\nterm = 2, 1, pi/2, 0", "")
    assert main(["run", str(_write(tmp_path, empty)), "-o", str(tmp_path / "x.csv")]) == 2
    overlap = BASIC.replace("[state]", "[state]\nbin_fwhm_ghz = 60")
    assert main(["run", str(_write(tmp_path, overlap, "o.cfg")), "-o", str(tmp_path / "x.csv")]) == 3
    assert main(["run", str(tmp_path / "missing.cfg"), "-o", str(tmp_path / "x.csv")]) == 4
    assert main(["run", str(_write(tmp_path, BASIC, "g.cfg")), "-o", str(tmp_path / "no" / "x.csv")]) == 4
    err = capsys.readouterr()
    assert err.out == ""
    assert "overlap" in err.err


def test_svg_output(tmp_path):
    svg = tmp_path / "t.svg"
    assert main(["run", str(_write(tmp_path, BASIC)), "-o", str(tmp_path / "t.csv"), "--svg", str(svg)]) == 0
    assert svg.read_text().lstrip().startswith("<?xml")


# spectrum command ------------------------------------------------------------

UNFILTERED = """
[state]
spdc_fwhm_ghz = 310
unfiltered = true

[delay]
start_ps = -1
stop_ps = 1
step_ps = 1
"""


def test_spectrum_fwhm_310(tmp_path):
    out = tmp_path / "sp.csv"
    assert main(["spectrum", str(_write(tmp_path, UNFILTERED)), "-o", str(out)]) == 0
    header, data = _csv(out)
    assert header == ["freq_ghz", "intensity"]
    step = spdc_grid(rad(310.0)).step * 1000 / (2 * math.pi)
    assert measure_fwhm(data[:, 0], data[:, 1]) == pytest.approx(310.0, abs=step)


def test_spectrum_flat_is_constant(tmp_path):
    out = tmp_path / "sp.csv"
    text = UNFILTERED.replace("spdc_fwhm_ghz = 310", "spdc_fwhm_ghz = none")
    assert main(["spectrum", str(_write(tmp_path, text)), "-o", str(out)]) == 0
    col = _csv(out)[1][:, 1]
    assert np.ptp(col) == 0.0 and col[0] == 1.0


def test_spectrum_filter_matches_direct_convolution(tmp_path):
    out = tmp_path / "sp.csv"
    text = UNFILTERED + "\n[spectrum]\nfilter_ghz = 18\nscan_step_ghz = 6\nrange_ghz = 900\n"
    assert main(["spectrum", str(_write(tmp_path, text)), "-o", str(out)]) == 0
    nu, got = _csv(out)[1].T
    assert np.allclose(nu % 6.0, 0.0) and nu.min() >= -450 and nu.max() <= 450
    t = spdc_duration(rad(310.0))
    sinc2 = lambda v: np.sinc(rad(v) * t / 2 / np.pi) ** 2
    direct = np.array([quad(sinc2, c - 9, c + 9)[0] for c in nu])
    assert np.allclose(got, direct / direct.max(), atol=2e-4)
    assert measure_fwhm(nu, got) > measure_fwhm(nu, sinc2(nu))


# scenario and check commands -----------------------------------------------


def test_scenario_writes_configs_and_traces(tmp_path):
    assert main(["scenario", "fig3b", "-o", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["unfiltered.cfg", "unfiltered.csv", "unfiltered_spectrum.csv"]
    assert parse_config((tmp_path / "unfiltered.cfg").read_text()) == builtin_scenario("fig3b")["unfiltered"]


def test_unknown_scenario(tmp_path, capsys):
    assert main(["scenario", "fig9", "-o", str(tmp_path)]) == 2
    assert "fig9" in capsys.readouterr().err


def test_builtin_parameterizations():
    fig4 = builtin_scenario("fig4")
    betas = sorted(dict(c.masks[0].per_bin)[1] for c in fig4.values())
    assert betas == pytest.approx([0.0, math.pi / 2, math.pi])
    states = {serialize_config(replace(c, masks=())) for c in fig4.values()}
    assert len(states) == 1
    s = next(iter(fig4.values())).state
    assert (s.fsr_ghz, s.bin_fwhm_ghz, [t.p for t in s.terms]) == (90.0, 17.0, [1, 2])
    nine = builtin_scenario("fig7")["bins9"].state
    assert nine.central_bin is not None and nine.bin_fwhm_ghz == 31.0 and nine.convention == "centered"
    assert len(builtin_scenario("fig7")["bins9_averaged"].average) == 9
    fig6 = builtin_scenario("fig6")
    assert {dict(c.masks[0].per_bin)[-1] for k, c in fig6.items() if c.masks} == {0.0, math.pi / 2}
    assert all(c.masks[0].placement == "arm_b" and set(dict(c.masks[0].per_bin)) == {-1} for c in fig6.values() if c.masks)
    fig3 = builtin_scenario("fig3b")["unfiltered"].state
    assert fig3.unfiltered and fig3.spdc_fwhm_ghz == 310.0


def test_check_command(capsys):
    assert main(["check", "--states", "4", "--oracle", "1"]) == 0
    out = capsys.readouterr().out
    assert "analytic - numeric" in out and "numeric - oracle" in out
