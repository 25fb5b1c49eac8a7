"""Scenario config files: a line-oriented ``key = value`` format with sections.

Grammar (one construct per line, ``#`` starts a comment)::

    [state]                  exactly one
    convention   = half_offset | centered
    fsr_ghz      = <number>
    bin_fwhm_ghz = <number>
    spdc_fwhm_ghz = <number> | none
    lineshape    = gaussian | sinc2
    term         = <p>, <|c|>, <arg c>, <alpha>      repeatable, in order
    central_bin  = <|c0>, <arg c0>                    centered combs only
    mixture      = true | false     terms form an incoherent mixture
    unfiltered   = true | false     bare down-conversion spectrum, no bins
    max_overlap  = <number>
    spdc_model   = bin_center | full

    [mask]                   zero or more, applied in order
    [average]                zero or more, averaged over one integration window
    placement = arm_b | before_pbs
    per_bin   = <q>: <theta>, <q>: <theta>, ...
    phi1_ps / phi2_ps2 / phi3_ps3 = <number>
    random_seed = <integer>
    (exactly one of per_bin, the phi keys, random_seed)

    [delay]                  exactly one
    start_ps, stop_ps, step_ps = <number>

    [run]
    engine = analytic | numeric | oracle | all

    [counting]               optional
    pair_rate, integration_s, bin_width_ps, accidental_rate, jitter_ps,
    efficiency, dark_rate, wavepacket_ps, seed

    [spectrum]               optional
    filter_ghz = <number> | none, scan_step_ghz = <number>, range_ghz = <number> | none

Numbers accept ``pi`` and ``+ - * /``, so ``pi/2`` is valid.  Frequencies
are in GHz, delays in ps, phases in radians.  Unknown sections or keys are
rejected with the offending line number.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError

ENGINES = ("analytic", "numeric", "oracle", "all")


@dataclass(frozen=True)
class TermSpec:
    p: int
    magnitude: float = 1.0
    phase: float = 0.0
    alpha: float = 0.0


@dataclass(frozen=True)
class StateBlock:
    convention: str = "half_offset"
    fsr_ghz: float = 90.0
    bin_fwhm_ghz: float = 17.0
    spdc_fwhm_ghz: float | None = None
    lineshape: str = "gaussian"
    terms: tuple = ()
    central_bin: tuple | None = None
    mixture: bool = False
    unfiltered: bool = False
    max_overlap: float = 1e-3
    spdc_model: str = "bin_center"


@dataclass(frozen=True)
class MaskBlock:
    placement: str = "before_pbs"
    kind: str = "polynomial"  # per_bin | polynomial | random
    per_bin: tuple = ()
    phi1_ps: float = 0.0
    phi2_ps2: float = 0.0
    phi3_ps3: float = 0.0
    random_seed: int = 0


@dataclass(frozen=True)
class DelayBlock:
    start_ps: float
    stop_ps: float
    step_ps: float


@dataclass(frozen=True)
class CountingBlock:
    pair_rate: float
    integration_s: float = 1.0
    bin_width_ps: float = 256.0
    accidental_rate: float = 0.0
    jitter_ps: float = 110.0
    efficiency: float = 1.0
    dark_rate: float = 0.0
    wavepacket_ps: float = 60.0
    seed: int = 0


@dataclass(frozen=True)
class SpectrumBlock:
    filter_ghz: float | None = None
    scan_step_ghz: float = 6.0
    range_ghz: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    state: StateBlock
    delay: DelayBlock
    masks: tuple = ()
    average: tuple = ()
    engine: str = "analytic"
    counting: CountingBlock | None = None
    spectrum: SpectrumBlock | None = None


# ---------------------------------------------------------------- values

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    raise ValueError("not a number")


def parse_number(text: str, line: int | None = None) -> float:
    try:
        value = _eval(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ParseError(f"cannot read {text.strip()!r} as a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{text.strip()!r} is not finite", line)
    return value


def _int(text, line):
    v = parse_number(text, line)
    if v != int(v):
        raise ParseError(f"expected an integer, got {text.strip()!r}", line)
    return int(v)


def _bool(text, line):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ParseError(f"expected true or false, got {text.strip()!r}", line)


def _optional(conv):
    def read(text, line):
        return None if text.strip().lower() == "none" else conv(text, line)

    return read


def _choice(*options):
    def read(text, line):
        t = text.strip().lower()
        if t not in options:
            raise ParseError(f"expected one of {', '.join(options)}, got {text.strip()!r}", line)
        return t

    return read


def _tuple_of_numbers(n):
    def read(text, line):
        parts = [x for x in text.split(",")]
        if len(parts) != n:
            raise ParseError(f"expected {n} comma-separated values, got {len(parts)}", line)
        return tuple(parse_number(x, line) for x in parts)

    return read


def _term(text, line):
    p, mag, phase, alpha = _tuple_of_numbers(4)(text, line)
    if p != int(p):
        raise ParseError("pair index must be an integer", line)
    return TermSpec(int(p), mag, phase, alpha)


def _per_bin(text, line):
    out = []
    for item in text.split(","):
        if ":" not in item:
            raise ParseError(f"per_bin entries look like '<bin>: <phase>', got {item.strip()!r}", line)
        q, theta = item.split(":", 1)
        out.append((_int(q, line), parse_number(theta, line)))
    if len({q for q, _ in out}) != len(out):
        raise ParseError("per_bin names a bin twice", line)
    return tuple(out)


_STATE_KEYS = {
    "convention": _choice("half_offset", "centered"),
    "fsr_ghz": parse_number,
    "bin_fwhm_ghz": parse_number,
    "spdc_fwhm_ghz": _optional(parse_number),
    "lineshape": _choice("gaussian", "sinc2"),
    "term": _term,
    "central_bin": _tuple_of_numbers(2),
    "mixture": _bool,
    "unfiltered": _bool,
    "max_overlap": parse_number,
    "spdc_model": _choice("bin_center", "full"),
}
_MASK_KEYS = {
    "placement": _choice("arm_b", "before_pbs"),
    "per_bin": _per_bin,
    "phi1_ps": parse_number,
    "phi2_ps2": parse_number,
    "phi3_ps3": parse_number,
    "random_seed": _int,
}
_SECTIONS = {
    "state": _STATE_KEYS,
    "mask": _MASK_KEYS,
    "average": _MASK_KEYS,
    "delay": {"start_ps": parse_number, "stop_ps": parse_number, "step_ps": parse_number},
    "run": {"engine": _choice(*ENGINES)},
    "counting": {
        "pair_rate": parse_number,
        "integration_s": parse_number,
        "bin_width_ps": parse_number,
        "accidental_rate": parse_number,
        "jitter_ps": parse_number,
        "efficiency": parse_number,
        "dark_rate": parse_number,
        "wavepacket_ps": parse_number,
        "seed": _int,
    },
    "spectrum": {"filter_ghz": _optional(parse_number), "scan_step_ghz": parse_number, "range_ghz": _optional(parse_number)},
}
_REPEATABLE_SECTIONS = {"mask", "average"}
_REPEATABLE_KEYS = {"term"}


# ---------------------------------------------------------------- parsing


def _mask_block(values: dict, line: int) -> MaskBlock:
    poly = {k: values[k] for k in ("phi1_ps", "phi2_ps2", "phi3_ps3") if k in values}
    kinds = [name for name, present in (("per_bin", "per_bin" in values), ("polynomial", bool(poly)), ("random", "random_seed" in values)) if present]
    if len(kinds) != 1:
        raise ParseError("a mask needs exactly one of per_bin, phi*_ps*, random_seed", line)
    return MaskBlock(
        placement=values.get("placement", "before_pbs"),
        kind=kinds[0],
        per_bin=values.get("per_bin", ()),
        random_seed=values.get("random_seed", 0),
        **poly,
    )


def parse_config(text: str) -> ScenarioConfig:
    sections: list[tuple[str, int, dict]] = []
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header {line!r}", n)
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ParseError(f"unknown section [{name}]", n)
            if name not in _REPEATABLE_SECTIONS and any(s[0] == name for s in sections):
                raise ParseError(f"section [{name}] given twice", n)
            current = (name, n, {})
            sections.append(current)
            continue
        if current is None:
            raise ParseError("key outside of any section", n)
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", n)
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.lower()
        readers = _SECTIONS[current[0]]
        if key not in readers:
            raise ParseError(f"unknown key {key!r} in [{current[0]}]", n)
        parsed = readers[key](value, n)
        store = current[2]
        if key in _REPEATABLE_KEYS:
            store.setdefault(key, []).append(parsed)
        elif key in store:
            raise ParseError(f"key {key!r} given twice", n)
        else:
            store[key] = parsed

    by_name = {}
    masks, average = [], []
    for name, n, values in sections:
        if name == "mask":
            masks.append(_mask_block(values, n))
        elif name == "average":
            average.append(_mask_block(values, n))
        else:
            by_name[name] = (n, values)

    if "state" not in by_name:
        raise ParseError("missing [state] section")
    n_state, sv = by_name["state"]
    sv = dict(sv)
    sv["terms"] = tuple(sv.pop("term", ()))
    state = StateBlock(**sv)
    if not state.terms and state.central_bin is None and not state.unfiltered:
        raise ParseError("the [state] section lists no terms", n_state)
    if state.central_bin is not None and state.convention != "centered":
        raise ParseError("central_bin requires convention = centered", n_state)

    if "delay" not in by_name:
        raise ParseError("missing [delay] section")
    n_delay, dv = by_name["delay"]
    missing = {"start_ps", "stop_ps", "step_ps"} - set(dv)
    if missing:
        raise ParseError(f"[delay] lacks {', '.join(sorted(missing))}", n_delay)
    if not dv["step_ps"] > 0 or dv["stop_ps"] < dv["start_ps"]:
        raise ParseError("[delay] needs step_ps > 0 and stop_ps >= start_ps", n_delay)
    delay = DelayBlock(**dv)

    counting = None
    if "counting" in by_name:
        n_c, cv = by_name["counting"]
        if "pair_rate" not in cv:
            raise ParseError("[counting] lacks pair_rate", n_c)
        counting = CountingBlock(**cv)
    spectrum = SpectrumBlock(**by_name["spectrum"][1]) if "spectrum" in by_name else None
    engine = by_name["run"][1].get("engine", "analytic") if "run" in by_name else "analytic"
    return ScenarioConfig(state, delay, tuple(masks), tuple(average), engine, counting, spectrum)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------- serialization


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _mask_lines(m: MaskBlock) -> list[str]:
    out = [f"placement = {m.placement}"]
    if m.kind == "per_bin":
        out.append("per_bin = " + ", ".join(f"{q}: {_fmt(t)}" for q, t in m.per_bin))
    elif m.kind == "random":
        out.append(f"random_seed = {m.random_seed}")
    else:
        for k in ("phi1_ps", "phi2_ps2", "phi3_ps3"):
            if getattr(m, k) != 0.0:
                out.append(f"{k} = {_fmt(getattr(m, k))}")
        if len(out) == 1:
            out.append("phi1_ps = 0.0")
    return out


def serialize_config(cfg: ScenarioConfig) -> str:
    s = cfg.state
    lines = ["[state]"]
    for f_ in fields(StateBlock):
        v = getattr(s, f_.name)
        if f_.name == "terms":
            for t in v:
                lines.append(f"term = {t.p}, {_fmt(t.magnitude)}, {_fmt(t.phase)}, {_fmt(t.alpha)}")
        elif f_.name == "central_bin":
            if v is not None:
                lines.append(f"central_bin = {_fmt(v[0])}, {_fmt(v[1])}")
        else:
            lines.append(f"{f_.name} = {v if isinstance(v, str) else _fmt(v)}")
    for section, blocks in (("mask", cfg.masks), ("average", cfg.average)):
        for m in blocks:
            lines += ["", f"[{section}]"] + _mask_lines(m)
    lines += ["", "[delay]"] + [f"{f_.name} = {_fmt(getattr(cfg.delay, f_.name))}" for f_ in fields(DelayBlock)]
    lines += ["", "[run]", f"engine = {cfg.engine}"]
    for section, block in (("counting", cfg.counting), ("spectrum", cfg.spectrum)):
        if block is not None:
            lines += ["", f"[{section}]"] + [f"{f_.name} = {_fmt(getattr(block, f_.name))}" for f_ in fields(block)]
    return "\n".join(lines) + "\n"
