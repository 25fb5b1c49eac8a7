"""Command-line entry point: ``homb run | scenario | spectrum | check``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .errors import HombError, ParseError

EXIT_OK, EXIT_PARSE, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4


def guarded(fn) -> int:
    """Run ``fn`` and map failures onto exit codes, reporting on stderr."""
    try:
        rc = fn()
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HombError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if rc is None else int(rc)


def _cmd_run(args) -> int:
    from .config import load_config
    from .runner import run_config

    def go():
        cfg = load_config(args.config)
        if args.engine:
            from dataclasses import replace

            cfg = replace(cfg, engine=args.engine)
        run_config(cfg, args.output, args.svg)

    return guarded(go)


def _cmd_scenario(args) -> int:
    from .runner import SCENARIOS, write_scenario

    if args.name not in SCENARIOS:
        print(f"unknown scenario {args.name!r}; choose from {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_PARSE
    return guarded(lambda: write_scenario(args.name, args.output, args.svg) and None)


def _cmd_spectrum(args) -> int:
    from .config import load_config
    from .runner import spectrum_config

    return guarded(lambda: spectrum_config(load_config(args.config), args.output))


def check_engines(n_states: int = 40, n_oracle: int = 6, seed: int = 0, out=None) -> dict[str, float]:
    """Compare the three engines on random pure states."""
    out = out or sys.stdout
    from .interference import state_trace
    from .states import random_superposition

    rng = np.random.default_rng(seed)
    delays = np.linspace(-120.0, 120.0, 241)
    sparse = np.linspace(-60.0, 60.0, 13)
    an_num = num_or = 0.0
    for k in range(n_states):
        state = random_superposition(rng)
        a = state_trace(state, delays, "analytic").values
        n = state_trace(state, delays, "numeric").values
        an_num = max(an_num, float(np.abs(a - n).max()))
        if k < n_oracle:
            n = state_trace(state, sparse, "numeric").values
            o = state_trace(state, sparse, "oracle").values
            num_or = max(num_or, float(np.abs(n - o).max()))
    print(f"states checked: {n_states} (oracle on {n_oracle})", file=out)
    print(f"max |analytic - numeric| = {an_num:.3e}", file=out)
    print(f"max |numeric - oracle|   = {num_or:.3e}", file=out)
    return {"analytic_numeric": an_num, "numeric_oracle": num_or}


def _cmd_check(args) -> int:
    def go():
        dev = check_engines(args.states, args.oracle, args.seed)
        return EXIT_OK if dev["analytic_numeric"] < 1e-6 and dev["numeric_oracle"] < 1e-4 else 1

    return guarded(go)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="homb", description="Simulate HOM interference of biphoton frequency combs.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log weak-bin and grid diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario config into a CSV trace")
    run.add_argument("config")
    run.add_argument("-o", "--output", required=True)
    run.add_argument("--engine", choices=("analytic", "numeric", "oracle", "all"))
    run.add_argument("--svg", help="also write an SVG plot here")
    run.set_defaults(func=_cmd_run)

    sc = sub.add_parser("scenario", help="run a built-in reproduction scenario into a directory")
    sc.add_argument("name")
    sc.add_argument("-o", "--output", required=True, help="output directory")
    sc.add_argument("--svg", action="store_true")
    sc.set_defaults(func=_cmd_scenario)

    sp = sub.add_parser("spectrum", help="write the marginal spectrum of photon B")
    sp.add_argument("config")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=_cmd_spectrum)

    ck = sub.add_parser("check", help="cross-check the engines on random states")
    ck.add_argument("--states", type=int, default=40)
    ck.add_argument("--oracle", type=int, default=6)
    ck.add_argument("--seed", type=int, default=0)
    ck.set_defaults(func=_cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
