"""``dkglab`` command line.

Precedence for every setting: named flag (--n, --dt, ...) > --set KEY=VAL >
config file > preset default.  Exit codes: 0 success, 1 invalid
configuration, 2 numerical failure (or a failed identity check), 3 I/O.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

from ..evolver import NumericalError
from . import runner
from .config import ConfigError, load_config, parse_value
from .snapshot import SnapshotError, describe

VERBS = ("identities", "free-decay", "dkg-small", "convergence", "resume", "inspect-snapshot")

# Named flags and the config key each one sets.
FLAG_KEYS = {"seed": "seed", "out": "out", "n": "grid.n", "L": "grid.L", "dt": "integrator.dt", "T": "integrator.T"}


def _key_value(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), parse_value(value.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--set", dest="overrides", metavar="KEY=VAL", type=_key_value, action="append",
                        default=[], help="override a config key, e.g. --set diagnostics.figures=false")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="grid points per side")
    common.add_argument("--L", type=float, help="half-width of the periodic box")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--T", type=float, help="final time")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="dkglab", description="2D Dirac-Klein-Gordon numerical lab")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    sub.add_parser("identities", parents=[common], help="randomized algebra and grid identity checks")
    sub.add_parser("free-decay", parents=[common], help="sup-norm decay of the free flows")
    sub.add_parser("dkg-small", parents=[common], help="coupled small-data run with the full ledger")
    sub.add_parser("convergence", parents=[common], help="transformed-equation residuals under dt refinement")
    p = sub.add_parser("resume", parents=[common], help="continue a coupled run from a snapshot")
    p.add_argument("--snapshot", required=True, metavar="PATH")
    p = sub.add_parser("inspect-snapshot", help="print a snapshot header as JSON")
    p.add_argument("snapshot", metavar="PATH")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out = dict(args.overrides)
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            out[key] = value
    return out


def _summary_line(verb: str, result: runner.RunResult) -> str:
    return f"{verb}: exit {result.exit_code}, outputs in {result.out}\n" + json.dumps(
        result.summary, sort_keys=True, default=str
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "verbose", False):
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "inspect-snapshot":
            print(json.dumps(describe(args.snapshot), indent=2, sort_keys=True))
            return runner.EXIT_OK
        preset = None if args.verb == "resume" else args.verb
        cfg = load_config(args.config, _overrides(args), preset)
        if args.verb == "resume":
            result = runner.run_resume(cfg, args.snapshot)
        else:
            result = runner.run_experiment(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return runner.EXIT_NUMERICAL
    except (OSError, SnapshotError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return runner.EXIT_IO
    print(_summary_line(args.verb, result))
    return result.exit_code
