"""Command-line front end.

    maskcheck check  --property t-sni --t 2 --q 2 gadget.gdl
    maskcheck oracle-ci -i A[0] -o "R[0][1]" -o "C[0][1]" gadget.gdl
    maskcheck corpus --format json
    maskcheck fmt --write gadget.gdl

Exit codes: 0 the property is verified, 1 refuted, 2 undecided (engine
gave up within its caps), 3 usage or parse errors. `--jobs` falls back to
the MASKCHECK_JOBS environment variable, then to 1.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import driver
from .driver import EXIT_REFUTED, EXIT_USAGE, EXIT_VERIFIED, RunConfig, UsageError
from .dsl import MaskcheckError, parse_gadget, pretty
from .oracle import DEFAULT_ENUMERATION_CAP


class _Parser(argparse.ArgumentParser):
    """argparse's default error exit is 2, which this tool reserves for
    'undecided'; route usage problems to 3 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_jobs() -> int:
    raw = os.environ.get("MASKCHECK_JOBS", "").strip()
    if not raw:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MASKCHECK_JOBS must be an integer, got {raw!r}")


def _add_run_flags(p: argparse.ArgumentParser, *, with_property: bool) -> None:
    p.add_argument("gadget", help="path to a .gdl gadget file")
    if with_property:
        p.add_argument(
            "--property",
            default="t-sni",
            choices=driver.RUN_PROPERTIES,
            help="property to decide (default: t-sni)",
        )
        p.add_argument(
            "--t",
            type=int,
            default=None,
            help="probe budget (default: the gadget's declared order)",
        )
        p.add_argument(
            "--engine",
            default="hybrid",
            choices=driver.ENGINES,
            help="symbolic rewriting, exact oracle, or symbolic-first hybrid",
        )
        p.add_argument(
            "--jobs",
            type=int,
            default=None,
            help="worker processes (default: $MASKCHECK_JOBS or 1)",
        )
        p.add_argument(
            "--probe-cap",
            type=int,
            default=None,
            help="check at most this many probe sets, report the rest unchecked",
        )
        p.add_argument(
            "--checkpoint",
            type=Path,
            default=None,
            help="JSON file to record completed probe sets for resuming",
        )
        p.add_argument(
            "--allow-units",
            action="store_true",
            help="accept any invertible masking coefficient when q is prime",
        )
        p.add_argument(
            "--unshared-mode",
            default="internal",
            choices=("internal", "total"),
            help="t-sniu budget for unshared inputs: count internal probes "
            "only, or all probes (default: internal)",
        )
    p.add_argument("--q", type=int, default=2, help="ring modulus (default: 2)")
    p.add_argument(
        "--cap",
        type=int,
        default=DEFAULT_ENUMERATION_CAP,
        help="largest state space the oracle may enumerate",
    )
    p.add_argument(
        "--format",
        default="human",
        choices=driver.FORMATS,
        help="report rendering (default: human)",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="maskcheck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser(
        "check", help="decide a noninterference property of one gadget"
    )
    _add_run_flags(check, with_property=True)

    ci = sub.add_parser(
        "oracle-ci",
        help="exact oracle answer for a single (I, O) pair",
    )
    _add_run_flags(ci, with_property=False)
    ci.add_argument(
        "-i",
        "--inputs",
        action="append",
        default=[],
        metavar="WIRE",
        help="input wire the simulator may read (repeatable, comma-separable)",
    )
    ci.add_argument(
        "-o",
        "--probes",
        action="append",
        default=[],
        metavar="WIRE",
        help="probed wire (repeatable, comma-separable)",
    )

    corpus = sub.add_parser(
        "corpus", help="re-verify every shipped gadget at its configured scale"
    )
    corpus.add_argument("--jobs", type=int, default=None)
    corpus.add_argument("--format", default="human", choices=driver.FORMATS)

    fmt = sub.add_parser(
        "fmt",
        help="canonically format .gdl files (comments are not preserved)",
    )
    fmt.add_argument("files", nargs="+", type=Path)
    group = fmt.add_mutually_exclusive_group()
    group.add_argument(
        "--write", action="store_true", help="rewrite files in place"
    )
    group.add_argument(
        "--check",
        action="store_true",
        help="exit 1 if any file is not canonically formatted",
    )

    return parser


def _split_wires(values: list[str]) -> tuple[str, ...]:
    out: list[str] = []
    for v in values:
        out.extend(w.strip() for w in v.split(",") if w.strip())
    return tuple(dict.fromkeys(out))


def _cmd_check(args) -> int:
    cfg = RunConfig(
        gadget=args.gadget,
        prop=args.property,
        t=args.t,
        q=args.q,
        engine=args.engine,
        jobs=args.jobs if args.jobs is not None else _default_jobs(),
        cap=args.cap,
        probe_cap=args.probe_cap,
        format=args.format,
        checkpoint=args.checkpoint,
        allow_units=args.allow_units,
        unshared_mode=args.unshared_mode,
    )
    code, report = driver.run(cfg)
    sys.stdout.write(driver.render_report(report, cfg.format))
    return code


def _cmd_oracle_ci(args) -> int:
    cfg = RunConfig(
        gadget=args.gadget,
        prop="io-ni",
        q=args.q,
        cap=args.cap,
        format=args.format,
        i_set=_split_wires(args.inputs),
        probes=_split_wires(args.probes),
    )
    code, report = driver.oracle_ci(cfg)
    sys.stdout.write(driver.render_report(report, cfg.format))
    return code


def _cmd_corpus(args) -> int:
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs}")
    code, report = driver.corpus_verify(jobs=jobs)
    sys.stdout.write(driver.render_report(report, args.format))
    return code


def _cmd_fmt(args) -> int:
    dirty = False
    for path in args.files:
        try:
            source = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}")
        formatted = pretty(parse_gadget(source))
        if args.write:
            if formatted != source:
                path.write_text(formatted)
        elif args.check:
            if formatted != source:
                sys.stderr.write(f"{path}: not canonically formatted\n")
                dirty = True
        else:
            sys.stdout.write(formatted)
    return EXIT_REFUTED if dirty else EXIT_VERIFIED


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "check": _cmd_check,
        "oracle-ci": _cmd_oracle_ci,
        "corpus": _cmd_corpus,
        "fmt": _cmd_fmt,
    }[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        sys.stderr.write(f"maskcheck: error: {exc}\n")
        return EXIT_USAGE
    except MaskcheckError as exc:
        sys.stderr.write(f"maskcheck: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
