"""Command line entry point: ``specjit run FILE [options]``."""

from __future__ import annotations

import argparse
import json
import sys

from specjit.errors import GraphOnlyViolation, LexError, ParseError, ResolveError, SLRuntimeError
from specjit.frontend import load
from specjit.graph.ir import Graph, dump
from specjit.orchestrator import MODES, SPECULATIVE, Runtime

EXIT_OK, EXIT_RUNTIME, EXIT_SOURCE, EXIT_GRAPH_ONLY = 0, 1, 2, 3


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specjit", description="Run SL programs with speculative graph compilation.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute an SL source file")
    r.add_argument("file")
    r.add_argument("--mode", choices=MODES, default=SPECULATIVE)
    r.add_argument("--profile-iters", type=_positive, default=3, metavar="N",
                   help="interpreted warmup calls before a graph is generated")
    par = r.add_mutually_exclusive_group()
    par.add_argument("--workers", type=_positive, default=1, metavar="N")
    par.add_argument("--serial", action="store_true", help="same as --workers 1")
    r.add_argument("--no-unroll", action="store_true")
    r.add_argument("--no-specialize", action="store_true")
    r.add_argument("--dump-graph", metavar="PATH")
    r.add_argument("--dump-format", choices=("json", "dot"), default="json")
    r.add_argument("--stats", metavar="PATH", help="write the runtime report as JSON")
    r.add_argument("--cache-max", type=_positive, default=None, metavar="N")
    return p


def run(args, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as e:
        print(f"error: cannot read {args.file}: {e.strerror}", file=stderr)
        return EXIT_SOURCE
    try:
        program = load(source)
    except (LexError, ParseError, ResolveError) as e:
        print(f"{args.file}: {e}", file=stderr)
        return EXIT_SOURCE
    rt = Runtime(program, mode=args.mode, warmup=args.profile_iters,
                 workers=1 if args.serial else args.workers,
                 unroll=not args.no_unroll, specialize=not args.no_specialize,
                 cache_max=args.cache_max)
    code = EXIT_OK
    try:
        rt.run()
    except SLRuntimeError as e:
        print(f"{args.file}: {e}", file=stderr)
        code = EXIT_RUNTIME
    except GraphOnlyViolation as e:
        print(f"{args.file}: graph-only: {e}", file=stderr)
        code = EXIT_GRAPH_ONLY
    finally:
        rt.close()
        stdout.write(rt.output)
        stdout.flush()
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as fh:
            json.dump(rt.stats(), fh, indent=2, sort_keys=True)
    if args.dump_graph:
        g = rt.best_graph() or Graph("empty")
        dump(g, args.dump_graph, args.dump_format)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run(args)
    return EXIT_OK  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
