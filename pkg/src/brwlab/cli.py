"""Command line: ``brwlab run`` and ``brwlab plotdata``.

Exit codes: 0 success, 1 a node or seeding cap was hit (partial results are
still written and flagged), 2 configuration error.  Failures print one JSON
record to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiment import ConfigError, load_spec, resolve_workers, run_experiment, write_outputs
from .plotting import emit_plot_data

EXIT_OK, EXIT_CAP, EXIT_CONFIG = 0, 1, 2


def _fail(code: int, kind: str, **info) -> int:
    print(json.dumps({"error": kind, "exit_code": code, **info}, sort_keys=True), file=sys.stderr)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brwlab", description="Branching random walk experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None, help="process count (overrides BRWLAB_WORKERS)")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--trace", action="store_true", help="write an NDJSON trace")
    run.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    plot = sub.add_parser("plotdata", help="long-format table and figure for a result CSV")
    plot.add_argument("result")
    plot.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "plotdata":
        try:
            paths = emit_plot_data(args.result, args.out)
        except (OSError, ValueError) as exc:
            return _fail(EXIT_CONFIG, "input", message=str(exc), path=args.result)
        print(json.dumps({k: str(v) for k, v in paths.items()}))
        return EXIT_OK
    try:
        spec = load_spec(args.config)
        workers = resolve_workers(args.workers, spec)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", field=exc.field, message=exc.message, path=args.config)
    result = run_experiment(spec, workers=workers, trace=args.trace)
    paths = write_outputs(result, args.out, figure=not args.no_figure)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    if result.capped:
        return _fail(EXIT_CAP, "cap", capped_replicas=result.capped, csv=str(paths["csv"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
