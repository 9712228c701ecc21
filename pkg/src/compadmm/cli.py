"""``compadmm`` command line: run experiments, fit rates, plot traces."""
from __future__ import annotations

import argparse
import sys

from . import trace as trace_io
from .errors import ConfigurationError, DivergenceError
from .harness import fit_rate, run_experiment
from .plotting import emit_plot

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="compadmm")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--jobs", type=int, default=1)
    rate = sub.add_parser("rate", help="fit log10(gap) against epoch")
    rate.add_argument("--trace", required=True)
    rate.add_argument("--from", dest="lo", type=int, required=True)
    rate.add_argument("--to", dest="hi", type=int, required=True)
    rate.add_argument("--gap", default="bregman_gap", choices=("bregman_gap", "objective_gap"))
    plot = sub.add_parser("plot", help="SVG plot of gap curves")
    plot.add_argument("--axis", choices=("oracle", "time"), default="oracle")
    plot.add_argument("--out", required=True)
    plot.add_argument("--gap", default="objective_gap", choices=("bregman_gap", "objective_gap"))
    plot.add_argument("traces", nargs="+")
    return p


def _cmd_run(args):
    outcomes = run_experiment(args.config, out_dir=args.out, jobs=args.jobs)
    code = EXIT_OK
    for o in outcomes:
        target = "-" if o.calls_to_target is None else o.calls_to_target
        print(f"{o.run_id}\t{o.status}\tcalls={o.final_calls}\tgap={o.final_gap}\tcalls_to_target={target}")
        if o.status == "config_error":
            print(o.message, file=sys.stderr)
            code = max(code, EXIT_CONFIG) if code != EXIT_DIVERGED else code
        elif o.status == "diverged":
            print(o.message, file=sys.stderr)
            code = EXIT_DIVERGED
    return code


def _cmd_rate(args):
    fit = fit_rate(trace_io.load(args.trace), (args.lo, args.hi), gap=args.gap)
    note = " (window shrunk)" if fit.shrunk else ""
    print(f"slope={fit.slope:.6g} r2={fit.r2:.6f} epochs={fit.window[0]}..{fit.window[1]}{note}")
    return EXIT_OK


def _cmd_plot(args):
    traces = [trace_io.load(path) for path in args.traces]
    emit_plot(traces, args.axis, args.out, gap=args.gap)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "rate": _cmd_rate, "plot": _cmd_plot}[args.command]
    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
