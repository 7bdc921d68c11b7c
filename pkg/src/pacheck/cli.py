"""Command-line interface.

Exit status: 0 guarantee produced or null rejected, 2 violation observed,
3 inconclusive (a trace ran out of trials), 1 usage or infrastructure error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict

from . import __version__
from .analyses import (
    AnalysisReport,
    PatchOutcome,
    Verdict,
    patch_verify,
    quantify_practice,
    quantify_theory,
    verify,
)
from .binomial_stats import (
    ApproximationParams,
    Tally,
    hoeffding_sample_size,
    kp_sample_size,
    ro3_sample_size,
)
from .engine import TrialEngine, turning_point_test
from .errors import InsufficientTrialsError, PacheckError, ParameterError, TrialInfrastructureError
from .experiments import (
    default_mu_grid,
    fig1_table,
    rows_to_csv,
    rq1_coverage,
    rq2_efficiency,
    rq4_residual_risk,
    rq5_patch_comparison,
)
from .subjects import (
    ExitCodeZero,
    LatencyBelow,
    OutputMatches,
    ValueThreshold,
    bernoulli_source,
    subprocess_source,
    trace_source,
    uniform_bits,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2
EXIT_INCONCLUSIVE = 3
SEED_ENV = "PACHECK_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _unit(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly inside (0, 1), got {text}")
    return value


def _count(text):
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive(text):
    value = _count(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# -- sources -------------------------------------------------------------------


def parse_observer(spec: str):
    """``[name=]kind[:args]`` with kind one of exit-zero, output-matches:PATTERN,
    latency-below:MS, value-below:CHANNEL:BOUND."""
    name = None
    head = spec.split(":", 1)[0]
    if "=" in head:
        name, spec = spec.split("=", 1)
    kind, _, rest = spec.partition(":")
    if kind == "exit-zero" and not rest:
        observer = ExitCodeZero()
    elif kind == "output-matches" and rest:
        observer = OutputMatches(rest)
    elif kind == "latency-below" and rest:
        observer = LatencyBelow(float(rest))
    elif kind == "value-below" and rest.count(":") >= 1:
        channel, bound = rest.rsplit(":", 1)
        observer = ValueThreshold(channel, float(bound))
    else:
        raise UsageError(f"cannot parse property {spec!r}")
    if name:
        observer = type(observer)(**{**asdict(observer), "name": name})
    return observer


def build_source(args):
    if bool(args.source) == bool(args.cmd):
        raise UsageError("give exactly one of --source or --cmd")
    if args.source:
        kind, _, rest = args.source.partition(":")
        if kind == "bernoulli":
            try:
                return bernoulli_source(float(rest))
            except ValueError:
                raise UsageError(f"bad Bernoulli proportion in {args.source!r}") from None
        if kind == "trace" and rest:
            return trace_source(rest)
        raise UsageError(f"unknown source {args.source!r}; use bernoulli:MU or trace:PATH")
    if not args.prop:
        raise UsageError("--cmd needs at least one --prop")
    observers = [parse_observer(p) for p in args.prop]
    bits = args.input_bits
    if bits is None and "{input}" in args.cmd:
        bits = 32
    generator = uniform_bits(bits) if bits else None
    return subprocess_source(args.cmd, observers, generator, args.timeout, args.stdin)


def _add_source(p):
    g = p.add_argument_group("trial source")
    g.add_argument("--source", help="bernoulli:MU or trace:PATH")
    g.add_argument("--cmd", help="shell command run once per trial; {input} is replaced by the trial input")
    g.add_argument("--prop", action="append", default=[],
                   help="property observer for --cmd (repeatable): exit-zero, output-matches:PATTERN, "
                        "latency-below:MS, value-below:CHANNEL:BOUND; prefix NAME= to rename")
    g.add_argument("--input-bits", type=_positive, help="draw each trial input as a uniform integer of this many bits")
    g.add_argument("--stdin", action="store_true", help="also pass the trial input on standard input")
    g.add_argument("--timeout", type=float, default=10.0, help="per-trial timeout in seconds (default 10)")


def _add_common(p, params=True):
    if params:
        p.add_argument("--epsilon", type=_unit, required=True)
        p.add_argument("--delta", type=_unit, required=True)
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--batch-size", type=_positive, default=64)
    p.add_argument("--output", "-o", help="write the report here instead of standard output")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")


def make_parser():
    parser = _Parser(prog="pacheck", description="Monte Carlo program analysis with (epsilon, delta) guarantees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="sample size for a planner")
    p.add_argument("method", choices=("ro3", "hoeffding", "kp"))
    p.add_argument("--p0", type=float, help="anticipated proportion (kp only)")
    _add_common(p)

    p = sub.add_parser("verify", help="check properties never fail, with a residual-risk bound")
    _add_source(p)
    p.add_argument("--property", action="append", dest="properties",
                   help="restrict to these properties (default: all)")
    _add_common(p)

    p = sub.add_parser("quantify", help="estimate the probability a property holds")
    _add_source(p)
    p.add_argument("--property", help="property to estimate (default: the only one)")
    p.add_argument("--algorithm", choices=("theory", "practice"), default="theory",
                   help="theory checks the exact interval after every trial; practice predicts sample sizes")
    p.add_argument("--cp-stride", type=_positive, default=1)
    p.add_argument("--initial-guess", choices=("mle", "laplace"), default="mle")
    _add_common(p)

    p = sub.add_parser("patch-verify", help="decide whether a fix lowered a failure rate")
    _add_source(p)
    p.add_argument("--property", help="property that holds on a successful fixed-program run")
    p.add_argument("--bug-n", type=_count, required=True, help="buggy-program executions")
    p.add_argument("--bug-x", type=_count, required=True, help="buggy-program executions that exposed the bug")
    p.add_argument("--delta", type=_unit, required=True, help="significance level")
    _add_common(p, params=False)

    p = sub.add_parser("iid-check", help="turning point test on a recorded outcome sequence")
    _add_source(p)
    p.add_argument("--property", help="property whose sequence is tested (default: the only one)")
    p.add_argument("--count", type=_positive, help="trials to run (default: whole trace)")
    _add_common(p, params=False)

    p = sub.add_parser("simulate", help="run a simulation study and emit its table")
    p.add_argument("study", choices=("coverage", "efficiency", "residual-risk", "patch-comparison", "accuracy-table"))
    p.add_argument("--reps", type=_positive, help="repetitions per cell")
    p.add_argument("--n", type=_positive, default=10_000, help="trials per repetition (coverage)")
    p.add_argument("--delta", type=_unit, help="confidence parameter")
    p.add_argument("--epsilon", type=_unit, help="accuracy parameter (efficiency)")
    p.add_argument("--mu", type=float, action="append", help="true proportion (repeatable)")
    _add_common(p, params=False)
    return parser


# -- output --------------------------------------------------------------------


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for key, value in obj.items():
            out.update(_flatten(value, f"{prefix}{key}."))
    elif isinstance(obj, list):
        out[prefix[:-1]] = json.dumps(obj)
    else:
        out[prefix[:-1]] = obj
    return out


def _render(doc, fmt):
    if fmt == "json":
        return json.dumps(doc, indent=2) + "\n"
    flat = _flatten(doc)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(flat)
        writer.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
        return buf.getvalue()
    width = max(map(len, flat), default=0)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in flat.items())


def _emit(text, args):
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolved(args):
    return {k: v for k, v in vars(args).items() if k not in ("output", "format")}


# -- commands ------------------------------------------------------------------

_GUARANTEES = {
    "ro3": "if all {n} trials satisfy the property, then with confidence at least {c} "
           "its probability is at least {q} (epsilon={e}, delta={d}).",
    "hoeffding": "after {n} trials the observed proportion is within {e} of the true "
                 "probability with confidence at least {c} (delta={d}).",
    "kp": "about {n} trials are expected to shrink the exact interval around a proportion "
          "near {p} to radius {e} at confidence {c} (delta={d}).",
}


def cmd_plan(args):
    e, d = args.epsilon, args.delta
    if args.method == "kp":
        if args.p0 is None:
            raise UsageError("plan kp needs --p0")
        n = kp_sample_size(args.p0, e, d)
    else:
        if args.p0 is not None:
            raise UsageError("--p0 applies to plan kp only")
        n = (ro3_sample_size if args.method == "ro3" else hoeffding_sample_size)(e, d)
    sentence = _GUARANTEES[args.method].format(n=n, c=repr(1 - d), q=repr(1 - e), e=repr(e), d=repr(d), p=args.p0)
    doc = {"tool_version": __version__, "method": args.method, "sample_size": n,
           "guarantee": sentence, "config": _resolved(args)}
    if args.format == "text":
        return f"{n}\n{sentence}\n", EXIT_OK
    return _render(doc, args.format), EXIT_OK


def _report_doc(report, args, seed):
    doc = report.to_dict()
    doc["config"] = {**_resolved(args), "seed": seed}
    return doc


def _analysis_exit(report: AnalysisReport):
    return EXIT_VIOLATION if report.verdict is Verdict.VIOLATED else EXIT_OK


def cmd_verify(args, source, seed):
    report = verify(source, args.properties, ApproximationParams(args.epsilon, args.delta), seed,
                    workers=args.workers, batch_size=args.batch_size)
    return _render(_report_doc(report, args, seed), args.format), _analysis_exit(report)


def cmd_quantify(args, source, seed):
    params = ApproximationParams(args.epsilon, args.delta)
    options = {"workers": args.workers, "batch_size": args.batch_size}
    if args.algorithm == "theory":
        report = quantify_theory(source, args.property, params, seed, cp_stride=args.cp_stride, **options)
    else:
        report = quantify_practice(source, args.property, params, seed,
                                   initial_guess=args.initial_guess, **options)
    return _render(_report_doc(report, args, seed), args.format), _analysis_exit(report)


def cmd_patch_verify(args, source, seed):
    if args.bug_x > args.bug_n:
        raise UsageError("--bug-x cannot exceed --bug-n")
    verdict = patch_verify(source, args.property, args.delta, Tally(args.bug_n, args.bug_x), seed,
                           workers=args.workers, batch_size=args.batch_size)
    doc = verdict.to_dict()
    doc["config"] = {**_resolved(args), "seed": seed}
    code = EXIT_OK if verdict.outcome is PatchOutcome.NULL_REJECTED else EXIT_VIOLATION
    return _render(doc, args.format), code


def cmd_iid_check(args, source, seed):
    prop = args.property or (source.properties[0] if len(source.properties) == 1 else None)
    if prop is None or prop not in source.properties:
        raise UsageError(f"name one --property of {list(source.properties)}")
    count = args.count
    if count is None:
        if not hasattr(source, "column"):
            raise UsageError("--count is required unless the source is a trace")
        count = len(source)
    engine = TrialEngine(source, args.workers, args.batch_size, retain_bits=True, bits_cap=count)
    ledger = engine.run(count, seed)
    diagnostic = turning_point_test(ledger.outcome_bits(prop).astype(int))
    doc = {"tool_version": __version__, "property": prop, "base_seed": seed,
           **diagnostic.to_dict(), "config": {**_resolved(args), "seed": seed}}
    return _render(doc, args.format), EXIT_OK


def cmd_simulate(args, seed):
    delta = args.delta
    if args.study == "accuracy-table":
        rows = fig1_table(delta or 0.01)
    elif args.study == "coverage":
        mus = args.mu or default_mu_grid()
        rows = rq1_coverage(mus, args.n, args.reps or 2000, delta or 0.05, seed)
    elif args.study == "efficiency":
        mus = args.mu or [1e-4]
        rows = rq2_efficiency(mus, [(args.epsilon or 1e-3, delta or 0.01)], args.reps or 100, seed)
    elif args.study == "residual-risk":
        rows = rq4_residual_risk(delta=delta or 0.05)
    else:
        rows = rq5_patch_comparison(args.mu or (1e-3,), reps=args.reps or 50, seed=seed)
    if args.format == "csv":
        return rows_to_csv(rows), EXIT_OK
    doc = {"tool_version": __version__, "study": args.study, "seed": seed,
           "config": {**_resolved(args), "seed": seed}, "rows": [asdict(r) for r in rows]}
    if args.format == "text":
        return rows_to_csv(rows).replace(",", "\t"), EXIT_OK
    return _render(doc, "json"), EXIT_OK


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else _default_seed()
        if args.command == "plan":
            text, code = cmd_plan(args)
        elif args.command == "simulate":
            text, code = cmd_simulate(args, seed)
        else:
            source = build_source(args)
            handler = {"verify": cmd_verify, "quantify": cmd_quantify,
                       "patch-verify": cmd_patch_verify, "iid-check": cmd_iid_check}[args.command]
            text, code = handler(args, source, seed)
    except InsufficientTrialsError as exc:
        partial = {p: {"n": t.n, "x": t.x} for p, t in exc.tallies.items()} if exc.ledger else {}
        _emit(json.dumps({"tool_version": __version__, "error": str(exc), "inconclusive": True,
                          "trial_index": exc.trial_index, "tallies": partial}, indent=2) + "\n", args)
        return EXIT_INCONCLUSIVE
    except TrialInfrastructureError as exc:
        print(f"pacheck: infrastructure error at trial {exc.trial_index}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (UsageError, PacheckError, ParameterError, OSError) as exc:
        print(f"pacheck: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(text, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
