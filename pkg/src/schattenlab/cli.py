"""Command line interface: ``schattenlab <subcommand> ...``."""

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import experiments as ex
from .decomposition import SolverConfig, triple_norm
from .hardy import TorusPolynomial, conditional_expectation, estimate_analytic_umd_constant, \
    is_hardy, martingale_differences
from .matrix import check_exponent, matrix_from_json, schatten_norm
from .rng import RANDOMIZERS
from .series import exact_rademacher_moment, sample_series_norm
from .square import chi_norm, sequence_from_json


def _load_json(path):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _emit(args, payload, rows=None):
    """Write `payload` as JSON, or `rows` (list of dicts / RatioRecords) as CSV."""
    if args.format == "csv":
        if rows is None:
            rows = [payload]
        if rows and isinstance(rows[0], ex.RatioRecord):
            text = ex.format_csv(rows)
        else:
            buf = io.StringIO()
            keys = sorted({k for r in rows for k in r if not isinstance(r[k], (list, dict))})
            w = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow(r)
            text = buf.getvalue()
    else:
        text = ex.dumps(payload)
    if args.output:
        ex.write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _float_list(s):
    return [check_exponent(v) if v.strip().lower().startswith("inf") else float(v)
            for v in s.split(",") if v.strip()]


def _int_list(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _dims(s):
    out = []
    for part in s.split(","):
        a, _, b = part.strip().partition("x")
        out.append([int(a), int(b or a)])
    return out


def cmd_schatten(args):
    x = matrix_from_json(_load_json(args.matrix))
    rows = [{"p": "inf" if np.isinf(p) else p, "norm": schatten_norm(x, p)}
            for p in _float_list(args.p)]
    _emit(args, {"norms": rows}, rows)


def cmd_chi(args):
    x = sequence_from_json(_load_json(args.sequence))
    q = check_exponent(args.q)
    payload = {"q": args.q, "chi_norm": chi_norm(x, q)}
    _emit(args, payload)


def cmd_triple(args):
    x = sequence_from_json(_load_json(args.sequence))
    cfg = SolverConfig(max_iterations=args.max_iterations, tolerance=args.tolerance,
                       step_size=args.step_size, restart_count=args.restarts, seed=args.seed)
    res = triple_norm(x, check_exponent(args.p), cfg)
    _emit(args, res.to_json())


def cmd_simulate(args):
    x = sequence_from_json(_load_json(args.sequence))
    p = check_exponent(args.p)
    if args.exhaustive:
        rep = exact_rademacher_moment(x, p, args.r)
    else:
        rep = sample_series_norm(x, args.randomizer, p, args.r, args.samples, args.seed,
                                 jobs=args.jobs)
    row = {"randomizer": "rademacher" if args.exhaustive else args.randomizer, "p": args.p,
           "r": args.r, "N": x.shape[0], "d1": x.shape[1], "d2": x.shape[2], **rep.to_json()}
    _emit(args, row)


def _config_from_args(args, name):
    if args.config:
        configs, _ = ex.load_suite(args.config)
        return configs[0]
    fields = {"name": name, "seed": args.seed, "format": args.format}
    for key in ("dims", "terms", "exponents", "trials", "samples", "randomizer"):
        val = getattr(args, key, None)
        if val is not None:
            fields[key] = val
    return ex.ExperimentConfig(**fields)


def cmd_verify(args):
    which = args.which
    if which in ("thm3", "thm4"):
        cfg = _config_from_args(args, which)
        fn = ex.verify_thm3 if which == "thm3" else ex.verify_thm4
        recs = fn(cfg, jobs=args.jobs)
        _emit(args, ex._records_payload(which, cfg, recs), recs)
    elif which == "counterexample":
        q = (args.exponents or [4.0])[0]
        rep = ex.counterexample_row_column(q, args.terms or [4, 16, 64], args.seed)
        _emit(args, rep, rep["rows"])
    elif which == "dichotomy":
        rep = ex.dichotomy_demo(args.terms or [2, 16, 256, 4096], args.samples or 20000,
                                args.seed)
        _emit(args, rep, rep["rows"])
    elif which == "kahane":
        cfg = _config_from_args(args, "kahane")
        rep = ex.kahane_experiment(cfg)
        _emit(args, rep, rep["rows"])
    elif which == "tails":
        cfg = _config_from_args(args, "tails")
        rep = ex.tails_experiment(cfg)
        _emit(args, rep, [{k: v for k, v in r.items() if k != "points"} for r in rep["rows"]])


def cmd_hardy(args):
    if args.which == "umd":
        rep = estimate_analytic_umd_constant(args.space, args.degree, args.trials, args.budget,
                                             args.seed, M=args.M,
                                             quadrature_samples=args.samples)
        payload = rep.to_json()
        _emit(args, payload, [{k: v for k, v in payload.items() if k != "witness"}])
    else:
        f = TorusPolynomial.from_json(_load_json(args.poly))
        diffs = martingale_differences(f)
        payload = {
            "is_hardy": is_hardy(f),
            "M": f.M,
            "terms": len(f.terms),
            "degree": f.degree(),
            "mean": conditional_expectation(f, -1).to_json()["terms"],
            "difference_term_counts": [len(d.terms) for d in diffs],
        }
        _emit(args, payload)


def cmd_run_suite(args):
    return ex.run_suite(args.config, output_dir=args.output, jobs=args.jobs)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--output", default=argparse.SUPPRESS,
                        help="output file (directory for run-suite)")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="schattenlab", parents=[common],
                                     description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schatten", parents=[common], help="Schatten norms of a matrix")
    p.add_argument("--matrix", required=True, help="matrix JSON file ('-' for stdin)")
    p.add_argument("--p", default="1,2,inf", help="comma separated exponents")
    p.set_defaults(func=cmd_schatten)

    p = sub.add_parser("chi", parents=[common], help="row/column square-function norm")
    p.add_argument("--sequence", required=True)
    p.add_argument("--q", default="4")
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("triple-norm", parents=[common], help="decomposition norm")
    p.add_argument("--sequence", required=True)
    p.add_argument("--p", default="1")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--step-size", type=float, default=SolverConfig.step_size)
    p.add_argument("--restarts", type=int, default=0)
    p.set_defaults(func=cmd_triple)

    p = sub.add_parser("simulate", parents=[common], help="moments of a random series norm")
    p.add_argument("--sequence", required=True)
    p.add_argument("--randomizer", choices=RANDOMIZERS, default="rademacher")
    p.add_argument("--p", default="1")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--exhaustive", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="run one named experiment")
    p.add_argument("which", choices=("thm3", "thm4", "counterexample", "dichotomy",
                                     "kahane", "tails"))
    p.add_argument("--config", help="experiment config JSON (overrides grid flags)")
    p.add_argument("--dims", type=_dims, help="e.g. 2x2,4x4")
    p.add_argument("--terms", type=_int_list, help="e.g. 2,4,8")
    p.add_argument("--exponents", type=_float_list, help="e.g. 2,3,4")
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--randomizer", choices=RANDOMIZERS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hardy", parents=[common], help="Hardy martingale tools")
    p.add_argument("which", choices=("umd", "check"))
    p.add_argument("--space", default="euclidean(2)")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--budget", type=int, default=4)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--poly", help="TorusPolynomial JSON file for 'check'")
    p.set_defaults(func=cmd_hardy)

    p = sub.add_parser("run-suite", parents=[common], help="run every experiment in a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, default in (("seed", 0), ("output", None), ("format", "json"), ("jobs", 1)):
        if not hasattr(args, key):
            setattr(args, key, default)
    if args.command == "hardy" and args.which == "check" and not args.poly:
        parser.error("hardy check needs --poly")
    try:
        code = args.func(args)
    except (ValueError, OSError, ex.ConfigError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
