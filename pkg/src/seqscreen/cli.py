"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numerical
failure (non-convergence, integrity violation). Diagnostics go to stderr,
data to stdout or the requested output files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, formats
from .dictionary import Dictionary, gen_synthetic, lambda_max, normalize_columns
from .errors import FormatError, NumericalError, SeqScreenError, UsageError
from .sequence import NoiseConfig, SequenceStrategy, run_sequence
from .solver import LassoProblem, SolverConfig, solve_lasso


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_input_args(sub):
    sub.add_argument("--dict", required=True, help="dictionary file")
    sub.add_argument("--x", required=True, help="target vector file")
    sub.add_argument("--format", choices=["dmat", "csv"], default="dmat",
                     help="input file format (csv is row-major, header-free)")
    sub.add_argument("--no-normalize", action="store_true",
                     help="do not renormalize dictionary columns")


def _load_inputs(args):
    if args.format == "csv":
        dct = Dictionary.from_array(formats.load_matrix(args.dict, "csv"))
        x = formats.load_vector(args.x, "csv")
    else:
        dct = Dictionary.from_file(args.dict)
        x = formats.read_dvec(args.x)
    if not args.no_normalize:
        dct = normalize_columns(dct)
    return dct, x


def _solver_config(args):
    return SolverConfig(gap_tol=args.gap_tol, max_iters=args.max_iters,
                        algorithm=args.algorithm)


def _add_solver_args(sub):
    sub.add_argument("--gap-tol", type=float, default=1e-8)
    sub.add_argument("--max-iters", type=int, default=100_000)
    sub.add_argument("--algorithm",
                     choices=["coordinate_descent", "proximal_gradient"],
                     default="coordinate_descent")


def build_parser():
    parser = _Parser(prog="seqscreen",
                     description="Sequential safe screening for lasso problems")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--target", choices=["random", "in-range"],
                     default="random")
    gen.add_argument("--out-dict", required=True)
    gen.add_argument("--out-x", required=True)

    lmax = sub.add_parser("lambda-max", help="print the critical regularization")
    _add_input_args(lmax)

    solve = sub.add_parser("solve", help="unscreened solve at a lambda ratio")
    _add_input_args(solve)
    solve.add_argument("--lambda-ratio", type=float, required=True)
    _add_solver_args(solve)

    run = sub.add_parser("run", help="sequential screening run")
    _add_input_args(run)
    run.add_argument("--lambda-ratio", type=float, required=True)
    run.add_argument("--strategy",
                     choices=["dass", "geometric", "dpp-feedback"],
                     required=True)
    run.add_argument("--R", type=float)
    run.add_argument("--N", type=int)
    run.add_argument("--rule", choices=["dome", "dpp", "strong"])
    run.add_argument("--lambda1-factor", type=float, default=0.95)
    run.add_argument("--chunk-size", type=int)
    run.add_argument("--noise-nsr", type=float)
    run.add_argument("--noise-threshold", type=float)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trace", required=True, help="trace JSON output path")
    _add_solver_args(run)

    bch = sub.add_parser("bench", help="run a benchmark config")
    bch.add_argument("--config", required=True)
    bch.add_argument("--out", required=True)
    bch.add_argument("--csv")

    rpt = sub.add_parser("report", help="emit plot-ready CSV series")
    rpt.add_argument("--in", dest="infile", required=True)
    rpt.add_argument("--out", dest="outdir", required=True)

    return parser


def _cmd_gen(args):
    mode = args.target.replace("-", "_")
    dct, x = gen_synthetic(args.d, args.p, args.seed, mode)
    formats.write_dmat(args.out_dict, dct.to_array())
    formats.write_dvec(args.out_x, x)
    return 0


def _cmd_lambda_max(args):
    dct, x = _load_inputs(args)
    lmr = lambda_max(dct, x)
    # Feature indices are reported 1-based on the CLI surface.
    json.dump({"lambda_max": lmr.lambda_max, "index": lmr.index + 1,
               "sign": lmr.sign}, sys.stdout)
    sys.stdout.write("\n")
    return 0


def _cmd_solve(args):
    dct, x = _load_inputs(args)
    lmr = lambda_max(dct, x)
    lam = args.lambda_ratio * lmr.lambda_max
    sol = solve_lasso(LassoProblem(dct, x, lam), config=_solver_config(args))
    json.dump({
        "lambda": lam,
        "lambda_max": lmr.lambda_max,
        "nonzeros": int(np.count_nonzero(sol.w)),
        "gap": sol.gap,
        "iterations": sol.iterations,
        "solve_seconds": sol.solve_seconds,
        "converged": sol.converged,
    }, sys.stdout)
    sys.stdout.write("\n")
    return 0 if sol.converged else 3


def _cmd_run(args):
    dct, x = _load_inputs(args)
    lmr = lambda_max(dct, x)
    lam_t = args.lambda_ratio * lmr.lambda_max
    strategy = SequenceStrategy(
        kind=args.strategy.replace("-", "_"), R=args.R, N=args.N,
        lambda1_factor=args.lambda1_factor, rule=args.rule)
    noise = None
    if args.noise_nsr is not None:
        noise = NoiseConfig(nsr=args.noise_nsr, threshold=args.noise_threshold,
                            seed=args.seed)
    trace = run_sequence(dct, x, lam_t, strategy, solver=_solver_config(args),
                         noise=noise, chunk_size=args.chunk_size)
    doc = trace.to_json_dict()
    formats.validate_trace(doc)
    formats.write_json(args.trace, doc)
    json.dump({"N": trace.N, "lambda_t": lam_t,
               "final_kept": trace.steps[-1].kept_count,
               "nonzeros": int(np.count_nonzero(trace.w_final))}, sys.stdout)
    sys.stdout.write("\n")
    if not all(s.converged for s in trace.steps):
        print("warning: at least one step did not converge", file=sys.stderr)
        return 3
    return 0


def _cmd_bench(args):
    config = formats.read_json(args.config)
    report = bench.run_benchmark(config)
    formats.write_json(args.out, report)
    if args.csv:
        bench.write_report_csv(args.csv, report)
    return 0


def _cmd_report(args):
    report = formats.read_json(args.infile)
    if "rows" not in report or "aggregates" not in report:
        raise FormatError(f"{args.infile} is not a benchmark report")
    bench.write_plot_series(args.outdir, report)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "lambda-max": _cmd_lambda_max,
    "solve": _cmd_solve,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, SeqScreenError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
