"""Benchmark harness: rejection, speedup, and comparison experiments.

Rejection is measured at the final (target) step: the fraction of all
features discarded by screening there. Speedup divides the time of one
unscreened solve at the target by the total time to screen plus solve
every reduced problem along the sequence. Timing uses the monotonic wall
clock; each cell is repeated and the median taken.
"""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import formats
from .dictionary import Dictionary, gen_synthetic, lambda_max, normalize_columns
from .errors import UsageError
from .sequence import NoiseConfig, SequenceStrategy, run_sequence
from .solver import LassoProblem, SolverConfig, solve_lasso

DEFAULT_MEMORY_CAP = 512 * 1024 * 1024  # bytes of kept columns


def rejection_percentage(masks, p):
    """Fraction of all features rejected at the final step."""
    if not masks:
        raise UsageError("no screening masks recorded")
    if p < 1:
        raise UsageError("feature count must be >= 1")
    return (p - masks[-1].kept_count) / p


def speedup(baseline_seconds, sequence_seconds):
    """Unscreened solve time over total screen-plus-solve sequence time."""
    if not baseline_seconds > 0 or not sequence_seconds > 0:
        raise UsageError("timings must be positive")
    return baseline_seconds / sequence_seconds


def strategy_label(strategy):
    if strategy.kind == "dass":
        return f"dass(R={strategy.R:g})"
    if strategy.kind == "dpp_feedback":
        return f"dpp_feedback(R={strategy.R:g})"
    return f"geometric(N={strategy.N},rule={strategy.effective_rule})"


def _parse_strategy(spec):
    return SequenceStrategy(
        kind=spec["kind"].replace("-", "_"),
        R=spec.get("R"),
        N=spec.get("N"),
        lambda1_factor=spec.get("lambda1_factor", 0.95),
        rule=spec.get("rule"),
    )


def _load_instance(spec):
    kind = spec.get("kind", "synthetic")
    if kind == "synthetic":
        dct, x = gen_synthetic(spec["d"], spec["p"], spec["seed"],
                               spec.get("target", "random"))
        return dct, x, f"synthetic(d={spec['d']},p={spec['p']},seed={spec['seed']})"
    if kind == "files":
        dct = Dictionary.from_file(spec["dict"])
        # Normalization materializes the matrix; pass normalize=false to
        # keep a file-backed instance out of core.
        if spec.get("normalize", True):
            dct = normalize_columns(dct)
        x = formats.load_vector(spec["x"], spec.get("x_format", "dvec"))
        return dct, x, spec["dict"]
    raise UsageError(f"unknown instance kind {kind!r}")


def _median_of(fn, repetitions):
    times = []
    result = None
    for _ in range(repetitions):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, statistics.median(times)


def _run_cell(dct, x, instance_label, ratio, strategy, cfg, repetitions,
              chunk_size, noise, memory_cap, with_timing):
    lam_max = lambda_max(dct, x).lambda_max
    lam_t = ratio * lam_max

    trace = None

    def do_run():
        nonlocal trace
        trace = run_sequence(dct, x, lam_t, strategy, solver=cfg, noise=noise,
                             chunk_size=chunk_size)
        return trace

    if with_timing:
        do_run()  # warm caches (column norms, file pages) before timing
        _, seq_seconds = _median_of(do_run, repetitions)
        _, base_seconds = _median_of(
            lambda: solve_lasso(LassoProblem(dct, x, lam_t), config=cfg),
            repetitions)
    else:
        do_run()
        seq_seconds = base_seconds = None

    kept_bytes = max(s.kept_count for s in trace.steps) * dct.d * 8
    completed = kept_bytes <= memory_cap
    rejection = (dct.p - trace.steps[-1].kept_count) / dct.p
    false_rej = None
    if strategy.effective_rule == "strong":
        false_rej = sum(s.false_rejections or 0 for s in trace.steps)
    row = {
        "strategy": strategy_label(strategy),
        "instance": instance_label,
        "lambda_ratio": ratio,
        "lambda_t": lam_t,
        "realized_N": trace.N,
        "rejection_percentage": rejection,
        "speedup": (speedup(base_seconds, seq_seconds)
                    if completed and with_timing else None),
        "baseline_seconds": base_seconds,
        "sequence_seconds": seq_seconds,
        "false_rejections": false_rej,
        "completed": completed,
        "degenerate_steps": len(trace.degenerate_steps),
    }
    return row


def _mean_se(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return mean, se


def aggregate_rows(rows):
    """Mean and standard error per (strategy, lambda_ratio) group."""
    groups = {}
    for row in rows:
        groups.setdefault((row["strategy"], row["lambda_ratio"]), []).append(row)
    out = []
    for (strat, ratio), members in sorted(groups.items()):
        rej_mean, rej_se = _mean_se([m["rejection_percentage"] for m in members])
        spd_mean, spd_se = _mean_se([m["speedup"] for m in members])
        n_mean, n_se = _mean_se([m["realized_N"] for m in members])
        out.append({
            "strategy": strat,
            "lambda_ratio": ratio,
            "count": len(members),
            "rejection_mean": rej_mean,
            "rejection_se": rej_se,
            "speedup_mean": spd_mean,
            "speedup_se": spd_se,
            "N_mean": n_mean,
            "N_se": n_se,
            "completion_rate": sum(m["completed"] for m in members) / len(members),
        })
    return out


def run_benchmark(config):
    """Run every (instance, ratio, strategy) cell described by ``config``.

    Cells run serially by default so timings stay honest; ``parallel: true``
    runs them concurrently but suppresses the timing columns.
    """
    instances = config.get("instances")
    if not instances:
        raise UsageError("benchmark config lists no instances")
    ratios = config.get("lambda_ratios", [0.1])
    strategies = [_parse_strategy(s) for s in config.get("strategies", [])]
    if not strategies:
        raise UsageError("benchmark config lists no strategies")
    repetitions = int(config.get("repetitions", 3))
    chunk_size = config.get("chunk_size")
    memory_cap = int(config.get("memory_cap_bytes", DEFAULT_MEMORY_CAP))
    parallel = bool(config.get("parallel", False))
    cfg = SolverConfig(**config.get("solver", {}))
    noise = None
    if "noise" in config:
        noise = NoiseConfig(**config["noise"])

    cells = []
    for inst_spec in instances:
        dct, x, label = _load_instance(inst_spec)
        for ratio in ratios:
            for strategy in strategies:
                cells.append((dct, x, label, ratio, strategy))

    def run_one(cell):
        dct, x, label, ratio, strategy = cell
        return _run_cell(dct, x, label, ratio, strategy, cfg, repetitions,
                         chunk_size, noise, memory_cap,
                         with_timing=not parallel)

    if parallel:
        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(run_one, cells))
    else:
        rows = [run_one(c) for c in cells]

    return {
        "report_version": 1,
        "config": config,
        "rows": rows,
        "aggregates": aggregate_rows(rows),
    }


_ROW_FIELDS = [
    "strategy", "instance", "lambda_ratio", "lambda_t", "realized_N",
    "rejection_percentage", "speedup", "baseline_seconds", "sequence_seconds",
    "false_rejections", "completed", "degenerate_steps",
]


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_report_csv(path, report):
    _write_csv(path, _ROW_FIELDS,
               [["" if row[f] is None else row[f] for f in _ROW_FIELDS]
                for row in report["rows"]])


def write_plot_series(outdir, report):
    """Emit CSV series for rejection-vs-ratio and speedup-vs-ratio plots,
    plus a per-instance rejection/speedup scatter."""
    import os

    os.makedirs(outdir, exist_ok=True)
    agg = report["aggregates"]
    _write_csv(os.path.join(outdir, "rejection_vs_lambda.csv"),
               ["strategy", "lambda_ratio", "rejection_mean", "rejection_se"],
               [[a["strategy"], a["lambda_ratio"], a["rejection_mean"],
                 a["rejection_se"]] for a in agg])
    _write_csv(os.path.join(outdir, "speedup_vs_lambda.csv"),
               ["strategy", "lambda_ratio", "speedup_mean", "speedup_se"],
               [[a["strategy"], a["lambda_ratio"], a["speedup_mean"],
                 a["speedup_se"]] for a in agg
                if a["speedup_mean"] is not None])
    _write_csv(os.path.join(outdir, "scatter.csv"),
               ["strategy", "lambda_ratio", "rejection_percentage", "speedup"],
               [[r["strategy"], r["lambda_ratio"], r["rejection_percentage"],
                 r["speedup"]] for r in report["rows"]
                if r["speedup"] is not None])
