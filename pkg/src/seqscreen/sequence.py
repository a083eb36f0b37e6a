"""Sequential screening driver.

Runs a decreasing regularization sequence down to a target value, screening
the dictionary before each solve. Three sequencing strategies:

* ``dass``: feedback-controlled; the next value is chosen so the step
  region's diameter is at most a user budget R.
* ``geometric``: fixed geometric grid of length N (open loop).
* ``dpp_feedback``: feedback applied to the sphere bound, incrementing
  1/lambda by R/2 each step so the sphere diameter equals R.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .dictionary import check_target, lambda_max
from .errors import IntegrityError, UsageError
from .regions import (KeepMask, build_initial_region,
                      build_step_region, dpp_region, region_diameter, screen,
                      strong_rule_screen)
from .solver import (LassoProblem, LassoSolution, SolverConfig,
                     primal_objective, dual_objective, solve_lasso)

_CLAMP_TOL = 1e-12
_DEFAULT_RULES = {"dass": "dome", "geometric": "dome", "dpp_feedback": "dpp"}


@dataclass(frozen=True)
class SequenceStrategy:
    kind: str                      # dass | geometric | dpp_feedback
    R: Optional[float] = None      # diameter budget (dass, dpp_feedback)
    N: Optional[int] = None        # grid length (geometric)
    lambda1_factor: float = 0.95
    rule: Optional[str] = None     # dome | dpp | strong (open-loop runs)

    def __post_init__(self):
        if self.kind not in _DEFAULT_RULES:
            raise UsageError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("dass", "dpp_feedback"):
            if self.R is None or not self.R > 0:
                raise UsageError(f"{self.kind} requires a diameter budget R > 0")
            if self.N is not None:
                raise UsageError(f"{self.kind} does not take a grid length N")
        else:
            if self.N is None or self.N < 2:
                raise UsageError("geometric requires a grid length N >= 2")
            if self.R is not None:
                raise UsageError("geometric does not take a diameter budget R")
        if not 0 < self.lambda1_factor < 1:
            raise UsageError("lambda1_factor must lie in (0, 1)")
        if self.rule is not None and self.rule not in ("dome", "dpp", "strong"):
            raise UsageError(f"unknown screening rule {self.rule!r}")
        if self.kind == "dass" and self.rule not in (None, "dome"):
            raise UsageError("dass always screens with the dome region")

    @property
    def effective_rule(self):
        return self.rule or _DEFAULT_RULES[self.kind]


@dataclass(frozen=True)
class NoiseConfig:
    """Perturbation applied to each intermediate solution."""

    nsr: float                      # noise-to-signal power ratio
    threshold: Optional[float] = None  # None -> 3x the noise deviation
    seed: int = 0

    def __post_init__(self):
        if self.nsr < 0:
            raise UsageError("noise-to-signal ratio must be >= 0")
        if self.threshold is not None and self.threshold < 0:
            raise UsageError("threshold must be >= 0")


@dataclass(frozen=True)
class BoundParams:
    C: float          # dual-path norm bound
    rho: float = 0.0  # dual inexactness bound

    def __post_init__(self):
        if not self.C > 0:
            raise UsageError("C must be positive")
        if self.rho < 0:
            raise UsageError("rho must be >= 0")


@dataclass
class StepRecord:
    lam: float
    kept_count: int
    region_diameter: Optional[float]
    gap: float
    screen_seconds: float
    solve_seconds: float
    theta_norm: float
    degenerate: bool
    converged: bool
    false_rejections: Optional[int] = None


@dataclass
class SequenceTrace:
    lambdas: List[float]
    steps: List[StepRecord]
    w_final: np.ndarray
    N: int
    degenerate_steps: List[int]
    lambda_max: float
    lambda_t: float
    d: int
    p: int
    strategy: SequenceStrategy
    masks: List[KeepMask]          # per-step survival masks (not serialized)

    def to_json_dict(self):
        return {
            "trace_version": 1,
            "kind": self.strategy.kind,
            "rule": self.strategy.effective_rule,
            "R": self.strategy.R,
            "N_requested": self.strategy.N,
            "lambda1_factor": self.strategy.lambda1_factor,
            "d": self.d,
            "p": self.p,
            "lambda_max": self.lambda_max,
            "lambda_t": self.lambda_t,
            "lambdas": [float(v) for v in self.lambdas],
            "steps": [
                {
                    "lambda": float(s.lam),
                    "kept_count": s.kept_count,
                    "region_diameter": s.region_diameter,
                    "gap": float(s.gap),
                    "screen_seconds": s.screen_seconds,
                    "solve_seconds": s.solve_seconds,
                    "theta_norm": s.theta_norm,
                    "degenerate": s.degenerate,
                    "converged": s.converged,
                    "false_rejections": s.false_rejections,
                }
                for s in self.steps
            ],
            "w_final": [float(v) for v in self.w_final],
            "N": self.N,
            "degenerate_steps": list(self.degenerate_steps),
        }

    @property
    def screen_seconds(self):
        return sum(s.screen_seconds for s in self.steps)

    @property
    def solve_seconds(self):
        return sum(s.solve_seconds for s in self.steps)


def next_lambda_dass(lambda_prev, x, n_prev, R):
    """Feedback update: 1/lambda_k = 1/lambda_prev + (R/2) / sqrt(x^T (I - n n^T) x).

    When the quadratic form vanishes (x aligned with the previous normal)
    the update falls back to ||x||^2, keeping the step finite.
    """
    if not lambda_prev > 0:
        raise UsageError("lambda_prev must be positive")
    if not R > 0:
        raise UsageError("R must be positive")
    x = np.asarray(x, dtype=np.float64)
    xx = float(x @ x)
    if xx <= 0.0:
        raise UsageError("target vector is zero")
    n_prev = np.asarray(n_prev, dtype=np.float64)
    quad = xx - float(n_prev @ x) ** 2
    if quad <= 1e-12 * xx:
        quad = xx
    s_next = 1.0 / lambda_prev + 0.5 * R / math.sqrt(quad)
    return 1.0 / s_next


def next_lambda_dpp_feedback(lambda_prev, R):
    """1/lambda_k = 1/lambda_prev + R/2.

    The R/2 increment makes the sphere bound's diameter
    2 (1/lambda_k - 1/lambda_prev) exactly R.
    """
    if not lambda_prev > 0:
        raise UsageError("lambda_prev must be positive")
    if not R > 0:
        raise UsageError("R must be positive")
    return 1.0 / (1.0 / lambda_prev + 0.5 * R)


def geometric_grid(lambda_1, lambda_t, N):
    """Length-N geometric grid from lambda_1 down to exactly lambda_t."""
    if N < 2:
        raise UsageError(f"grid length must be >= 2, got {N}")
    if not 0 < lambda_t < lambda_1:
        raise UsageError(
            f"need 0 < lambda_t < lambda_1, got {lambda_t}, {lambda_1}")
    grid = np.geomspace(lambda_1, lambda_t, N)
    grid[0] = lambda_1
    grid[-1] = lambda_t
    return grid


def n_upper_bound(lambda_t, R, params):
    """Step-count bound 1 + ln(1/lambda_t) / ln(1 + R / (2 (C + rho))).

    The bound's form presumes lambda_t < 1; for lambda_t >= 1 it returns 1.
    """
    if lambda_t >= 1.0:
        return 1.0
    if not lambda_t > 0:
        raise UsageError("lambda_t must be positive")
    denom = math.log1p(R / (2.0 * (params.C + params.rho)))
    return 1.0 + math.log(1.0 / lambda_t) / denom


def inject_noise(w, noise):
    """Add i.i.d. Gaussian noise at the configured noise-to-signal power
    ratio, then hard-threshold small entries to zero.

    The default threshold is three noise standard deviations, so the
    perturbed vector converges to the input as the ratio goes to zero.
    """
    w = np.asarray(w, dtype=np.float64)
    rng = np.random.default_rng(noise.seed)
    out = w.copy()
    sigma = 0.0
    if noise.nsr > 0:
        power = float(np.mean(w ** 2))
        if power == 0.0:
            warnings.warn("cannot scale noise to a zero signal; "
                          "returning input unchanged")
            return out
        sigma = math.sqrt(noise.nsr * power)
        out = out + rng.normal(0.0, sigma, size=w.shape)
    threshold = noise.threshold
    if threshold is None:
        threshold = 3.0 * sigma
    if threshold > 0:
        out[np.abs(out) < threshold] = 0.0
    return out


def estimate_dual_bound(trace):
    """Conservative (C, rho) estimate from a recorded run: C is the path
    maximum of ||theta||; rho is bounded through the duality gap."""
    if not trace.steps:
        raise UsageError("trace has no steps")
    C = max(s.theta_norm for s in trace.steps)
    rho = 0.0
    for s in trace.steps:
        if s.gap > 1e-12:
            rho = max(rho, math.sqrt(2.0 * s.gap) / s.lam)
    return BoundParams(C=C, rho=rho)


def _full_dual(dictionary, x, lam, residual):
    """Feasibility-rescaled dual point over the whole dictionary, plus the
    per-feature correlations of the residual."""
    corr = dictionary.correlations(residual)
    cinf = float(np.abs(corr).max()) if corr.size else 0.0
    theta = residual / max(lam, cinf)
    return theta, corr


def _solve_step(dictionary, x, lam, mask, w_warm_full, cfg, count_violations,
                repair=False):
    """Solve the reduced problem at lam, then lift to full-dictionary
    quantities (weights, feasible dual point, gap, KKT violation count).

    With repair=True, discarded features whose residual correlation exceeds
    lam are restored and the problem is re-solved until the discard set is
    KKT-clean.  A safe rule never triggers this; it exists for runs whose
    screening input was corrupted, where a falsely rejected active feature
    would otherwise poison every later step.
    """
    p = dictionary.p
    for _ in range(1 + (p if repair else 0)):
        idx = mask.indices()
        sub = dictionary.take(idx)
        problem = LassoProblem(sub, x, lam)
        sol = solve_lasso(problem, warm_start=w_warm_full[idx], config=cfg)
        w_full = np.zeros(p)
        w_full[idx] = sol.w
        residual = x - sub.matvec(sol.w)
        theta, corr = _full_dual(dictionary, x, lam, residual)
        if not repair:
            break
        violated = (~mask.keep) & (np.abs(corr) > lam * (1.0 + 1e-9))
        if not violated.any():
            break
        mask = KeepMask(keep=mask.keep | violated)
        w_warm_full = w_full
    gap = primal_objective(residual, w_full, lam) - dual_objective(x, theta, lam)
    violations = None
    if count_violations:
        discarded = ~mask.keep
        violations = int(np.count_nonzero(
            np.abs(corr[discarded]) > lam * (1.0 + 1e-9)))
    return w_full, theta, gap, sol, violations, mask


def _build_region(rule, x, lam_k, lam_prev, theta_prev):
    if rule == "dome":
        return build_step_region(x, lam_k, lam_prev, theta_prev)
    return dpp_region(theta_prev, lam_k, lam_prev)


def run_sequence(dictionary, x, lambda_t, strategy, solver=None, noise=None,
                 chunk_size=None):
    """Run sequential screening end-to-end and return the full audit trace.

    The sequence starts at lambda1_factor * lambda_max (clamped to a single
    step when lambda_t is at least that), screens the dictionary with the
    configured rule at every step, solves each reduced problem with a warm
    start, and terminates exactly at lambda_t.
    """
    cfg = solver or SolverConfig()
    x = check_target(x, dictionary.d)
    if not lambda_t > 0:
        raise UsageError("lambda_t must be positive")
    lmr = lambda_max(dictionary, x)
    lam_max = lmr.lambda_max
    rule = strategy.effective_rule
    p = dictionary.p

    lambdas: List[float] = []
    steps: List[StepRecord] = []
    degenerate_steps: List[int] = []
    masks: List[KeepMask] = []

    def record(lam, mask, diam, screen_s, theta, gap, sol, violations,
               degenerate):
        lambdas.append(float(lam))
        masks.append(mask)
        steps.append(StepRecord(
            lam=float(lam), kept_count=mask.kept_count, region_diameter=diam,
            gap=float(gap), screen_seconds=screen_s,
            solve_seconds=sol.solve_seconds if sol else 0.0,
            theta_norm=float(np.linalg.norm(theta)),
            degenerate=degenerate, converged=sol.converged if sol else True,
            false_rejections=violations))
        if degenerate:
            degenerate_steps.append(len(steps))

    def finish(w_final):
        return SequenceTrace(
            lambdas=lambdas, steps=steps, w_final=w_final, N=len(steps),
            degenerate_steps=degenerate_steps, lambda_max=lam_max,
            lambda_t=float(lambda_t), d=dictionary.d, p=p, strategy=strategy,
            masks=masks)

    # Above lambda_max the solution is identically zero and every feature
    # screens out.
    if lambda_t >= lam_max * (1.0 - _CLAMP_TOL):
        mask = KeepMask(keep=np.zeros(p, dtype=bool))
        theta = x / lambda_t
        record(lambda_t, mask, None, 0.0, theta, 0.0,
               LassoSolution(w=np.empty(0), theta=theta, gap=0.0, iterations=0,
                             solve_seconds=0.0), None, False)
        return finish(np.zeros(p))

    lam_1 = strategy.lambda1_factor * lam_max
    single = lambda_t >= lam_1
    if single:
        lam_1 = lambda_t

    count_violations = rule == "strong"

    # Step 1: bound theta_1 from the closed form theta(lambda_max) = x/lambda_max.
    t0 = time.perf_counter()
    diam1 = None
    if rule == "dome":
        region = build_initial_region(x, lam_1, lmr, dictionary.column(lmr.index))
        mask = screen(dictionary, region, chunk_size)
        diam1 = region_diameter(region)
    elif rule == "dpp":
        region = dpp_region(x / lam_max, lam_1, lam_max)
        mask = screen(dictionary, region, chunk_size)
        diam1 = region_diameter(region)
    else:
        mask = strong_rule_screen(dictionary, x, lam_1, lam_max, np.zeros(p),
                                  chunk_size)
    screen_s = time.perf_counter() - t0

    # A safe rule emptying the dictionary below lambda_max means a broken
    # region — unless the caller injected noise, which voids the guarantee.
    if mask.kept_count == 0 and rule != "strong" and noise is None:
        raise IntegrityError(
            "safe screening rejected every feature below lambda_max")
    w_full, theta, gap, sol, violations, mask = _solve_step(
        dictionary, x, lam_1, mask, np.zeros(p), cfg, count_violations,
        repair=noise is not None)
    record(lam_1, mask, diam1, screen_s, theta, gap, sol, violations, False)

    lam_prev = lam_1
    grid = None
    if strategy.kind == "geometric" and not single:
        grid = geometric_grid(lam_1, lambda_t, strategy.N)

    k = 1
    noise_seq = 0
    while lam_prev > lambda_t * (1.0 + _CLAMP_TOL):
        # The step about to run is not the last one yet; corrupt the
        # previous solution first when a noise model is configured.
        if noise is not None:
            noisy = inject_noise(
                w_full, NoiseConfig(nsr=noise.nsr, threshold=noise.threshold,
                                    seed=noise.seed + noise_seq))
            noise_seq += 1
            if not np.array_equal(noisy, w_full):
                w_full = noisy
                residual = x - dictionary.matvec(w_full)
                theta, _ = _full_dual(dictionary, x, lam_prev, residual)

        k += 1
        degenerate = False
        if strategy.kind == "dass":
            v = x / lam_prev - theta
            nv = float(np.linalg.norm(v))
            if nv <= 1e-12:
                degenerate = True
                n_prev = None
                lam_k = 1.0 / (1.0 / lam_prev
                               + 0.5 * strategy.R / float(np.linalg.norm(x)))
            else:
                n_prev = v / nv
                lam_k = next_lambda_dass(lam_prev, x, n_prev, strategy.R)
        elif strategy.kind == "dpp_feedback":
            lam_k = next_lambda_dpp_feedback(lam_prev, strategy.R)
        else:
            lam_k = float(grid[k - 1])
        if lam_k <= lambda_t * (1.0 + _CLAMP_TOL):
            lam_k = lambda_t

        t0 = time.perf_counter()
        diam = None
        if rule == "strong":
            mask = strong_rule_screen(dictionary, x, lam_k, lam_prev, w_full,
                                      chunk_size)
        else:
            region = _build_region(rule, x, lam_k, lam_prev, theta)
            degenerate = degenerate or region.degenerate
            mask = screen(dictionary, region, chunk_size)
            diam = region_diameter(region)
        screen_s = time.perf_counter() - t0

        if mask.kept_count == 0 and rule != "strong" and noise is None:
            raise IntegrityError(
                "safe screening rejected every feature below lambda_max")
        # An empty kept set otherwise (strong rule, or noise-corrupted
        # feedback) proceeds with w = 0; the trace tells the story.
        w_full, theta, gap, sol, violations, mask = _solve_step(
            dictionary, x, lam_k, mask, w_full, cfg, count_violations,
            repair=noise is not None)
        record(lam_k, mask, diam, screen_s, theta, gap, sol, violations,
               degenerate)
        lam_prev = lam_k

    return finish(w_full)
