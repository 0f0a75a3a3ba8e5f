"""Capacity formulas, Monte Carlo stability estimation, and parameter sweeps.

A stability trial generates a fresh ensemble at the capacity M(alpha)
prescribed by the rule, probes with stored pattern 0 (patterns are
exchangeable), and checks whether one update leaves it unchanged. The
estimate over trials is unconditional; the sparsity event A_delta is
recorded per trial but never used to filter.

Determinism: trial t of a cell draws every random bit from
derive(cell_seed, t), and sweep cell j uses derive(master_seed, j), so
results are identical for any worker count or scheduling order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence, Union

from . import rng as _rng
from .dynamics import a_delta_holds, is_fixed_point
from .errors import (
    AssocLabError,
    CapacityCapError,
    InvalidParameterError,
    TrialError,
)
from .fields import (
    DEFAULT_BUDGET,
    FixedOrder,
    LogarithmicOrder,
    ModelKind,
    ModelSpec,
    Order,
)
from .patterns import (
    BlockLayout,
    PatternEnsemble,
    default_sparsity,
    gen_bernoulli,
    gen_fixed_weight,
    gen_gb,
)

DEFAULT_CAPACITY_CAP = 10**9
_WILSON_Z = 1.959963984540054  # 97.5% normal quantile (95% two-sided)

Dims = Union[int, tuple]


class CapacityFamily(Enum):
    AMARI_FIXED = "amari_fixed"
    AMARI_LOG = "amari_log"
    WILLSHAW_FIXED = "willshaw_fixed"
    WILLSHAW_LOG = "willshaw_log"
    GB_FIXED = "gb_fixed"
    GB_LOG = "gb_log"


_FAMILY_BY_KIND = {
    (ModelKind.AMARI, FixedOrder): CapacityFamily.AMARI_FIXED,
    (ModelKind.AMARI, LogarithmicOrder): CapacityFamily.AMARI_LOG,
    (ModelKind.WILLSHAW, FixedOrder): CapacityFamily.WILLSHAW_FIXED,
    (ModelKind.WILLSHAW, LogarithmicOrder): CapacityFamily.WILLSHAW_LOG,
    (ModelKind.GB, FixedOrder): CapacityFamily.GB_FIXED,
    (ModelKind.GB, LogarithmicOrder): CapacityFamily.GB_LOG,
}


def family_for(kind: ModelKind, order: Order) -> CapacityFamily:
    return _FAMILY_BY_KIND[(kind, type(order))]


@dataclass(frozen=True)
class CapacityRule:
    """Capacity scaling family with its load parameter alpha and order rule."""

    family: CapacityFamily
    alpha: float
    order: Order

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise InvalidParameterError(f"alpha must be > 0, got {self.alpha}")
        wants_log = self.family in (CapacityFamily.AMARI_LOG,
                                    CapacityFamily.WILLSHAW_LOG,
                                    CapacityFamily.GB_LOG)
        if wants_log != isinstance(self.order, LogarithmicOrder):
            raise InvalidParameterError(
                f"family {self.family.value} is inconsistent with order {self.order!r}"
            )


def _resolved_log_order(kappa: float, dim: int) -> int:
    return max(2, int(math.floor(kappa * math.log(dim) + 0.5)))


def _dims_n(dims: Dims) -> int:
    if isinstance(dims, tuple):
        l, c = dims
        return int(l) * int(c)
    return int(dims)


def capacity_for(rule: CapacityRule, dims: Dims,
                 cap: int = DEFAULT_CAPACITY_CAP) -> int:
    """Number of stored patterns M prescribed by the rule's scaling formula:

      amari/willshaw fixed n:  alpha * (N / ln N)**n
      amari/willshaw log:      alpha**(n-1) * exp(kappa*(ln^2 N - ln N * ln ln N))
      gb (either):             alpha * c**n

    Returns max(1, floor(value)); values beyond `cap` raise CapacityCapError.
    """
    fam = rule.family
    if fam in (CapacityFamily.GB_FIXED, CapacityFamily.GB_LOG):
        if not isinstance(dims, tuple):
            raise InvalidParameterError("GB capacity needs (l, c) dims")
        l, c = int(dims[0]), int(dims[1])
        dim = l * c
        n = (rule.order.n if isinstance(rule.order, FixedOrder)
             else _resolved_log_order(rule.order.kappa, dim))
        value = rule.alpha * float(c) ** n
    else:
        if isinstance(dims, tuple):
            raise InvalidParameterError("non-GB capacity needs integer dims N")
        N = int(dims)
        if N < 2:
            raise InvalidParameterError(f"capacity needs N >= 2, got {N}")
        log_n = math.log(N)
        if isinstance(rule.order, FixedOrder):
            value = rule.alpha * (N / log_n) ** rule.order.n
        else:
            kappa = rule.order.kappa
            n = _resolved_log_order(kappa, N)
            try:
                growth = math.exp(kappa * (log_n**2 - log_n * math.log(log_n)))
            except OverflowError:
                growth = math.inf
            value = rule.alpha ** (n - 1) * growth
    if not value <= cap:
        raise CapacityCapError(
            f"capacity {value:.6g} exceeds the hard cap {cap}; "
            "shrink alpha or the dims"
        )
    return max(1, int(math.floor(value)))


def wilson_interval(successes: int, trials: int,
                    z: float = _WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidParameterError("wilson_interval needs 0 <= successes <= trials")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4 * trials * trials)) / denom
    # the bounds are exactly 0/1 at the saturated ends; don't let rounding drift
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


@dataclass(frozen=True)
class StabilityEstimate:
    """Monte Carlo fixed-point rate with a 95% Wilson interval."""

    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise InvalidParameterError("successes must lie in [0, trials]")
        if not (0.0 <= self.ci_low <= self.rate <= self.ci_high <= 1.0):
            raise InvalidParameterError("confidence interval must bracket the rate in [0, 1]")


@dataclass(frozen=True)
class TrialResult:
    """Outcome of a single stability trial."""

    stable: bool
    flipped_on: int
    flipped_off: int
    a_delta: bool
    zero_patterns: int
    m: int
    error: str | None = None


def _build_ensemble(spec: ModelSpec, dims: Dims, m: int, seed: int,
                    pattern_mode: str) -> PatternEnsemble:
    if spec.kind is ModelKind.GB:
        l, c = dims  # type: ignore[misc]
        layout = BlockLayout(int(l), int(c))
        if spec.layout != layout:
            raise InvalidParameterError("GB spec layout does not match dims")
        return gen_gb(layout, m, seed)
    N = int(dims)  # type: ignore[arg-type]
    if pattern_mode == "bernoulli":
        return gen_bernoulli(N, default_sparsity(N), m, seed)
    if pattern_mode == "fixed_weight":
        c_active = max(1, int(math.floor(math.log(N) + 0.5)))
        return gen_fixed_weight(N, c_active, m, seed)
    raise InvalidParameterError(f"unknown pattern mode {pattern_mode!r}")


def _check_consistency(spec: ModelSpec, rule: CapacityRule, dims: Dims) -> None:
    if family_for(spec.kind, spec.order) is not rule.family:
        raise InvalidParameterError(
            f"capacity family {rule.family.value} does not match the model spec"
        )
    if rule.order != spec.order:
        raise InvalidParameterError("rule and spec disagree on the interaction order")
    if (spec.kind is ModelKind.GB) != isinstance(dims, tuple):
        raise InvalidParameterError("dims shape does not match the model kind")


def run_stability_trial(spec: ModelSpec, rule: CapacityRule, dims: Dims,
                        trial_seed: int, delta: float = 0.5,
                        pattern_mode: str = "bernoulli",
                        cap: int = DEFAULT_CAPACITY_CAP,
                        budget: int = DEFAULT_BUDGET) -> TrialResult:
    """Generate a fresh ensemble at capacity, probe with stored pattern 0,
    and test fixed-point stability. Evaluation errors come back as failed
    trials carrying the reason instead of vanishing."""
    _check_consistency(spec, rule, dims)
    try:
        m = capacity_for(rule, dims, cap=cap)
        ensemble = _build_ensemble(spec, dims, m, trial_seed, pattern_mode)
        probe = ensemble.pattern(0)
        report = is_fixed_point(ensemble, probe, spec, budget=budget)
        return TrialResult(
            stable=report.stable,
            flipped_on=len(report.flipped_on),
            flipped_off=len(report.flipped_off),
            a_delta=a_delta_holds(probe, _dims_n(dims), delta),
            zero_patterns=ensemble.zero_pattern_count,
            m=m,
        )
    except AssocLabError as exc:
        return TrialResult(stable=False, flipped_on=0, flipped_off=0,
                           a_delta=False, zero_patterns=0, m=0,
                           error=f"{type(exc).__name__}: {exc}")


def _run_cell(spec: ModelSpec, rule: CapacityRule, dims: Dims, trials: int,
              cell_seed: int, *, delta: float, pattern_mode: str, threads: int,
              cap: int, budget: int) -> tuple[StabilityEstimate, int]:
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    seeds = [_rng.derive(cell_seed, t) for t in range(trials)]

    def runner(seed: int) -> TrialResult:
        return run_stability_trial(spec, rule, dims, seed, delta=delta,
                                   pattern_mode=pattern_mode, cap=cap,
                                   budget=budget)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(runner, seeds))
    else:
        results = [runner(s) for s in seeds]

    for t, res in enumerate(results):
        if res.error is not None:
            raise TrialError(
                f"trial {t} failed for dims={dims}, alpha={rule.alpha}, "
                f"gamma={spec.gamma}: {res.error}"
            )
    successes = sum(r.stable for r in results)
    low, high = wilson_interval(successes, trials)
    estimate = StabilityEstimate(trials, successes, successes / trials, low, high)
    zero_total = sum(r.zero_patterns for r in results)
    return estimate, zero_total


def estimate_stability(spec: ModelSpec, rule: CapacityRule, dims: Dims,
                       trials: int, master_seed: int, *, delta: float = 0.5,
                       pattern_mode: str = "bernoulli", threads: int = 1,
                       cap: int = DEFAULT_CAPACITY_CAP,
                       budget: int = DEFAULT_BUDGET) -> StabilityEstimate:
    """Run independent stability trials with per-trial derived seeds; the
    result does not depend on the worker count."""
    estimate, _ = _run_cell(spec, rule, dims, trials, master_seed, delta=delta,
                            pattern_mode=pattern_mode, threads=threads,
                            cap=cap, budget=budget)
    return estimate


@dataclass(frozen=True)
class SweepRecord:
    """One (model, dims, gamma, alpha) cell of a capacity sweep."""

    model: str
    N: int
    l: int | None
    c: int | None
    n_resolved: int
    kappa: float | None
    gamma: float
    alpha: float
    M: int | None
    trials: int
    estimate: StabilityEstimate | None
    zero_patterns: int | None
    seed: int
    status: str
    reason: str | None
    wall_ms: float | None


def iter_sweep(kind: ModelKind, order: Order, dims_grid: Sequence[Dims],
               gammas: Sequence[float], alphas: Sequence[float], trials: int,
               master_seed: int, *, delta: float = 0.5,
               pattern_mode: str = "bernoulli", threads: int = 1,
               cap: int = DEFAULT_CAPACITY_CAP,
               budget: int = DEFAULT_BUDGET) -> Iterator[SweepRecord]:
    """Yield one record per grid cell, in deterministic (dims, gamma, alpha)
    order. Capacity-cap cells come back with status 'skipped' and a reason
    instead of aborting the sweep."""
    if not dims_grid or not gammas or not alphas:
        raise InvalidParameterError("sweep grids must be nonempty")
    family = family_for(kind, order)
    cell = 0
    for dims in dims_grid:
        for gamma in gammas:
            for alpha in alphas:
                seed = _rng.derive(master_seed, cell)
                cell += 1
                if kind is ModelKind.GB:
                    l, c = int(dims[0]), int(dims[1])  # type: ignore[index]
                    layout = BlockLayout(l, c)
                    spec = ModelSpec(kind, order, gamma, layout)
                    dims_val: Dims = (l, c)
                    dim_total = layout.dim
                else:
                    l = c = None  # type: ignore[assignment]
                    spec = ModelSpec(kind, order, gamma)
                    dims_val = int(dims)  # type: ignore[arg-type]
                    dim_total = int(dims)  # type: ignore[arg-type]
                rule = CapacityRule(family, alpha, order)
                n_resolved = spec.resolved_order(dim_total)
                kappa = order.kappa if isinstance(order, LogarithmicOrder) else None
                start = time.perf_counter()
                try:
                    m = capacity_for(rule, dims_val, cap=cap)
                except CapacityCapError as exc:
                    yield SweepRecord(kind.value, dim_total, l, c, n_resolved,
                                      kappa, gamma, alpha, None, trials, None,
                                      None, seed, "skipped", f"capacity-cap: {exc}",
                                      None)
                    continue
                estimate, zero_total = _run_cell(
                    spec, rule, dims_val, trials, seed, delta=delta,
                    pattern_mode=pattern_mode, threads=threads, cap=cap,
                    budget=budget)
                wall_ms = (time.perf_counter() - start) * 1000.0
                yield SweepRecord(kind.value, dim_total, l, c, n_resolved,
                                  kappa, gamma, alpha, m, trials, estimate,
                                  zero_total, seed, "ok", None, wall_ms)


def sweep(kind: ModelKind, order: Order, dims_grid: Sequence[Dims],
          gammas: Sequence[float], alphas: Sequence[float], trials: int,
          master_seed: int, **kwargs) -> list[SweepRecord]:
    """Materialized iter_sweep."""
    return list(iter_sweep(kind, order, dims_grid, gammas, alphas, trials,
                           master_seed, **kwargs))
