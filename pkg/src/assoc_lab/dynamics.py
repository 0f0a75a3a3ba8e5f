"""Threshold rules, the one-step synchronous retrieval map, and the
fixed-point predicate.

A neuron fires iff its field strictly exceeds the threshold (the Heaviside
step is 1 only for positive argument), so exact field/threshold ties
resolve to off. Comparisons are exact: integer fields are compared against
floats or rationals with Python's exact cross-type ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .combinatorics import binomial, log_binomial
from .errors import (
    AmbiguousComparisonError,
    ConventionError,
    CountOverflowError,
    DimensionMismatchError,
    InvalidParameterError,
)
from .fields import (
    DEFAULT_BUDGET,
    Convention,
    FieldVector,
    FixedOrder,
    ModelKind,
    ModelSpec,
    field_amari,
    field_gb,
    field_willshaw,
)
from .patterns import PatternEnsemble, SparsePattern

_LOG_COMPARE_RTOL = 1e-12
_EXACT_FLOAT_MAX = 1 << 52  # int64 fields above this go through exact scalar compare


@dataclass(frozen=True)
class ThresholdValue:
    """Activation cutoff h, tagged with the counting convention it applies to.

    `exact` carries the threshold as a rational when it is exactly
    representable (GB: gamma * C(l-1, n-1)); `log_value` carries ln(h) when
    the exact binomial overflows and only log-space comparison is possible.
    """

    value: float
    convention: Convention
    exact: Fraction | None = None
    log_value: float | None = None


def threshold_for(spec: ModelSpec, dim: int) -> ThresholdValue:
    """Threshold at system size `dim`:

      Amari/Willshaw, fixed order n:      gamma * ln(dim)**(n-1)
      Amari/Willshaw, logarithmic order:  (gamma * ln(dim))**(n-1)
      GB (either order rule):             gamma * C(l-1, n-1)
    """
    if dim < 2:
        raise InvalidParameterError(f"threshold needs dim >= 2, got {dim}")
    n = spec.resolved_order(dim)
    if spec.kind is ModelKind.GB:
        layout = spec.layout
        assert layout is not None
        if layout.dim != dim:
            raise DimensionMismatchError(
                f"layout dim {layout.dim} does not match dim {dim}"
            )
        try:
            k = binomial(layout.l - 1, n - 1)
            exact = Fraction(spec.gamma) * k
            return ThresholdValue(spec.gamma * float(k),
                                  Convention.UNORDERED_SUBSETS, exact=exact)
        except CountOverflowError:
            log_h = math.log(spec.gamma) + log_binomial(layout.l - 1, n - 1)
            return ThresholdValue(math.inf, Convention.UNORDERED_SUBSETS,
                                  log_value=log_h)
    base = math.log(dim)
    if isinstance(spec.order, FixedOrder):
        h = spec.gamma * base ** (n - 1)
    else:
        h = (spec.gamma * base) ** (n - 1)
    return ThresholdValue(h, Convention.ORDERED_TUPLES)


def _exceeds(field: FieldVector, threshold: ThresholdValue) -> np.ndarray:
    """Per-neuron strict comparison S > h, exact at ties."""
    values = field.values
    if threshold.log_value is not None and threshold.exact is None:
        out = np.zeros(field.dim, dtype=bool)
        for i in range(field.dim):
            v = int(values[i])
            if v == 0:
                continue
            lv = math.log(v)
            ref = max(1.0, abs(threshold.log_value))
            if abs(lv - threshold.log_value) <= _LOG_COMPARE_RTOL * ref:
                raise AmbiguousComparisonError(
                    f"field {v} at neuron {i} is within the log-space tolerance "
                    "band of the threshold"
                )
            out[i] = lv > threshold.log_value
        return out

    cutoff = threshold.exact if threshold.exact is not None else threshold.value
    if values.dtype == object or int(values.max(initial=0)) > _EXACT_FLOAT_MAX:
        return np.array([int(v) > cutoff for v in values], dtype=bool)
    out = values > threshold.value
    near = np.abs(values - threshold.value) <= 1.0
    for i in np.nonzero(near)[0]:
        out[i] = int(values[i]) > cutoff
    return out


def _evaluate_field(ensemble: PatternEnsemble, probe: SparsePattern,
                    spec: ModelSpec, budget: int) -> FieldVector:
    n = spec.resolved_order(ensemble.dim)
    if spec.kind is ModelKind.AMARI:
        return field_amari(ensemble, probe, n)
    if spec.kind is ModelKind.WILLSHAW:
        return field_willshaw(ensemble, probe, n, budget=budget)
    return field_gb(ensemble, probe, n, budget=budget)


def one_step(ensemble: PatternEnsemble, probe: SparsePattern, spec: ModelSpec,
             budget: int = DEFAULT_BUDGET) -> SparsePattern:
    """Synchronous update: the output activates exactly the neurons whose
    field strictly exceeds the threshold."""
    if spec.kind is ModelKind.GB and ensemble.gb_layout() != spec.layout:
        raise DimensionMismatchError(
            "spec block layout does not match the ensemble's layout"
        )
    field = _evaluate_field(ensemble, probe, spec, budget)
    threshold = threshold_for(spec, ensemble.dim)
    if field.convention is not threshold.convention:
        raise ConventionError(
            f"field convention {field.convention} vs threshold "
            f"{threshold.convention}"
        )
    on = _exceeds(field, threshold)
    return SparsePattern(ensemble.dim, tuple(int(i) for i in np.nonzero(on)[0]))


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of one update applied to a candidate fixed point."""

    stable: bool
    flipped_off: tuple[int, ...]  # active neurons the update switched off
    flipped_on: tuple[int, ...]   # inactive neurons the update switched on


def is_fixed_point(ensemble: PatternEnsemble, pattern: SparsePattern,
                   spec: ModelSpec, budget: int = DEFAULT_BUDGET) -> FixedPointReport:
    out = one_step(ensemble, pattern, spec, budget=budget)
    before = set(pattern.active)
    after = set(out.active)
    off = tuple(sorted(before - after))
    on = tuple(sorted(after - before))
    return FixedPointReport(stable=not off and not on, flipped_off=off, flipped_on=on)


def a_delta_holds(pattern: SparsePattern, N: int, delta: float) -> bool:
    """Whether the active count deviates from ln(N) by at most (1-delta)*ln(N)."""
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie strictly in (0, 1), got {delta}")
    if N < 2:
        raise InvalidParameterError(f"a_delta_holds needs N >= 2, got {N}")
    log_n = math.log(N)
    return abs(pattern.weight - log_n) <= (1.0 - delta) * log_n
