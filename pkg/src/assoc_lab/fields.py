"""Local-field evaluators for the three model families.

All evaluators count stored coincidences on tuples of pairwise-distinct
neurons, with the center neuron excluded from its own tuple, and none of
them materializes the order-n weight tensor:

  Amari     S_i = sum_mu [mu active at i] * ff(o_mu(i), n-1)
            where o_mu(i) = |active(probe) & active(mu) \\ {i}|
            (ordered-tuple counts; ff is the falling factorial)

  Willshaw  S_i = (n-1)! * #{(n-1)-subsets T of active(probe) \\ {i} :
                             some stored pattern contains T + {i}}
            (ordered-tuple counts; clipping makes duplicates idempotent)

  GB        S_(a,k) = #{(n-1)-subsets B of blocks != a : some stored
                        pattern is active at (a,k) and agrees with the
                        probe on every block of B}
            (unordered-subset counts, matching the h = gamma*C(l-1, n-1)
            threshold scale)

field_oracle evaluates the defining sums literally on small instances and
is the correctness reference for everything above. It reports ordered
counts for all three families; the GB fast evaluator's unordered count
times (n-1)! must match it on one-active-per-block probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, permutations
from typing import Union

import numpy as np

from .combinatorics import COUNT_MAX, binomial, falling_factorial, log_binomial
from .errors import (
    BudgetExceededError,
    CountOverflowError,
    DimensionMismatchError,
    InvalidParameterError,
)
from .patterns import BlockLayout, PatternEnsemble, SparsePattern

DEFAULT_BUDGET = 10**7

_INT64_SAFE = 1 << 62  # headroom under int64 for vectorized arithmetic
_FLOAT_EXACT = 1 << 53


class ModelKind(Enum):
    AMARI = "amari"
    WILLSHAW = "willshaw"
    GB = "gb"


class Convention(Enum):
    ORDERED_TUPLES = "ordered"
    UNORDERED_SUBSETS = "unordered"


@dataclass(frozen=True)
class FixedOrder:
    """Interaction order held fixed as the system grows."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameterError(f"interaction order must be >= 2, got {self.n}")


@dataclass(frozen=True)
class LogarithmicOrder:
    """Interaction order growing as kappa*ln(N), rounded, clamped to >= 2."""

    kappa: float

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise InvalidParameterError(
                f"kappa must lie strictly in (0, 1), got {self.kappa}"
            )


Order = Union[FixedOrder, LogarithmicOrder]


@dataclass(frozen=True)
class ModelSpec:
    """Model family, interaction-order rule, threshold parameter, GB layout."""

    kind: ModelKind
    order: Order
    gamma: float
    layout: BlockLayout | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParameterError(
                f"gamma must lie strictly in (0, 1), got {self.gamma}"
            )
        if self.kind is ModelKind.GB and self.layout is None:
            raise InvalidParameterError("GB model spec requires a block layout")
        if self.kind is not ModelKind.GB and self.layout is not None:
            raise InvalidParameterError("only GB model specs carry a block layout")

    def resolved_order(self, dim: int) -> int:
        """Interaction order at system size `dim` (half-up rounding, >= 2)."""
        if isinstance(self.order, FixedOrder):
            return self.order.n
        if dim < 2:
            raise InvalidParameterError("logarithmic order needs dim >= 2")
        return max(2, int(math.floor(self.order.kappa * math.log(dim) + 0.5)))


@dataclass
class FieldVector:
    """Per-neuron integer local fields for one probe configuration."""

    dim: int
    values: np.ndarray  # int64, or object dtype holding Python ints
    convention: Convention

    def __getitem__(self, i: int) -> int:
        return int(self.values[i])

    def as_list(self) -> list[int]:
        return [int(v) for v in self.values]


@dataclass(frozen=True)
class FieldEstimate:
    """Monte Carlo field estimate: mean and standard error."""

    mean: float
    std_error: float


def _check_dims(ensemble: PatternEnsemble, probe: SparsePattern, n: int) -> None:
    if probe.dim != ensemble.dim:
        raise DimensionMismatchError(
            f"probe dim {probe.dim} does not match ensemble dim {ensemble.dim}"
        )
    if n < 2:
        raise InvalidParameterError(f"interaction order must be >= 2, got {n}")


def _values_array(vals: list[int]) -> np.ndarray:
    top = max(vals, default=0)
    if top < _INT64_SAFE:
        return np.array(vals, dtype=np.int64)
    return np.array(vals, dtype=object)


def _pack_bool(arr: np.ndarray) -> int:
    """bool array -> int with bit i set iff arr[i]."""
    return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")


# -- Amari ---------------------------------------------------------------------


def field_amari(ensemble: PatternEnsemble, probe: SparsePattern, n: int) -> FieldVector:
    """Sum-weighted fields: each stored pattern contributes the falling
    factorial of its probe overlap (excluding the center neuron).

    O(M * (probe weight + pattern weight)) via per-pattern overlap counts;
    independent of dim and of n beyond the falling-factorial table.
    """
    _check_dims(ensemble, probe, n)
    d = probe.weight
    ff_top = falling_factorial(d, n - 1)
    bound = ensemble.m * ff_top
    if bound > COUNT_MAX:
        raise CountOverflowError(
            "Amari field bound exceeds the 128-bit count width"
        )

    flat, offsets = ensemble.flat, ensemble.offsets
    mask = probe.bool_mask()
    hits = mask[flat]
    cum = np.zeros(len(flat) + 1, dtype=np.int64)
    np.cumsum(hits, out=cum[1:])
    o_pat = cum[offsets[1:]] - cum[offsets[:-1]]  # overlap(probe, mu), no exclusion

    counts = np.diff(offsets)
    pat_of_slot = np.repeat(np.arange(ensemble.m, dtype=np.int64), counts)
    # exclusion: subtract 1 exactly when the slot's neuron is probe-active
    o_slot = o_pat[pat_of_slot] - hits.astype(np.int64)

    ff_vals = [falling_factorial(x, n - 1) for x in range(d + 1)]
    if bound < _FLOAT_EXACT:
        table = np.array(ff_vals, dtype=np.float64)
        acc = np.bincount(flat, weights=table[o_slot], minlength=ensemble.dim)
        values = acc.astype(np.int64)
    elif bound < _INT64_SAFE:
        table = np.array(ff_vals, dtype=np.int64)
        values = np.zeros(ensemble.dim, dtype=np.int64)
        np.add.at(values, flat, table[o_slot])
    else:
        out = [0] * ensemble.dim
        for slot in range(len(flat)):
            out[int(flat[slot])] += ff_vals[int(o_slot[slot])]
        values = np.array(out, dtype=object)
    return FieldVector(ensemble.dim, values, Convention.ORDERED_TUPLES)


# -- Willshaw -------------------------------------------------------------------


def field_willshaw(ensemble: PatternEnsemble, probe: SparsePattern, n: int,
                   budget: int = DEFAULT_BUDGET) -> FieldVector:
    """Clipped-weight fields: (n-1)! times the number of (n-1)-subsets of the
    probe's active set that some stored pattern realizes together with the
    center neuron. Enumerates C(d, n-1) subsets against per-neuron posting
    bitsets; refuses beyond `budget` (the Amari field is a coordinatewise
    upper bound when enumeration is infeasible).
    """
    _check_dims(ensemble, probe, n)
    d = probe.weight
    n_subsets = math.comb(d, n - 1)
    if n_subsets > budget:
        raise BudgetExceededError(
            f"C({d}, {n - 1}) = {n_subsets} subsets exceed the enumeration budget "
            f"{budget}; use field_amari as an upper bound"
        )
    postings = ensemble.posting_bitmasks()
    patbits = ensemble.pattern_bitmasks()
    counts = [0] * ensemble.dim
    act = probe.active
    for subset in combinations(act, n - 1):
        lists = sorted(postings.get(j, 0) for j in subset)
        cover = lists[0]
        for mask in lists[1:]:
            cover &= mask
            if not cover:
                break
        if not cover:
            continue
        neurons = 0
        mm = cover
        while mm:
            low = mm & -mm
            neurons |= patbits[low.bit_length() - 1]
            mm ^= low
        for j in subset:
            neurons &= ~(1 << j)
        while neurons:
            low = neurons & -neurons
            counts[low.bit_length() - 1] += 1
            neurons ^= low
    fact = math.factorial(n - 1)
    vals = [c * fact for c in counts]
    if vals and max(vals) > COUNT_MAX:
        raise CountOverflowError("Willshaw field exceeds the 128-bit count width")
    return FieldVector(ensemble.dim, _values_array(vals), Convention.ORDERED_TUPLES)


# -- GB -------------------------------------------------------------------------


def _gb_agreement(ensemble: PatternEnsemble, probe: SparsePattern):
    """(M, l) agreement table: pattern mu's block-b neuron is probe-active."""
    slots = ensemble.gb_slots()
    return slots, probe.bool_mask()[slots]


def _count_covered_subsets(anchor: int, masks: list[int], m: int) -> int:
    """Number of m-subsets of `masks` whose AND with `anchor` is nonzero.

    Depth-first over subsets in lexicographic order with prefix pruning:
    a zero running intersection kills the whole subtree.
    """
    nb = len(masks)
    if m == 0:
        return 1 if anchor else 0
    if m > nb:
        return 0
    if m == 1:
        return sum(1 for mk in masks if anchor & mk)
    if m == 2:
        total = 0
        for b1 in range(nb - 1):
            cur = anchor & masks[b1]
            if not cur:
                continue
            for b2 in range(b1 + 1, nb):
                if cur & masks[b2]:
                    total += 1
        return total

    def rec(start: int, depth: int, cur: int) -> int:
        cnt = 0
        for b in range(start, nb - depth + 1):
            nxt = cur & masks[b]
            if not nxt:
                continue
            cnt += rec(b + 1, depth - 1, nxt) if depth > 1 else 1
        return cnt

    return rec(0, m, anchor)


def field_gb(ensemble: PatternEnsemble, probe: SparsePattern, n: int,
             budget: int = DEFAULT_BUDGET) -> FieldVector:
    """Block-architecture fields: unordered counts of covered block subsets.

    For each neuron (a, k), counts the (n-1)-subsets B of blocks other than
    a for which some stored pattern is active at (a, k) and agrees with the
    probe on every block of B ("agrees" = the pattern's single active neuron
    in that block is probe-active, so arbitrary probes are supported).
    """
    layout = ensemble.gb_layout()
    if layout is None:
        raise InvalidParameterError("field_gb needs a GB-mode ensemble")
    _check_dims(ensemble, probe, n)
    l, c = layout.l, layout.c
    m = n - 1
    n_subsets = math.comb(l - 1, m)
    if n_subsets > budget:
        raise BudgetExceededError(
            f"C({l - 1}, {m}) = {n_subsets} subsets exceed the enumeration budget "
            f"{budget}; use field_gb_upper_bound or field_gb_montecarlo"
        )
    slots, agree = _gb_agreement(ensemble, probe)
    block_masks = [_pack_bool(agree[:, b]) for b in range(l)]
    agree_counts = agree.sum(axis=1)
    full = agree_counts == l
    near = agree_counts == l - 1
    miss = np.argmin(agree, axis=1)  # first disagreeing block (valid when near)

    if n_subsets < _INT64_SAFE:
        values = np.zeros(ensemble.dim, dtype=np.int64)
    else:
        values = np.array([0] * ensemble.dim, dtype=object)
    for a in range(l):
        others = block_masks[:a] + block_masks[a + 1:]
        # patterns that agree with the probe on every block except possibly a:
        # any of them that is active at (a, k) covers all C(l-1, n-1) subsets
        saturating = _pack_bool(full | (near & (miss == a)))
        col = slots[:, a]
        for k in range(c):
            neuron = a * c + k
            anchor = _pack_bool(col == neuron)
            if not anchor:
                continue
            if anchor & saturating:
                values[neuron] = n_subsets
            else:
                values[neuron] = _count_covered_subsets(anchor, others, m)
    return FieldVector(ensemble.dim, values, Convention.UNORDERED_SUBSETS)


def _require_one_per_block(probe: SparsePattern, layout: BlockLayout) -> np.ndarray:
    """Validate one active neuron per block; returns the probe's slot per block."""
    if probe.weight != layout.l:
        raise InvalidParameterError("probe must have exactly one active neuron per block")
    act = np.array(probe.active, dtype=np.int64)
    blocks = act // layout.c
    if not np.array_equal(blocks, np.arange(layout.l)):
        raise InvalidParameterError("probe must have exactly one active neuron per block")
    return act


def field_gb_upper_bound(ensemble: PatternEnsemble, probe: SparsePattern, n: int,
                         neuron: int) -> int:
    """Crosstalk bound at one neuron: sum over stored patterns active there of
    C(agreement count, n-1), counting shared hyperedges with multiplicity.
    O(M*l); needs no enumeration budget."""
    layout = ensemble.gb_layout()
    if layout is None:
        raise InvalidParameterError("field_gb_upper_bound needs a GB-mode ensemble")
    _check_dims(ensemble, probe, n)
    if not 0 <= neuron < ensemble.dim:
        raise InvalidParameterError(f"neuron {neuron} out of range")
    _require_one_per_block(probe, layout)
    l, c = layout.l, layout.c
    a = neuron // c
    slots, agree = _gb_agreement(ensemble, probe)
    x = agree.sum(axis=1) - agree[:, a]
    sel = slots[:, a] == neuron
    cache: dict[int, int] = {}
    total = 0
    for v in x[sel]:
        v = int(v)
        if v not in cache:
            cache[v] = binomial(v, n - 1)
        total += cache[v]
    if total > COUNT_MAX:
        raise CountOverflowError("GB upper bound exceeds the 128-bit count width")
    return total


def field_gb_montecarlo(ensemble: PatternEnsemble, probe: SparsePattern, n: int,
                        neuron: int, samples: int, seed: int) -> FieldEstimate:
    """Estimate the GB field at one neuron by uniform sampling of
    (n-1)-block-subsets (distinct blocks within each sample). Returns the
    covered fraction scaled by C(l-1, n-1); the scaling goes through log
    space when the subset count is too large for a float."""
    layout = ensemble.gb_layout()
    if layout is None:
        raise InvalidParameterError("field_gb_montecarlo needs a GB-mode ensemble")
    _check_dims(ensemble, probe, n)
    if samples < 1:
        raise InvalidParameterError(f"samples must be >= 1, got {samples}")
    if not 0 <= neuron < ensemble.dim:
        raise InvalidParameterError(f"neuron {neuron} out of range")
    l, c = layout.l, layout.c
    m = n - 1
    a = neuron // c
    if m > l - 1:
        return FieldEstimate(0.0, 0.0)  # no subsets exist
    slots, agree = _gb_agreement(ensemble, probe)
    anchor = _pack_bool(slots[:, a] == neuron)
    if not anchor:
        return FieldEstimate(0.0, 0.0)
    others = [_pack_bool(agree[:, b]) for b in range(l) if b != a]
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(samples):
        cur = anchor
        for b in rng.choice(l - 1, size=m, replace=False):
            cur &= others[int(b)]
            if not cur:
                break
        if cur:
            hits += 1
    frac = hits / samples
    spread = math.sqrt(frac * (1.0 - frac) / samples)
    log_k = log_binomial(l - 1, m)
    if log_k < 700.0:  # subset count fits a float: scale directly, exactly at 0/1
        k_float = float(math.comb(l - 1, m))
        return FieldEstimate(frac * k_float, spread * k_float)
    mean = math.exp(math.log(frac) + log_k) if frac > 0 else 0.0
    std_error = math.exp(math.log(spread) + log_k) if spread > 0 else 0.0
    return FieldEstimate(mean, std_error)


# -- brute-force oracle ----------------------------------------------------------


def field_oracle(ensemble: PatternEnsemble, probe: SparsePattern, n: int,
                 kind: ModelKind) -> FieldVector:
    """Literal tuple enumeration of the defining sums; exponential, so guarded
    to tiny instances. Ordered-tuple counts for every family."""
    _check_dims(ensemble, probe, n)
    max_dim = 18 if kind is ModelKind.GB else 16
    if ensemble.dim > max_dim or n > 4:
        raise InvalidParameterError(
            f"oracle guard: dim <= {max_dim} and n <= 4 required"
        )
    patbits = ensemble.pattern_bitmasks()
    act = probe.active
    values: list[int] = []

    if kind in (ModelKind.AMARI, ModelKind.WILLSHAW):
        for i in range(ensemble.dim):
            others = [j for j in act if j != i]
            s = 0
            for tup in permutations(others, n - 1):
                needed = 1 << i
                for j in tup:
                    needed |= 1 << j
                w = sum(1 for pb in patbits if pb & needed == needed)
                s += w if kind is ModelKind.AMARI else (1 if w else 0)
            values.append(s)
        return FieldVector(ensemble.dim, _values_array(values), Convention.ORDERED_TUPLES)

    layout = ensemble.gb_layout()
    if layout is None:
        raise InvalidParameterError("GB oracle needs a GB-mode ensemble")
    c = layout.c
    for i in range(ensemble.dim):
        a = i // c
        s = 0
        for tup in permutations(act, n - 1):
            blocks = [j // c for j in tup]
            if a in blocks or len(set(blocks)) != n - 1:
                continue
            needed = 1 << i
            for j in tup:
                needed |= 1 << j
            if any(pb & needed == needed for pb in patbits):
                s += 1
        values.append(s)
    return FieldVector(ensemble.dim, _values_array(values), Convention.ORDERED_TUPLES)
