"""Sparse 0/1 patterns and the three ensemble generators.

A pattern is the sorted list of its active indices; a bit-block form
(one big Python int) backs word-parallel overlap counting. An ensemble
keeps all patterns in a single flat index array so the bulk field
evaluators can stay vectorized. Generation is counter-based: pattern mu
draws from a stream keyed by (master_seed, mu), so an ensemble is
reproducible independently of generation order or parallelism.

Serialized form (used by the CLI `generate` subcommand): a header line
``dim=<N> M=<M> mode=<tag> seed=<u64>`` followed by one line of
space-separated active indices per pattern; an empty line is an all-zero
pattern.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from . import rng as _rng
from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
)

# Counter namespaces for the per-pattern draw streams.
_CTR_WEIGHT = 0
_CTR_INDEX_BASE = 1 << 32  # attempt r uses counters (r+1)*2**32 + slot
_CTR_FY_BASE = 1 << 62
_MAX_REJECTION_ROUNDS = 64


@dataclass(frozen=True)
class SparsePattern:
    """A 0/1 configuration over `dim` neurons, stored as sorted active indices."""

    dim: int
    active: tuple[int, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidDimensionError(f"pattern dimension must be >= 1, got {self.dim}")
        act = tuple(int(i) for i in self.active)
        object.__setattr__(self, "active", act)
        prev = -1
        for i in act:
            if i <= prev:
                raise InvalidParameterError("active indices must be strictly increasing")
            prev = i
        if act and act[-1] >= self.dim:
            raise InvalidParameterError(
                f"active index {act[-1]} out of range for dim {self.dim}"
            )

    @cached_property
    def bits(self) -> int:
        """Bit-block form: bit i is set iff neuron i is active."""
        b = 0
        for i in self.active:
            b |= 1 << i
        return b

    @property
    def weight(self) -> int:
        return len(self.active)

    def bool_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        if self.active:
            mask[list(self.active)] = True
        return mask


@dataclass(frozen=True)
class BlockLayout:
    """l blocks of c neurons each; neuron (a, k) lives at flat index a*c + k."""

    l: int
    c: int

    def __post_init__(self):
        if self.l < 1 or self.c < 1:
            raise InvalidParameterError("block layout needs l >= 1 and c >= 1")

    @property
    def dim(self) -> int:
        return self.l * self.c

    def block_of(self, index: int) -> int:
        return index // self.c

    def flat(self, a: int, k: int) -> int:
        return a * self.c + k


@dataclass(frozen=True)
class Bernoulli:
    """Each coordinate independently active with probability p."""

    p: float


@dataclass(frozen=True)
class FixedWeight:
    """Uniform over patterns with exactly c_active active indices."""

    c_active: int


@dataclass(frozen=True)
class GBBlock:
    """One uniformly chosen active neuron per block."""

    layout: BlockLayout


Mode = Union[Bernoulli, FixedWeight, GBBlock]


class PatternEnsemble:
    """M stored patterns plus generation metadata.

    Patterns live in one flat array of active indices (pattern-major,
    sorted within each pattern) delimited by `offsets`. The object is
    immutable after construction and safe to share across trial workers;
    the inverted-index caches are built lazily and are idempotent.
    """

    def __init__(self, dim: int, mode: Mode, master_seed: int,
                 flat: np.ndarray, offsets: np.ndarray):
        if dim < 1:
            raise InvalidDimensionError(f"ensemble dimension must be >= 1, got {dim}")
        flat = np.ascontiguousarray(flat, dtype=np.int64)
        offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        if offsets.ndim != 1 or len(offsets) < 2 or offsets[0] != 0:
            raise InvalidParameterError("offsets must start at 0 and delimit >= 1 pattern")
        if offsets[-1] != len(flat):
            raise InvalidParameterError("offsets do not match the flat index array")
        flat.setflags(write=False)
        offsets.setflags(write=False)
        self.dim = int(dim)
        self.mode = mode
        self.master_seed = int(master_seed)
        self.flat = flat
        self.offsets = offsets
        self._pattern_list: list[SparsePattern] | None = None
        self._posting_bits: dict[int, int] | None = None
        self._pattern_bits: list[int] | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_active_sets(cls, dim: int, active_sets: Iterable[Sequence[int]],
                         mode: Mode, master_seed: int = 0) -> "PatternEnsemble":
        """Build an ensemble from explicit active-index lists, validating the mode."""
        sets = [tuple(sorted(int(i) for i in s)) for s in active_sets]
        if not sets:
            raise InvalidParameterError("an ensemble needs at least one pattern")
        for s in sets:
            SparsePattern(dim, s)  # validates range/uniqueness
        if isinstance(mode, FixedWeight):
            for s in sets:
                if len(s) != mode.c_active:
                    raise InvalidParameterError(
                        f"fixed-weight ensemble requires exactly {mode.c_active} active indices"
                    )
        if isinstance(mode, GBBlock):
            lay = mode.layout
            if lay.dim != dim:
                raise InvalidParameterError("block layout does not match ensemble dim")
            for s in sets:
                blocks = [lay.block_of(i) for i in s]
                if blocks != list(range(lay.l)):
                    raise InvalidParameterError(
                        "GB ensemble requires exactly one active index per block"
                    )
        flat = np.array([i for s in sets for i in s], dtype=np.int64)
        offsets = np.zeros(len(sets) + 1, dtype=np.int64)
        np.cumsum([len(s) for s in sets], out=offsets[1:])
        return cls(dim, mode, master_seed, flat, offsets)

    # -- access ------------------------------------------------------------

    @property
    def m(self) -> int:
        """Number of stored patterns."""
        return len(self.offsets) - 1

    def pattern(self, mu: int) -> SparsePattern:
        lo, hi = self.offsets[mu], self.offsets[mu + 1]
        return SparsePattern(self.dim, tuple(int(i) for i in self.flat[lo:hi]))

    @property
    def patterns(self) -> list[SparsePattern]:
        if self._pattern_list is None:
            self._pattern_list = [self.pattern(mu) for mu in range(self.m)]
        return self._pattern_list

    @property
    def active_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def zero_pattern_count(self) -> int:
        """All-zero patterns are kept, not resampled; this reports how many."""
        return int(np.count_nonzero(self.active_counts == 0))

    def gb_layout(self) -> BlockLayout | None:
        return self.mode.layout if isinstance(self.mode, GBBlock) else None

    def gb_slots(self) -> np.ndarray:
        """(M, l) array of active flat indices, one column per block (GB mode only)."""
        lay = self.gb_layout()
        if lay is None:
            raise InvalidParameterError("gb_slots needs a GB-mode ensemble")
        return self.flat.reshape(self.m, lay.l)

    # -- inverted-index caches ----------------------------------------------

    def posting_bitmasks(self) -> dict[int, int]:
        """neuron -> bitmask over pattern ids containing that neuron."""
        if self._posting_bits is None:
            postings: dict[int, int] = {}
            flat = self.flat
            offsets = self.offsets
            for mu in range(self.m):
                bit = 1 << mu
                for slot in range(offsets[mu], offsets[mu + 1]):
                    i = int(flat[slot])
                    postings[i] = postings.get(i, 0) | bit
            self._posting_bits = postings
        return self._posting_bits

    def pattern_bitmasks(self) -> list[int]:
        """pattern id -> bitmask over the neurons it activates."""
        if self._pattern_bits is None:
            out = []
            flat = self.flat
            offsets = self.offsets
            for mu in range(self.m):
                b = 0
                for slot in range(offsets[mu], offsets[mu + 1]):
                    b |= 1 << int(flat[slot])
                out.append(b)
            self._pattern_bits = out
        return self._pattern_bits

    # -- equality (content-based; used by determinism tests) ----------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, PatternEnsemble):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.mode == other.mode
            and self.master_seed == other.master_seed
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.flat, other.flat)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (f"PatternEnsemble(dim={self.dim}, M={self.m}, mode={self.mode!r}, "
                f"seed={self.master_seed})")


# -- generators -------------------------------------------------------------


def default_sparsity(N: int) -> float:
    """Activation probability ln(N)/N of the extreme-sparse regime."""
    if N < 2:
        raise InvalidDimensionError(f"default_sparsity needs N >= 2, got {N}")
    return math.log(N) / N


@lru_cache(maxsize=64)
def _binomial_cdf(n: int, p: float) -> np.ndarray:
    lp = math.log(p)
    lq = math.log1p(-p)
    lgn = math.lgamma(n + 1)
    lgk = np.array([math.lgamma(k + 1) for k in range(n + 1)])
    ks = np.arange(n + 1)
    logpmf = lgn - lgk - lgk[::-1] + ks * lp + (n - ks) * lq
    cdf = np.cumsum(np.exp(logpmf))
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    return cdf


def _partial_fisher_yates(key: int, count: int, dim: int) -> np.ndarray:
    arr = np.arange(dim, dtype=np.int64)
    for j in range(count):
        r = int(_rng.stream_u64(key, np.array([_CTR_FY_BASE + j]))[0]) % (dim - j)
        arr[j], arr[j + r] = arr[j + r], arr[j]
    out = arr[:count]
    out.sort()
    return out


def _sample_subsets(keys: np.ndarray, counts: np.ndarray, dim: int):
    """Uniform `counts[mu]`-subsets of range(dim), one per key; exact and
    deterministic. Collision-light patterns use whole-tuple rejection (kept
    until all indices are distinct, which preserves uniformity); dense ones
    fall back to a per-pattern partial Fisher-Yates."""
    m = len(keys)
    counts = np.asarray(counts, dtype=np.int64)
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    flat = np.empty(total, dtype=np.int64)
    if total == 0:
        return flat, offsets

    pat = np.repeat(np.arange(m, dtype=np.int64), counts)
    pos = np.arange(total, dtype=np.int64) - offsets[pat]
    light = (counts * (counts - 1) <= dim) & (counts > 0)

    pending = light.copy()
    for attempt in range(_MAX_REJECTION_ROUNDS):
        if not pending.any():
            break
        sel = pending[pat]
        ctr = _CTR_INDEX_BASE * (attempt + 1) + pos[sel]
        draws = _rng.stream_u64(keys[pat[sel]], ctr) % np.uint64(dim)
        flat[sel] = draws.astype(np.int64)
        combined = np.sort(pat[sel] * dim + flat[sel])
        dup = combined[1:][combined[1:] == combined[:-1]]
        pending = np.zeros(m, dtype=bool)
        if len(dup):
            pending[np.unique(dup // dim)] = True
    heavy = ~light & (counts > 0)
    heavy |= pending  # rejection stragglers, if any
    for mu in np.nonzero(heavy)[0]:
        lo, hi = offsets[mu], offsets[mu + 1]
        flat[lo:hi] = _partial_fisher_yates(int(keys[mu]), int(counts[mu]), dim)

    # one global sort yields pattern-major, in-pattern ascending order
    combined = np.sort(pat * dim + flat)
    flat = combined - pat * dim
    return flat, offsets


def _validate_m_seed(M: int, seed: int) -> None:
    if M < 1:
        raise InvalidParameterError(f"pattern count M must be >= 1, got {M}")
    if not 0 <= seed < (1 << 64):
        raise InvalidParameterError("seed must fit in 64 unsigned bits")


def gen_bernoulli(N: int, p: float, M: int, seed: int) -> PatternEnsemble:
    """M patterns with i.i.d. Bernoulli(p) coordinates; deterministic in seed.

    All-zero draws are retained (they are part of the distribution).
    """
    if N < 1:
        raise InvalidDimensionError(f"N must be >= 1, got {N}")
    if not 0.0 < p < 1.0:
        raise InvalidParameterError(f"p must lie strictly in (0, 1), got {p}")
    _validate_m_seed(M, seed)
    keys = _rng.pattern_keys(seed, M)
    u = _rng.stream_unit(keys, _CTR_WEIGHT)
    counts = np.searchsorted(_binomial_cdf(N, p), u, side="right").astype(np.int64)
    flat, offsets = _sample_subsets(keys, counts, N)
    return PatternEnsemble(N, Bernoulli(p), seed, flat, offsets)


def gen_fixed_weight(N: int, c_active: int, M: int, seed: int) -> PatternEnsemble:
    """M independent uniform c_active-subsets of range(N)."""
    if N < 1:
        raise InvalidDimensionError(f"N must be >= 1, got {N}")
    if not 1 <= c_active <= N:
        raise InvalidParameterError(
            f"c_active must lie in [1, N]={N}, got {c_active}"
        )
    _validate_m_seed(M, seed)
    keys = _rng.pattern_keys(seed, M)
    counts = np.full(M, c_active, dtype=np.int64)
    flat, offsets = _sample_subsets(keys, counts, N)
    return PatternEnsemble(N, FixedWeight(c_active), seed, flat, offsets)


def gen_gb(layout: BlockLayout, M: int, seed: int) -> PatternEnsemble:
    """M block-structured patterns: one uniform active neuron per block."""
    _validate_m_seed(M, seed)
    keys = _rng.pattern_keys(seed, M)
    ctrs = np.arange(1, layout.l + 1, dtype=np.uint64)
    raw = _rng.stream_u64(keys[:, None], ctrs[None, :])
    slots = (raw % np.uint64(layout.c)).astype(np.int64)
    flat2d = np.arange(layout.l, dtype=np.int64) * layout.c + slots
    offsets = np.arange(M + 1, dtype=np.int64) * layout.l
    return PatternEnsemble(layout.dim, GBBlock(layout), seed, flat2d.ravel(), offsets)


def overlap(a: SparsePattern, b: SparsePattern, exclude: int | None = None) -> int:
    """Number of indices active in both patterns, optionally ignoring one index."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"pattern dims differ: {a.dim} vs {b.dim}")
    inter = a.bits & b.bits
    if exclude is not None:
        inter &= ~(1 << exclude)
    return inter.bit_count()


# -- serialization ------------------------------------------------------------

_MODE_RE = re.compile(
    r"^(?:bernoulli\(p=(?P<p>[^)]+)\)"
    r"|fixed_weight\(c=(?P<c>\d+)\)"
    r"|gb\(l=(?P<gl>\d+),c=(?P<gc>\d+)\))$"
)


def _mode_tag(mode: Mode) -> str:
    if isinstance(mode, Bernoulli):
        return f"bernoulli(p={format(mode.p, '.17g')})"
    if isinstance(mode, FixedWeight):
        return f"fixed_weight(c={mode.c_active})"
    if isinstance(mode, GBBlock):
        return f"gb(l={mode.layout.l},c={mode.layout.c})"
    raise InvalidParameterError(f"unknown ensemble mode {mode!r}")


def _mode_from_tag(tag: str) -> Mode:
    m = _MODE_RE.match(tag)
    if not m:
        raise InvalidParameterError(f"unrecognized mode tag {tag!r}")
    if m.group("p") is not None:
        return Bernoulli(float(m.group("p")))
    if m.group("c") is not None:
        return FixedWeight(int(m.group("c")))
    return GBBlock(BlockLayout(int(m.group("gl")), int(m.group("gc"))))


def ensemble_to_text(ensemble: PatternEnsemble) -> str:
    lines = [
        f"dim={ensemble.dim} M={ensemble.m} mode={_mode_tag(ensemble.mode)} "
        f"seed={ensemble.master_seed}"
    ]
    flat, offsets = ensemble.flat, ensemble.offsets
    for mu in range(ensemble.m):
        lines.append(" ".join(str(int(i)) for i in flat[offsets[mu]:offsets[mu + 1]]))
    return "\n".join(lines) + "\n"


def ensemble_from_text(text: str) -> PatternEnsemble:
    lines = text.splitlines()
    if not lines:
        raise InvalidParameterError("empty ensemble file")
    header = dict(
        item.split("=", 1) for item in lines[0].split(" ") if "=" in item
    )
    try:
        dim = int(header["dim"])
        m = int(header["M"])
        mode = _mode_from_tag(header["mode"])
        seed = int(header["seed"])
    except (KeyError, ValueError) as exc:
        raise InvalidParameterError(f"bad ensemble header: {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != m:
        raise InvalidParameterError(f"expected {m} pattern lines, found {len(body)}")
    sets = [tuple(int(tok) for tok in line.split()) for line in body]
    return PatternEnsemble.from_active_sets(dim, sets, mode, master_seed=seed)


def write_ensemble(ensemble: PatternEnsemble, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(ensemble_to_text(ensemble))


def read_ensemble(path) -> PatternEnsemble:
    with open(path, "r", encoding="ascii") as f:
        return ensemble_from_text(f.read())
