import math

import numpy as np
import pytest

from assoc_lab import (
    Bernoulli,
    BlockLayout,
    BudgetExceededError,
    CountOverflowError,
    DimensionMismatchError,
    GBBlock,
    InvalidParameterError,
    ModelKind,
    PatternEnsemble,
    SparsePattern,
    binomial,
    falling_factorial,
    field_amari,
    field_gb,
    field_gb_montecarlo,
    field_gb_upper_bound,
    field_oracle,
    field_willshaw,
    gen_gb,
    overlap,
)
from conftest import random_bernoulli_instance, random_gb_instance


def ens_of(dim, *sets, mode=None):
    return PatternEnsemble.from_active_sets(dim, sets, mode or Bernoulli(0.5))


# -- Amari ------------------------------------------------------------------------


def test_amari_worked_example():
    ens = ens_of(4, (0, 1), (0, 2))
    fv = field_amari(ens, ens.pattern(0), 2)
    assert fv.as_list() == [1, 1, 1, 0]


def test_amari_zero_probe_gives_zero_field():
    ens = ens_of(6, (0, 1, 2), (3, 4))
    probe = SparsePattern(6, ())
    assert field_amari(ens, probe, 2).as_list() == [0] * 6
    assert field_amari(ens, probe, 3).as_list() == [0] * 6


def test_amari_additive_under_duplication():
    ens = ens_of(8, (0, 2, 5), (1, 2, 6))
    dup = ens_of(8, (0, 2, 5), (1, 2, 6), (1, 2, 6))
    probe = SparsePattern(8, (1, 2, 6))
    base = field_amari(ens, probe, 2).as_list()
    single = field_amari(ens_of(8, (1, 2, 6)), probe, 2).as_list()
    doubled = field_amari(dup, probe, 2).as_list()
    assert doubled == [b + s for b, s in zip(base, single)]


def test_amari_dimension_and_order_checks():
    ens = ens_of(4, (0, 1))
    with pytest.raises(DimensionMismatchError):
        field_amari(ens, SparsePattern(5, (0,)), 2)
    with pytest.raises(InvalidParameterError):
        field_amari(ens, ens.pattern(0), 1)


def test_amari_wide_counts_use_exact_big_integers():
    # ff(60, 11) > 2**63; exercises the object-dtype path
    dim, n = 64, 12
    act = tuple(range(60))
    ens = ens_of(dim, act, act[:30])
    probe = SparsePattern(dim, act)
    fv = field_amari(ens, probe, n)
    # independent recomputation from per-pattern overlaps
    for i in range(dim):
        expect = 0
        for mu in range(ens.m):
            pat = ens.pattern(mu)
            if i in pat.active:
                expect += falling_factorial(overlap(probe, pat, exclude=i), n - 1)
        assert fv[i] == expect
    assert fv[0] > 2**63  # genuinely beyond the vectorized range


def test_amari_overflow_beyond_width_is_an_error():
    dim = 300
    act = tuple(range(290))
    ens = ens_of(dim, act)
    with pytest.raises(CountOverflowError):
        field_amari(ens, SparsePattern(dim, act), 40)


def test_amari_matches_oracle_on_random_instances():
    rng = np.random.default_rng(2)
    for _ in range(150):
        ens, probe, n = random_bernoulli_instance(rng)
        assert field_amari(ens, probe, n).as_list() == \
            field_oracle(ens, probe, n, ModelKind.AMARI).as_list()


# -- Willshaw ----------------------------------------------------------------------


def test_willshaw_clipping_ignores_duplicates():
    base = ens_of(4, (0, 1), (0, 2))
    dup = ens_of(4, (0, 1), (0, 2), (0, 1))
    probe = base.pattern(0)
    assert field_willshaw(dup, probe, 2).as_list() == \
        field_willshaw(base, probe, 2).as_list()


def test_willshaw_single_pattern_self_field():
    d, n = 6, 3
    act = tuple(range(0, 12, 2))
    ens = ens_of(12, act)
    probe = ens.pattern(0)
    fv = field_willshaw(ens, probe, n)
    expect = math.factorial(n - 1) * binomial(d - 1, n - 1)
    for i in act:
        assert fv[i] == expect


def test_willshaw_values_divisible_by_factorial():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ens, probe, n = random_bernoulli_instance(rng)
        fact = math.factorial(n - 1)
        assert all(v % fact == 0 for v in field_willshaw(ens, probe, n).as_list())


def test_willshaw_budget_refusal():
    act = tuple(range(30))
    ens = ens_of(40, act)
    probe = SparsePattern(40, act)
    with pytest.raises(BudgetExceededError):
        field_willshaw(ens, probe, 4, budget=100)


def test_willshaw_dominated_by_amari():
    rng = np.random.default_rng(4)
    for _ in range(200):
        ens, probe, n = random_bernoulli_instance(rng)
        am = field_amari(ens, probe, n).as_list()
        wi = field_willshaw(ens, probe, n).as_list()
        assert all(w <= a for w, a in zip(wi, am))


def test_willshaw_matches_oracle_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(150):
        ens, probe, n = random_bernoulli_instance(rng)
        assert field_willshaw(ens, probe, n).as_list() == \
            field_oracle(ens, probe, n, ModelKind.WILLSHAW).as_list()


# -- GB ---------------------------------------------------------------------------


def test_gb_stored_probe_correct_neurons_hit_binomial_count():
    layout = BlockLayout(6, 3)
    ens = gen_gb(layout, 5, 77)
    probe = ens.pattern(0)
    for n in (2, 3):
        fv = field_gb(ens, probe, n)
        for i in probe.active:
            assert fv[i] == binomial(5, n - 1)


def test_gb_single_message_inactive_neurons_zero():
    layout = BlockLayout(3, 2)
    ens = gen_gb(layout, 1, 12)
    probe = ens.pattern(0)
    fv = field_gb(ens, probe, 2)
    for i in range(layout.dim):
        if i not in probe.active:
            assert fv[i] == 0


def test_gb_requires_gb_ensemble():
    ens = ens_of(6, (0, 3))
    with pytest.raises(InvalidParameterError):
        field_gb(ens, SparsePattern(6, (0, 3)), 2)


def test_gb_budget_refusal():
    layout = BlockLayout(30, 2)
    ens = gen_gb(layout, 2, 1)
    with pytest.raises(BudgetExceededError):
        field_gb(ens, ens.pattern(0), 4, budget=1000)


def test_gb_matches_oracle_on_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(150):
        ens, probe, n = random_gb_instance(rng)
        fact = math.factorial(n - 1)
        fast = [v * fact for v in field_gb(ens, probe, n).as_list()]
        assert fast == field_oracle(ens, probe, n, ModelKind.GB).as_list()


def test_gb_general_probe_multi_active_blocks():
    # probes outside the one-per-block family still count covered subsets
    layout = BlockLayout(3, 2)
    ens = PatternEnsemble.from_active_sets(
        6, [(0, 2, 4), (1, 2, 4)], GBBlock(layout))
    probe = SparsePattern(6, (0, 1, 2, 4))  # both neurons of block 0 active
    fv = field_gb(ens, probe, 2)
    # neuron (1,0)=2: blocks {0} covered (either pattern), {2} covered -> 2
    assert fv[2] == 2
    # neuron (0,0)=0: pattern 0 agrees on blocks 1 and 2 -> 2
    assert fv[0] == 2


# -- GB upper bound -----------------------------------------------------------------


def test_gb_upper_bound_dominates_field():
    rng = np.random.default_rng(7)
    for _ in range(150):
        ens, probe, n = random_gb_instance(rng)
        if probe.weight != ens.gb_layout().l:
            continue
        fv = field_gb(ens, probe, n)
        for i in range(ens.dim):
            assert fv[i] <= field_gb_upper_bound(ens, probe, n, i)


def test_gb_upper_bound_zero_when_nothing_matches():
    layout = BlockLayout(3, 2)
    ens = PatternEnsemble.from_active_sets(6, [(0, 2, 4)], GBBlock(layout))
    probe = SparsePattern(6, (1, 3, 5))  # disagrees with the message everywhere
    for i in range(6):
        assert field_gb_upper_bound(ens, probe, 2, i) == 0


def test_gb_upper_bound_scales_with_duplicates():
    layout = BlockLayout(4, 2)
    msg = (0, 2, 4, 6)
    single = PatternEnsemble.from_active_sets(8, [msg], GBBlock(layout))
    five = PatternEnsemble.from_active_sets(8, [msg] * 5, GBBlock(layout))
    probe = single.pattern(0)
    for n in (2, 3):
        for i in msg:
            one = field_gb_upper_bound(single, probe, n, i)
            assert field_gb_upper_bound(five, probe, n, i) == 5 * one
            # the clipped field is untouched by duplication
            assert field_gb(five, probe, n)[i] == field_gb(single, probe, n)[i]


# -- GB Monte Carlo -----------------------------------------------------------------


def test_gb_montecarlo_agrees_with_exact():
    rng = np.random.default_rng(8)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        layout = BlockLayout(int(rng.integers(max(2, n), 11)), 3)
        ens = gen_gb(layout, int(rng.integers(1, 30)), int(rng.integers(1 << 62)))
        probe = gen_gb(layout, 1, int(rng.integers(1 << 62))).pattern(0)
        neuron = int(rng.integers(0, layout.dim))
        exact = field_gb(ens, probe, n)[neuron]
        est = field_gb_montecarlo(ens, probe, n, neuron, 3000,
                                  int(rng.integers(1 << 62)))
        tol = 4 * est.std_error if est.std_error > 0 else 1e-9
        assert abs(est.mean - exact) <= tol


def test_gb_montecarlo_saturated_fraction_is_exact():
    layout = BlockLayout(8, 2)
    ens = gen_gb(layout, 3, 5)
    probe = ens.pattern(0)
    neuron = probe.active[0]
    for samples in (1, 7, 100):
        est = field_gb_montecarlo(ens, probe, 3, neuron, samples, 9)
        assert est.mean == float(binomial(7, 2))
        assert est.std_error == 0.0


def test_gb_montecarlo_empty_posting_is_zero():
    layout = BlockLayout(3, 3)
    ens = PatternEnsemble.from_active_sets(9, [(0, 3, 6)], GBBlock(layout))
    probe = ens.pattern(0)
    est = field_gb_montecarlo(ens, probe, 2, 1, 500, 3)  # neuron 1 never stored
    assert est.mean == 0.0 and est.std_error == 0.0


def test_gb_montecarlo_rejects_zero_samples():
    layout = BlockLayout(3, 2)
    ens = gen_gb(layout, 2, 4)
    with pytest.raises(InvalidParameterError):
        field_gb_montecarlo(ens, ens.pattern(0), 2, 0, 0, 1)


# -- oracle guard and shared invariants ------------------------------------------------


def test_oracle_guard():
    ens = ens_of(20, (0, 1, 2))
    with pytest.raises(InvalidParameterError):
        field_oracle(ens, ens.pattern(0), 2, ModelKind.AMARI)
    small = ens_of(6, (0, 1, 2, 3, 4))
    with pytest.raises(InvalidParameterError):
        field_oracle(small, small.pattern(0), 5, ModelKind.AMARI)


def test_permutation_equivariance_amari_willshaw():
    rng = np.random.default_rng(9)
    for _ in range(25):
        ens, probe, n = random_bernoulli_instance(rng)
        perm = rng.permutation(ens.dim)
        sets = [tuple(sorted(int(perm[i]) for i in ens.pattern(mu).active))
                for mu in range(ens.m)]
        p_ens = PatternEnsemble.from_active_sets(ens.dim, sets, ens.mode)
        p_probe = SparsePattern(
            ens.dim, tuple(sorted(int(perm[i]) for i in probe.active)))
        for evaluate in (field_amari, field_willshaw):
            fv = evaluate(ens, probe, n).as_list()
            pv = evaluate(p_ens, p_probe, n).as_list()
            assert all(pv[perm[i]] == fv[i] for i in range(ens.dim))


def test_permutation_equivariance_gb_block_respecting():
    rng = np.random.default_rng(10)
    for _ in range(25):
        ens, probe, n = random_gb_instance(rng)
        layout = ens.gb_layout()
        l, c = layout.l, layout.c
        block_perm = rng.permutation(l)
        slot_perms = [rng.permutation(c) for _ in range(l)]

        def relabel(i):
            a, k = divmod(int(i), c)
            return int(block_perm[a]) * c + int(slot_perms[a][k])

        sets = [tuple(sorted(relabel(i) for i in ens.pattern(mu).active))
                for mu in range(ens.m)]
        p_ens = PatternEnsemble.from_active_sets(ens.dim, sets, ens.mode)
        p_probe = SparsePattern(ens.dim, tuple(sorted(relabel(i)
                                                      for i in probe.active)))
        fv = field_gb(ens, probe, n).as_list()
        pv = field_gb(p_ens, p_probe, n).as_list()
        assert all(pv[relabel(i)] == fv[i] for i in range(ens.dim))


def test_fields_are_nonnegative_integers():
    rng = np.random.default_rng(11)
    for _ in range(30):
        ens, probe, n = random_bernoulli_instance(rng)
        for fv in (field_amari(ens, probe, n), field_willshaw(ens, probe, n)):
            assert all(isinstance(v, int) and v >= 0 for v in fv.as_list())
