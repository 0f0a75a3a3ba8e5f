"""End-to-end acceptance gates.

Each test prints one PASS/FAIL line, so a verbose run doubles as a
checklist:  pytest tests/test_acceptance.py -v -s
"""

import math
import time
from fractions import Fraction

import numpy as np

from assoc_lab import (
    BlockLayout,
    CapacityFamily,
    CapacityRule,
    FixedOrder,
    ModelKind,
    ModelSpec,
    binomial,
    capacity_for,
    default_sparsity,
    estimate_stability,
    field_amari,
    field_gb,
    field_gb_upper_bound,
    field_oracle,
    field_willshaw,
    gen_gb,
)
from assoc_lab.cli import main
from conftest import random_bernoulli_instance, random_gb_instance


def report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" [{detail}]" if detail else ""))
    assert ok, f"{name} failed: {detail}"


def test_c01_oracle_equivalence_amari():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    checked = 0
    for _ in range(1000):
        ens, probe, n = random_bernoulli_instance(rng)
        assert field_amari(ens, probe, n).as_list() == \
            field_oracle(ens, probe, n, ModelKind.AMARI).as_list()
        checked += 1
    elapsed = time.perf_counter() - start
    report("C1 oracle equivalence (amari)", checked == 1000 and elapsed < 60,
           f"{checked} instances in {elapsed:.1f}s")


def test_c02_oracle_equivalence_willshaw_and_gb():
    rng = np.random.default_rng(102)
    for _ in range(1000):
        ens, probe, n = random_bernoulli_instance(rng)
        assert field_willshaw(ens, probe, n).as_list() == \
            field_oracle(ens, probe, n, ModelKind.WILLSHAW).as_list()
    for _ in range(1000):
        ens, probe, n = random_gb_instance(rng)
        fact = math.factorial(n - 1)
        fast = [v * fact for v in field_gb(ens, probe, n).as_list()]
        assert fast == field_oracle(ens, probe, n, ModelKind.GB).as_list()
    report("C2 oracle equivalence (willshaw, gb)", True, "2x1000 instances")


def test_c03_dominance_invariants():
    rng = np.random.default_rng(103)
    violations = 0
    for _ in range(1000):
        ens, probe, n = random_bernoulli_instance(rng)
        am = field_amari(ens, probe, n).as_list()
        wi = field_willshaw(ens, probe, n).as_list()
        violations += sum(w > a for w, a in zip(wi, am))
    for _ in range(1000):
        ens, probe, n = random_gb_instance(rng)
        if probe.weight != ens.gb_layout().l:
            probe = ens.pattern(0)
        fv = field_gb(ens, probe, n)
        violations += sum(fv[i] > field_gb_upper_bound(ens, probe, n, i)
                          for i in range(ens.dim))
    report("C3 dominance invariants", violations == 0,
           f"{violations} violations")


def test_c04_gb_deterministic_signal():
    rng = np.random.default_rng(104)
    violations = 0
    for _ in range(200):
        n = int(rng.choice([2, 3]))
        l = int(rng.integers(5, 13))
        c = int(rng.integers(2, 7))
        m = int(rng.integers(1, 21))
        ens = gen_gb(BlockLayout(l, c), m, int(rng.integers(1 << 62)))
        probe = ens.pattern(0)
        fv = field_gb(ens, probe, n)
        expect = binomial(l - 1, n - 1)
        violations += sum(fv[i] != expect for i in probe.active)
    report("C4 GB stored-probe signal equals C(l-1, n-1)", violations == 0,
           f"{violations} violations over 200 instances")


def test_c05_gb_agreement_moment():
    l, c, n = 30, 5, 3
    m = 10**5
    layout = BlockLayout(l, c)
    ref = gen_gb(layout, 1, 1055).pattern(0)
    ens = gen_gb(layout, m, 2055)
    agree = ens.gb_slots() == np.array(ref.active)
    x = agree[:, 1:].sum(axis=1)  # matches on the l-1 blocks after block 0
    counts = x * (x - 1) // 2  # C(x, 2)
    mean = counts.mean()
    se = counts.std(ddof=1) / math.sqrt(m)
    expect = binomial(l - 1, n - 1) / c ** (n - 1)
    assert expect == 406 / 25 == 16.24
    ok = abs(mean - expect) <= 4 * se
    report("C5 agreement-count moment", ok,
           f"mean={mean:.4f} vs 16.24, se={se:.4f}")


def exact_binomial_tail_m1(n_dim):
    """P(D=0) + P(D>=5), D ~ Bin(n_dim, ln(n_dim)/n_dim), exact rationals."""
    p = Fraction(default_sparsity(n_dim))
    q = 1 - p
    pmf = []
    term = q**n_dim
    for k in range(5):
        pmf.append(term)
        term = term * p / q * Fraction(n_dim - k, k + 1)
    return float(pmf[0] + 1 - sum(pmf))


def test_c06_exact_finite_stability_m1():
    start = time.perf_counter()
    n_dim, trials = 2000, 2000
    spec = ModelSpec(ModelKind.AMARI, FixedOrder(2), 0.5)
    rule = CapacityRule(CapacityFamily.AMARI_FIXED, 1e-12, FixedOrder(2))
    assert capacity_for(rule, n_dim) == 1  # M forced to 1
    est = estimate_stability(spec, rule, n_dim, trials, master_seed=606)
    p_exact = exact_binomial_tail_m1(n_dim)
    se = math.sqrt(p_exact * (1 - p_exact) / trials)
    elapsed = time.perf_counter() - start
    ok = abs(est.rate - p_exact) <= 4 * se and elapsed < 120
    report("C6 exact finite-N stability (M=1)", ok,
           f"rate={est.rate:.4f} exact={p_exact:.4f} se={se:.4f} "
           f"time={elapsed:.0f}s")


def run_trend(kind, order, dims, alphas, trials, seed, gamma=0.5):
    spec_layout = BlockLayout(*dims) if kind is ModelKind.GB else None
    cells = []
    for i, alpha in enumerate(alphas):
        spec = (ModelSpec(kind, order, gamma, spec_layout)
                if spec_layout else ModelSpec(kind, order, gamma))
        family = (CapacityFamily.GB_FIXED if kind is ModelKind.GB
                  else CapacityFamily.AMARI_FIXED)
        rule = CapacityRule(family, alpha, order)
        cells.append(estimate_stability(spec, rule, dims, trials,
                                        master_seed=seed + i))
    return cells


def assert_trend(name, cells, elapsed, limit):
    rates = [c.rate for c in cells]
    monotone_ok = all(cells[i].ci_low <= cells[i - 1].ci_high
                      for i in range(1, len(cells)))
    endpoints_ok = cells[0].ci_low > cells[-1].ci_high
    ok = monotone_ok and endpoints_ok and (limit is None or elapsed < limit)
    report(name, ok,
           f"rates={['%.3f' % r for r in rates]} time={elapsed:.0f}s")


def test_c07_amari_capacity_trend():
    start = time.perf_counter()
    cells = run_trend(ModelKind.AMARI, FixedOrder(2), 2000,
                      [0.005, 0.05, 0.5, 2.0], 300, 707)
    assert_trend("C7 amari capacity trend", cells,
                 time.perf_counter() - start, 600)


def test_c08_gb_capacity_trend():
    start = time.perf_counter()
    cells = run_trend(ModelKind.GB, FixedOrder(3), (64, 6),
                      [0.1, 0.4, 0.9, 2.0], 200, 808)
    assert_trend("C8 gb capacity trend", cells,
                 time.perf_counter() - start, None)


def test_c09_sweep_reproducible_across_threads(tmp_path, capsys):
    cfg = tmp_path / "c9.cfg"
    cfg.write_text(
        "model = amari\nN = 100,200\norder = 2\ngamma = 0.5\n"
        "alpha = 0.01,0.2\ntrials = 15\nseed = 909\nreproducible = true\n")
    outputs = []
    for threads, tag in ((1, "a"), (1, "b"), (8, "c")):
        out = tmp_path / f"c9_{tag}.csv"
        code = main(["sweep", "--config", str(cfg), "--threads", str(threads),
                     "--out", str(out)])
        assert code == 0
        outputs.append(out.read_bytes())
    capsys.readouterr()
    ok = outputs[0] == outputs[1] == outputs[2]
    report("C9 byte-identical reproducible sweeps (1 vs 8 threads)", ok)


def test_c10_capacity_formulas():
    ok_fixed = capacity_for(
        CapacityRule(CapacityFamily.AMARI_FIXED, 0.1, FixedOrder(2)), 100) == 47
    ok_gb = capacity_for(
        CapacityRule(CapacityFamily.GB_FIXED, 0.2, FixedOrder(3)), (5, 10)) == 200
    ok_identity = True
    for n_dim in (100, 1000, 3000):
        for kappa in (0.1, 0.3):
            log_n = math.log(n_dim)
            lhs = math.exp(kappa * (log_n**2 - log_n * math.log(log_n)))
            rhs = (n_dim / log_n) ** (kappa * log_n)
            ok_identity &= abs(lhs - rhs) <= 1e-9 * abs(rhs)
    report("C10 capacity formulas", ok_fixed and ok_gb and ok_identity,
           "floor example 47, gb example 200, log identity to 1e-9")
