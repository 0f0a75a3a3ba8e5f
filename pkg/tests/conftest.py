"""Shared instance factories for the oracle-equivalence and property tests."""

import pytest

from assoc_lab import BlockLayout, gen_bernoulli, gen_gb


def random_bernoulli_instance(rng, n_dim_max=12, orders=(2, 3), m_max=8,
                              ps=(0.2, 0.5)):
    """(ensemble, probe, n) with a Bernoulli ensemble and a mixed probe:
    half the time the first stored pattern, half the time a fresh draw."""
    n_dim = int(rng.integers(4, n_dim_max + 1))
    n = int(rng.choice(orders))
    m = int(rng.integers(1, m_max + 1))
    p = float(rng.choice(ps))
    ens = gen_bernoulli(n_dim, p, m, int(rng.integers(1 << 62)))
    if rng.random() < 0.5:
        probe = ens.pattern(0)
    else:
        probe = gen_bernoulli(n_dim, p, 1, int(rng.integers(1 << 62))).pattern(0)
    return ens, probe, n


def random_gb_instance(rng, l_max=6, c_max=3, orders=(2, 3), m_max=8):
    """(ensemble, probe, n) with a GB ensemble and a one-per-block probe."""
    n = int(rng.choice(orders))
    l = int(rng.integers(max(2, n), l_max + 1))
    c = int(rng.integers(2, c_max + 1))
    m = int(rng.integers(1, m_max + 1))
    layout = BlockLayout(l, c)
    ens = gen_gb(layout, m, int(rng.integers(1 << 62)))
    if rng.random() < 0.5:
        probe = ens.pattern(0)
    else:
        probe = gen_gb(layout, 1, int(rng.integers(1 << 62))).pattern(0)
    return ens, probe, n


@pytest.fixture
def bernoulli_instances():
    return random_bernoulli_instance


@pytest.fixture
def gb_instances():
    return random_gb_instance
