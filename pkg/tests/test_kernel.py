import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carq.dynamics import Automorphism, EnumerationCapError, Partition, Scenario
from carq.kernel import (
    EntropySeries,
    KernelInvariantError,
    classical_oracle_kernel,
    entropy_series,
    format_word,
    gamma_word,
    kernel_table,
    kernel_tables,
    markov_entropy_rate,
    rate_estimate,
    table_entropy,
)
from carq.model import binary_entropy, kernel_claims, two_level_operators, two_level_scenario
from carq.random import (
    commuting_pair,
    rand_density,
    rand_kraus_partition,
    rand_permutation_unitary,
    rand_probability,
    rand_projective_partition,
    rand_unitary,
)


def diagonal_partition(d):
    return Partition(tuple(np.diag(np.eye(d)[j]).astype(complex) for j in range(d)))


def random_scenario(rng, d, n, variant, kraus=False):
    p = rand_kraus_partition(d, 2, rng) if kraus else rand_projective_partition(d, rng)
    return Scenario(rand_density(d, rng), p, Automorphism(rand_unitary(d, rng)), variant, n)


def markov_kraus(t):
    """Kraus operators g_j = sum_a sqrt(T_aj) |j><a| realising a classical chain."""
    d = t.shape[0]
    out = []
    for j in range(d):
        g = np.zeros((d, d), dtype=complex)
        g[j, :] = np.sqrt(t[:, j])
        out.append(g)
    return Partition(tuple(out), "kraus")


# --- ordered products --------------------------------------------------------------------

def test_gamma_word_single_symbol_aow(rng):
    p = rand_projective_partition(3, rng)
    th = Automorphism(rand_unitary(3, rng))
    for i in (1, 2, 3):
        assert np.abs(gamma_word(p, th, (i,), "aow") - p.elements[i - 1]).max() < 1e-15


def test_gamma_word_model_magnitude():
    ops = two_level_operators(0.3)
    p, th = Partition(ops["gamma"]), Automorphism(ops["unitary"])
    g = gamma_word(p, th, (1, 1), "car")
    assert np.abs(g.conj().T @ g - ops["gamma"][0]).max() < 1e-15


def test_gamma_word_mixed_word_vanishes_without_dynamics(rng):
    p = rand_projective_partition(3, rng)
    th = Automorphism.identity(3)
    for variant in ("aow", "car"):
        assert np.abs(gamma_word(p, th, (1, 2), variant)).max() < 1e-15


def test_gamma_word_errors():
    p, th = diagonal_partition(2), Automorphism.identity(2)
    with pytest.raises(ValueError):
        gamma_word(p, th, ())
    with pytest.raises(ValueError):
        gamma_word(p, th, (3,))
    with pytest.raises(ValueError):
        gamma_word(p, th, (1,), "other")


def test_format_word():
    assert format_word((1, 2, 1)) == "1-2-1"


# --- kernel examples ---------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["aow", "car"])
def test_model_kernel_claims_every_horizon(variant):
    tables = kernel_tables(two_level_scenario(0.3, horizon=8, variant=variant))
    for t in tables:
        checks = kernel_claims(t, 0.3)
        assert all(ok for _, _, ok in checks), checks
        assert t.support() == {(1,) * t.n, (2,) * t.n}


def test_model_kernel_values_exact():
    t = kernel_table(two_level_scenario(0.3, horizon=5))
    assert abs(t.get((1,) * 5) - 0.3) < 1e-12
    assert abs(t.get((2,) * 5) - 0.7) < 1e-12
    assert t.get((1, 2, 1, 1, 1)) == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_identity_dynamics_diagonal_brute_force(rng, n):
    d = 3
    probs = rand_probability(d, rng)
    s = Scenario(np.diag(probs).astype(complex), diagonal_partition(d), Automorphism.identity(d), "aow", n)
    t = kernel_table(s)
    for w in itertools.product(range(1, d + 1), repeat=n):
        expected = probs[w[0] - 1] if len(set(w)) == 1 else 0.0
        assert abs(t.get(w) - expected) < 1e-15


def test_singleton_partition_kernel(rng):
    s = Scenario(rand_density(3, rng), Partition((np.eye(3),)), Automorphism(rand_unitary(3, rng)), "car", 6)
    t = kernel_table(s)
    assert t.entries.keys() == {(1,) * 6}
    assert abs(t.get((1,) * 6) - 1) < 1e-12


@pytest.mark.parametrize("variant", ["aow", "car"])
@pytest.mark.parametrize("kraus", [False, True])
def test_propagation_matches_literal_products(rng, variant, kraus):
    for _ in range(4):
        s = random_scenario(rng, 2, 4, variant, kraus)
        t = kernel_table(s)
        for w in itertools.product(range(1, s.partition.size + 1), repeat=4):
            g = gamma_word(s.partition, s.automorphism, w, variant)
            literal = np.trace(g @ s.rho @ g.conj().T).real
            assert abs(t.get(w) - literal) < 1e-10


@pytest.mark.parametrize("variant", ["aow", "car"])
def test_prefix_consistency(rng, variant):
    for _ in range(5):
        tables = kernel_tables(random_scenario(rng, 3, 4, variant))
        for short, long in zip(tables, tables[1:]):
            marg = long.marginalize_last()
            words = set(marg) | set(short.entries)
            assert max(abs(marg.get(w, 0.0) - short.get(w)) for w in words) < 1e-10


def test_variant_agreement_when_state_commutes(rng):
    for _ in range(5):
        u, rho = commuting_pair(3, rng)
        p = rand_projective_partition(3, rng)
        a = kernel_table(Scenario(rho, p, Automorphism(u), "aow", 4))
        c = kernel_table(Scenario(rho, p, Automorphism(u), "car", 4))
        words = set(a.entries) | set(c.entries)
        assert max(abs(a.get(w) - c.get(w)) for w in words) < 1e-10


def test_variants_differ_without_commutation(rng):
    s = random_scenario(rng, 2, 3, "aow")
    a = kernel_table(s)
    c = kernel_table(Scenario(s.rho, s.partition, s.automorphism, "car", 3))
    assert max(abs(a.get(w) - c.get(w)) for w in a.entries) > 1e-6


@pytest.mark.parametrize("prune", [1e-3, 1e-2])
def test_normalization_with_pruning(rng, prune):
    s = random_scenario(rng, 3, 5, "car")
    s.prune = prune
    tables = kernel_tables(s)
    assert tables[-1].pruned_mass > 0
    for t in tables:
        assert abs(t.total() + t.pruned_mass - 1) < 1e-10
        assert min(t.entries.values()) > prune


@pytest.mark.parametrize("variant", ["aow", "car"])
def test_thread_count_does_not_change_tables(rng, variant):
    s = random_scenario(rng, 3, 4, variant)
    one = kernel_tables(s, threads=1)
    many = kernel_tables(s, threads=4)
    for a, b in zip(one, many):
        assert list(a.entries.items()) == list(b.entries.items())
        assert a.pruned_mass == b.pruned_mass


def test_cap_is_enforced(rng):
    s = random_scenario(rng, 2, 6, "car")
    s.cap = 10
    with pytest.raises(EnumerationCapError):
        kernel_table(s)


def test_missing_partition_and_bad_horizon(rng):
    s = random_scenario(rng, 2, 2, "car")
    with pytest.raises(ValueError):
        kernel_tables(s.with_partition(None))
    with pytest.raises(ValueError):
        kernel_tables(s, horizon=0)


def test_invalid_partition_breaks_normalization(rng):
    bad = Partition((0.5 * np.eye(2), 0.6 * np.eye(2)), "kraus")
    s = Scenario(rand_density(2, rng), bad, Automorphism.identity(2), "car", 2)
    with pytest.raises(KernelInvariantError):
        kernel_table(s)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.sampled_from(["aow", "car"]), st.integers(0, 2**32 - 1))
def test_normalization_property(d, n, variant, seed):
    rng = np.random.default_rng(seed)
    for t in kernel_tables(random_scenario(rng, d, n, variant)):
        assert abs(t.total() + t.pruned_mass - 1) < 1e-10
        assert min(t.entries.values()) >= 0


# --- entropy series --------------------------------------------------------------------------

def test_model_entropy_is_flat():
    series = entropy_series(two_level_scenario(0.3, horizon=8))
    assert np.abs(series.s - 0.610864302).max() < 1e-8
    assert np.abs(series.s - binary_entropy(0.3)).max() < 1e-10
    assert series.bound_violations() == []


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_deterministic_model_has_zero_entropy(lam):
    series = entropy_series(two_level_scenario(lam, horizon=6))
    assert np.abs(series.s).max() == 0


def test_iid_classical_entropy_matches_path_entropy(rng):
    # a cycling permutation with a uniform state is a stationary deterministic source
    d = 3
    u = rand_permutation_unitary(d, rng)
    probs = rand_probability(d, rng)
    s = Scenario(np.diag(probs).astype(complex), diagonal_partition(d), Automorphism(u), "aow", 5)
    series = entropy_series(s)
    for n in range(1, 6):
        oracle = classical_oracle_kernel(u.real, probs, n)
        h = -sum(p * math.log(p) for p in oracle.values() if p > 0)
        assert abs(series.s[n - 1] - h) < 1e-12


def test_vn_cross_check_on_aow(rng):
    s = random_scenario(rng, 2, 4, "aow")
    series = entropy_series(s, check_marginal=True)
    assert series.horizon == 4


def test_entropy_bounds(rng):
    for variant in ("aow", "car"):
        series = entropy_series(random_scenario(rng, 3, 4, variant))
        assert series.bound_violations() == []
        assert np.all(series.s <= np.arange(1, 5) * math.log(3) + 1e-12)


def test_bound_violations_reports_problems():
    series = EntropySeries.from_values([-0.1, 5.0], n_symbols=2)
    assert len(series.bound_violations()) == 2


def test_table_entropy_with_pruning_uses_live_words():
    from carq.kernel import KernelTable

    t = KernelTable(1, {(1,): 0.5, (2,): 0.25}, "car", 0.25)
    assert abs(table_entropy(t) - 0.5 * math.log(2) - 0.25 * math.log(4)) < 1e-15


# --- rate estimates ------------------------------------------------------------------------

def test_model_rate_is_zero():
    rate, diag = rate_estimate(entropy_series(two_level_scenario(0.3, horizon=8)))
    assert abs(rate) < 1e-12
    assert diag["horizon"] == 8
    assert "no limit" in diag["note"]


def test_linear_series_rate():
    c = 0.731
    rate, diag = rate_estimate(np.arange(1, 7) * c)
    assert abs(rate - c) < 1e-12
    assert abs(diag["mean_rate"] - c) < 1e-12


def test_rate_needs_three_horizons():
    with pytest.raises(ValueError):
        rate_estimate([0.1, 0.2])


@pytest.mark.parametrize("seed", range(5))
def test_classical_markov_rate(seed):
    rng = np.random.default_rng(seed)
    t = rng.random((2, 2)) + 0.1
    t /= t.sum(axis=1, keepdims=True)
    w, v = np.linalg.eig(t.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    s = Scenario(np.diag(pi).astype(complex), markov_kraus(t), Automorphism.identity(2), "aow", 8)
    series = entropy_series(s)
    rate, _ = rate_estimate(series)
    assert abs(rate - markov_entropy_rate(t, pi)) < 1e-6
    oracle = classical_oracle_kernel(t, pi @ t, 8)
    table = series.tables[-1]
    assert max(abs(table.get(w) - p) for w, p in oracle.items()) < 1e-12


def test_markov_rate_examples():
    half = np.full((2, 2), 0.5)
    assert abs(markov_entropy_rate(half, [0.5, 0.5]) - math.log(2)) < 1e-15
    assert markov_entropy_rate(np.eye(2), [0.3, 0.7]) == 0.0


# --- classical oracle --------------------------------------------------------------------------

def test_oracle_identity_chain():
    out = classical_oracle_kernel(np.eye(3), [0.2, 0.3, 0.5], 3)
    assert {w for w, p in out.items() if p > 0} == {(1, 1, 1), (2, 2, 2), (3, 3, 3)}


def test_oracle_half_mixing():
    out = classical_oracle_kernel(np.full((2, 2), 0.5), [0.5, 0.5], 2)
    assert all(abs(p - 0.25) < 1e-15 for p in out.values()) and len(out) == 4


def test_oracle_random_chain_sums_to_one(rng):
    t = rng.random((3, 3))
    t /= t.sum(axis=1, keepdims=True)
    out = classical_oracle_kernel(t, rand_probability(3, rng), 4)
    assert len(out) == 81
    assert abs(math.fsum(out.values()) - 1) < 1e-14


def test_oracle_labels_coarse_grain():
    out = classical_oracle_kernel(np.full((3, 3), 1 / 3), [1 / 3] * 3, 2, labels=[1, 1, 2])
    assert abs(out[(1, 1)] - 4 / 9) < 1e-15 and abs(out[(2, 2)] - 1 / 9) < 1e-15


@pytest.mark.parametrize(
    "t, p0, n",
    [
        (np.array([[0.5, 0.6], [0.5, 0.5]]), [0.5, 0.5], 2),
        (np.ones((2, 3)) / 3, [0.5, 0.5], 2),
        (np.eye(2), [0.5, 0.6], 2),
        (np.eye(2), [0.5, 0.5, 0.0], 2),
        (np.eye(2), [0.5, 0.5], 0),
    ],
)
def test_oracle_rejects_bad_input(t, p0, n):
    with pytest.raises(ValueError):
        classical_oracle_kernel(t, p0, n)
