import itertools

import numpy as np
import pytest

from carq.dynamics import (
    Automorphism,
    ChainState,
    EnumerationCapError,
    Partition,
    Scenario,
    chain_joint_state,
    choi_matrix,
    map_E_e,
    mode_weight,
    nested_expectation,
    nested_umegaki,
    transition_expectation,
    umegaki_step,
    validate_partition,
)
from carq.fock import build_fock_system
from carq.kernel import kernel_table
from carq.linalg import density_violations, kron_all, partial_trace
from carq.model import two_level_operators, two_level_scenario
from carq.random import (
    commuting_pair,
    rand_density,
    rand_kraus_partition,
    rand_projective_partition,
    rand_unitary,
)


def e(i, j, d=2):
    out = np.zeros((d, d), dtype=complex)
    out[i, j] = 1
    return out


@pytest.fixture
def model():
    ops = two_level_operators(0.3)
    p = Partition(ops["gamma"])
    return ops, p, Automorphism(ops["unitary"])


# --- partitions ------------------------------------------------------------------

def test_number_partition_is_valid(model):
    _, p, _ = model
    assert validate_partition(p).passed


def test_singleton_partition_is_valid():
    assert validate_partition(Partition((np.eye(3),))).passed


def test_halves_are_not_orthogonal():
    report = validate_partition(Partition((0.5 * np.eye(2), 0.5 * np.eye(2))))
    assert not report.passed
    assert report.failed() == ["g_i g_j = delta_ij g_j"]


def test_halves_are_a_kraus_partition():
    h = np.sqrt(0.5) * np.eye(2)
    assert validate_partition(Partition((h, h), "kraus")).passed


def test_oblique_idempotents_fail_projective_check():
    g1 = np.array([[1.0, 1.0], [0.0, 0.0]])
    report = validate_partition(Partition((g1, np.eye(2) - g1)))
    assert report.failed() == ["g = g^H"]


def test_random_partitions_validate(rng):
    assert validate_partition(rand_projective_partition(4, rng)).passed
    assert validate_partition(rand_kraus_partition(3, 2, rng)).passed


def test_partition_rejects_bad_input():
    with pytest.raises(ValueError):
        Partition((np.eye(2), np.eye(3)))
    with pytest.raises(ValueError):
        Partition((np.eye(2),), "weird")


# --- automorphisms -----------------------------------------------------------------

def test_automorphism_powers_and_duality(rng):
    u = rand_unitary(3, rng)
    th = Automorphism(u)
    assert np.abs(th.power(4) - np.linalg.matrix_power(u, 4)).max() < 1e-13
    x, a = rand_density(3, rng), rng.normal(size=(3, 3))
    assert abs(np.trace(th.apply_dual(x, 2) @ a) - np.trace(x @ th.apply(a, 2))) < 1e-13
    assert np.abs(th.apply(th.apply(a), 1) - th.apply(a, 2)).max() < 1e-13


def test_automorphism_rejects_non_unitary():
    with pytest.raises(ValueError):
        Automorphism(np.diag([1.0, 2.0]))


# --- E_e and transition expectation ---------------------------------------------------

def test_map_E_e_examples(rng):
    b = rng.normal(size=(3, 3))
    assert np.abs(map_E_e(np.kron(e(0, 0), b), 2, 3) - b).max() == 0
    assert np.abs(map_E_e(np.kron(e(0, 1), b), 2, 3)).max() == 0
    assert np.abs(map_E_e(np.kron(np.eye(2), b), 2, 3) - 2 * b).max() < 1e-15
    with pytest.raises(ValueError):
        map_E_e(np.eye(5), 2, 3)


def test_transition_expectation_preserves_identity(rng):
    for p in (rand_projective_partition(3, rng), rand_kraus_partition(2, 3, rng)):
        th = Automorphism(rand_unitary(p.dim, rng))
        out = transition_expectation(p, th, np.eye(p.size * p.dim))
        assert np.abs(out - np.eye(p.dim)).max() < 1e-10


def test_transition_expectation_model_projection(model):
    ops, p, th = model
    out = transition_expectation(p, th, np.kron(e(0, 0), np.eye(2)))
    assert np.abs(out - ops["gamma"][0]).max() < 1e-15


def test_transition_expectation_degenerate_partition(rng):
    u = rand_unitary(2, rng)
    th = Automorphism(u)
    a = np.array([[2.0 - 1j]])
    b = rng.normal(size=(2, 2))
    out = transition_expectation(Partition((np.eye(2),)), th, np.kron(a, b))
    assert np.abs(out - th(a[0, 0] * b)).max() < 1e-14


def test_transition_expectation_drops_off_diagonal_blocks(model):
    _, p, th = model
    assert np.abs(transition_expectation(p, th, np.kron(e(0, 1), np.eye(2)))).max() == 0


@pytest.mark.parametrize("kind", ["projective", "kraus"])
def test_transition_expectation_completely_positive(rng, kind):
    for _ in range(5):
        p = rand_projective_partition(2, rng) if kind == "projective" else rand_kraus_partition(2, 2, rng)
        th = Automorphism(rand_unitary(2, rng))
        choi = choi_matrix(lambda x: transition_expectation(p, th, x), p.size * p.dim)
        assert np.abs(choi - choi.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(choi).min() > -1e-10


def test_transition_expectation_dimension_check(model):
    _, p, th = model
    with pytest.raises(ValueError):
        transition_expectation(p, th, np.eye(3))


# --- one-mode Umegaki step -------------------------------------------------------------

def test_umegaki_identity(model):
    _, p, th = model
    assert np.abs(umegaki_step(p, th, np.eye(2), np.eye(2)) - np.eye(2)).max() < 1e-15


def test_umegaki_kills_odd_elements(model, rng):
    _, p, th = model
    mode = build_fock_system(1)
    b = rng.normal(size=(2, 2))
    for odd in (mode.annihilators[0], mode.creators[0], 0.3 * mode.annihilators[0] - 2j * mode.creators[0]):
        assert mode_weight(odd) == 0
        assert np.abs(umegaki_step(p, th, odd, b)).max() == 0


def test_umegaki_model_projection(model):
    ops, p, th = model
    g1 = ops["gamma"][0]
    assert np.abs(umegaki_step(p, th, np.eye(2), g1) - g1).max() < 1e-15


def test_mode_weight_is_half_trace_of_even_part(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    assert abs(mode_weight(a) - 0.5 * (a[0, 0] + a[1, 1])) < 1e-15
    with pytest.raises(ValueError):
        mode_weight(np.eye(3))


# --- chain states ------------------------------------------------------------------

def test_model_chain_state_one_step():
    s = two_level_scenario(0.3, horizon=1)
    car = chain_joint_state(s)
    assert np.abs(car.marginal - 0.5 * np.eye(2)).max() < 1e-15
    aow = chain_joint_state(two_level_scenario(0.3, horizon=1, variant="aow"))
    assert np.abs(aow.marginal - np.diag([0.3, 0.7])).max() < 1e-15


def test_singleton_partition_chain_state(rng):
    rho, u = rand_density(2, rng), rand_unitary(2, rng)
    s = Scenario(rho, Partition((np.eye(2),)), Automorphism(u), "car", 1)
    joint = chain_joint_state(s).joint
    assert abs(np.trace(joint) - 1) < 1e-14
    assert np.abs(joint - np.kron(0.5 * np.eye(2), rho)).max() < 1e-14


@pytest.mark.parametrize("variant", ["aow", "car"])
def test_random_chain_states_are_densities(rng, variant):
    for _ in range(5):
        p = rand_projective_partition(2, rng)
        s = Scenario(rand_density(2, rng), p, Automorphism(rand_unitary(2, rng)), variant, 3)
        cs = chain_joint_state(s)
        v = cs.violations()
        assert v == {"joint": [], "marginal": []}
        assert density_violations(cs.joint) == []
        assert density_violations(cs.marginal) == []


@pytest.mark.parametrize("variant", ["aow", "car"])
def test_marginal_is_trace_over_site(rng, variant):
    p = rand_kraus_partition(2, 2, rng)
    s = Scenario(rand_density(2, rng), p, Automorphism(rand_unitary(2, rng)), variant, 3)
    cs = chain_joint_state(s)
    keep = range(len(cs.factor_dims) - 1)
    assert np.abs(partial_trace(cs.joint, cs.factor_dims, keep) - cs.marginal).max() < 1e-14


def test_blockwise_violations_catch_bad_blocks():
    blocks = np.stack([np.diag([0.6, 0.0]), np.diag([0.5, -0.1])]).astype(complex)
    cs = ChainState(1, "aow", (2, 2), blocks)
    v = cs.violations()
    assert any("positive" in x for x in v["joint"])
    assert density_violations(cs.joint) != []


def test_chain_state_cap():
    s = two_level_scenario(0.3, horizon=12)
    s.cap = 1000
    with pytest.raises(EnumerationCapError):
        chain_joint_state(s)


def test_aow_marginal_is_kernel_diagonal(rng):
    s = Scenario(rand_density(3, rng), rand_projective_partition(3, rng), Automorphism(rand_unitary(3, rng)), "aow", 3)
    cs = chain_joint_state(s)
    table = kernel_table(s)
    words = list(itertools.product(range(1, 4), repeat=3))
    assert np.abs(cs.marginal_diagonal().real - [table.get(w) for w in words]).max() < 1e-14


# --- nested expectation compatibility ---------------------------------------------------

def _random_diagonals(rng, k, n):
    return [np.diag(rng.normal(size=k)).astype(complex) for _ in range(n)]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_nested_expectation_matches_stationary_aow_marginal(rng, n):
    u, rho = commuting_pair(2, rng)
    p = rand_projective_partition(2, rng)
    th = Automorphism(u)
    cs = chain_joint_state(Scenario(rho, p, th, "aow", n))
    ops = _random_diagonals(rng, 2, n)
    lhs = np.trace(cs.marginal @ kron_all(ops))
    assert abs(lhs - nested_expectation(p, th, rho, ops)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_nested_expectation_generates_car_ordered_kernel(rng, n):
    # without stationarity the recursion reproduces the th^n ... th^1 ordering
    rho, th = rand_density(2, rng), Automorphism(rand_unitary(2, rng))
    p = rand_kraus_partition(2, 2, rng)
    table = kernel_table(Scenario(rho, p, th, "car", n))
    ops = _random_diagonals(rng, 2, n)
    words = itertools.product(range(1, 3), repeat=n)
    direct = sum(np.prod([ops[t][w[t] - 1, w[t] - 1] for t in range(n)]) * table.get(w) for w in words)
    assert abs(direct - nested_expectation(p, th, rho, ops)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_nested_umegaki_matches_car_marginal(rng, n):
    rho, th = rand_density(2, rng), Automorphism(rand_unitary(2, rng))
    p = rand_projective_partition(2, rng)
    cs = chain_joint_state(Scenario(rho, p, th, "car", n))
    ops = _random_diagonals(rng, 2, n)
    lhs = np.trace(cs.marginal @ kron_all(ops[::-1]))
    assert abs(lhs - nested_umegaki(p, th, rho, ops)) < 1e-10
