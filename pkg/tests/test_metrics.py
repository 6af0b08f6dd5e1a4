"""Information measures, Pinsker/Uhlmann sweeps, and the communication bound."""

import math

import numpy as np
import pytest

from qpirlab.errors import DimensionMismatchError, DomainError
from qpirlab.metrics import (
    Distribution,
    Ensemble,
    binary_entropy,
    classical_relative_entropy,
    fano_bound,
    fidelity,
    holevo_quantity,
    pinsker_check,
    quantum_pinsker_check,
    quantum_relative_entropy,
    random_density_matrix,
    random_distribution,
    communication_bound,
    trace_distance,
    trace_norm,
    uhlmann_overlap_applied,
    uhlmann_unitary,
    von_neumann_entropy,
)

INF = float("inf")
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)
MIXED = np.eye(2, dtype=complex) / 2


def test_relative_entropy_identical():
    assert classical_relative_entropy([1, 0], [1, 0]) == 0.0


def test_relative_entropy_point_vs_uniform():
    # direct formula: 1 * log2(1 / 0.5) = 1 bit
    assert classical_relative_entropy([1, 0], [0.5, 0.5]) == pytest.approx(1.0)


def test_relative_entropy_support_failure_is_inf():
    assert classical_relative_entropy([0.5, 0.5], [0, 1]) == INF


def test_relative_entropy_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        classical_relative_entropy([1, 0], [1, 0, 0])


def test_pinsker_identical():
    lhs, rhs, holds = pinsker_check([0.5, 0.5], [0.5, 0.5])
    assert lhs == 0.0 and rhs == 0.0 and holds


def test_pinsker_point_vs_uniform():
    lhs, rhs, holds = pinsker_check([1, 0], [0.5, 0.5])
    assert lhs == pytest.approx(1.0)
    assert rhs == pytest.approx(1.0 / (2 * math.log(2)))
    assert holds


def test_pinsker_random_sweep():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        dim = int(rng.integers(2, 17))
        d1 = random_distribution(dim, rng)
        d2 = random_distribution(dim, rng)
        lhs, rhs, holds = pinsker_check(d1, d2)
        assert holds, (lhs, rhs)


def test_entropy_of_maximally_mixed():
    assert von_neumann_entropy(MIXED) == pytest.approx(1.0)


def test_entropy_nonnegative_sweep():
    rng = np.random.default_rng(1)
    for _ in range(200):
        rho = random_density_matrix(int(rng.integers(2, 9)), rng)
        assert von_neumann_entropy(rho) >= -1e-9


def test_trace_distance_zero_vs_plus():
    # eigenvalues of |0><0| - |+><+| are +-1/sqrt(2)
    eig = np.linalg.eigvalsh(KET0 - PLUS)
    assert np.allclose(np.abs(eig), 1 / math.sqrt(2))
    assert trace_distance(KET0, PLUS) == pytest.approx(1 / math.sqrt(2))


def test_fidelity_of_identical_state():
    rho = random_density_matrix(4, np.random.default_rng(3))
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)


def test_quantum_pinsker_identical():
    l1, bound, holds = quantum_pinsker_check(MIXED, MIXED)
    assert l1 == pytest.approx(0.0, abs=1e-12)
    assert bound == pytest.approx(0.0, abs=1e-9)
    assert holds


def test_quantum_pinsker_pure_vs_mixed():
    l1, bound, holds = quantum_pinsker_check(KET0, MIXED)
    assert l1 == pytest.approx(1.0)
    assert bound == pytest.approx(math.sqrt(2 * math.log(2)))
    assert holds


def test_quantum_pinsker_random_sweep():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        dim = int(rng.integers(2, 9))
        rho = random_density_matrix(dim, rng)
        sigma = random_density_matrix(dim, rng)
        l1, bound, holds = quantum_pinsker_check(rho, sigma)
        assert holds, (l1, bound)


def test_quantum_relative_entropy_support_sentinel():
    singular = np.diag([1.0, 0.0]).astype(complex)
    assert quantum_relative_entropy(MIXED, singular) == INF
    # a zero-weight outlier makes the prior lose the outlier's support;
    # the bound clamps the sentinel instead of failing
    report = communication_bound(Ensemble([KET1, KET0], weights=[0.0, 1.0]), 2)
    assert report.bound_value == 0.0
    assert report.satisfied


def _canonical_purification(rho: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    root = (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T
    return root.reshape(-1)


def test_uhlmann_identical_purifications():
    rho = random_density_matrix(4, np.random.default_rng(5))
    psi = _canonical_purification(rho)
    _, overlap_sq = uhlmann_unitary(psi, psi)
    assert overlap_sq == pytest.approx(1.0, abs=1e-9)


def test_uhlmann_recovers_ancilla_swap():
    # two purifications of I/2 differing by an ancilla bit flip
    psi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    phi = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
    u, overlap_sq = uhlmann_unitary(psi, phi)
    assert overlap_sq == pytest.approx(1.0, abs=1e-9)
    assert uhlmann_overlap_applied(psi, phi, u) == pytest.approx(1.0, abs=1e-9)


def test_uhlmann_matches_root_fidelity_and_lemma_bound():
    # close pairs (mixtures) keep the relative entropy inside the regime
    # where the purification-overlap bound applies
    rng = np.random.default_rng(11)
    checked_lemma = 0
    for _ in range(400):
        dim = 4
        rho = random_density_matrix(dim, rng)
        t = rng.uniform(0.0, 0.4)
        sigma = (1 - t) * rho + t * random_density_matrix(dim, rng)
        psi = _canonical_purification(rho)
        phi = _canonical_purification(sigma)
        u, overlap_sq = uhlmann_unitary(psi, phi)
        fid = fidelity(rho, sigma)
        assert overlap_sq == pytest.approx(fid**2, abs=1e-6)
        # the SVD optimum is attained by the returned unitary
        assert uhlmann_overlap_applied(psi, phi, u) == pytest.approx(overlap_sq, abs=1e-9)
        rel = quantum_relative_entropy(rho, sigma)
        if rel <= 0.5:
            checked_lemma += 1
            assert overlap_sq >= 1.0 - math.sqrt(math.log(2) * rel / 2.0) - 1e-6
    assert checked_lemma > 100


def test_holevo_identical_states():
    rho = random_density_matrix(2, np.random.default_rng(0))
    assert holevo_quantity(Ensemble([rho, rho.copy()])) == pytest.approx(0.0, abs=1e-9)


def test_holevo_classical_bit():
    assert holevo_quantity(Ensemble([KET0, KET1])) == pytest.approx(1.0)


def test_holevo_zero_plus_ensemble():
    # oracle: eigenvalues of (|0><0| + |+><+|)/2 are cos^2(pi/8), sin^2(pi/8)
    c2 = math.cos(math.pi / 8) ** 2
    s2 = math.sin(math.pi / 8) ** 2
    expected = -c2 * math.log2(c2) - s2 * math.log2(s2)
    assert expected == pytest.approx(0.6009, abs=5e-4)
    assert holevo_quantity(Ensemble([KET0, PLUS])) == pytest.approx(expected, abs=1e-9)


def test_holevo_nonnegative_sweep():
    rng = np.random.default_rng(13)
    for _ in range(200):
        dim = int(rng.integers(2, 5))
        states = [random_density_matrix(dim, rng) for _ in range(3)]
        assert holevo_quantity(Ensemble(states)) >= -1e-9


def test_binary_entropy_values():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    with pytest.raises(DomainError):
        binary_entropy(1.5)


def test_fano_bound_value():
    assert fano_bound(0.11, 4) == pytest.approx(binary_entropy(0.11) + 0.22)
    assert fano_bound(0.11, 4) == pytest.approx(0.7199, abs=2e-4)
    with pytest.raises(DomainError):
        fano_bound(0.1, 1)


def test_communication_bound_index_independent_view():
    n = 8
    view = random_density_matrix(4, np.random.default_rng(2))
    report = communication_bound(Ensemble([view.copy() for _ in range(n)]), n)
    assert report.bound_value == pytest.approx(float(n), abs=1e-9)
    assert not report.satisfied  # zero measured cost cannot meet the bound
    assert report.slack == pytest.approx(-float(n), abs=1e-9)


def test_communication_bound_orthogonal_views_clamp_to_zero():
    report = communication_bound(Ensemble([KET0, KET1]), 2, measured_cost=0.0)
    assert report.bound_value == 0.0
    assert report.satisfied


def test_communication_bound_average_aggregate():
    report = communication_bound(Ensemble([KET0, KET0.copy()]), 2, aggregate="average")
    assert report.bound_value == pytest.approx(2.0)
    with pytest.raises(DomainError):
        communication_bound(Ensemble([KET0]), 2, aggregate="median")


def test_distribution_validation():
    with pytest.raises(DomainError):
        Distribution([0.5, 0.6])
    with pytest.raises(DomainError):
        Distribution([-0.1, 1.1])


def test_ensemble_dimension_checks():
    with pytest.raises(DimensionMismatchError):
        Ensemble([KET0, np.eye(4) / 4])
    with pytest.raises(DimensionMismatchError):
        Ensemble([KET0, KET1], weights=[1.0])
