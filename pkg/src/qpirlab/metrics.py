"""Classical and quantum information measures and the communication bound.

All logarithms are base 2, so entropies and relative entropies are in bits.
Fidelity follows the root convention F = tr sqrt(sqrt(rho) sigma sqrt(rho)),
so F**2 is the squared purification overlap that the Uhlmann routine
optimizes.  Relative entropy with a support failure returns the explicit
+inf sentinel instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .quantum import DensityMatrix

EIG_FLOOR = 1e-12
INF = float("inf")

ArrayLike = Union[DensityMatrix, np.ndarray]


@dataclass
class Distribution:
    """Probability vector; nonnegative and summing to 1 within 1e-9."""

    probabilities: np.ndarray

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=np.float64)
        if p.ndim != 1:
            raise DomainError("distribution must be a vector")
        if p.min() < -1e-9:
            raise DomainError("negative probability")
        if abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {p.sum()}")
        self.probabilities = np.clip(p, 0.0, None)

    def __len__(self):
        return len(self.probabilities)


@dataclass
class Ensemble:
    """Weighted collection of density matrices (adversary views per index)."""

    states: list
    weights: Distribution

    def __init__(self, states: Sequence[ArrayLike], weights=None):
        mats = [_mat(s) for s in states]
        if not mats:
            raise DomainError("ensemble must be nonempty")
        dim = mats[0].shape[0]
        if any(m.shape != (dim, dim) for m in mats):
            raise DimensionMismatchError("ensemble states differ in dimension")
        if weights is None:
            weights = Distribution(np.full(len(mats), 1.0 / len(mats)))
        elif not isinstance(weights, Distribution):
            weights = Distribution(weights)
        if len(weights) != len(mats):
            raise DimensionMismatchError("weights length does not match states")
        self.states = mats
        self.weights = weights

    def average_state(self) -> np.ndarray:
        return sum(w * s for w, s in zip(self.weights.probabilities, self.states))


@dataclass
class BoundReport:
    """Communication lower bound versus the measured cost, in qubits."""

    bound_value: float
    measured_cost: float
    satisfied: bool
    slack: float


def _mat(x: ArrayLike) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    return np.asarray(x, dtype=np.complex128)


def _check_density(m: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError("density matrix must be square")
    if np.max(np.abs(m - m.conj().T)) > 1e-7:
        raise DomainError("matrix not Hermitian")
    if np.linalg.eigvalsh(m).min() < -1e-7:
        raise DomainError("matrix not positive semidefinite")
    return m


# -- classical measures ------------------------------------------------------


def classical_relative_entropy(d1, d2) -> float:
    """S(d1 || d2) in bits; +inf when d2 lacks support where d1 has mass."""
    p = d1.probabilities if isinstance(d1, Distribution) else Distribution(d1).probabilities
    q = d2.probabilities if isinstance(d2, Distribution) else Distribution(d2).probabilities
    if len(p) != len(q):
        raise DimensionMismatchError("distributions differ in length")
    total = 0.0
    for pi, qi in zip(p, q):
        if pi <= EIG_FLOOR:
            continue
        if qi <= EIG_FLOOR:
            return INF
        total += pi * math.log2(pi / qi)
    return max(total, 0.0)


def total_variation_l1(d1, d2) -> float:
    p = d1.probabilities if isinstance(d1, Distribution) else np.asarray(d1, dtype=float)
    q = d2.probabilities if isinstance(d2, Distribution) else np.asarray(d2, dtype=float)
    return float(np.abs(p - q).sum())


def pinsker_check(d1, d2) -> tuple[float, float, bool]:
    """Classical Pinsker: S(d1||d2) >= ||d1-d2||_1^2 / (2 ln 2)."""
    lhs = classical_relative_entropy(d1, d2)
    rhs = total_variation_l1(d1, d2) ** 2 / (2.0 * math.log(2.0))
    return lhs, rhs, lhs >= rhs - 1e-9


def binary_entropy(delta: float) -> float:
    """H_bin(delta) in bits."""
    if delta < 0.0 or delta > 1.0:
        raise DomainError("binary entropy argument must be in [0, 1]")
    if delta in (0.0, 1.0):
        return 0.0
    return -delta * math.log2(delta) - (1.0 - delta) * math.log2(1.0 - delta)


def fano_bound(delta: float, n: int) -> float:
    """H_bin(delta) + delta * log2(n), the conditional-entropy ceiling."""
    if n < 2:
        raise DomainError("fano bound needs n >= 2")
    return binary_entropy(delta) + delta * math.log2(n)


# -- quantum measures --------------------------------------------------------


def von_neumann_entropy(rho: ArrayLike) -> float:
    """S(rho) = -tr(rho log2 rho) in bits."""
    m = _check_density(_mat(rho))
    vals = np.linalg.eigvalsh(m)
    vals = vals[vals > EIG_FLOOR]
    return float(max(-np.sum(vals * np.log2(vals)), 0.0))


def quantum_relative_entropy(rho: ArrayLike, sigma: ArrayLike) -> float:
    """S(rho || sigma) in bits; +inf if supp(rho) is not inside supp(sigma)."""
    r = _check_density(_mat(rho))
    s = _check_density(_mat(sigma))
    if r.shape != s.shape:
        raise DimensionMismatchError("dimension mismatch")
    s_vals, s_vecs = np.linalg.eigh(s)
    kernel = s_vecs[:, s_vals <= EIG_FLOOR]
    if kernel.shape[1] and np.max(np.abs(kernel.conj().T @ r @ kernel)) > 1e-10:
        return INF
    r_vals, r_vecs = np.linalg.eigh(r)
    tr_r_log_r = float(np.sum(r_vals[r_vals > EIG_FLOOR] * np.log2(r_vals[r_vals > EIG_FLOOR])))
    log_s = s_vecs @ np.diag([math.log2(v) if v > EIG_FLOOR else 0.0 for v in s_vals]) @ s_vecs.conj().T
    tr_r_log_s = float(np.real(np.trace(r @ log_s)))
    return max(tr_r_log_r - tr_r_log_s, 0.0)


def trace_norm(rho: ArrayLike, sigma: ArrayLike) -> float:
    """||rho - sigma||_1 (full Schatten-1 norm of the difference)."""
    diff = _mat(rho) - _mat(sigma)
    return float(np.abs(np.linalg.eigvalsh(diff)).sum())


def trace_distance(rho: ArrayLike, sigma: ArrayLike) -> float:
    """(1/2) ||rho - sigma||_1."""
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise DimensionMismatchError("dimension mismatch")
    return 0.5 * trace_norm(r, s)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho: ArrayLike, sigma: ArrayLike) -> float:
    """Root fidelity F = tr sqrt(sqrt(rho) sigma sqrt(rho))."""
    r = _check_density(_mat(rho))
    s = _check_density(_mat(sigma))
    if r.shape != s.shape:
        raise DimensionMismatchError("dimension mismatch")
    sr = _sqrtm_psd(r)
    inner = sr @ s @ sr
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sqrt(vals).sum())


def quantum_pinsker_check(rho: ArrayLike, sigma: ArrayLike) -> tuple[float, float, bool]:
    """Quantum Pinsker: ||rho - sigma||_1 <= sqrt(2 ln 2 * S(rho||sigma))."""
    l1 = trace_norm(rho, sigma)
    rel = quantum_relative_entropy(rho, sigma)
    bound = INF if rel == INF else math.sqrt(2.0 * math.log(2.0) * rel)
    return l1, bound, l1 <= bound + 1e-9


def holevo_quantity(ensemble: Ensemble) -> float:
    """S(sum_i w_i rho_i) - sum_i w_i S(rho_i), in bits."""
    avg = ensemble.average_state()
    mix = von_neumann_entropy(avg)
    cond = sum(
        w * von_neumann_entropy(s)
        for w, s in zip(ensemble.weights.probabilities, ensemble.states)
    )
    return max(mix - cond, 0.0)


# -- Uhlmann machinery -------------------------------------------------------


def _purification_matrix(psi) -> np.ndarray:
    """View a purification |psi> on system (x) ancilla as a sys-by-anc matrix."""
    amps = psi.amplitudes if hasattr(psi, "amplitudes") else np.asarray(psi, dtype=np.complex128)
    total = len(amps)
    dim = int(round(math.sqrt(total)))
    if dim * dim != total:
        raise DimensionMismatchError(
            "purification must live on system (x) ancilla of equal dimension"
        )
    return amps.reshape(dim, dim)


def uhlmann_unitary(psi, phi) -> tuple[np.ndarray, float]:
    """Ancilla unitary maximizing |<psi|(I (x) U)|phi>|, and the overlap^2.

    The overlap is computed from the SVD of the cross-overlap operator
    M = Psi^dagger Phi; its nuclear norm equals the root fidelity of the
    reduced system states, which the optimal U attains.
    """
    m_psi = _purification_matrix(psi)
    m_phi = _purification_matrix(phi)
    if m_psi.shape != m_phi.shape:
        raise DimensionMismatchError("purifications differ in dimension")
    cross = m_psi.conj().T @ m_phi
    w, sing, vh = np.linalg.svd(cross.T)
    u = (vh.conj().T) @ (w.conj().T)
    overlap = float(sing.sum())
    return u, overlap**2


def uhlmann_overlap_applied(psi, phi, u: np.ndarray) -> float:
    """|<psi|(I (x) U)|phi>|^2 for an explicit ancilla unitary (check oracle)."""
    m_psi = _purification_matrix(psi)
    m_phi = _purification_matrix(phi)
    rotated = m_phi @ u.T
    return float(abs(np.vdot(m_psi.reshape(-1), rotated.reshape(-1))) ** 2)


# -- the communication bound -------------------------------------------------


def communication_bound(
    ensemble: Ensemble,
    n: int,
    measured_cost: float = 0.0,
    *,
    aggregate: str = "max",
) -> BoundReport:
    """Lower bound C >= (1 - S(rho_adv || rho_prior)) * n, clamped at 0.

    rho_prior is the weighted average view.  The relative entropy is
    aggregated over target indices with `aggregate` in {"max", "average"};
    the worst index ("max") is the asserted form.  A support failure gives
    the +inf sentinel, which clamps the bound to 0.
    """
    if n < 1:
        raise DomainError("database size must be >= 1")
    if aggregate not in ("max", "average"):
        raise DomainError("aggregate must be 'max' or 'average'")
    prior = ensemble.average_state()
    rels = [quantum_relative_entropy(s, prior) for s in ensemble.states]
    if aggregate == "max":
        rel = max(rels)
    else:
        finite = [r for r in rels]
        rel = INF if any(r == INF for r in finite) else float(
            np.dot(ensemble.weights.probabilities, finite)
        )
    bound = 0.0 if rel == INF else max((1.0 - rel) * n, 0.0)
    satisfied = measured_cost >= bound - 1e-9
    return BoundReport(bound, measured_cost, satisfied, measured_cost - bound)


# -- random instances for property sweeps -------------------------------------


def random_density_matrix(dim: int, rng: np.random.Generator, *, rank: int | None = None) -> np.ndarray:
    """Haar-ish random density matrix via a Ginibre factor."""
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_distribution(dim: int, rng: np.random.Generator) -> Distribution:
    p = rng.random(dim) + 1e-12
    return Distribution(p / p.sum())
