"""Exact statevector and density-matrix simulation of small qubit systems.

States are dense complex vectors over named registers.  Qubit order is the
register declaration order, big-endian within a register, so the first
declared qubit is the most significant bit of the amplitude index.  All
operations are functional: they return new states and never mutate their
inputs.  Randomness always comes from an injected ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import (
    ArityError,
    DimensionMismatchError,
    DomainError,
    ResourceLimitError,
    UnknownLabelError,
)

ATOL = 1e-9
DEFAULT_QUBIT_CAP = 24

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")


@dataclass(frozen=True, order=True)
class QubitLabel:
    """One qubit, addressed as (register name, index within register)."""

    register: str
    index: int

    def __post_init__(self):
        if not self.register:
            raise DomainError("register name must be nonempty")
        if self.index < 0:
            raise DomainError("qubit index must be nonnegative")

    def __repr__(self):
        return f"{self.register}[{self.index}]"


class StateVector:
    """Normalized pure state over an ordered list of labeled qubits."""

    def __init__(self, labels: Sequence[QubitLabel], amplitudes: np.ndarray):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise DomainError("duplicate qubit labels")
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape != (2 ** len(labels),):
            raise DimensionMismatchError(
                f"need {2 ** len(labels)} amplitudes, got {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-6:
            raise DomainError(f"state not normalized: |amps| = {norm}")
        self.labels = labels
        self.amplitudes = amps

    @classmethod
    def _trusted(cls, labels: tuple, amplitudes: np.ndarray) -> "StateVector":
        # internal constructor for norm-preserving paths; skips validation
        obj = cls.__new__(cls)
        obj.labels = labels
        obj.amplitudes = amplitudes
        return obj

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    def registers(self) -> dict[str, list[QubitLabel]]:
        regs: dict[str, list[QubitLabel]] = {}
        for lab in self.labels:
            regs.setdefault(lab.register, []).append(lab)
        return regs

    def register_labels(self, register: str) -> list[QubitLabel]:
        labs = [lab for lab in self.labels if lab.register == register]
        if not labs:
            raise UnknownLabelError(f"no register named {register!r}")
        return sorted(labs, key=lambda l: l.index)

    def positions(self, labels: Iterable[QubitLabel]) -> list[int]:
        index = {lab: i for i, lab in enumerate(self.labels)}
        try:
            return [index[lab] for lab in labels]
        except KeyError as exc:
            raise UnknownLabelError(f"unknown qubit label {exc.args[0]!r}") from exc

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probability_of(self, register: str, value: int) -> float:
        """Born probability of reading `value` from `register`."""
        positions = self.positions(self.register_labels(register))
        probs = _register_probabilities(self.amplitudes, self.num_qubits, positions)
        return float(probs[value])

    def to_density_matrix(self) -> "DensityMatrix":
        amps = self.amplitudes
        return DensityMatrix(self.labels, np.outer(amps, amps.conj()))

    def copy(self) -> "StateVector":
        return StateVector(self.labels, self.amplitudes.copy())


class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix over labeled qubits."""

    def __init__(self, labels: Sequence[QubitLabel], matrix: np.ndarray, *, validate: bool = True):
        labels = tuple(labels)
        mat = np.asarray(matrix, dtype=np.complex128)
        dim = 2 ** len(labels)
        if mat.shape != (dim, dim):
            raise DimensionMismatchError(f"need {dim}x{dim} matrix, got {mat.shape}")
        if validate:
            if np.max(np.abs(mat - mat.conj().T)) > 1e-7:
                raise DomainError("density matrix not Hermitian")
            if abs(np.trace(mat).real - 1.0) > 1e-7:
                raise DomainError(f"trace is {np.trace(mat).real}, expected 1")
            if np.linalg.eigvalsh(mat).min() < -1e-7:
                raise DomainError("density matrix not positive semidefinite")
        self.labels = labels
        self.matrix = mat

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass
class MeasurementOutcome:
    """Result of a projective measurement: outcome, its probability, post state."""

    value: str
    probability: float
    post_state: StateVector

    @property
    def value_int(self) -> int:
        if self.value in BELL_LABELS:
            raise DomainError("Bell outcome has no integer value")
        return int(self.value, 2)


# -- gate matrices ----------------------------------------------------------

_SQ2 = 1.0 / math.sqrt(2.0)

GATE_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128)
GATE_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
GATE_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
GATE_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
GATE_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)

_FIXED_GATES = {"H": GATE_H, "X": GATE_X, "Z": GATE_Z, "CNOT": GATE_CNOT, "CZ": GATE_CZ}


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(np.complex128)


def modular_phase_unitary(m: int) -> np.ndarray:
    """U|x> = exp(2*pi*i*x/N)|x> on an m-qubit register, N = 2^m."""
    n = 2**m
    return np.diag(np.exp(2j * np.pi * np.arange(n) / n))


# -- state construction -----------------------------------------------------


def new_state(
    registers: Sequence[tuple[str, int]], *, cap: int = DEFAULT_QUBIT_CAP
) -> StateVector:
    """All-zeros state over the declared registers.

    `registers` is an ordered list of (name, qubit_count); the order fixes
    the global qubit order.  Raises ResourceLimitError above the qubit cap.
    """
    labels: list[QubitLabel] = []
    seen = set()
    for name, count in registers:
        if name in seen:
            raise DomainError(f"register {name!r} declared twice")
        seen.add(name)
        if count < 1:
            raise DomainError(f"register {name!r} must have at least one qubit")
        labels.extend(QubitLabel(name, i) for i in range(count))
    total = len(labels)
    if total > cap:
        raise ResourceLimitError(f"{total} qubits exceeds cap of {cap}")
    amps = np.zeros(2**total, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(labels, amps)


def tensor(a: StateVector, b: StateVector, *, cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Tensor product; `a`'s qubits become the most significant block."""
    if set(a.labels) & set(b.labels):
        raise DomainError("label collision in tensor product")
    if a.num_qubits + b.num_qubits > cap:
        raise ResourceLimitError("tensor product exceeds qubit cap")
    return StateVector(a.labels + b.labels, np.kron(a.amplitudes, b.amplitudes))


# -- unitary application ----------------------------------------------------


def _apply_unitary(amps: np.ndarray, n: int, positions: Sequence[int], u: np.ndarray) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to the qubits at `positions` (MSB first)."""
    k = len(positions)
    if u.shape != (2**k, 2**k):
        raise ArityError(f"gate of dim {u.shape} on {k} qubits")
    if k == n and list(positions) == list(range(n)):
        return u @ amps
    psi = amps.reshape([2] * n)
    rest = [i for i in range(n) if i not in positions]
    perm = list(positions) + rest
    psi = psi.transpose(perm).reshape(2**k, -1)
    psi = u @ psi
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    return psi.reshape([2] * n).transpose(inv).reshape(-1)


def apply_gate(
    state: StateVector,
    gate: Union[str, np.ndarray],
    targets: Sequence[QubitLabel],
    *,
    phi: float | None = None,
) -> StateVector:
    """Apply a named gate (H, X, Z, CNOT, CZ, PHASE) or explicit matrix.

    Targets are given MSB-first; for CNOT the first target is the control.
    PHASE requires the `phi` angle.  Norm is preserved to 1e-9.
    """
    if isinstance(gate, str):
        name = gate.upper()
        if name == "PHASE":
            if phi is None:
                raise ArityError("PHASE gate needs phi")
            u = phase_gate(phi)
        elif name in _FIXED_GATES:
            u = _FIXED_GATES[name]
        else:
            raise DomainError(f"unknown gate {gate!r}")
    else:
        u = np.asarray(gate, dtype=np.complex128)
    positions = state.positions(targets)
    if len(set(positions)) != len(positions):
        raise ArityError("repeated target qubit")
    if u.shape != (2 ** len(positions), 2 ** len(positions)):
        raise ArityError(
            f"gate dimension {u.shape} does not match {len(positions)} targets"
        )
    amps = _apply_unitary(state.amplitudes, state.num_qubits, positions, u)
    return StateVector._trusted(state.labels, amps)


def apply_to_register(state: StateVector, gate: Union[str, np.ndarray], register: str) -> StateVector:
    """Apply a single-qubit gate to every qubit of a register."""
    for lab in state.register_labels(register):
        state = apply_gate(state, gate, [lab])
    return state


def apply_controlled_power(
    state: StateVector,
    u: np.ndarray,
    control_register: str,
    target_register: str,
) -> StateVector:
    """Apply sum_j |j><j| (x) U^j, controlled on the value of a register.

    Realizes the controlled phase step of the two-server protocol, where
    U|x> = exp(2*pi*i*x/N)|x>; any unitary on the target register works.
    """
    ctrl = state.register_labels(control_register)
    targ = state.register_labels(target_register)
    dim_c = 2 ** len(ctrl)
    dim_t = 2 ** len(targ)
    if u.shape != (dim_t, dim_t):
        raise ArityError("U dimension does not match target register")
    block = np.zeros((dim_c * dim_t, dim_c * dim_t), dtype=np.complex128)
    power = np.eye(dim_t, dtype=np.complex128)
    for j in range(dim_c):
        block[j * dim_t : (j + 1) * dim_t, j * dim_t : (j + 1) * dim_t] = power
        power = u @ power
    return apply_gate(state, block, ctrl + targ)


def apply_xor_function(
    state: StateVector,
    input_registers: Sequence[str],
    output_register: str,
    fn: Callable[..., int],
) -> StateVector:
    """Reversible classical step |in>|out> -> |in>|out XOR fn(*in)>.

    `fn` takes one integer per input register (big-endian values) and must
    return a value that fits in the output register.  Self-inverse, so the
    same call uncomputes.
    """
    n = state.num_qubits
    in_positions = [state.positions(state.register_labels(r)) for r in input_registers]
    out_positions = state.positions(state.register_labels(output_register))
    m_out = len(out_positions)
    idx = np.arange(2**n, dtype=np.int64)

    values = []
    for pos in in_positions:
        val = np.zeros_like(idx)
        for b, p in enumerate(pos):
            val |= ((idx >> (n - 1 - p)) & 1) << (len(pos) - 1 - b)
        values.append(val)

    # tabulate fn over the joint input space to evaluate it vectorized
    in_bits = [len(p) for p in in_positions]
    table_size = 1 << sum(in_bits)
    table = np.zeros(table_size, dtype=np.int64)
    for joint in range(table_size):
        args, rem = [], joint
        for bits in reversed(in_bits):
            args.append(rem & ((1 << bits) - 1))
            rem >>= bits
        args.reverse()
        out = int(fn(*args))
        if out < 0 or out >= (1 << m_out):
            raise DomainError("fn output does not fit output register")
        table[joint] = out
    joint_val = np.zeros_like(idx)
    for val, bits in zip(values, in_bits):
        joint_val = (joint_val << bits) | val
    fn_vals = table[joint_val]

    flip = np.zeros_like(idx)
    for b, p in enumerate(out_positions):
        flip |= ((fn_vals >> (m_out - 1 - b)) & 1) << (n - 1 - p)
    new_amps = np.empty_like(state.amplitudes)
    new_amps[idx ^ flip] = state.amplitudes
    return StateVector._trusted(state.labels, new_amps)


# -- Fourier transforms -----------------------------------------------------


def _dft_matrix(m: int, sign: int) -> np.ndarray:
    n = 2**m
    j, x = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(sign * 2j * np.pi * j * x / n) / math.sqrt(n)


def apply_qft(state: StateVector, register: str) -> StateVector:
    """QFT on a register: |x> -> (1/sqrt(N)) sum_j exp(2*pi*i*x*j/N)|j>."""
    labs = state.register_labels(register)
    return apply_gate(state, _dft_matrix(len(labs), +1), labs)


def apply_inverse_qft(state: StateVector, register: str) -> StateVector:
    """Inverse QFT; composed with apply_qft gives the identity."""
    labs = state.register_labels(register)
    return apply_gate(state, _dft_matrix(len(labs), -1), labs)


# -- measurement ------------------------------------------------------------


def _register_probabilities(amps: np.ndarray, n: int, positions: Sequence[int]) -> np.ndarray:
    psi = amps.reshape([2] * n)
    rest = [i for i in range(n) if i not in positions]
    perm = list(positions) + rest
    block = psi.transpose(perm).reshape(2 ** len(positions), -1)
    return np.sum(np.abs(block) ** 2, axis=1)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    edges = np.cumsum(probs)
    return int(np.searchsorted(edges, rng.random() * edges[-1], side="right"))


def _project_register(
    state: StateVector, positions: Sequence[int], value: int, probability: float
) -> StateVector:
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    rest = [i for i in range(n) if i not in positions]
    perm = list(positions) + rest
    block = psi.transpose(perm).reshape(2 ** len(positions), -1).copy()
    keep = block[value] / math.sqrt(probability)
    block[:] = 0
    block[value] = keep
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    amps = block.reshape([2] * n).transpose(inv).reshape(-1)
    return StateVector._trusted(state.labels, amps)


def measure_computational(
    state: StateVector, register: str, rng: np.random.Generator
) -> MeasurementOutcome:
    """Born-rule measurement of a register in the computational basis."""
    labs = state.register_labels(register)
    positions = state.positions(labs)
    probs = _register_probabilities(state.amplitudes, state.num_qubits, positions)
    value = _sample(probs, rng)
    p = float(probs[value])
    post = _project_register(state, positions, value, p)
    return MeasurementOutcome(format(value, f"0{len(labs)}b"), p, post)


def measure_bell(
    state: StateVector, pair: tuple[QubitLabel, QubitLabel], rng: np.random.Generator
) -> MeasurementOutcome:
    """Measure two qubits in the Bell basis.

    Implemented by rotating the Bell basis onto the computational one with
    CNOT then H, measuring, and rotating the collapsed state back.  Outcome
    labels: phi+ phi- psi+ psi- .
    """
    a, b = pair
    if a == b:
        raise ArityError("Bell measurement needs two distinct qubits")
    rotated = apply_gate(apply_gate(state, "CNOT", [a, b]), "H", [a])
    positions = rotated.positions([a, b])
    probs = _register_probabilities(rotated.amplitudes, rotated.num_qubits, positions)
    value = _sample(probs, rng)
    p = float(probs[value])
    post = _project_register(rotated, positions, value, p)
    post = apply_gate(apply_gate(post, "H", [a]), "CNOT", [a, b])
    # bit pattern (sign, parity) -> label: 00 phi+, 10 phi-, 01 psi+, 11 psi-
    label = {0: "phi+", 2: "phi-", 1: "psi+", 3: "psi-"}[value]
    return MeasurementOutcome(label, p, post)


def rotated_basis(theta: float) -> np.ndarray:
    """Columns are the rotated basis vectors.

    Bit 0 corresponds to cos(theta/2)|0> + sin(theta/2)|1>, bit 1 to
    -sin(theta/2)|0> + cos(theta/2)|1>.
    """
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def measure_rotated(
    state: StateVector, qubit: QubitLabel, theta: float, rng: np.random.Generator
) -> MeasurementOutcome:
    """Born-rule measurement of one qubit in the theta-rotated basis.

    Single pass: project onto the rotated basis vectors, sample, and build
    the collapsed state back in the computational frame.
    """
    pos = state.positions([qubit])[0]
    n = state.num_qubits
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    psi = np.moveaxis(state.amplitudes.reshape([2] * n), pos, 0).reshape(2, -1)
    comp0 = c * psi[0] + s * psi[1]  # <v0 | psi>
    comp1 = -s * psi[0] + c * psi[1]
    p0 = float(np.real(np.vdot(comp0, comp0)))
    p1 = float(np.real(np.vdot(comp1, comp1)))
    total = p0 + p1
    if rng.random() * total < p0:
        value, p = 0, p0
        weight = comp0 / math.sqrt(p0)
        new = np.stack([c * weight, s * weight])
    else:
        value, p = 1, p1
        weight = comp1 / math.sqrt(p1)
        new = np.stack([-s * weight, c * weight])
    amps = np.moveaxis(new.reshape([2] * n), 0, pos).reshape(-1)
    return MeasurementOutcome(str(value), p, StateVector._trusted(state.labels, amps))


# -- reductions -------------------------------------------------------------


def partial_trace(
    state: Union[StateVector, DensityMatrix], keep: Sequence[str]
) -> DensityMatrix:
    """Reduced density matrix over the kept registers (in state order)."""
    if not keep:
        raise DomainError("keep set must be nonempty")
    keep = list(keep)
    if isinstance(state, StateVector):
        labels = state.labels
        keep_labels = [lab for lab in labels if lab.register in keep]
        missing = set(keep) - {lab.register for lab in labels}
        if missing:
            raise UnknownLabelError(f"no register named {missing.pop()!r}")
        positions = state.positions(keep_labels)
        n = state.num_qubits
        rest = [i for i in range(n) if i not in positions]
        psi = state.amplitudes.reshape([2] * n)
        block = psi.transpose(positions + rest).reshape(2 ** len(positions), -1)
        rho = block @ block.conj().T
        return DensityMatrix(keep_labels, rho)
    labels = state.labels
    keep_labels = [lab for lab in labels if lab.register in keep]
    missing = set(keep) - {lab.register for lab in labels}
    if missing:
        raise UnknownLabelError(f"no register named {missing.pop()!r}")
    n = len(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    positions = [index[lab] for lab in keep_labels]
    rest = [i for i in range(n) if i not in positions]
    rho = state.matrix.reshape([2] * (2 * n))
    perm = positions + rest + [n + p for p in positions] + [n + r for r in rest]
    rho = rho.transpose(perm).reshape(
        2 ** len(positions), 2 ** len(rest), 2 ** len(positions), 2 ** len(rest)
    )
    reduced = np.einsum("arbr->ab", rho)
    return DensityMatrix(keep_labels, reduced)


def purify(rho: DensityMatrix, *, ancilla_register: str = "anc") -> StateVector:
    """Pure state on a doubled space whose ancilla trace recovers rho.

    Uses the eigendecomposition with eigenvalues in descending order, so
    diag(0.7, 0.3) purifies to sqrt(0.7)|00> + sqrt(0.3)|11>.
    """
    vals, vecs = np.linalg.eigh(rho.matrix)
    if vals.min() < -1e-7:
        raise DomainError("cannot purify a non-PSD matrix")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    vals = np.clip(vals, 0.0, None)
    dim = rho.dim
    amps = np.zeros(dim * dim, dtype=np.complex128)
    for k in range(dim):
        if vals[k] <= 0.0:
            continue
        amps += math.sqrt(vals[k]) * np.kron(vecs[:, k], _basis_vec(dim, k))
    if {lab.register for lab in rho.labels} & {ancilla_register}:
        raise DomainError(f"ancilla register name {ancilla_register!r} collides")
    anc = [QubitLabel(ancilla_register, i) for i in range(rho.num_qubits)]
    return StateVector(tuple(rho.labels) + tuple(anc), amps)


def _basis_vec(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[k] = 1.0
    return v


def bell_pair_state(label_a: QubitLabel, label_b: QubitLabel) -> StateVector:
    """|phi+> on two fresh labels."""
    amps = np.array([_SQ2, 0.0, 0.0, _SQ2], dtype=np.complex128)
    return StateVector((label_a, label_b), amps)
