"""Two-server phase-encoded retrieval and the 2^d-server cube scheme.

Both schemes split the target index into subset queries whose single-server
marginals are uniform.  The two-server variant carries the answer in the
phase of an entangled register pair and detects bit-flip tampering of the
relayed register through the client's CNOT-and-measure check; the cube
scheme is purely classical on the server side.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .errors import DomainError
from .quantum import modular_phase_unitary
from .runtime import ProtocolContext, ViewSample, honest, run_protocol

# -- subset queries -----------------------------------------------------------


def subset_toggle(subset: frozenset[int], i: int) -> frozenset[int]:
    """Q (+) i: flip membership of the target index."""
    return subset - {i} if i in subset else subset | {i}


def gen_two_server_query(ell: int, i: int, rng: np.random.Generator
                         ) -> tuple[frozenset[int], frozenset[int]]:
    """Uniform subset Q of range(ell) together with Q' = Q (+) i."""
    if not 0 <= i < ell:
        raise DomainError("target index out of range")
    q = frozenset(j for j in range(ell) if rng.integers(0, 2))
    return q, subset_toggle(q, i)


def subset_mask(subset: frozenset[int], ell: int) -> int:
    """Wire encoding: little-endian bitmask, bit j set iff j is a member."""
    mask = 0
    for j in subset:
        mask |= 1 << j
    return mask


def subset_parity(database: Sequence[int], subset: frozenset[int]) -> int:
    """Bitwise XOR of blocks with indices in the subset; empty subset -> 0."""
    out = 0
    for j in subset:
        out ^= int(database[j])
    return out


# -- two-server phase protocol ---------------------------------------------------


@dataclass
class TwoServerProtocol:
    """Phase-encoded two-server retrieval.

    variant "per_bit_z" runs one single-qubit instance per block bit, for
    which phase addition is literally XOR; "qft_modN" runs one m-qubit
    instance whose decoded value is (x_Q + x_Q') mod 2^m, exhibiting the
    carry mismatch with XOR for m > 1.
    """

    block_bits: int = 1
    variant: str = "per_bit_z"
    name: str = "two_server"

    def run(self, ctx: ProtocolContext, database: Sequence[int], index: int):
        ell = len(database)
        if not 0 <= index < ell:
            raise DomainError("target index out of range")
        if self.variant not in ("per_bit_z", "qft_modN"):
            raise DomainError(f"unknown variant {self.variant!r}")
        q, q_prime = gen_two_server_query(ell, index, ctx.rng)
        ctx.send_classical("client", "server1", subset_mask(q, ell), ell)
        ctx.send_classical("client", "server2", subset_mask(q_prime, ell), ell)
        ctx.next_round()
        x_q = subset_parity(database, q)
        x_qp = subset_parity(database, q_prime)
        if self.variant == "per_bit_z":
            bits = [
                self._run_phase_instance(ctx, f"bit{p}", (x_q >> p) & 1, (x_qp >> p) & 1, 1)
                for p in reversed(range(self.block_bits))
            ]
            value = 0
            for b in bits:
                value = (value << 1) | b
            return value
        return self._run_phase_instance(ctx, "blk", x_q, x_qp, self.block_bits)

    def _run_phase_instance(self, ctx: ProtocolContext, tag: str,
                            x_q: int, x_qp: int, m: int) -> int:
        from .quantum import apply_controlled_power, apply_inverse_qft, apply_qft

        substitute = ctx.adversary.wants("substitute_t")
        owners = [("server1", f"c_{tag}", m), ("server1", f"t_{tag}", m),
                  ("server2", f"s_{tag}", m)]
        if substitute:
            owners.append(("server2", f"u_{tag}", m))
        joint = ctx.new_joint_state(tag, owners)
        c, t, s = f"c_{tag}", f"t_{tag}", f"s_{tag}"
        # server 1 phase-encodes x_Q on c and copies the index basis onto t
        for b, lab in enumerate(joint.register(c)):
            if (x_q >> (m - 1 - b)) & 1:
                joint.apply("server1", "X", [lab])
        joint.state = apply_qft(joint.state, c)
        joint.xor_function("server1", [c], t, lambda v: v)
        ctx.send_qubits(joint, "server1", "server2", joint.register(t))
        ctx.next_round()
        # server 2 imprints x_Q' through the controlled phase power
        for b, lab in enumerate(joint.register(s)):
            if (x_qp >> (m - 1 - b)) & 1:
                joint.apply("server2", "X", [lab])
        joint.state = apply_controlled_power(joint.state, modular_phase_unitary(m), t, s)
        if ctx.adversary.wants("z_tamper"):
            joint.apply("server2", "Z", [joint.register(t)[-1]])
        if ctx.adversary.wants("x_tamper"):
            joint.apply("server2", "X", [joint.register(t)[-1]])
        relay = t
        if substitute:
            relay = f"u_{tag}"  # genuine register stays behind, blanks go out
        ctx.send_qubits(joint, "server2", "client", joint.register(relay))
        ctx.send_qubits(joint, "server1", "client", joint.register(c))
        ctx.next_round()
        # reconstruction: uncompute the relay register, verify all-zero, decode c
        joint.xor_function("client", [c], relay, lambda v: v)
        check = joint.measure("client", relay)
        if check.value_int != 0:
            ctx.abort("t_register_check")
        joint.state = apply_inverse_qft(joint.state, c)
        out = joint.measure("client", c)
        return out.value_int


def two_server_success_probability(database: Sequence[int], index: int,
                                   *, block_bits: int = 1, seed: int = 0) -> float:
    """Exact honest-run success: per_bit_z decodes x_i with certainty."""
    protocol = TwoServerProtocol(block_bits=block_bits)
    result = run_protocol(protocol, database, index, honest(), seed)
    if result.aborted:
        return 0.0
    return 1.0 if result.value == int(database[index]) else 0.0


def two_server_transit_view(database: Sequence[int], index: int, trial: int,
                            *, ell: int | None = None) -> ViewSample:
    """Server 1's view: the subset it receives (classical only)."""
    ell = ell if ell is not None else len(database)
    rng = np.random.default_rng([trial, index])
    q, _ = gen_two_server_query(ell, index, rng)
    return ViewSample(classical=subset_mask(q, ell), quantum=[])


def enumerate_two_server_views(ell: int, index: int, server: int) -> list[int]:
    """All subset masks a given server can see, over exhaustive Q choices."""
    masks = []
    for bits in product((0, 1), repeat=ell):
        q = frozenset(j for j in range(ell) if bits[j])
        qp = subset_toggle(q, index)
        masks.append(subset_mask(q if server == 1 else qp, ell))
    return masks


# -- cube scheme -------------------------------------------------------------------


@dataclass
class CubeQuery:
    d: int
    ell: int
    base_subsets: tuple[frozenset[int], ...]
    index: tuple[int, ...]

    def subsets_for(self, sigma: str) -> tuple[frozenset[int], ...]:
        if len(sigma) != self.d or any(ch not in "01" for ch in sigma):
            raise DomainError(f"server label {sigma!r} is not a {self.d}-bit string")
        out = []
        for t, bit in enumerate(sigma):
            q0 = self.base_subsets[t]
            out.append(q0 if bit == "0" else subset_toggle(q0, self.index[t]))
        return tuple(out)


def gen_cube_query(ell: int, d: int, index: Sequence[int], rng: np.random.Generator,
                   *, base_subsets: Sequence[frozenset[int]] | None = None) -> CubeQuery:
    """Base subsets Q_t^0 uniform over range(ell); Q_t^1 follows by toggling."""
    index = tuple(int(i) for i in index)
    if len(index) != d:
        raise DomainError(f"index must have {d} components")
    if any(not 0 <= i < ell for i in index):
        raise DomainError("index component out of range")
    if base_subsets is None:
        base_subsets = tuple(
            frozenset(j for j in range(ell) if rng.integers(0, 2)) for _ in range(d)
        )
    else:
        base_subsets = tuple(frozenset(s) for s in base_subsets)
        if len(base_subsets) != d:
            raise DomainError("need one base subset per dimension")
    return CubeQuery(d, ell, base_subsets, index)


class CubeDatabase:
    """d-cube table: entry (j_1 .. j_d) with each j_t in range(ell)."""

    def __init__(self, ell: int, d: int, bits: Sequence[int]):
        if len(bits) != ell**d:
            raise DomainError(f"need {ell ** d} bits, got {len(bits)}")
        self.ell = ell
        self.d = d
        self.bits = [int(b) & 1 for b in bits]

    def entry(self, coords: Sequence[int]) -> int:
        flat = 0
        for c in coords:
            flat = flat * self.ell + c
        return self.bits[flat]


def cube_answer(database: CubeDatabase, sigma: str, query: CubeQuery) -> int:
    """XOR of the subcube selected by the server's d subsets."""
    subsets = query.subsets_for(sigma)
    total = 0
    for coords in product(*subsets):
        total ^= database.entry(coords)
    return total


def cube_reconstruct(answers: dict[str, int], d: int) -> int:
    """XOR of all 2^d single-bit replies."""
    want = {format(v, f"0{d}b") for v in range(2**d)}
    if set(answers) != want:
        raise DomainError("missing server answer")
    total = 0
    for bit in answers.values():
        total ^= int(bit) & 1
    return total


def cube_cost(ell: int, d: int) -> tuple[int, int]:
    """(bits up, bits down): subset masks out to 2^d servers, one bit back each."""
    if ell < 1 or d < 1:
        raise DomainError("need ell >= 1 and d >= 1")
    return (2**d) * d * ell, 2**d


@dataclass
class CubeProtocol:
    """Runtime wrapper distributing cube queries to 2^d classical servers."""

    ell: int
    d: int
    name: str = "cube"

    def run(self, ctx: ProtocolContext, database, index):
        db = database if isinstance(database, CubeDatabase) else CubeDatabase(
            self.ell, self.d, database
        )
        index = (index,) if isinstance(index, int) else tuple(index)
        query = gen_cube_query(self.ell, self.d, index, ctx.rng)
        answers = {}
        for v in range(2**self.d):
            sigma = format(v, f"0{self.d}b")
            subsets = query.subsets_for(sigma)
            masks = [subset_mask(s, self.ell) for s in subsets]
            ctx.send_classical("client", f"server{sigma}", masks, self.d * self.ell)
        ctx.next_round()
        for v in range(2**self.d):
            sigma = format(v, f"0{self.d}b")
            a = cube_answer(db, sigma, query)
            if ctx.adversary.wants("flip_answer") and sigma == "0" * self.d:
                a ^= 1
            ctx.send_classical(f"server{sigma}", "client", a, 1)
            answers[sigma] = a
        ctx.next_round()
        return cube_reconstruct(answers, self.d)


def cube_server_view(ell: int, d: int, index: Sequence[int], sigma: str,
                     trial: int) -> ViewSample:
    """The subset tuple one server receives, for privacy enumeration."""
    rng = np.random.default_rng([trial])
    query = gen_cube_query(ell, d, index, rng)
    masks = tuple(subset_mask(s, ell) for s in query.subsets_for(sigma))
    return ViewSample(classical=masks, quantum=[])


def enumerate_cube_views(ell: int, d: int, index: Sequence[int], sigma: str) -> list[tuple]:
    """Server sigma's view over all base-subset choices, exhaustively."""
    index = tuple(index)
    views = []
    all_subsets = [frozenset(j for j in range(ell) if bits[j])
                   for bits in product((0, 1), repeat=ell)]
    for bases in product(all_subsets, repeat=d):
        query = CubeQuery(d, ell, tuple(bases), index)
        views.append(tuple(subset_mask(s, ell) for s in query.subsets_for(sigma)))
    return views


def coalition_guess_success(ell: int, d: int, coalition: Sequence[str], trials: int,
                            rng: np.random.Generator) -> float:
    """Empirical success of guessing every membership bit [i_t in Q_t^0].

    Components where coalition labels disagree are derivable exactly (both
    subset variants are seen, their symmetric difference is {i_t}); the
    rest are uniform coin flips no matter the strategy.
    """
    coalition = [str(s) for s in coalition]
    if any(len(s) != d or set(s) - {"0", "1"} for s in coalition):
        raise DomainError("coalition members must be d-bit server labels")
    exposed = {
        j for j in range(d) if len({s[j] for s in coalition}) > 1
    }
    wins = 0
    for _ in range(trials):
        index = tuple(int(rng.integers(0, ell)) for _ in range(d))
        query = gen_cube_query(ell, d, index, rng)
        truth = [index[t] in query.base_subsets[t] for t in range(d)]
        guess = []
        for t in range(d):
            if t in exposed:
                # both variants visible: i_t is the toggled element, membership exact
                guess.append(truth[t])
            else:
                guess.append(False)  # fixed guess; the bit is uniform
        wins += int(guess == truth)
    return wins / trials
