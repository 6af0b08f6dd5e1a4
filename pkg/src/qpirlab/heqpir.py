"""Single-server retrieval under a simulation-grade quantum homomorphic layer.

The index is split over a sqrt(N) x sqrt(N) grid: the row selector travels
as a one-time-padded basis register, the column selector as a classically
encrypted value.  The server's evaluation capability applies the database
lookup inside the pad frame (conjugating the X pads around a multiplexed
XOR) and pads the answer row with ledger keys fixed at keygen, so the
client can strip every pad afterwards.  Pads are information-theoretically
hiding; the classical layer hides by capability: the server can evaluate
but never decrypt.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CapabilityError,
    DecryptionIntegrityError,
    DomainError,
)
from .quantum import apply_gate, new_state
from .runtime import ProtocolContext, ViewSample, honest, run_protocol


@dataclass(frozen=True)
class GridLayout:
    """Row-major square layout of N records: row(k) * cols + col(k) = k."""

    n: int
    rows: int
    cols: int

    @staticmethod
    def for_size(n: int) -> "GridLayout":
        if n < 1:
            raise DomainError("database size must be positive")
        side = math.isqrt(n)
        if side * side < n:
            side += 1
        return GridLayout(n, side, side)

    def row(self, k: int) -> int:
        self._check(k)
        return k // self.cols

    def col(self, k: int) -> int:
        self._check(k)
        return k % self.cols

    def _check(self, k: int):
        if not 0 <= k < self.n:
            raise DomainError(f"index {k} out of range for N = {self.n}")

    @property
    def row_bits(self) -> int:
        return max(1, (self.rows - 1).bit_length())

    @property
    def col_bits(self) -> int:
        return max(1, (self.cols - 1).bit_length())


class QheEvaluationKey:
    """Server-side capability: padded lookup only, no key material exposed."""

    def __init__(self, layout: GridLayout, row_x_pads: tuple[int, ...],
                 answer_x_pads: tuple[int, ...], answer_z_pads: tuple[int, ...],
                 checksum_pads: tuple[int, int]):
        self._layout = layout
        self._row_x = row_x_pads
        self._ans_x = answer_x_pads
        self._ans_z = answer_z_pads
        self._chk = checksum_pads

    @property
    def sk(self):
        raise CapabilityError("evaluation key carries no decryption capability")

    def decrypt(self, *_args, **_kw):
        raise CapabilityError("evaluation key carries no decryption capability")

    def apply_lookup(self, joint, server: str, row_register: str,
                     answer_register: str, grid: np.ndarray,
                     checksum_register: str | None = None):
        """|w>|0..0> -> |w>|D[row, .]> inside the pad frame.

        The X pads on the row register are conjugated around the multiplexed
        XOR so the lookup addresses the true row; Z pads are diagonal in the
        lookup basis and pass through untouched.  Answer qubits leave padded
        with the ledger keys.
        """
        layout = self._layout
        mask = 0
        for b, bit in enumerate(self._row_x):
            mask |= bit << (layout.row_bits - 1 - b)

        def row_lookup(w: int) -> int:
            row = w ^ mask
            if row >= layout.rows:
                return 0
            out = 0
            for c in range(layout.cols):
                out = (out << 1) | int(grid[row, c])
            return out

        joint.xor_function(server, [row_register], answer_register, row_lookup)
        if checksum_register is not None:
            def row_parity(w: int) -> int:
                row = w ^ mask
                if row >= layout.rows:
                    return 0
                return int(np.bitwise_xor.reduce(grid[row])) & 1

            joint.xor_function(server, [row_register], checksum_register, row_parity)
        for b, lab in enumerate(joint.register(answer_register)):
            if self._ans_x[b]:
                joint.apply(server, "X", [lab])
            if self._ans_z[b]:
                joint.apply(server, "Z", [lab])
        if checksum_register is not None:
            lab = joint.register(checksum_register)[0]
            if self._chk[0]:
                joint.apply(server, "X", [lab])
            if self._chk[1]:
                joint.apply(server, "Z", [lab])


@dataclass
class QheKeys:
    """Client-side key ledger: per-qubit pad bits and the classical keystream."""

    n: int
    layout: GridLayout
    row_x_pads: tuple[int, ...]
    row_z_pads: tuple[int, ...]
    answer_x_pads: tuple[int, ...]
    answer_z_pads: tuple[int, ...]
    checksum_pads: tuple[int, int]
    col_keystream: int
    pk: str = "pk"
    evk: QheEvaluationKey = field(default=None, repr=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "row_x_pads": list(self.row_x_pads),
                "row_z_pads": list(self.row_z_pads),
                "answer_x_pads": list(self.answer_x_pads),
                "answer_z_pads": list(self.answer_z_pads),
                "checksum_pads": list(self.checksum_pads),
                "col_keystream": self.col_keystream,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "QheKeys":
        data = json.loads(text)
        return _assemble_keys(
            data["n"],
            tuple(data["row_x_pads"]),
            tuple(data["row_z_pads"]),
            tuple(data["answer_x_pads"]),
            tuple(data["answer_z_pads"]),
            tuple(data["checksum_pads"]),
            data["col_keystream"],
        )


def _assemble_keys(n, row_x, row_z, ans_x, ans_z, chk, keystream) -> QheKeys:
    layout = GridLayout.for_size(n)
    evk = QheEvaluationKey(layout, row_x, ans_x, ans_z, chk)
    return QheKeys(n, layout, row_x, row_z, ans_x, ans_z, chk, keystream, evk=evk)


def qhe_keygen(n: int, rng: np.random.Generator) -> QheKeys:
    """Fresh pad ledger for one query/answer cycle; deterministic per seed."""
    layout = GridLayout.for_size(n)
    row_x = tuple(int(b) for b in rng.integers(0, 2, layout.row_bits))
    row_z = tuple(int(b) for b in rng.integers(0, 2, layout.row_bits))
    ans_x = tuple(int(b) for b in rng.integers(0, 2, layout.cols))
    ans_z = tuple(int(b) for b in rng.integers(0, 2, layout.cols))
    chk = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
    keystream = int(rng.integers(0, 2**layout.col_bits))
    return _assemble_keys(n, row_x, row_z, ans_x, ans_z, chk, keystream)


@dataclass
class QheCiphertext:
    """Padded row register handle plus the classically encrypted column."""

    row_register: str
    col_ciphertext: int
    kind: str = "index_query"

    def decrypt(self, *_args, **_kw):
        raise CapabilityError("ciphertexts do not decrypt themselves")


def qhe_encrypt(keys: QheKeys, joint, party: str, k: int,
                row_register: str = "row") -> QheCiphertext:
    """Load |row(k)> into the register, apply the one-time pad, encrypt col(k).

    The register must start in |0..0>; after this call its reduced state,
    averaged over pad keys, is maximally mixed.
    """
    layout = keys.layout
    layout._check(k)
    row = layout.row(k)
    labs = joint.register(row_register)
    if len(labs) != layout.row_bits:
        raise DomainError("row register width does not match the layout")
    for b, lab in enumerate(labs):
        if (row >> (layout.row_bits - 1 - b)) & 1:
            joint.apply(party, "X", [lab])
        if keys.row_x_pads[b]:
            joint.apply(party, "X", [lab])
        if keys.row_z_pads[b]:
            joint.apply(party, "Z", [lab])
    col_ct = layout.col(k) ^ keys.col_keystream
    return QheCiphertext(row_register, col_ct)


def qhe_decrypt_index(keys: QheKeys, joint, party: str,
                      ciphertext: QheCiphertext) -> int:
    """Round-trip helper: strip pads, read the row, decrypt the column."""
    layout = keys.layout
    for b, lab in enumerate(joint.register(ciphertext.row_register)):
        if keys.row_z_pads[b]:
            joint.apply(party, "Z", [lab])
        if keys.row_x_pads[b]:
            joint.apply(party, "X", [lab])
    out = joint.measure(party, ciphertext.row_register)
    row = out.value_int
    col = ciphertext.col_ciphertext ^ keys.col_keystream
    return row * layout.cols + col


def database_grid(database: Sequence[int], layout: GridLayout) -> np.ndarray:
    bits = [int(b) & 1 for b in database]
    if len(bits) != layout.n:
        raise DomainError("database size does not match the layout")
    grid = np.zeros((layout.rows, layout.cols), dtype=np.int64)
    for k, b in enumerate(bits):
        grid[layout.row(k), layout.col(k)] = b
    return grid


def qhe_decrypt_answer(keys: QheKeys, joint, party: str, answer_register: str,
                       k: int, *, checksum_register: str | None = None) -> int:
    """Strip the answer pads, measure the row, select col(k).

    Raises DecryptionIntegrityError when the checksum qubit disagrees with
    the decrypted row parity (an in-flight bit flip).
    """
    layout = keys.layout
    labs = joint.register(answer_register)
    if len(labs) != layout.cols:
        raise DecryptionIntegrityError("answer width does not match the ledger")
    for b, lab in enumerate(labs):
        if keys.answer_z_pads[b]:
            joint.apply(party, "Z", [lab])
        if keys.answer_x_pads[b]:
            joint.apply(party, "X", [lab])
    row_out = joint.measure(party, answer_register)
    row_bits = [int(ch) for ch in row_out.value]
    if checksum_register is not None:
        lab = joint.register(checksum_register)[0]
        if keys.checksum_pads[1]:
            joint.apply(party, "Z", [lab])
        if keys.checksum_pads[0]:
            joint.apply(party, "X", [lab])
        chk = joint.measure(party, checksum_register).value_int
        if chk != (sum(row_bits) & 1):
            raise DecryptionIntegrityError("answer checksum mismatch")
    return row_bits[layout.col(k)]


@dataclass
class HeqpirProtocol:
    """Full query/eval/decrypt pipeline over the runtime fabric."""

    n: int
    with_checksum: bool = False
    classical_mode: bool = False
    name: str = "heqpir"

    def run(self, ctx: ProtocolContext, database: Sequence[int], k: int):
        layout = GridLayout.for_size(self.n)
        if len(database) != self.n:
            raise DomainError("database size mismatch")
        if self.classical_mode:
            return self._run_classical(ctx, database, k)
        keys = qhe_keygen(self.n, ctx.rng)
        owners = [("client", "row", layout.row_bits), ("server", "answer", layout.cols)]
        if self.with_checksum:
            owners.append(("server", "chk", 1))
        joint = ctx.new_joint_state("heqpir", owners)
        ct = qhe_encrypt(keys, joint, "client", k)
        ctx.send_qubits(joint, "client", "server", joint.register("row"))
        ctx.send_classical("client", "server", ct.col_ciphertext, layout.col_bits)
        ctx.next_round()
        ctx.record_view("server", [joint.reduced(["row"])])
        grid = database_grid(database, layout)
        keys.evk.apply_lookup(
            joint, "server", "row", "answer", grid,
            checksum_register="chk" if self.with_checksum else None,
        )
        answer_labels = joint.register("answer")
        if self.with_checksum:
            answer_labels = answer_labels + joint.register("chk")
        ctx.send_qubits(joint, "server", "client", answer_labels)
        ctx.next_round()
        if ctx.adversary.wants("flip_answer_bit"):
            target = joint.register("answer")[layout.col(k)]
            joint.state = apply_gate(joint.state, "X", [target])
        try:
            return qhe_decrypt_answer(
                keys, joint, "client", "answer", k,
                checksum_register="chk" if self.with_checksum else None,
            )
        except DecryptionIntegrityError:
            ctx.abort("answer_integrity")

    def _run_classical(self, ctx: ProtocolContext, database: Sequence[int], k: int):
        """Wire-accounting fallback: same messages, basis values tracked classically."""
        from .runtime import Message, payload_digest

        def send_wire_qubits(sender, receiver, payload, qubits):
            ctx.transcript.record(Message(ctx.round_index, sender, receiver,
                                          "quantum", qubits, 0,
                                          payload_digest(payload), payload))

        layout = GridLayout.for_size(self.n)
        keys = qhe_keygen(self.n, ctx.rng)
        row = layout.row(k)
        mask = sum(b << (layout.row_bits - 1 - i) for i, b in enumerate(keys.row_x_pads))
        padded_row = row ^ mask
        send_wire_qubits("client", "server", {"row_register": padded_row},
                         layout.row_bits)
        ctx.send_classical("client", "server", layout.col(k) ^ keys.col_keystream,
                           layout.col_bits)
        ctx.next_round()
        grid = database_grid(database, layout)
        padded_answer = [
            int(grid[row, c]) ^ keys.answer_x_pads[c] for c in range(layout.cols)
        ]
        send_wire_qubits("server", "client", {"answer_registers": padded_answer},
                         layout.cols)
        ctx.next_round()
        bits = [padded_answer[c] ^ keys.answer_x_pads[c] for c in range(layout.cols)]
        return bits[layout.col(k)]


def heqpir_query_view(n: int, k: int, trial: int) -> ViewSample:
    """Server's view of one query: padded row register DM + column ciphertext.

    Trials enumerate the pad and keystream randomness exhaustively via the
    trial index, so averaging over trials is averaging over keys.
    """
    layout = GridLayout.for_size(n)
    space = 2 ** (2 * layout.row_bits + layout.col_bits)
    point = trial % space
    row_x = [(point >> b) & 1 for b in range(layout.row_bits)]
    row_z = [(point >> (layout.row_bits + b)) & 1 for b in range(layout.row_bits)]
    keystream = point >> (2 * layout.row_bits)

    state = new_state([("row", layout.row_bits)])
    row = layout.row(k)
    for b, lab in enumerate(state.register_labels("row")):
        if (row >> (layout.row_bits - 1 - b)) & 1:
            state = apply_gate(state, "X", [lab])
        if row_x[b]:
            state = apply_gate(state, "X", [lab])
        if row_z[b]:
            state = apply_gate(state, "Z", [lab])
    from .quantum import partial_trace

    dm = partial_trace(state, ["row"])
    col_ct = layout.col(k) ^ keystream
    return ViewSample(classical=col_ct, quantum=[dm])


def heqpir_randomness_space(n: int) -> int:
    layout = GridLayout.for_size(n)
    return 2 ** (2 * layout.row_bits + layout.col_bits)


def run_heqpir(n: int, database: Sequence[int], k: int, adversary=None,
               rng=None, *, with_checksum: bool = False,
               classical_mode: bool = False):
    """Convenience front end returning (record bit, transcript)."""
    protocol = HeqpirProtocol(n, with_checksum=with_checksum,
                              classical_mode=classical_mode)
    result = run_protocol(protocol, database, k, adversary or honest(),
                          rng if rng is not None else 0)
    return result
