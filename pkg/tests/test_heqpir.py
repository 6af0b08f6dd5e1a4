"""Homomorphic-layer retrieval: pads, capabilities, round trips, costs."""

import json
import math

import numpy as np
import pytest

from qpirlab.errors import CapabilityError, DecryptionIntegrityError, DomainError
from qpirlab.heqpir import (
    GridLayout,
    HeqpirProtocol,
    QheKeys,
    database_grid,
    heqpir_query_view,
    heqpir_randomness_space,
    qhe_decrypt_answer,
    qhe_decrypt_index,
    qhe_encrypt,
    qhe_keygen,
    run_heqpir,
)
from qpirlab.runtime import (
    AdversaryModel,
    ProtocolContext,
    honest,
    privacy_report,
    run_protocol,
)


def test_grid_layout_invariant():
    for n in (4, 10, 16, 64):
        layout = GridLayout.for_size(n)
        for k in range(n):
            assert layout.row(k) * layout.cols + layout.col(k) == k


def test_keygen_deterministic_per_seed():
    a = qhe_keygen(16, np.random.default_rng(5))
    b = qhe_keygen(16, np.random.default_rng(5))
    assert a.to_json() == b.to_json()
    c = qhe_keygen(16, np.random.default_rng(6))
    assert a.to_json() != c.to_json()


def test_pad_bits_marginally_uniform():
    rng = np.random.default_rng(7)
    ones = 0
    total = 0
    for _ in range(5000):
        keys = qhe_keygen(4, rng)
        ones += sum(keys.row_x_pads) + sum(keys.row_z_pads)
        total += len(keys.row_x_pads) + len(keys.row_z_pads)
    sigma = math.sqrt(0.25 / total)
    assert abs(ones / total - 0.5) <= 3 * sigma


def test_secret_material_capability_guarded():
    keys = qhe_keygen(4, np.random.default_rng(1))
    with pytest.raises(CapabilityError):
        keys.evk.sk
    with pytest.raises(CapabilityError):
        keys.evk.decrypt()


def test_encrypt_decrypt_index_roundtrip():
    n = 16
    for k in range(n):
        keys = qhe_keygen(n, np.random.default_rng(k))
        ctx = ProtocolContext(np.random.default_rng(100 + k), honest())
        joint = ctx.new_joint_state("q", [("client", "row", keys.layout.row_bits)])
        ct = qhe_encrypt(keys, joint, "client", k)
        with pytest.raises(CapabilityError):
            ct.decrypt()
        assert qhe_decrypt_index(keys, joint, "client", ct) == k


def test_query_ciphertext_sizes():
    n = 16
    result = run_heqpir(n, [0] * n, 3, rng=2)
    query_msgs = [m for m in result.transcript.messages if m.receiver == "server"]
    layout = GridLayout.for_size(n)
    assert sum(m.size_qubits for m in query_msgs) == layout.row_bits
    assert sum(m.size_bits for m in query_msgs) == layout.col_bits


def test_eval_example_database():
    # N=4, D=(1,0,1,1), k=2: row 1 is (1,1), col(2)=0
    db = [1, 0, 1, 1]
    result = run_heqpir(4, db, 2, rng=5)
    assert result.value == 1


def test_all_zero_database():
    for k in range(4):
        assert run_heqpir(4, [0, 0, 0, 0], k, rng=k).value == 0


def test_answer_register_width_is_grid_column_count():
    n = 16
    result = run_heqpir(n, [1] * n, 0, rng=1)
    answer_msgs = [m for m in result.transcript.messages
                   if m.receiver == "client" and m.kind == "quantum"]
    assert sum(m.size_qubits for m in answer_msgs) == GridLayout.for_size(n).cols


def test_exhaustive_round_trip_n4():
    for value in range(16):
        db = [(value >> p) & 1 for p in range(4)]
        for k in range(4):
            result = run_heqpir(4, db, k, rng=value * 4 + k)
            assert result.value == db[k], (db, k)


def test_random_round_trips_n16():
    rng = np.random.default_rng(50)
    for trial in range(120):
        db = [int(b) for b in rng.integers(0, 2, 16)]
        k = int(rng.integers(0, 16))
        result = run_heqpir(16, db, k, rng=int(rng.integers(0, 2**32)))
        assert result.value == db[k]


def test_pad_frame_matches_unpadded_reference():
    # strip the ledger-predicted pads from a padded evaluation and compare
    # against the same lookup run with no pads at all
    n = 4
    db = [1, 0, 1, 1]
    keys = qhe_keygen(n, np.random.default_rng(3))
    layout = keys.layout

    ctx = ProtocolContext(np.random.default_rng(0), honest())
    joint = ctx.new_joint_state("q", [("client", "row", layout.row_bits),
                                      ("client", "answer", layout.cols)])
    k = 2
    qhe_encrypt(keys, joint, "client", k)
    keys.evk.apply_lookup(joint, "client", "row", "answer", database_grid(db, layout))
    # strip every pad the ledger predicts
    for b, lab in enumerate(joint.register("answer")):
        if keys.answer_z_pads[b]:
            joint.apply("client", "Z", [lab])
        if keys.answer_x_pads[b]:
            joint.apply("client", "X", [lab])
    for b, lab in enumerate(joint.register("row")):
        if keys.row_z_pads[b]:
            joint.apply("client", "Z", [lab])
        if keys.row_x_pads[b]:
            joint.apply("client", "X", [lab])
    stripped = joint.state.amplitudes

    ctx2 = ProtocolContext(np.random.default_rng(0), honest())
    ref = ctx2.new_joint_state("q", [("client", "row", layout.row_bits),
                                     ("client", "answer", layout.cols)])
    row = layout.row(k)
    for b, lab in enumerate(ref.register("row")):
        if (row >> (layout.row_bits - 1 - b)) & 1:
            ref.apply("client", "X", [lab])
    grid = database_grid(db, layout)
    ref.xor_function("client", ["row"], "answer",
                     lambda w: int("".join(str(int(v)) for v in grid[w]), 2))
    phase = np.vdot(ref.state.amplitudes, stripped)
    assert abs(abs(phase) - 1.0) < 1e-9  # equal up to a global phase


def test_wrong_ledger_raises_integrity_error():
    n = 4
    keys = qhe_keygen(n, np.random.default_rng(3))
    ctx = ProtocolContext(np.random.default_rng(0), honest())
    joint = ctx.new_joint_state("q", [("client", "row", keys.layout.row_bits),
                                      ("client", "answer", keys.layout.cols),
                                      ("client", "chk", 1)])
    qhe_encrypt(keys, joint, "client", 1)
    keys.evk.apply_lookup(joint, "client", "row", "answer",
                          database_grid([1, 1, 0, 0], keys.layout),
                          checksum_register="chk")
    # one flipped answer pad breaks the parity the checksum protects
    data = json.loads(keys.to_json())
    data["answer_x_pads"][0] ^= 1
    wrong = QheKeys.from_json(json.dumps(data))
    with pytest.raises(DecryptionIntegrityError):
        qhe_decrypt_answer(wrong, joint, "client", "answer", 1,
                           checksum_register="chk")


def test_tampered_answer_flips_bit():
    db = [1, 0, 1, 1]
    adversary = AdversaryModel("flip_answer_bit", {"flip_answer_bit": True})
    result = run_heqpir(4, db, 2, adversary=adversary, rng=8)
    assert result.value == db[2] ^ 1


def test_checksum_catches_tampered_answer():
    db = [1, 0, 1, 1]
    adversary = AdversaryModel("flip_answer_bit", {"flip_answer_bit": True})
    result = run_heqpir(4, db, 2, adversary=adversary, rng=8, with_checksum=True)
    assert result.aborted_at == "answer_integrity"
    honest_run = run_heqpir(4, db, 2, rng=8, with_checksum=True)
    assert honest_run.value == db[2]


def test_query_view_index_independent():
    n = 16
    trials = heqpir_randomness_space(n)
    report = privacy_report(lambda k, t: heqpir_query_view(n, k, t),
                            indices=list(range(n)), epsilon=0.0, trials=trials)
    assert report.max_distance <= 1e-9
    assert report.passed


def test_single_key_view_is_basis_state_but_average_is_mixed():
    n = 4
    samples = [heqpir_query_view(n, 0, t) for t in range(heqpir_randomness_space(n))]
    avg = sum(s.quantum[0].matrix for s in samples) / len(samples)
    assert np.allclose(avg, np.eye(2) / 2, atol=1e-9)


def test_communication_costs_and_ratio():
    costs = {}
    for n in (4, 16, 64):
        result = run_heqpir(n, [0] * n, 0, rng=1)
        costs[n] = result.transcript.qubit_cost
    layout4, layout16, layout64 = (GridLayout.for_size(n) for n in (4, 16, 64))
    assert costs[4] == layout4.row_bits + layout4.cols == 3
    assert costs[16] == layout16.row_bits + layout16.cols == 6
    assert costs[64] == layout64.row_bits + layout64.cols == 11
    assert costs[64] / costs[16] == pytest.approx(2.0, abs=0.25)


def test_classical_mode_matches_quantum_costs():
    n = 16
    quantum = run_heqpir(n, [0] * n, 5, rng=3)
    classical = run_heqpir(n, [0] * n, 5, rng=3, classical_mode=True)
    assert classical.transcript.qubit_cost == quantum.transcript.qubit_cost
    assert classical.value == quantum.value == 0


def test_classical_mode_large_n():
    rng = np.random.default_rng(12)
    db = [int(b) for b in rng.integers(0, 2, 256)]
    for k in (0, 100, 255):
        result = run_heqpir(256, db, k, rng=k, classical_mode=True)
        assert result.value == db[k]
        assert result.transcript.qubit_cost == 4 + 16


def test_cost_fit_against_sqrt_model():
    # a * sqrt(N) + b fits the measured totals with small relative residual
    ns = [4, 16, 64, 256]
    costs = []
    for n in ns:
        result = run_heqpir(n, [0] * n, 0, rng=1, classical_mode=n > 64)
        costs.append(result.transcript.qubit_cost)
    x = np.sqrt(np.asarray(ns, dtype=float))
    y = np.asarray(costs, dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    assert np.linalg.norm(resid) / np.linalg.norm(y) <= 0.10


def test_keys_json_roundtrip():
    keys = qhe_keygen(16, np.random.default_rng(9))
    clone = QheKeys.from_json(keys.to_json())
    assert clone.to_json() == keys.to_json()
    # the rebuilt evaluation key reproduces the same answer pads
    db = [int(b) for b in np.random.default_rng(2).integers(0, 2, 16)]
    ctx = ProtocolContext(np.random.default_rng(0), honest())
    joint = ctx.new_joint_state("q", [("client", "row", clone.layout.row_bits),
                                      ("client", "answer", clone.layout.cols)])
    qhe_encrypt(clone, joint, "client", 7)
    clone.evk.apply_lookup(joint, "client", "row", "answer",
                           database_grid(db, clone.layout))
    assert qhe_decrypt_answer(clone, joint, "client", "answer", 7) == db[7]


def test_database_size_validation():
    with pytest.raises(DomainError):
        run_protocol(HeqpirProtocol(4), [0, 1], 0, honest(), 0)
