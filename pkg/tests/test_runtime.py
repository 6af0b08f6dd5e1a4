"""Channel fabric: transcripts, ownership, speciousness, evaluator reports."""

import json
from itertools import product

import numpy as np
import pytest

from qpirlab.errors import OwnershipError
from qpirlab.multiserver import TwoServerProtocol
from qpirlab.quantum import QubitLabel
from qpirlab.runtime import (
    AdversaryView,
    BaselineSendAll,
    CleartextIndex,
    ProtocolContext,
    ViewSample,
    baseline_bound_check,
    collusion_report,
    correctness_report,
    honest,
    phase_tamper,
    privacy_report,
    run_protocol,
    specious_copy,
    speciousness_check,
    view_distance_upper,
)


def test_baseline_send_everything():
    database = [0, 1, 1, 0, 1, 0, 0, 1]
    result = run_protocol(BaselineSendAll(), database, 5, honest(), 0)
    assert result.value == database[5]
    assert result.transcript.qubit_cost == 0
    assert result.transcript.classical_cost == 8
    assert not result.aborted


def test_transcript_jsonl_schema_and_determinism():
    database = [1, 0, 1, 1]
    first = run_protocol(TwoServerProtocol(), database, 2, honest(), 31)
    second = run_protocol(TwoServerProtocol(), database, 2, honest(), 31)
    assert first.transcript.to_jsonl() == second.transcript.to_jsonl()
    lines = first.transcript.to_jsonl().strip().split("\n")
    for line in lines[:-1]:
        msg = json.loads(line)
        assert set(msg) == {"round", "sender", "receiver", "kind",
                            "size_qubits", "size_bits", "payload_digest"}
        assert len(msg["payload_digest"]) == 64
    summary = json.loads(lines[-1])["summary"]
    assert summary["result"] == database[2]
    assert summary["aborted_at"] is None


def test_different_seeds_change_transcript():
    database = [1, 0, 1, 1]
    a = run_protocol(TwoServerProtocol(), database, 2, honest(), 1)
    b = run_protocol(TwoServerProtocol(), database, 2, honest(), 2)
    # subset draws differ, so at least one payload digest differs
    assert a.transcript.to_jsonl() != b.transcript.to_jsonl()


def test_ownership_enforced():
    ctx = ProtocolContext(np.random.default_rng(0), honest())
    joint = ctx.new_joint_state("s", [("alice", "a", 1), ("bob", "b", 1)])
    with pytest.raises(OwnershipError):
        joint.apply("alice", "X", [QubitLabel("b", 0)])
    joint.apply("alice", "X", [QubitLabel("a", 0)])
    ctx.send_qubits(joint, "alice", "bob", joint.register("a"))
    with pytest.raises(OwnershipError):
        joint.apply("alice", "X", [QubitLabel("a", 0)])
    joint.apply("bob", "X", [QubitLabel("a", 0)])


def test_send_requires_ownership():
    ctx = ProtocolContext(np.random.default_rng(0), honest())
    joint = ctx.new_joint_state("s", [("alice", "a", 1), ("bob", "b", 1)])
    with pytest.raises(OwnershipError):
        ctx.send_qubits(joint, "alice", "bob", joint.register("b"))


def test_speciousness_honest_is_zero():
    report = speciousness_check(TwoServerProtocol(), [1, 0, 1, 1], 1, honest(), 0.0)
    assert report.max_round_distance == 0.0
    assert report.passed


def test_speciousness_copy_with_discard_recovery():
    report = speciousness_check(TwoServerProtocol(), [1, 0, 1, 1], 1,
                                specious_copy(), 0.0)
    assert report.max_round_distance == 0.0
    assert report.passed


def test_speciousness_copy_without_recovery_fails():
    report = speciousness_check(TwoServerProtocol(), [1, 0, 1, 1], 1,
                                specious_copy(recovery="identity"), 0.0)
    assert report.max_round_distance == 1.0
    assert not report.passed


def test_speciousness_phase_tamper_fails_small_epsilon():
    report = speciousness_check(TwoServerProtocol(), [1, 0, 1, 1], 1,
                                phase_tamper(["t_bit0"]), 0.05)
    assert report.max_round_distance > 0.5
    assert not report.passed


def test_privacy_report_cleartext_strawman_fails():
    def view(index, trial):
        return ViewSample(classical=index, quantum=[])

    report = privacy_report(view, indices=[0, 1, 2, 3], epsilon=0.0, trials=4)
    assert report.max_distance == pytest.approx(1.0)
    assert not report.passed


def test_privacy_report_constant_view_passes():
    rho = np.eye(2) / 2

    def view(index, trial):
        return ViewSample(classical=("q", trial % 2), quantum=[rho])

    report = privacy_report(view, indices=[0, 1, 2], epsilon=0.0, trials=8)
    assert report.max_distance == 0.0
    assert report.passed


def test_view_distance_mixed_components():
    v1 = AdversaryView({"a": (1.0, [np.eye(2) / 2])})
    v2 = AdversaryView({"a": (1.0, [np.diag([1.0, 0.0])])})
    # || I/2 - |0><0| ||_1 = 1, halved
    assert view_distance_upper(v1, v2) == pytest.approx(0.5)


def test_correctness_report_flipped_protocol_fails():
    database = [1, 0, 1, 0]

    def good(db, i):
        return float(run_protocol(BaselineSendAll(), db, i, honest(), i).value == db[i])

    def flipped(db, i):
        value = run_protocol(BaselineSendAll(), db, i, honest(), i).value
        return float((1 - value) == db[i])

    inputs = [(database, i) for i in range(4)]
    assert correctness_report(good, inputs, 0.05).passed
    report = correctness_report(flipped, inputs, 0.05)
    assert report.min_success == 0.0
    assert not report.passed


def test_cleartext_protocol_runs_but_leaks():
    result = run_protocol(CleartextIndex(), [1, 0, 1, 0], 2, honest(), 0)
    assert result.value == 1
    received = result.transcript.received_by("server")
    assert received and received[0].payload == 2


def test_collusion_all_servers_know_everything():
    coalition = [format(v, "02b") for v in range(4)]
    report = collusion_report(2, 2, coalition, trials=500, rng=3)
    assert report.exposed_components == 2
    assert report.success_rate == pytest.approx(1.0)
    assert report.bound == pytest.approx(1.0)


def test_collusion_single_exposed_component_d2():
    # oracle: with one exposed component the remaining membership bit is a
    # uniform coin, so the best strategy wins exactly half the time;
    # exhaustive enumeration over (index, base subsets) for ell = 2
    ell, d = 2, 2
    wins = total = 0
    for i0, i1 in product(range(ell), repeat=2):
        for bits in product((0, 1), repeat=2 * ell):
            q0 = frozenset(j for j in range(ell) if bits[j])
            q1 = frozenset(j for j in range(ell) if bits[ell + j])
            truth = (i0 in q0, i1 in q1)
            guess = (i0 in q0, False)  # component 0 exposed, component 1 guessed
            wins += int(guess == truth)
            total += 1
    assert wins / total == pytest.approx(0.5)

    report = collusion_report(2, 2, ["00", "10"], trials=4000, rng=11)
    assert report.exposed_components == 1
    assert report.bound == pytest.approx(0.5)
    assert abs(report.success_rate - 0.5) <= 3 * (0.5 * 0.5 / 4000) ** 0.5 + 0.05
    assert report.within_bound


def test_baseline_meets_communication_bound():
    for n in (2, 4, 8):
        report = baseline_bound_check(n)
        assert report.bound_value == pytest.approx(float(n), abs=1e-9)
        assert report.measured_cost >= report.bound_value - 1e-9
        assert report.satisfied
