"""Authenticated single-server retrieval with detection particles.

Stage 1 entangles a copy pair (R, R') with one inner-product qubit per
database block and ships the block qubits to the client together with
decoy Bell halves at random wire positions.  Stage 2 Bell-checks a random
sample of the decoys.  Stage 3 imprints the target block as a phase via a
single Z, bounces the block qubits back for uncomputation, and decodes the
block from R with a Hadamard layer; a trapdoor claw-free interaction runs
alongside and leaves the server holding an ancilla qubit whose state the
client can predict.  Stage 4 checks that prediction in randomly rotated
bases, which separates servers that kept the ancilla honestly from servers
that substituted it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceLimitError
from .quantum import QubitLabel, rotated_basis
from .runtime import (
    AdversaryModel,
    JointState,
    ProtocolContext,
    RunResult,
    ViewSample,
    honest,
    run_protocol,
)
from .tcf import ClawPair, TcfInstance, Trapdoor, gen as tcf_gen, invert

THETA_CHOICES = (math.pi / 4.0, -math.pi / 4.0)


@dataclass
class AqpirParams:
    """Database shape and verification knobs.

    ell blocks of r bits each; n_tcf domain bits for the claw function;
    k_detect decoy pairs (default ceil(sqrt(ell))).  stage4_rounds = 0
    skips the rotated-basis batch (used by exhaustive correctness sweeps).
    """

    ell: int
    r: int
    n_tcf: int = 2
    k_detect: int | None = None
    epsilon_bell: float = 0.05
    delta: float = 0.05
    stage4_rounds: int = 100
    stage4_threshold: float = 0.75
    qubit_cap: int = 24

    def __post_init__(self):
        if self.ell < 2 or self.r < 1 or self.n_tcf < 1:
            raise DomainError("need ell >= 2, r >= 1, n_tcf >= 1")
        if self.k_detect is None:
            self.k_detect = math.ceil(math.sqrt(self.ell))
        if self.k_detect < 1:
            raise DomainError("need at least one detection pair")
        if 2 * self.r + self.ell > self.qubit_cap:
            raise ResourceLimitError("block registers exceed the qubit cap")


@dataclass
class AqpirRunRecord:
    bell_error_rate: float = 0.0
    aborted_at: str | None = None
    claw: ClawPair | None = None
    d: str = ""
    predicted_ancilla: tuple | None = None
    stage4_theta: list = field(default_factory=list)
    stage4_bit: list = field(default_factory=list)
    stage4_agreement: float = 0.0
    accepted: bool = False
    retrieved: int | None = None
    decode_probability: float = 0.0


def _block_product(block: int):
    """Inner product mod 2 with a fixed bitstring, as an xor-function."""
    return lambda x: bin(x & block).count("1") & 1


# -- stage 1 -------------------------------------------------------------------


def stage1_prepare(ctx: ProtocolContext, params: AqpirParams,
                   database: Sequence[int]):
    """Build the entangled block state and ship it with interleaved decoys.

    Returns (pir joint state, decoy joint states, decoy wire positions).
    """
    ell, r, k = params.ell, params.r, params.k_detect
    if len(database) != ell:
        raise DomainError("database must have exactly ell blocks")
    blocks = [int(a) for a in database]
    if any(not 0 <= a < 2**r for a in blocks):
        raise DomainError("blocks must fit in r bits")

    owners = [("server", "R", r), ("server", "Rp", r)]
    owners += [("server", f"Q{j}", 1) for j in range(ell)]
    pir = ctx.new_joint_state("pir", owners)
    pir.apply_register("server", "H", "R")
    pir.xor_function("server", ["R"], "Rp", lambda v: v)
    for j, block in enumerate(blocks):
        pir.xor_function("server", ["R"], f"Q{j}", _block_product(block))

    decoys = []
    for d in range(k):
        joint = ctx.new_joint_state(f"decoy{d}", [("server", f"T{d}", 1),
                                                  ("server", f"B{d}", 1)])
        joint.apply("server", "H", [QubitLabel(f"T{d}", 0)])
        joint.apply("server", "CNOT", [QubitLabel(f"T{d}", 0), QubitLabel(f"B{d}", 0)])
        decoys.append(joint)

    # wire order: block qubits and decoy halves interleaved at random positions
    wire = [("q", j) for j in range(ell)] + [("b", d) for d in range(k)]
    order = ctx.rng.permutation(len(wire))
    positions = [wire[int(idx)] for idx in order]
    for kind, idx in positions:
        if kind == "q":
            ctx.send_qubits(pir, "server", "client", pir.register(f"Q{idx}"))
        else:
            ctx.send_qubits(decoys[idx], "server", "client",
                            decoys[idx].register(f"B{idx}"))
    ctx.send_qubits(pir, "server", "client", pir.register("Rp"))
    # decoy positions are disclosed only after transmission
    decoy_slots = [i for i, (kind, _) in enumerate(positions) if kind == "b"]
    ctx.send_classical("server", "client", decoy_slots, ell + k)
    ctx.next_round()
    return pir, decoys, positions


# -- stage 2 -------------------------------------------------------------------


def stage2_bell_verify(ctx: ProtocolContext, decoys, params: AqpirParams,
                       record: AqpirRunRecord):
    """Bell-check a random half of the decoys; abort past the error threshold."""
    k = params.k_detect
    sampled = [d for d in range(k) if ctx.rng.integers(0, 2)]
    ctx.send_classical("client", "server", sampled, k)
    errors = 0
    for d in sampled:
        joint = decoys[d]
        ctx.send_qubits(joint, "server", "client", joint.register(f"T{d}"))
        out = joint.measure_bell_pair(
            "client", (QubitLabel(f"T{d}", 0), QubitLabel(f"B{d}", 0))
        )
        errors += int(out.value != "phi+")
    ctx.next_round()
    rate = errors / len(sampled) if sampled else 0.0
    record.bell_error_rate = rate
    if rate > params.epsilon_bell:
        record.aborted_at = "stage2_bell"
        ctx.abort("stage2_bell")
    return rate, sampled


# -- claw interaction ----------------------------------------------------------


def _claw_round(ctx: ProtocolContext, instance: TcfInstance, trapdoor: Trapdoor,
                tag: str):
    """One trapdoor interaction; leaves the ancilla at the server.

    Returns (claw joint state, ClawPair, r-string, outcome string, predicted
    ancilla description).  The prediction is ("z", bit) for a computational
    ancilla and ("x", sign_bit) for a conjugate-basis one.
    """
    n = instance.domain_bits
    claw = ctx.new_joint_state(tag, [("server", f"{tag}_b", 1),
                                     ("server", f"{tag}_x", n),
                                     ("server", f"{tag}_y", n),
                                     ("server", f"{tag}_anc", 1)])
    claw.apply_register("server", "H", f"{tag}_b")
    claw.apply_register("server", "H", f"{tag}_x")
    claw.xor_function("server", [f"{tag}_b", f"{tag}_x"], f"{tag}_y",
                      instance.image_index)
    y_out = claw.measure("server", f"{tag}_y")
    image_tag = instance.tag_of_index(y_out.value_int)
    ctx.send_classical("server", "client", {"image": image_tag}, 64)
    pair = invert(trapdoor, image_tag)

    r_str = int(ctx.rng.integers(0, 2**n))
    ctx.send_classical("client", "server", {"r": r_str}, n)
    claw.xor_function("server", [f"{tag}_x"], f"{tag}_anc", _block_product(r_str))
    claw.apply_register("server", "H", f"{tag}_b")
    claw.apply_register("server", "H", f"{tag}_x")
    d_b = claw.measure("server", f"{tag}_b").value_int
    d_x = claw.measure("server", f"{tag}_x").value_int
    outcome = format(d_b, "b") + format(d_x, f"0{n}b")
    ctx.send_classical("server", "client", {"d": outcome}, n + 1)

    v0 = bin(pair.x0 & r_str).count("1") & 1
    v1 = bin(pair.x1 & r_str).count("1") & 1
    if v0 == v1:
        predicted = ("z", v0)
    else:
        rel = d_b ^ (bin(d_x & (pair.x0 ^ pair.x1)).count("1") & 1)
        predicted = ("x", rel)
    return claw, pair, r_str, outcome, predicted


def predicted_ancilla_vector(predicted: tuple) -> np.ndarray:
    basis, bit = predicted
    if basis == "z":
        return np.array([1.0, 0.0]) if bit == 0 else np.array([0.0, 1.0])
    sign = 1.0 if bit == 0 else -1.0
    return np.array([1.0, sign]) / math.sqrt(2.0)


def most_likely_bit(predicted: tuple, theta: float) -> int:
    basis = rotated_basis(theta)
    psi = predicted_ancilla_vector(predicted)
    p0 = abs(np.vdot(basis[:, 0], psi)) ** 2
    return 0 if p0 >= 0.5 else 1


# -- stage 3 -------------------------------------------------------------------


def stage3_query(ctx: ProtocolContext, pir: JointState, params: AqpirParams,
                 database: Sequence[int], index: int, instance: TcfInstance,
                 trapdoor: Trapdoor, record: AqpirRunRecord):
    """Phase-imprint the target block, bounce the block qubits, decode R."""
    ell, r = params.ell, params.r
    if not 0 <= index < ell:
        raise DomainError("target index out of range")
    blocks = [int(a) for a in database]

    claw, pair, r_str, outcome, predicted = _claw_round(ctx, instance, trapdoor,
                                                        "claw_main")
    record.claw = pair
    record.d = outcome
    record.predicted_ancilla = predicted

    pir.apply("client", "Z", pir.register(f"Q{index}"))
    ctx.send_qubits(pir, "client", "server",
                    [l for j in range(ell) for l in pir.register(f"Q{j}")])
    ctx.next_round()

    if not ctx.adversary.wants("skip_uncompute"):
        for j, block in enumerate(blocks):
            pir.xor_function("server", ["R"], f"Q{j}", _block_product(block))
    q_bits = [pir.measure("server", f"Q{j}").value_int for j in range(ell)]
    ctx.send_classical("server", "client", {"q_check": q_bits}, ell)
    if any(q_bits):
        record.aborted_at = "q_register_check"
        ctx.abort("q_register_check")
    ctx.send_qubits(pir, "server", "client", pir.register("R"))
    ctx.next_round()

    pir.xor_function("client", ["R"], "Rp", lambda v: v)
    pir.apply_register("client", "H", "R")
    record.decode_probability = pir.state.probability_of("R", blocks[index])
    retrieved = pir.measure("client", "R").value_int
    record.retrieved = retrieved
    return retrieved, claw


# -- stage 4 -------------------------------------------------------------------


def stage4_secondary_verify(ctx: ProtocolContext, params: AqpirParams,
                            instance: TcfInstance, trapdoor: Trapdoor,
                            record: AqpirRunRecord,
                            first_round: tuple | None = None) -> bool:
    """Rotated-basis consistency batch over fresh claw interactions.

    A round is accepted when the returned bit equals the maximum-likelihood
    bit of the predicted ancilla state under the announced angle; the batch
    is accepted at agreement >= stage4_threshold.  An honest server agrees
    with probability cos^2(pi/8) per round, a server holding a substituted
    maximally mixed ancilla with probability 1/2.
    """
    rounds = params.stage4_rounds
    if rounds == 0:
        record.accepted = record.aborted_at is None
        record.stage4_agreement = 1.0
        return record.accepted
    agree = 0
    pending = first_round
    for rnd in range(rounds):
        if pending is not None:
            claw, predicted = pending
            pending = None
        else:
            claw, _, _, _, predicted = _claw_round(ctx, instance, trapdoor,
                                                   f"claw_s4_{rnd}")
        theta = THETA_CHOICES[int(ctx.rng.integers(0, 2))]
        ctx.send_classical("client", "server", {"theta": theta}, 1)
        anc_reg = [n for n in claw.state.registers() if n.endswith("_anc")][0]
        if ctx.adversary.wants("mixed_ancilla"):
            # server discards the ancilla and answers from a fresh mixed qubit
            sub = ctx.new_joint_state(f"sub_{rnd}", [("server", f"m{rnd}", 1)])
            if ctx.rng.integers(0, 2):
                sub.apply("server", "X", [QubitLabel(f"m{rnd}", 0)])
            out = sub.measure_rotated_qubit("server", QubitLabel(f"m{rnd}", 0), theta)
            ctx.drop_state(f"sub_{rnd}")
        else:
            out = claw.measure_rotated_qubit("server",
                                             claw.register(anc_reg)[0], theta)
        bit = int(out.value)
        ctx.send_classical("server", "client", {"bit": bit}, 1)
        record.stage4_theta.append(theta)
        record.stage4_bit.append(bit)
        agree += int(bit == most_likely_bit(predicted, theta))
        ctx.drop_state(claw.name)
    ctx.next_round()
    record.stage4_agreement = agree / rounds
    record.accepted = record.stage4_agreement >= params.stage4_threshold
    return record.accepted


# -- full pipeline --------------------------------------------------------------


@dataclass
class AqpirProtocol:
    params: AqpirParams
    name: str = "aqpir"
    record: AqpirRunRecord = field(default_factory=AqpirRunRecord)
    instance: TcfInstance | None = None
    trapdoor: Trapdoor | None = None

    @property
    def extras(self):
        return {"record": self.record}

    def transcript_summary(self) -> dict:
        rec = self.record
        return {
            "bell_error_rate": rec.bell_error_rate,
            "claw": [rec.claw.x0, rec.claw.x1] if rec.claw else None,
            "d": rec.d,
            "stage4_agreement": rec.stage4_agreement,
            "accepted": rec.accepted,
            "retrieved": rec.retrieved,
        }

    def run(self, ctx: ProtocolContext, database: Sequence[int], index: int):
        self.record = AqpirRunRecord()
        params = self.params
        if self.instance is None:
            self.instance, self.trapdoor = tcf_gen(params.n_tcf, ctx.rng)
        pir, decoys, _ = stage1_prepare(ctx, params, database)
        stage2_bell_verify(ctx, decoys, params, self.record)
        retrieved, claw = stage3_query(ctx, pir, params, database, index,
                                       self.instance, self.trapdoor, self.record)
        first = (claw, self.record.predicted_ancilla)
        stage4_secondary_verify(ctx, params, self.instance, self.trapdoor,
                                self.record, first_round=first)
        return retrieved


def run_aqpir(params: AqpirParams, database: Sequence[int], index: int,
              adversary: AdversaryModel | None = None, rng=0) -> RunResult:
    protocol = AqpirProtocol(params)
    result = run_protocol(protocol, database, index, adversary or honest(), rng)
    result.extras["record"] = protocol.record
    return result


def aqpir_wire_cost(params: AqpirParams, seed: int = 0) -> tuple[int, int]:
    """(qubit, bit) communication of one honest run, counted without states.

    The message sizes are structural, so benchmarks at database sizes whose
    statevector would not fit use this accounting path; only the sampled
    decoy count varies with the seed.
    """
    rng = np.random.default_rng(seed)
    ell, r, k, n = params.ell, params.r, params.k_detect, params.n_tcf
    sampled = int(np.sum(rng.integers(0, 2, k)))
    qubits = (ell + k + r) + sampled + ell + r
    bits = (ell + k) + k + ell  # decoy slots, sample set, q-register check
    per_claw = 64 + n + (n + 1)
    bits += per_claw  # stage-3 claw interaction
    bits += max(params.stage4_rounds - 1, 0) * per_claw
    bits += params.stage4_rounds * 2  # theta out, bit back
    return qubits, bits


# -- privacy view ----------------------------------------------------------------


def aqpir_server_view(params: AqpirParams, database: Sequence[int], index: int,
                      trial: int) -> ViewSample:
    """Server-side view right after stage 3, for the privacy evaluator.

    Runs with a trial-keyed seed shared across indices so server-side
    randomness aligns; the quantum part is the server's reduced state over
    the returned block qubits, the claw machine, and its unsampled decoy
    halves.
    """
    sweep = AqpirParams(
        ell=params.ell, r=params.r, n_tcf=params.n_tcf,
        k_detect=params.k_detect, epsilon_bell=params.epsilon_bell,
        delta=params.delta, stage4_rounds=0,
    )
    ctx = ProtocolContext(np.random.default_rng([7, trial]), honest())
    instance, trapdoor = tcf_gen(sweep.n_tcf, np.random.default_rng([11, trial]))
    record = AqpirRunRecord()
    pir, decoys, _ = stage1_prepare(ctx, sweep, database)
    _, sampled = stage2_bell_verify(ctx, decoys, sweep, record)
    _, claw = stage3_query(ctx, pir, sweep, database, index,
                           instance, trapdoor, record)

    classical = (tuple(sampled), record.d)
    quantum = [pir.reduced([f"Q{j}" for j in range(sweep.ell)]),
               claw.reduced(list(claw.state.registers()))]
    for d_idx, joint in enumerate(decoys):
        if d_idx not in sampled:
            quantum.append(joint.reduced([f"T{d_idx}"]))
    return ViewSample(classical=classical, quantum=quantum)
