"""Protocol execution fabric: parties, channels, transcripts, adversaries.

A protocol run owns one or more joint statevectors whose qubits are tagged
with a single owning party at any time.  Sending qubits transfers ownership
and gives a channel adversary its chance to tamper; every gate and
measurement checks ownership first.  Transcripts are append-only and
serialize to JSON lines with canonical payload digests, so equal seeds give
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, OwnershipError, UnknownLabelError
from .metrics import Ensemble, BoundReport, communication_bound, trace_norm
from .quantum import (
    DensityMatrix,
    MeasurementOutcome,
    QubitLabel,
    StateVector,
    apply_gate,
    apply_to_register,
    apply_xor_function,
    measure_bell,
    measure_computational,
    measure_rotated,
    new_state,
    partial_trace,
)

# -- transcript ---------------------------------------------------------------


def _canonical_bytes(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def payload_digest(payload) -> str:
    return hashlib.sha256(_canonical_bytes(payload)).hexdigest()


@dataclass
class Message:
    round_index: int
    sender: str
    receiver: str
    kind: str  # "classical" or "quantum"
    size_qubits: int
    size_bits: int
    digest: str
    payload: Any = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "round": self.round_index,
                "sender": self.sender,
                "receiver": self.receiver,
                "kind": self.kind,
                "size_qubits": self.size_qubits,
                "size_bits": self.size_bits,
                "payload_digest": self.digest,
            },
            sort_keys=True,
            separators=(",", ":"),
        )


class Transcript:
    """Ordered protocol messages with cumulative cost counters."""

    def __init__(self):
        self.messages: list[Message] = []
        self.outcome: dict[str, Any] = {}

    def record(self, message: Message):
        self.messages.append(message)

    @property
    def qubit_cost(self) -> int:
        return sum(m.size_qubits for m in self.messages)

    @property
    def classical_cost(self) -> int:
        return sum(m.size_bits for m in self.messages)

    def to_jsonl(self) -> str:
        lines = [m.to_json() for m in self.messages]
        if self.outcome:
            lines.append(json.dumps({"summary": self.outcome}, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def received_by(self, party: str) -> list[Message]:
        return [m for m in self.messages if m.receiver == party]


# -- adversary models ---------------------------------------------------------


@dataclass
class AdversaryModel:
    """Deviation hooks plus the recovery story used by the speciousness check.

    kind selects built-in channel behavior (honest, intercept_resend,
    phase_tamper, specious_copy); params carries protocol-specific deviation
    flags that protocol implementations consult.
    """

    kind: str = "honest"
    params: dict = field(default_factory=dict)
    epsilon: float = 0.0
    memory: list = field(default_factory=list)

    def wants(self, flag: str) -> bool:
        return bool(self.params.get(flag))

    def reset(self):
        self.memory = []


def honest() -> AdversaryModel:
    return AdversaryModel("honest")


def intercept_resend(registers: Sequence[str] | None = None) -> AdversaryModel:
    """Measure every in-flight qubit in the computational basis and resend."""
    return AdversaryModel("intercept_resend", {"registers": list(registers) if registers else None})


def phase_tamper(registers: Sequence[str] | None = None) -> AdversaryModel:
    """Apply Z to in-flight qubits (optionally only named registers)."""
    return AdversaryModel("phase_tamper", {"registers": list(registers) if registers else None})


def specious_copy(recovery: str = "discard_copy") -> AdversaryModel:
    """Copy classical payloads it legitimately receives into local memory."""
    return AdversaryModel("specious_copy", {"recovery": recovery})


# -- protocol context ---------------------------------------------------------


class _Abort(Exception):
    def __init__(self, stage: str):
        self.stage = stage


class JointState:
    """One statevector plus per-qubit ownership, bound to a run context."""

    def __init__(self, ctx: "ProtocolContext", name: str, owners: Sequence[tuple[str, str, int]]):
        self.ctx = ctx
        self.name = name
        self.state = new_state([(reg, count) for _, reg, count in owners], cap=ctx.qubit_cap)
        self.owner: dict[QubitLabel, str] = {}
        for party, reg, count in owners:
            for i in range(count):
                self.owner[QubitLabel(reg, i)] = party

    def _check_owner(self, party: str, labels: Iterable[QubitLabel]):
        for lab in labels:
            holder = self.owner.get(lab)
            if holder is None:
                raise UnknownLabelError(f"unknown label {lab!r}")
            if holder != party:
                raise OwnershipError(f"{party} touched {lab!r} owned by {holder}")

    def register(self, name: str) -> list[QubitLabel]:
        return self.state.register_labels(name)

    def apply(self, party: str, gate, targets: Sequence[QubitLabel], **kw):
        self._check_owner(party, targets)
        self.state = apply_gate(self.state, gate, targets, **kw)

    def apply_register(self, party: str, gate, register: str):
        self._check_owner(party, self.register(register))
        self.state = apply_to_register(self.state, gate, register)

    def xor_function(self, party: str, inputs: Sequence[str], output: str, fn):
        touched = [l for r in list(inputs) + [output] for l in self.register(r)]
        self._check_owner(party, touched)
        self.state = apply_xor_function(self.state, inputs, output, fn)

    def measure(self, party: str, register: str) -> MeasurementOutcome:
        self._check_owner(party, self.register(register))
        out = measure_computational(self.state, register, self.ctx.rng)
        self.state = out.post_state
        return out

    def measure_bell_pair(self, party: str, pair) -> MeasurementOutcome:
        self._check_owner(party, pair)
        out = measure_bell(self.state, tuple(pair), self.ctx.rng)
        self.state = out.post_state
        return out

    def measure_rotated_qubit(self, party: str, qubit: QubitLabel, theta: float) -> MeasurementOutcome:
        self._check_owner(party, [qubit])
        out = measure_rotated(self.state, qubit, theta, self.ctx.rng)
        self.state = out.post_state
        return out

    def reduced(self, registers: Sequence[str]) -> DensityMatrix:
        return partial_trace(self.state, registers)

    def holdings(self, party: str) -> list[QubitLabel]:
        return [lab for lab in self.state.labels if self.owner[lab] == party]


class ProtocolContext:
    """Channel fabric for one run: states, transcript, rng, adversary."""

    def __init__(self, rng: np.random.Generator, adversary: AdversaryModel | None = None,
                 qubit_cap: int = 24):
        self.rng = rng
        self.adversary = adversary or honest()
        self.transcript = Transcript()
        self.qubit_cap = qubit_cap
        self.round_index = 0
        self.states: dict[str, JointState] = {}
        self.views: dict[str, list[DensityMatrix]] = {}
        self.checkpoints: list[dict[str, np.ndarray]] = []

    def new_joint_state(self, name: str, owners: Sequence[tuple[str, str, int]]) -> JointState:
        if name in self.states:
            raise DomainError(f"joint state {name!r} already exists")
        joint = JointState(self, name, owners)
        self.states[name] = joint
        return joint

    def drop_state(self, name: str):
        self.states.pop(name, None)

    def next_round(self):
        self.round_index += 1

    def checkpoint(self):
        self.checkpoints.append(
            {name: joint.state.amplitudes.copy() for name, joint in self.states.items()}
        )

    def abort(self, stage: str):
        raise _Abort(stage)

    # channel operations ----------------------------------------------------

    def send_classical(self, sender: str, receiver: str, payload, bits: int):
        if self.adversary.kind == "specious_copy" and receiver != "client":
            self.adversary.memory.append(payload)
        self.transcript.record(
            Message(self.round_index, sender, receiver, "classical", 0, bits,
                    payload_digest(payload), payload)
        )
        self.checkpoint()
        return payload

    def send_qubits(self, joint: JointState, sender: str, receiver: str,
                    labels: Sequence[QubitLabel]):
        joint._check_owner(sender, labels)
        self._channel_tamper(joint, labels)
        for lab in labels:
            joint.owner[lab] = receiver
        payload = [[lab.register, lab.index] for lab in labels]
        self.transcript.record(
            Message(self.round_index, sender, receiver, "quantum", len(labels), 0,
                    payload_digest(payload), payload)
        )
        self.checkpoint()

    def _channel_tamper(self, joint: JointState, labels: Sequence[QubitLabel]):
        kind = self.adversary.kind
        if kind not in ("intercept_resend", "phase_tamper"):
            return
        targets = self.adversary.params.get("registers")
        hit = [l for l in labels if targets is None or l.register in targets]
        for lab in hit:
            if kind == "phase_tamper":
                joint.state = apply_gate(joint.state, "Z", [lab])
            else:
                out = _measure_single_qubit(joint.state, lab, self.rng)
                joint.state = out.post_state

    def record_view(self, party: str, parts: Sequence[DensityMatrix]):
        self.views.setdefault(party, []).extend(parts)


def _measure_single_qubit(state: StateVector, lab: QubitLabel, rng) -> MeasurementOutcome:
    from .quantum import _project_register, _register_probabilities

    positions = state.positions([lab])
    probs = _register_probabilities(state.amplitudes, state.num_qubits, positions)
    value = int(rng.choice(2, p=probs / probs.sum()))
    p = float(probs[value])
    post = _project_register(state, positions, value, p)
    return MeasurementOutcome(str(value), p, post)


# -- run results --------------------------------------------------------------


@dataclass
class RunResult:
    value: Any
    transcript: Transcript
    aborted_at: str | None = None
    states: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    views: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.aborted_at is not None


def run_protocol(protocol, database, target_index, adversary: AdversaryModel | None,
                 rng: np.random.Generator | int) -> RunResult:
    """Execute a protocol through the channel fabric; deterministic per seed.

    Abort is returned as a result value carrying the detecting stage, never
    raised across the API boundary.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    adversary = adversary or honest()
    adversary.reset()
    ctx = ProtocolContext(rng, adversary)
    try:
        value = protocol.run(ctx, database, target_index)
        aborted_at = None
    except _Abort as signal:
        value = None
        aborted_at = signal.stage
    ctx.transcript.outcome = {
        "result": _jsonable(value),
        "qubit_cost": ctx.transcript.qubit_cost,
        "classical_cost": ctx.transcript.classical_cost,
        "aborted_at": aborted_at,
    }
    if hasattr(protocol, "transcript_summary"):
        ctx.transcript.outcome.update(protocol.transcript_summary())
    return RunResult(
        value,
        ctx.transcript,
        aborted_at,
        {name: joint.state for name, joint in ctx.states.items()},
        getattr(protocol, "extras", {}) or {},
        ctx.views,
    )


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# -- baseline protocols -------------------------------------------------------


class BaselineSendAll:
    """Trivial oracle: the server ships the whole database."""

    name = "baseline"

    def run(self, ctx: ProtocolContext, database: Sequence[int], index: int):
        bits = list(int(b) for b in database)
        if not 0 <= index < len(bits):
            raise DomainError("index out of range")
        ctx.send_classical("server", "client", bits, len(bits))
        ctx.next_round()
        return bits[index]


class CleartextIndex:
    """Strawman with no privacy: the client sends the index in the clear."""

    name = "cleartext"

    def run(self, ctx: ProtocolContext, database: Sequence[int], index: int):
        bits = list(int(b) for b in database)
        if not 0 <= index < len(bits):
            raise DomainError("index out of range")
        width = max(1, (len(bits) - 1).bit_length())
        ctx.send_classical("client", "server", int(index), width)
        ctx.next_round()
        ctx.send_classical("server", "client", bits[index], 1)
        return bits[index]


# -- speciousness -------------------------------------------------------------


@dataclass
class SpeciousnessReport:
    max_round_distance: float
    passed: bool
    per_round: list[float]


def speciousness_check(protocol, database, target_index, adversary: AdversaryModel,
                       epsilon: float, seed: int = 0) -> SpeciousnessReport:
    """Compare honest and deviated runs round by round (same seed).

    The deviated run's recovery map is applied before comparison: the
    declared recovery "discard_copy" drops the adversary's copied classical
    memory; "identity" keeps everything.  Quantum checkpoints are compared
    as pure states; differing classical memory after recovery counts as
    distance 1.
    """
    honest_run = _run_with_checkpoints(protocol, database, target_index, honest(), seed)
    deviated_run = _run_with_checkpoints(protocol, database, target_index, adversary, seed)
    honest_ckpts, _ = honest_run
    dev_ckpts, dev_memory = deviated_run

    recovery = adversary.params.get("recovery", "identity")
    if recovery == "discard_copy":
        dev_memory = []

    per_round = []
    rounds = max(len(honest_ckpts), len(dev_ckpts))
    for r in range(rounds):
        if r >= len(honest_ckpts) or r >= len(dev_ckpts):
            per_round.append(1.0)
            continue
        h, d = honest_ckpts[r], dev_ckpts[r]
        dist = 0.0
        for name in set(h) | set(d):
            if name not in h or name not in d or h[name].shape != d[name].shape:
                dist = max(dist, 1.0)
                continue
            overlap = abs(np.vdot(h[name], d[name])) ** 2
            gap = math.sqrt(max(0.0, 1.0 - overlap))
            if gap < 1e-6:  # double-precision noise floor of the overlap
                gap = 0.0
            dist = max(dist, gap)
        per_round.append(dist)
    memory_penalty = 1.0 if dev_memory else 0.0
    worst = max(per_round + [memory_penalty]) if (per_round or memory_penalty) else 0.0
    return SpeciousnessReport(worst, worst <= epsilon + 1e-9, per_round)


def _run_with_checkpoints(protocol, database, target_index, adversary, seed):
    rng = np.random.default_rng(seed)
    adversary.reset()
    ctx = ProtocolContext(rng, adversary)
    try:
        protocol.run(ctx, database, target_index)
    except _Abort:
        pass
    return ctx.checkpoints, list(adversary.memory)


# -- adversary views and privacy ----------------------------------------------


@dataclass
class ViewSample:
    """One run's view of a role: hashable classical part + DM factors."""

    classical: Any
    quantum: list


@dataclass
class AdversaryView:
    """Distribution over classical outcomes with per-outcome quantum factors."""

    outcomes: dict

    @staticmethod
    def from_samples(samples: Sequence[ViewSample]) -> "AdversaryView":
        buckets: dict[Any, list] = {}
        for s in samples:
            buckets.setdefault(s.classical, []).append(s.quantum)
        total = len(samples)
        outcomes = {}
        for key, runs in buckets.items():
            prob = len(runs) / total
            n_factors = len(runs[0])
            factors = []
            for f in range(n_factors):
                mats = [np.asarray(r[f].matrix if hasattr(r[f], "matrix") else r[f]) for r in runs]
                factors.append(sum(mats) / len(mats))
            outcomes[key] = (prob, factors)
        return AdversaryView(outcomes)


def view_distance_upper(v1: AdversaryView, v2: AdversaryView) -> float:
    """Sound upper bound on the trace distance of two cq views.

    Exact (= 0) when the views coincide; otherwise bounds the distance via
    || p rho - q sigma ||_1 <= |p - q| + min(p, q) sum_f || rho_f - sigma_f ||_1.
    """
    keys = set(v1.outcomes) | set(v2.outcomes)
    total = 0.0
    for key in keys:
        p1, f1 = v1.outcomes.get(key, (0.0, None))
        p2, f2 = v2.outcomes.get(key, (0.0, None))
        if f1 is None or f2 is None:
            total += abs(p1 - p2)
            continue
        quantum_gap = sum(trace_norm(a, b) for a, b in zip(f1, f2))
        total += abs(p1 - p2) + min(p1, p2) * quantum_gap
    return 0.5 * total


@dataclass
class PrivacyReport:
    distances: dict
    max_distance: float
    epsilon: float
    passed: bool
    trials_per_index: int


def privacy_report(view_fn: Callable[[int, int], ViewSample], indices: Sequence[int],
                   epsilon: float, trials: int) -> PrivacyReport:
    """Build per-index adversary views and compare them pairwise.

    `view_fn(index, trial)` must be deterministic in its arguments; trials
    enumerate protocol randomness (exhaustively or by seeded sampling).
    Pass iff the worst pairwise distance is at most 2 * epsilon.
    """
    views = {
        i: AdversaryView.from_samples([view_fn(i, t) for t in range(trials)])
        for i in indices
    }
    distances = {}
    worst = 0.0
    idx = list(indices)
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            d = view_distance_upper(views[idx[a]], views[idx[b]])
            distances[(idx[a], idx[b])] = d
            worst = max(worst, d)
    return PrivacyReport(distances, worst, epsilon, worst <= 2 * epsilon + 1e-9, trials)


# -- correctness ---------------------------------------------------------------


@dataclass
class CorrectnessReport:
    min_success: float
    delta: float
    passed: bool
    cases: int


def correctness_report(success_fn: Callable[[Any, Any], float],
                       inputs: Sequence[tuple], delta: float) -> CorrectnessReport:
    """Minimum success probability over the given (database, index) inputs.

    `success_fn` returns the exact or estimated probability that the run
    retrieves the correct entry.
    """
    worst = 1.0
    for database, index in inputs:
        worst = min(worst, success_fn(database, index))
    return CorrectnessReport(worst, delta, worst >= 1.0 - delta, len(inputs))


# -- collusion (cube scheme) ---------------------------------------------------


@dataclass
class CollusionReport:
    exposed_components: int
    dimension: int
    success_rate: float
    bound: float
    within_bound: bool
    trials: int


def collusion_report(ell: int, d: int, coalition: Sequence[str], trials: int,
                     rng: np.random.Generator | int) -> CollusionReport:
    """Empirical best-guess success of a cube-scheme coalition.

    The coalition exposes exactly the index components on which its members'
    server labels disagree; for the rest its best strategy is a uniform
    guess of the membership bit, so success should track 2^-(d - t).
    """
    from .multiserver import coalition_guess_success

    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    exposed = _exposed_components(coalition, d)
    t = len(exposed)
    rate = coalition_guess_success(ell, d, coalition, trials, rng)
    bound = 2.0 ** (-(d - t))
    sigma = math.sqrt(bound * (1 - bound) / trials) if trials else 0.0
    return CollusionReport(t, d, rate, bound, rate <= bound + 3 * sigma + 1e-12, trials)


def _exposed_components(coalition: Sequence[str], d: int) -> set[int]:
    exposed = set()
    for j in range(d):
        bits = {sigma[j] for sigma in coalition}
        if len(bits) > 1:
            exposed.add(j)
    return exposed


# -- bound integration ---------------------------------------------------------


def baseline_bound_check(n: int, seed: int = 0) -> BoundReport:
    """Send-everything baseline versus the relative-entropy lower bound.

    The server's view is index-independent, so the bound equals n exactly,
    and the measured cost of shipping n bits meets it.
    """
    database = [int(b) for b in np.random.default_rng(seed).integers(0, 2, n)]
    result = run_protocol(BaselineSendAll(), database, 0, honest(), seed)
    cost = result.transcript.qubit_cost + result.transcript.classical_cost
    # the server receives nothing, so its view per index is the same trivial state
    empty_view = np.array([[1.0]], dtype=complex)
    ensemble = Ensemble([empty_view.copy() for _ in range(n)])
    return communication_bound(ensemble, n, measured_cost=cost)
