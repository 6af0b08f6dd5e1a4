"""CHSH game engine: classical and entangled strategies plus the accept test.

The quantum strategy shares a fresh |phi+> pair each round; Alice measures
at angle 0 or pi/2 (for input 0 or 1), Bob at pi/4 or -pi/4, all in the
rotated basis convention of `quantum.measure_rotated`.  Every input pair
then wins with probability cos^2(pi/8) = 1/2 + sqrt(2)/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InsufficientRoundsError
from .quantum import (
    QubitLabel,
    apply_gate,
    bell_pair_state,
    measure_rotated,
)

CLASSICAL_BOUND = 0.75
QUANTUM_WIN_RATE = 0.5 + math.sqrt(2.0) / 4.0

ALICE_ANGLES = (0.0, math.pi / 2.0)
BOB_ANGLES = (math.pi / 4.0, -math.pi / 4.0)

_A = QubitLabel("A", 0)
_B = QubitLabel("B", 0)


@dataclass
class ChshRound:
    x: int
    y: int
    a: int
    b: int

    @property
    def won(self) -> bool:
        return (self.a ^ self.b) == (self.x & self.y)


@dataclass
class ChshStats:
    rounds: int
    wins: int
    strategy: str

    @property
    def win_rate(self) -> float:
        return self.wins / self.rounds


def classical_outputs(x: int, y: int) -> tuple[int, int]:
    """Optimal deterministic strategy: both players always answer 0."""
    return 0, 0


def play_classical(n_rounds: int, rng: np.random.Generator) -> ChshStats:
    if n_rounds < 1:
        raise InsufficientRoundsError("need at least one round")
    inputs = rng.integers(0, 2, size=(n_rounds, 2))
    wins = 0
    for x, y in inputs:
        a, b = classical_outputs(int(x), int(y))
        wins += int((a ^ b) == (x & y))
    return ChshStats(n_rounds, wins, "classical")


def quantum_round(x: int, y: int, rng: np.random.Generator) -> ChshRound:
    """One entangled round on a fresh |phi+>."""
    state = bell_pair_state(_A, _B)
    alice = measure_rotated(state, _A, ALICE_ANGLES[x], rng)
    bob = measure_rotated(alice.post_state, _B, BOB_ANGLES[y], rng)
    return ChshRound(x, y, int(alice.value), int(bob.value))


def play_quantum(n_rounds: int, rng: np.random.Generator) -> ChshStats:
    if n_rounds < 1:
        raise InsufficientRoundsError("need at least one round")
    inputs = rng.integers(0, 2, size=(n_rounds, 2))
    wins = 0
    for x, y in inputs:
        wins += int(quantum_round(int(x), int(y), rng).won)
    return ChshStats(n_rounds, wins, "quantum")


def quantum_win_probability(x: int, y: int) -> float:
    """Analytic per-input win probability of the entangled strategy.

    Computed from Born-rule projector traces, not sampling.
    """
    from .quantum import rotated_basis

    state = bell_pair_state(_A, _B)
    ra = rotated_basis(ALICE_ANGLES[x])
    rb = rotated_basis(BOB_ANGLES[y])
    rotated = apply_gate(apply_gate(state, ra.conj().T, [_A]), rb.conj().T, [_B])
    probs = np.abs(rotated.amplitudes) ** 2
    win = 0.0
    for idx, p in enumerate(probs):
        a, b = (idx >> 1) & 1, idx & 1
        if (a ^ b) == (x & y):
            win += float(p)
    return win


def enumerate_classical_strategies() -> list[float]:
    """Win rates of all 16 deterministic strategy pairs under uniform inputs."""
    rates = []
    for a0, a1, b0, b1 in product((0, 1), repeat=4):
        wins = 0
        for x, y in product((0, 1), repeat=2):
            a = a1 if x else a0
            b = b1 if y else b0
            wins += int((a ^ b) == (x & y))
        rates.append(wins / 4.0)
    return rates


@dataclass
class ThresholdDecision:
    accept: bool
    win_rate: float
    threshold: float
    min_rounds: int
    confidence: float


def threshold_test(
    stats: ChshStats,
    classical_bound: float = CLASSICAL_BOUND,
    required_excess: float = 0.05,
    confidence: float = 0.999,
) -> ThresholdDecision:
    """Accept iff the empirical rate clears the bound by the required excess.

    The one-sided Hoeffding bound P(hat p >= p + t) <= exp(-2 n t^2) fixes
    the minimum sample size for the requested confidence; fewer rounds
    raise InsufficientRoundsError.
    """
    if not 0.0 < confidence < 1.0:
        raise InsufficientRoundsError("confidence must be in (0, 1)")
    if required_excess <= 0.0:
        raise InsufficientRoundsError("required excess must be positive")
    min_rounds = math.ceil(math.log(1.0 / (1.0 - confidence)) / (2.0 * required_excess**2))
    if stats.rounds < min_rounds:
        raise InsufficientRoundsError(
            f"{stats.rounds} rounds < {min_rounds} needed for confidence {confidence}"
        )
    threshold = classical_bound + required_excess
    return ThresholdDecision(
        accept=stats.win_rate >= threshold,
        win_rate=stats.win_rate,
        threshold=threshold,
        min_rounds=min_rounds,
        confidence=confidence,
    )
