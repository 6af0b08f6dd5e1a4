"""Desk-scale simulation laboratory for quantum private information retrieval.

Subpackages:

- quantum: exact statevector/density-matrix core (gates, QFT, measurements)
- metrics: entropies, trace distance, fidelity, Pinsker/Uhlmann checks and
  the relative-entropy communication bound
- tcf: simulation-grade trapdoor claw-free functions
- chsh: CHSH game strategies and the statistical accept test
- runtime: parties, channels, transcripts, adversaries, evaluators
- aqpir / heqpir / multiserver: the retrieval protocols
- cli: command-line front end (`qpirlab ...`)
"""

from .quantum import (
    DensityMatrix,
    MeasurementOutcome,
    QubitLabel,
    StateVector,
    apply_controlled_power,
    apply_gate,
    apply_inverse_qft,
    apply_qft,
    apply_xor_function,
    measure_bell,
    measure_computational,
    measure_rotated,
    new_state,
    partial_trace,
    purify,
)
from .metrics import (
    BoundReport,
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
    communication_bound,
    trace_distance,
    uhlmann_unitary,
    von_neumann_entropy,
)
from .runtime import (
    AdversaryModel,
    Transcript,
    honest,
    intercept_resend,
    phase_tamper,
    run_protocol,
    speciousness_check,
)

__version__ = "0.1.0"
