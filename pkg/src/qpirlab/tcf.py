"""Simulation-grade trapdoor claw-free function family.

The construction is a secret random injection T over Z_{2^n} composed with
an additive shift: f_b(x) = T((x + b*s) mod 2^n).  Every image point has
exactly one preimage per branch, and the pair differs across the branch
bit.  Claw-freeness holds only against the capability-restricted simulated
server: the server-side surface exposes forward evaluation and an opaque
image index, never the shift or the inverse table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, DomainError, ResourceLimitError
from .quantum import StateVector, apply_to_register, apply_xor_function, new_state

MAX_DOMAIN_BITS = 12


@dataclass(frozen=True)
class ClawPair:
    """Preimage pair (x0, x1) with f_0(x0) = f_1(x1) = image."""

    x0: int
    x1: int
    image: int


@dataclass
class Trapdoor:
    """Secret shift plus the image -> claw inverse table."""

    domain_bits: int
    shift: int
    _inverse: dict[int, ClawPair]

    def invert(self, y: int) -> ClawPair:
        if y not in self._inverse:
            raise DomainError(f"{y:#x} is not in the image")
        return self._inverse[y]


class TcfInstance:
    """Server-facing oracle: forward evaluation over opaque image handles.

    Image handles are random 64-bit tags.  `image_index` gives the rank of
    a tag in the sorted tag list, a compact opaque alias used to hold the
    image in a quantum register.
    """

    def __init__(self, domain_bits: int, shift: int, tags: np.ndarray):
        self.domain_bits = domain_bits
        self._shift = shift
        self._tags = tags  # tags[w] = T(w), the secret injection
        order = np.argsort(tags)
        self._rank = np.empty_like(order)
        self._rank[order] = np.arange(len(order))
        self._sorted_tags = tags[order]

    @property
    def domain_size(self) -> int:
        return 1 << self.domain_bits

    def eval(self, b: int, x: int) -> int:
        """f_b(x) as an opaque 64-bit tag."""
        if b not in (0, 1):
            raise DomainError("branch bit must be 0 or 1")
        if not 0 <= x < self.domain_size:
            raise DomainError(f"x = {x} outside domain of {self.domain_bits} bits")
        w = (x + b * self._shift) % self.domain_size
        return int(self._tags[w])

    def image_index(self, b: int, x: int) -> int:
        """Rank of eval(b, x) among all tags; opaque like the tag itself."""
        if b not in (0, 1):
            raise DomainError("branch bit must be 0 or 1")
        if not 0 <= x < self.domain_size:
            raise DomainError(f"x = {x} outside domain of {self.domain_bits} bits")
        w = (x + b * self._shift) % self.domain_size
        return int(self._rank[w])

    def tag_of_index(self, idx: int) -> int:
        if not 0 <= idx < self.domain_size:
            raise DomainError("image index out of range")
        return int(self._sorted_tags[idx])

    @property
    def trapdoor(self):
        raise CapabilityError("the evaluation oracle does not carry the trapdoor")

    @property
    def shift(self):
        raise CapabilityError("the shift is part of the trapdoor")


def build(domain_bits: int, shift: int, rng: np.random.Generator) -> tuple[TcfInstance, Trapdoor]:
    """Construct an instance with an explicit shift (tests force claws with it)."""
    if not 1 <= domain_bits <= MAX_DOMAIN_BITS:
        raise DomainError(f"domain bits must be in [1, {MAX_DOMAIN_BITS}]")
    size = 1 << domain_bits
    shift %= size
    tags = np.zeros(size, dtype=np.int64)
    seen = set()
    for w in range(size):
        t = int(rng.integers(0, 2**63))
        while t in seen:
            t = int(rng.integers(0, 2**63))
        seen.add(t)
        tags[w] = t
    instance = TcfInstance(domain_bits, shift, tags)
    inverse = {}
    for w in range(size):
        x0 = w
        x1 = (w - shift) % size
        inverse[int(tags[w])] = ClawPair(x0, x1, int(tags[w]))
    return instance, Trapdoor(domain_bits, shift, inverse)


def gen(domain_bits: int, rng: np.random.Generator) -> tuple[TcfInstance, Trapdoor]:
    """Sample a fresh instance: random injection, random nonzero shift."""
    if not 1 <= domain_bits <= MAX_DOMAIN_BITS:
        raise DomainError(f"domain bits must be in [1, {MAX_DOMAIN_BITS}]")
    size = 1 << domain_bits
    shift = int(rng.integers(1, size)) if size > 1 else 1
    return build(domain_bits, shift, rng)


def eval_tcf(instance: TcfInstance, b: int, x: int) -> int:
    return instance.eval(b, x)


def invert(trapdoor: Trapdoor, y: int) -> ClawPair:
    """Recover the unique claw of an image handle."""
    return trapdoor.invert(y)


def prepare_claw_superposition(
    instance: TcfInstance, *, cap: int = 24
) -> StateVector:
    """(1/sqrt(2^(n+1))) sum_{b,x} |b, x>|f_b(x)> over registers (b, x, y).

    Measuring y collapses (b, x) onto the claw of the observed image; the
    y register holds the compact image index rather than the 64-bit tag.
    """
    n = instance.domain_bits
    if 2 * n + 1 > cap:
        raise ResourceLimitError("claw superposition exceeds qubit cap")
    state = new_state([("b", 1), ("x", n), ("y", n)], cap=cap)
    state = apply_to_register(state, "H", "b")
    state = apply_to_register(state, "H", "x")
    return apply_xor_function(state, ["b", "x"], "y", instance.image_index)
