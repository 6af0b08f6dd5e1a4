"""Trapdoor claw-free family: claw structure, inversion, oracle hiding."""

import math
from collections import Counter

import numpy as np
import pytest

from qpirlab.errors import CapabilityError, DomainError
from qpirlab.quantum import measure_computational
from qpirlab.tcf import build, gen, invert, prepare_claw_superposition


def test_forced_shift_claws_n1():
    instance, trapdoor = build(1, 1, np.random.default_rng(0))
    y0 = instance.eval(0, 0)
    claw = invert(trapdoor, y0)
    assert (claw.x0, claw.x1) == (0, 1)
    y1 = instance.eval(0, 1)
    claw = invert(trapdoor, y1)
    assert (claw.x0, claw.x1) == (1, 0)


def test_construction_identity():
    # eval(0, x) == eval(1, (x - s) mod 2^n) by construction
    for n, s in [(2, 1), (3, 5), (4, 7)]:
        instance, _ = build(n, s, np.random.default_rng(n))
        size = 2**n
        for x in range(size):
            assert instance.eval(0, x) == instance.eval(1, (x - s) % size)


def test_invert_consistency_forced_shift():
    instance, trapdoor = build(2, 3, np.random.default_rng(5))
    claw = invert(trapdoor, instance.eval(1, 0))
    assert claw.x1 == 0
    assert claw.x0 == (0 + 3) % 4


def test_invert_of_branch0_eval():
    instance, trapdoor = gen(3, np.random.default_rng(2))
    for x in range(8):
        claw = invert(trapdoor, instance.eval(0, x))
        assert claw.x0 == x
        assert instance.eval(0, claw.x0) == instance.eval(1, claw.x1)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_two_to_one_exhaustive(n):
    instance, _ = gen(n, np.random.default_rng(n + 1))
    hist = Counter()
    for b in (0, 1):
        for x in range(2**n):
            hist[instance.eval(b, x)] += 1
    assert len(hist) == 2**n
    assert all(count == 2 for count in hist.values())
    # per-branch injectivity
    branch0 = {instance.eval(0, x) for x in range(2**n)}
    assert len(branch0) == 2**n


def test_trapdoor_roundtrip_exhaustive():
    for n in (2, 3, 4):
        instance, trapdoor = gen(n, np.random.default_rng(n + 20))
        for x in range(2**n):
            for b in (0, 1):
                y = instance.eval(b, x)
                claw = invert(trapdoor, y)
                assert instance.eval(0, claw.x0) == y
                assert instance.eval(1, claw.x1) == y
                assert (claw.x0, claw.x1)[b] == x


def test_invert_unknown_image():
    _, trapdoor = gen(2, np.random.default_rng(1))
    with pytest.raises(DomainError):
        invert(trapdoor, 123456789)


def test_oracle_hides_trapdoor():
    instance, trapdoor = gen(3, np.random.default_rng(9))
    with pytest.raises(CapabilityError):
        instance.trapdoor
    with pytest.raises(CapabilityError):
        instance.shift
    # the trapdoor object itself is a separate value the server never receives
    assert trapdoor.shift is not None


def test_domain_validation():
    instance, _ = gen(2, np.random.default_rng(3))
    with pytest.raises(DomainError):
        instance.eval(2, 0)
    with pytest.raises(DomainError):
        instance.eval(0, 4)
    with pytest.raises(DomainError):
        gen(0, np.random.default_rng(0))
    with pytest.raises(DomainError):
        gen(13, np.random.default_rng(0))


def test_claw_superposition_norm_and_uniformity():
    instance, _ = gen(2, np.random.default_rng(4))
    state = prepare_claw_superposition(instance)
    assert abs(state.norm() - 1.0) < 1e-9
    probs = np.abs(state.amplitudes) ** 2
    support = probs[probs > 1e-12]
    assert len(support) == 8  # 2^(n+1) basis points, one image index each
    assert np.allclose(support, 1 / 8, atol=1e-9)


def test_claw_superposition_collapse():
    instance, trapdoor = gen(2, np.random.default_rng(6))
    for seed in range(6):
        state = prepare_claw_superposition(instance)
        out = measure_computational(state, "y", np.random.default_rng(seed))
        y_idx = out.value_int
        claw = invert(trapdoor, instance.tag_of_index(y_idx))
        # post state supported exactly on (b=0, x0) and (b=1, x1)
        post = out.post_state
        n = instance.domain_bits
        amplitudes = post.amplitudes.reshape(2, 2**n, 2**n)
        nonzero = np.argwhere(np.abs(amplitudes) > 1e-12)
        points = {(int(b), int(x)) for b, x, _ in nonzero}
        assert points == {(0, claw.x0), (1, claw.x1)}
        for b, x, y in nonzero:
            assert abs(abs(amplitudes[b, x, y]) - 1 / math.sqrt(2)) < 1e-9
