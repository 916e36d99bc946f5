import numpy as np
import pytest
from hypothesis import given, strategies as st

from himcsim.bitline import (
    PicOp,
    SenseLevel,
    compute_lanes,
    compute_word,
    decode,
    op_cost,
    sense_pair,
)
from himcsim.device import lookup_params

M32 = 0xFFFFFFFF


def oracle(op, a, b, mask=M32):
    """Plain host-integer semantics, independent of the sensing model."""
    return {
        PicOp.AND: lambda: a & b,
        PicOp.NAND: lambda: ~(a & b) & mask,
        PicOp.OR: lambda: a | b,
        PicOp.NOR: lambda: ~(a | b) & mask,
        PicOp.XOR: lambda: a ^ b,
        PicOp.NOT: lambda: ~a & mask,
        PicOp.ADD: lambda: (a + b) & mask,
    }[op]()


@pytest.mark.parametrize("a,b,level", [(0, 0, SenseLevel.BOTH_ZERO), (1, 0, SenseLevel.MIXED),
                                       (0, 1, SenseLevel.MIXED), (1, 1, SenseLevel.BOTH_ONE)])
def test_sense_pair(a, b, level):
    assert sense_pair(a, b) is level


def test_sense_current_order():
    ranks = [lvl.current_rank for lvl in (SenseLevel.BOTH_ONE, SenseLevel.MIXED, SenseLevel.BOTH_ZERO)]
    assert ranks == sorted(ranks)


def test_sense_pair_rejects_non_bits():
    with pytest.raises(ValueError):
        sense_pair(2, 0)


@pytest.mark.parametrize("op,level,bit", [("And", SenseLevel.MIXED, 0), ("Or", SenseLevel.MIXED, 1),
                                          ("Xor", SenseLevel.BOTH_ONE, 0), ("Xor", SenseLevel.MIXED, 1),
                                          ("And", SenseLevel.BOTH_ONE, 1), ("Or", SenseLevel.BOTH_ZERO, 0)])
def test_decode_truth_table(op, level, bit):
    assert decode(op, level) == bit


@pytest.mark.parametrize("level", list(SenseLevel))
def test_de_morgan_duality(level):
    assert decode(PicOp.NAND, level) == 1 - decode(PicOp.AND, level)
    assert decode(PicOp.NOR, level) == 1 - decode(PicOp.OR, level)


@pytest.mark.parametrize("op", [PicOp.ADD, PicOp.NOT])
def test_decode_rejects_add_and_not(op):
    with pytest.raises(ValueError):
        decode(op, SenseLevel.MIXED)


def test_compute_word_examples():
    assert compute_word(PicOp.AND, 0xF0F0, 0x0FF0, 16) == 0x00F0
    assert compute_word(PicOp.ADD, 7, 9, 32) == 16


def test_compute_word_width_errors():
    with pytest.raises(ValueError):
        compute_word(PicOp.AND, 1, 1, 48)
    with pytest.raises(ValueError):
        compute_word(PicOp.AND, 256, 1, 8)


def test_add_carry_stays_in_lane():
    a = (1 << 32) | M32
    assert compute_word(PicOp.ADD, a, 1, 64) == (1 << 32)


@pytest.mark.parametrize("op", list(PicOp))
def test_exhaustive_8bit(op):
    a, b = np.meshgrid(np.arange(256), np.arange(256))
    assert np.array_equal(compute_word(op, a, b, 8), oracle(op, a, b, 0xFF))


@pytest.mark.parametrize("op", list(PicOp))
def test_random_32bit(op):
    rng = np.random.default_rng(11)
    a = rng.integers(0, 1 << 32, 20_000, dtype=np.int64)
    b = rng.integers(0, 1 << 32, 20_000, dtype=np.int64)
    assert np.array_equal(compute_word(op, a, b, 32), oracle(op, a, b))
    lanes = compute_lanes(op, a.astype(np.uint32), b.astype(np.uint32))
    assert np.array_equal(lanes.astype(np.int64), oracle(op, a, b))


words = st.integers(0, M32)


@given(words, words, words)
def test_add_associative(a, b, c):
    left = compute_word(PicOp.ADD, a, compute_word(PicOp.ADD, b, c, 32), 32)
    right = compute_word(PicOp.ADD, compute_word(PicOp.ADD, a, b, 32), c, 32)
    assert left == right == (a + b + c) & M32


def test_op_cost_examples():
    l2 = lookup_params("L2", "SttRam", "75us")
    c = op_cost(PicOp.ADD, l2, 16)
    assert c.cycles == 15 and c.energy_fj == 16 * 32 * 11437
    l1 = lookup_params("L1", "SttRam", "75us")
    c = op_cost(PicOp.OR, l1, 16)
    assert c.cycles == 3 and c.energy_fj == 16 * 32 * 5376
    mem = lookup_params("Mem", "SttRam", "nonvolatile")
    c = op_cost(PicOp.AND, mem, 256)
    assert c.cycles == 88 and c.energy_fj == 256 * 32 * 666045


@given(st.integers(1, 1024), st.sampled_from(list(PicOp)))
def test_op_cost_scaling(lanes, op):
    p = lookup_params("L1", "SttRam", "75us")
    one, many = op_cost(op, p, 1), op_cost(op, p, lanes)
    assert many.cycles == one.cycles
    assert many.energy_fj == lanes * one.energy_fj
