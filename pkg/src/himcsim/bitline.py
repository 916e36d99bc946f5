"""Bit-line computing: two-word-line sensing and the logic derived from it.

Bit '1' is the anti-parallel (high resistance) state, so two activated
cells holding '1' give the lowest bit-line current.  Every operation below
is evaluated from the three sensed levels; ADD is a per-lane ripple-carry
chain built from the AND/OR/XOR decodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .device import DeviceParams

LANE_BITS = 32


class SenseLevel(IntEnum):
    """Sensed level, valued by the number of '1' cells on the bit-line."""

    BOTH_ZERO = 0  # I_0-0, highest current
    MIXED = 1  # I_1-0 / I_0-1
    BOTH_ONE = 2  # I_1-1, lowest current

    @property
    def current_rank(self) -> int:
        """0 for the lowest current, 2 for the highest."""
        return 2 - int(self)


class PicOp(str, Enum):
    AND = "And"
    NAND = "Nand"
    OR = "Or"
    NOR = "Nor"
    NOT = "Not"
    XOR = "Xor"
    ADD = "Add"

    @property
    def is_logic(self) -> bool:
        return self is not PicOp.ADD

    @property
    def arity(self) -> int:
        return 1 if self is PicOp.NOT else 2


_DECODABLE = (PicOp.AND, PicOp.NAND, PicOp.OR, PicOp.NOR, PicOp.XOR)


def as_op(op: PicOp | str) -> PicOp:
    return op if isinstance(op, PicOp) else PicOp(op)


@dataclass(frozen=True)
class OpCost:
    cycles: int
    energy_fj: int

    @property
    def energy_pj(self) -> float:
        return self.energy_fj / 1000


def sense_pair(bit_a: int, bit_b: int) -> SenseLevel:
    if bit_a not in (0, 1) or bit_b not in (0, 1):
        raise ValueError("sense_pair takes single bits")
    return SenseLevel(bit_a + bit_b)


def decode(op: PicOp | str, level: SenseLevel | int) -> int:
    op = as_op(op)
    if op not in _DECODABLE:
        raise ValueError(f"{op.value} is not decoded from a sensed level")
    return int(_decode_levels(op, np.asarray(int(level), dtype=np.uint8)))


def _decode_levels(op: PicOp, levels: np.ndarray) -> np.ndarray:
    if op is PicOp.AND:
        out = levels == SenseLevel.BOTH_ONE
    elif op is PicOp.NAND:
        out = levels != SenseLevel.BOTH_ONE
    elif op is PicOp.OR:
        out = levels != SenseLevel.BOTH_ZERO
    elif op is PicOp.NOR:
        out = levels == SenseLevel.BOTH_ZERO
    else:
        out = levels == SenseLevel.MIXED
    return out.astype(np.uint8)


def _to_bits(words: np.ndarray) -> np.ndarray:
    """uint32 lanes -> (lanes, 32) bit matrix, LSB first."""
    as_bytes = words.astype("<u4").view(np.uint8).reshape(-1, 4)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")


def _from_bits(bits: np.ndarray) -> np.ndarray:
    packed = np.packbits(bits.astype(np.uint8), axis=1, bitorder="little")
    return packed.reshape(-1).view("<u4").astype(np.uint32)


def _compute_bits(op: PicOp, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Evaluate ``op`` on (lanes, bits) matrices through the sensed levels."""
    if op is PicOp.NOT:
        # single word-line read: second cell held at '0', NOR decode inverts
        levels = a + np.zeros_like(a)
        return _decode_levels(PicOp.NOR, levels)
    levels = a + b
    if op is not PicOp.ADD:
        return _decode_levels(op, levels)
    and_bits = _decode_levels(PicOp.AND, levels)
    or_bits = _decode_levels(PicOp.OR, levels)
    xor_bits = _decode_levels(PicOp.XOR, levels)
    out = np.empty_like(a)
    carry = np.zeros(a.shape[0], dtype=np.uint8)
    for i in range(a.shape[1]):  # ripple, carry never leaves the lane
        out[:, i] = xor_bits[:, i] ^ carry
        carry = and_bits[:, i] | (carry & or_bits[:, i])
    return out


def compute_lanes(op: PicOp | str, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Lane-wise bit-line evaluation over arrays of 32-bit words."""
    op = as_op(op)
    a = np.asarray(a, dtype=np.uint32).reshape(-1)
    if b is None:
        if op is not PicOp.NOT:
            raise ValueError(f"{op.value} needs two operands")
        b = np.zeros_like(a)
    b = np.asarray(b, dtype=np.uint32).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"operand width mismatch: {a.size} vs {b.size} lanes")
    return _from_bits(_compute_bits(op, _to_bits(a), _to_bits(b)))


def compute_word(op: PicOp | str, a, b, width: int):
    """Compute ``op`` over two ``width``-bit vectors given as integers.

    Widths above 32 must be whole 32-bit lanes; narrower widths form a
    single lane (ADD wraps at ``2**width``).  For widths up to 32, ``a``
    and ``b`` may also be integer arrays, evaluated element-wise.
    """
    op = as_op(op)
    if width < 1 or (width > LANE_BITS and width % LANE_BITS):
        raise ValueError(f"width {width} is not a whole number of {LANE_BITS}-bit lanes")
    if op is PicOp.NOT:
        b = 0
    if np.ndim(a) or np.ndim(b):
        if width > LANE_BITS:
            raise ValueError("array operands are limited to one 32-bit lane")
        return _compute_narrow(op, np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64), width)
    limit = 1 << width
    if not 0 <= a < limit or not 0 <= b < limit:
        raise ValueError(f"operand does not fit in {width} bits")
    lane_bits = min(width, LANE_BITS)
    n_lanes = width // lane_bits
    mask = (1 << lane_bits) - 1
    lanes_a = np.array([(a >> (i * lane_bits)) & mask for i in range(n_lanes)], dtype=np.int64)
    lanes_b = np.array([(b >> (i * lane_bits)) & mask for i in range(n_lanes)], dtype=np.int64)
    words = _compute_narrow(op, lanes_a, lanes_b, lane_bits)
    return sum(int(w) << (i * lane_bits) for i, w in enumerate(words))


def _compute_narrow(op: PicOp, a: np.ndarray, b: np.ndarray, width: int) -> np.ndarray:
    a, b = np.broadcast_arrays(a, b)
    if a.size and (a.min() < 0 or b.min() < 0 or a.max() >> width or b.max() >> width):
        raise ValueError(f"operand does not fit in {width} bits")
    shifts = np.arange(width, dtype=np.int64)
    bits_a = ((a.reshape(-1, 1) >> shifts) & 1).astype(np.uint8)
    bits_b = ((b.reshape(-1, 1) >> shifts) & 1).astype(np.uint8)
    out = _compute_bits(op, bits_a, bits_b).astype(np.int64)
    return (out << shifts).sum(axis=1).reshape(a.shape)


def op_cost(op: PicOp | str, params: DeviceParams, lanes: int) -> OpCost:
    """Cycles and energy of one ``op`` over ``lanes`` 32-bit lanes.

    The per-bit compute energy already covers the operand access and the
    result store.
    """
    op = as_op(op)
    if op is PicOp.ADD:
        cycles, per_bit = params.add_op_latency, params.energy_fj("add_energy")
    else:
        cycles, per_bit = params.logic_op_latency, params.energy_fj("logic_energy")
    return OpCost(cycles, lanes * LANE_BITS * per_bit)
