"""Set-associative relaxed-retention cache with per-block expiry counters.

Each valid block carries an N-state counter clocked at a fixed period.  The
counter is evaluated lazily from the block's last full write: once it
reaches the flag state (N - 1) the block is written back if dirty and
invalidated, so no block is ever read past N clock periods after its write.

Addresses handed to the public API are byte addresses.  Internally blocks
are identified by ``addr // block_size``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .bitline import LANE_BITS, PicOp, as_op, compute_lanes, op_cost
from .device import ConfigError, DeviceParams

# reported per-block counter area at the default 4-state counter
COUNTER_AREA_FRACTION_N4 = Decimal("0.0078")


class AlignmentViolation(Exception):
    """Operands are not on the same bank/subarray (or retention region)."""


class ExpiredOperand(Exception):
    """An operand is missing or its retention elapsed; it must be refetched."""

    def __init__(self, block: int, reason: str = "expired"):
        super().__init__(f"operand block {block:#x} {reason}")
        self.block = block


class PartialDestination(Exception):
    """A compute destination does not cover a whole block."""


class RequestKind(str, Enum):
    READ = "Read"
    WRITE = "Write"
    PIC = "PicCompute"


@dataclass(frozen=True)
class CounterConfig:
    n_states: int = 4
    clock_period: int = 37_500  # cycles (18.75 us at 2 GHz)

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("n_states must be >= 2")
        if self.clock_period < 1:
            raise ValueError("clock_period must be >= 1 cycle")

    @property
    def flag_state(self) -> int:
        return self.n_states - 1

    @property
    def flag_after(self) -> int:
        """Cycles from a full write until the flag is raised."""
        return self.flag_state * self.clock_period

    @property
    def retention(self) -> int:
        return self.n_states * self.clock_period

    @classmethod
    def from_us(cls, n_states: int, period_us, clock_ghz=2) -> "CounterConfig":
        cycles = Decimal(str(period_us)) * 1000 * Decimal(str(clock_ghz))
        if cycles != cycles.to_integral_value():
            raise ValueError(f"clock period {period_us}us is not a whole number of cycles")
        return cls(n_states, int(cycles))


@dataclass
class BlockState:
    valid: bool = False
    dirty: bool = False
    tag: int = 0
    last_write_tick: int = 0
    home_bank: int = 0
    home_subarray: int = 0
    data: np.ndarray | None = None
    lru: int = 0
    stamp: int = 0  # bumps on every full write; stale heap entries are skipped

    def counter_state(self, now: int, counter: CounterConfig | None) -> int:
        if counter is None or not self.valid:
            return 0
        return min((now - self.last_write_tick) // counter.clock_period, counter.flag_state)


@dataclass(frozen=True)
class CacheRequest:
    kind: RequestKind
    addrs: tuple[int, ...]  # sources for PicCompute, the accessed block otherwise
    op: PicOp | None = None
    dest: int | None = None
    timestamp: int = 0

    def __post_init__(self):
        kind = RequestKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is RequestKind.PIC:
            if self.op is None or self.dest is None:
                raise ValueError("PicCompute needs an op and a destination")
            op = as_op(self.op)
            object.__setattr__(self, "op", op)
            if len(self.addrs) != op.arity:
                raise ValueError(f"{op.value} takes {op.arity} source block(s)")
        elif len(self.addrs) != 1:
            raise ValueError(f"{kind.value} addresses exactly one block")


@dataclass
class CacheEvent:
    """Eviction, expiry or writeback triggered inside the cache."""

    kind: str  # "evict" | "expire" | "writeback"
    block: int
    time: int
    data: np.ndarray | None = None

    def to_record(self) -> dict:
        return {"kind": self.kind, "block": self.block, "time": self.time}


@dataclass
class AccessResult:
    hit: bool
    latency: int
    energy_fj: int = 0
    events: list[CacheEvent] = field(default_factory=list)
    data: np.ndarray | None = None

    @property
    def dynamic_energy(self) -> float:
        """pJ."""
        return self.energy_fj / 1000


@dataclass
class CacheStats:
    reads: int = 0
    writes: int = 0
    hits: int = 0
    misses: int = 0
    pic_ops: int = 0
    evictions: int = 0
    expiries: int = 0
    writebacks: int = 0
    energy_fj: int = 0  # array reads/writes
    compute_fj: int = 0  # bit-line operations


class RetentionCache:
    """One cache level (or one retention region of a level).

    ``counter`` is ``None`` for technologies without retention relaxation.
    With ``functional=False`` block payloads are not stored.
    """

    def __init__(
        self,
        name: str,
        size: int,
        block_size: int,
        associativity: int,
        banks: int,
        subarrays: int,
        params: DeviceParams,
        counter: CounterConfig | None = None,
        *,
        address_space: int = 1 << 32,
        functional: bool = True,
        log: list | None = None,
    ):
        self.name = name
        self.block_size = block_size
        self.associativity = associativity
        self.n_sets = size // (block_size * associativity)
        if self.n_sets < 1:
            raise ConfigError([f"{name}: fewer blocks than ways"])
        self.banks = banks
        self.subarrays = subarrays
        self.params = params
        self.counter = counter
        self.address_space = address_space
        self.functional = functional
        self.log = log
        self.lanes = block_size * 8 // LANE_BITS
        self.block_bits = block_size * 8
        self.sets: list[dict[int, BlockState]] = [dict() for _ in range(self.n_sets)]
        self._expiry: list[tuple[int, int, int]] = []
        self._tick = 0
        self.now = 0
        self.stats = CacheStats()

    @classmethod
    def from_level(cls, name, level_cfg, params, counter=None, **kw) -> "RetentionCache":
        return cls(name, level_cfg.size, level_cfg.block_size, level_cfg.associativity,
                   level_cfg.banks, level_cfg.subarrays, params, counter, **kw)

    # -- address mapping -------------------------------------------------
    def block_of(self, addr: int) -> int:
        if not 0 <= addr < self.address_space:
            raise ConfigError([f"{self.name}: address {addr:#x} outside the mapped space"])
        return addr // self.block_size

    def set_index(self, block: int) -> int:
        return block % self.n_sets

    def home(self, block: int) -> tuple[int, int]:
        """(bank, subarray) holding ``block``."""
        return (block // self.subarrays) % self.banks, block % self.subarrays

    # -- internals -------------------------------------------------------
    def _emit(self, kind: str, **rec) -> None:
        if self.log is not None:
            rec = {"cache": self.name, "kind": kind, **rec}
            self.log.append(rec)

    def _clock(self, now: int) -> list[CacheEvent]:
        # callers inside one simulation never go backwards; clamp defensively
        if now > self.now:
            self.now = now
        return self.advance_clock(self.now)

    def _lookup(self, block: int) -> BlockState | None:
        st = self.sets[self.set_index(block)].get(block)
        return st if st is not None and st.valid else None

    def _touch(self, st: BlockState) -> None:
        self._tick += 1
        st.lru = self._tick

    def _install(self, block: int, data, dirty: bool, now: int) -> tuple[BlockState, list[CacheEvent]]:
        events = []
        ways = self.sets[self.set_index(block)]
        st = ways.get(block)
        if st is None:
            if len(ways) >= self.associativity:
                victim_block = min(ways, key=lambda b: ways[b].lru)
                victim = ways.pop(victim_block)
                self.stats.evictions += 1
                events.append(CacheEvent("evict", victim_block, now))
                if victim.dirty:
                    self.stats.writebacks += 1
                    events.append(CacheEvent("writeback", victim_block, now, victim.data))
                self._emit("evict", block=victim_block, time=now, dirty=victim.dirty)
            bank, sub = self.home(block)
            st = BlockState(tag=block // self.n_sets, home_bank=bank, home_subarray=sub)
            ways[block] = st
        st.valid = True
        st.dirty = dirty
        st.last_write_tick = now
        st.stamp += 1
        if self.functional:
            st.data = None if data is None else np.array(data, dtype=np.uint32)
        self._touch(st)
        if self.counter is not None:
            heapq.heappush(self._expiry, (now + self.counter.flag_after, block, st.stamp))
        return st, events

    # -- public operations ----------------------------------------------
    def advance_clock(self, now: int) -> list[CacheEvent]:
        """Raise expiry flags due at or before ``now``."""
        events: list[CacheEvent] = []
        while self._expiry and self._expiry[0][0] <= now:
            flag_time, block, stamp = heapq.heappop(self._expiry)
            ways = self.sets[self.set_index(block)]
            st = ways.get(block)
            if st is None or not st.valid or st.stamp != stamp:
                continue
            del ways[block]
            self.stats.expiries += 1
            events.append(CacheEvent("expire", block, flag_time))
            if st.dirty:
                self.stats.writebacks += 1
                events.append(CacheEvent("writeback", block, flag_time, st.data))
            self._emit("expire", block=block, time=flag_time, dirty=st.dirty)
        return events

    def contains(self, block: int) -> bool:
        return self._lookup(block) is not None

    def sync(self, now: int) -> list[CacheEvent]:
        """Move the cache clock to ``now``; returns expiry events raised."""
        return self._clock(now)

    def peek(self, block: int) -> BlockState | None:
        """State of ``block`` without advancing time or touching LRU."""
        return self._lookup(block)

    def access(self, req: CacheRequest, now: int, data=None) -> AccessResult:
        """Regular read or full-block write.

        A read miss only probes; if ``data`` (the fill from the next level)
        is given the block is allocated clean and the fill write is charged.
        """
        if req.kind is RequestKind.PIC:
            raise ValueError("use pic_execute for compute requests")
        block = self.block_of(req.addrs[0])
        events = self._clock(now)
        p = self.params
        if req.kind is RequestKind.READ:
            self.stats.reads += 1
            st = self._lookup(block)
            if st is not None:
                self.stats.hits += 1
                self._touch(st)
                energy = self.block_bits * p.energy_fj("read_energy")
                self.stats.energy_fj += energy
                self._emit("read", block=block, time=self.now, hit=True, energy_fj=energy)
                return AccessResult(True, p.read_latency, energy, events,
                                    None if st.data is None else st.data.copy())
            self.stats.misses += 1
            self._emit("read", block=block, time=self.now, hit=False, energy_fj=0)
            res = AccessResult(False, p.read_latency, 0, events)
            if data is not None or not self.functional:
                fill = self.fill(block, data, self.now, dirty=False)
                res.latency += fill.latency
                res.energy_fj += fill.energy_fj
                res.events += fill.events
                res.data = None if data is None else np.array(data, dtype=np.uint32)
            return res
        hit = self._lookup(block) is not None
        self.stats.writes += 1
        self.stats.hits += hit
        self.stats.misses += not hit
        res = self.fill(block, data, self.now, dirty=True)
        res.hit = hit
        res.events = events + res.events
        return res

    def fill(self, block: int, data, now: int, dirty: bool) -> AccessResult:
        """Write a whole block (CPU store, miss fill or compute result)."""
        events = self._clock(now)
        _, evs = self._install(block, data, dirty, self.now)
        energy = self.block_bits * self.params.energy_fj("write_energy")
        self.stats.energy_fj += energy
        self._emit("write", block=block, time=self.now, dirty=dirty, energy_fj=energy)
        return AccessResult(False, self.params.write_latency, energy, events + evs)

    def invalidate(self, block: int) -> BlockState | None:
        """Drop ``block`` without writeback; returns the dropped state."""
        ways = self.sets[self.set_index(block)]
        st = ways.pop(block, None)
        if st is not None and st.valid:
            self._emit("invalidate", block=block, time=self.now)
            return st
        return None

    def mark_clean(self, block: int) -> None:
        st = self._lookup(block)
        if st is not None:
            st.dirty = False

    def check_aligned(self, blocks: Iterable[int]) -> None:
        homes = {self.home(b) for b in blocks}
        if len(homes) > 1:
            raise AlignmentViolation(f"{self.name}: operands span {sorted(homes)}")

    def pic_execute(self, req: CacheRequest, now: int) -> AccessResult:
        """Bit-line compute on resident, aligned source blocks.

        The result is stored as a full dirty block at ``req.dest``.
        """
        if req.kind is not RequestKind.PIC:
            raise ValueError("pic_execute takes a PicCompute request")
        if req.dest % self.block_size:
            raise PartialDestination(f"destination {req.dest:#x} is not block aligned")
        events = self._clock(now)
        srcs = [self.block_of(a) for a in req.addrs]
        states = []
        for b in srcs:
            st = self._lookup(b)
            if st is None:
                raise ExpiredOperand(b, "not resident")
            states.append(st)
        self.check_aligned(srcs)
        result = None
        if self.functional:
            operands = [st.data if st.data is not None else np.zeros(self.lanes, np.uint32) for st in states]
            result = compute_lanes(req.op, *operands)
        for st in states:
            self._touch(st)
        cost = op_cost(req.op, self.params, self.lanes)
        dest = self.block_of(req.dest)
        _, evs = self._install(dest, result, True, self.now)
        self.stats.pic_ops += 1
        self.stats.compute_fj += cost.energy_fj
        self._emit("pic", op=req.op.value, srcs=srcs, dest=dest, time=self.now, energy_fj=cost.energy_fj)
        return AccessResult(True, cost.cycles, cost.energy_fj, events + evs, result)

    def resident_blocks(self) -> list[int]:
        return sorted(b for ways in self.sets for b, st in ways.items() if st.valid)

    def dump_log(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.log or ():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


class MainMemory:
    """Non-volatile backing store; never misses.  Unwritten blocks read as zero."""

    def __init__(self, params: DeviceParams, block_size: int = 64, banks: int = 16,
                 subarrays: int = 16, size: int = 512 * 1024 * 1024, functional: bool = True):
        self.name = "mem"
        self.params = params
        self.block_size = block_size
        self.banks = banks
        self.subarrays = subarrays
        self.size = size
        self.functional = functional
        self.lanes = block_size * 8 // LANE_BITS
        self.block_bits = block_size * 8
        self.blocks: dict[int, np.ndarray] = {}
        self.stats = CacheStats()

    def block_of(self, addr: int) -> int:
        if not 0 <= addr < self.size:
            raise ConfigError([f"mem: address {addr:#x} outside the {self.size}B region"])
        return addr // self.block_size

    def home(self, block: int) -> tuple[int, int]:
        return (block // self.subarrays) % self.banks, block % self.subarrays

    def get(self, block: int) -> np.ndarray:
        data = self.blocks.get(block)
        return np.zeros(self.lanes, np.uint32) if data is None else data.copy()

    def load(self, block: int, data) -> None:
        """Place initial contents without charging anything."""
        if self.functional:
            self.blocks[block] = np.array(data, dtype=np.uint32)

    def read(self, block: int) -> AccessResult:
        energy = self.block_bits * self.params.energy_fj("read_energy")
        self.stats.reads += 1
        self.stats.hits += 1
        self.stats.energy_fj += energy
        return AccessResult(True, self.params.read_latency, energy,
                            data=self.get(block) if self.functional else None)

    def write(self, block: int, data) -> AccessResult:
        energy = self.block_bits * self.params.energy_fj("write_energy")
        self.stats.writes += 1
        self.stats.energy_fj += energy
        if self.functional and data is not None:
            self.blocks[block] = np.array(data, dtype=np.uint32)
        return AccessResult(True, self.params.write_latency, energy)

    def check_aligned(self, blocks: Iterable[int]) -> None:
        homes = {self.home(b) for b in blocks}
        if len(homes) > 1:
            raise AlignmentViolation(f"mem: operands span {sorted(homes)}")

    def pic_execute(self, op: PicOp | str, srcs: list[int], dest: int) -> AccessResult:
        op = as_op(op)
        self.check_aligned(srcs)
        result = compute_lanes(op, *(self.get(b) for b in srcs)) if self.functional else None
        if result is not None:
            self.blocks[dest] = result
        cost = op_cost(op, self.params, self.lanes)
        self.stats.pic_ops += 1
        self.stats.compute_fj += cost.energy_fj
        return AccessResult(True, cost.cycles, cost.energy_fj, data=result)


def counter_overhead_report(counter: CounterConfig | int) -> dict:
    """Counter bits per block and their area share.

    The 4-state counter costs 0.78% of a block; other sizes scale with bits.
    """
    n = counter if isinstance(counter, int) else counter.n_states
    if n < 2:
        raise ValueError("n_states must be >= 2")
    bits = math.ceil(math.log2(n))
    area = COUNTER_AREA_FRACTION_N4 * bits / 2
    return {"bits_per_block": bits, "area_fraction": float(area)}
