"""Dual-retention cache banks steered by a per-block latch, and the
controller that dispatches pending bit-line instructions.

Latch value 0 names the high-retention bank (CPU data), 1 names the
low-retention bank (compute operands and results).  The latch only changes
when a block is written.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Protocol

import numpy as np

from .cache import (
    AccessResult,
    CacheEvent,
    CacheRequest,
    CounterConfig,
    ExpiredOperand,
    RequestKind,
    RetentionCache,
)
from .chaining import InstructionTable, PicEntry
from .device import DeviceParams


class Bank(IntEnum):
    HIGH = 0
    LOW = 1


class WrongBank(ExpiredOperand):
    """Operand sits in the high-retention bank and must be transferred first."""


class HeteroCache:
    """Two retention regions sharing one address map.

    Each region holds half the capacity with the same bank/subarray layout.
    With ``demote_on_expiry`` a dirty low-bank block whose retention counter
    flags is moved into the high bank (read + write, latch back to high)
    instead of being written back to the next level.
    """

    def __init__(
        self,
        name: str,
        size: int,
        block_size: int,
        associativity: int,
        banks: int,
        subarrays: int,
        high_params: DeviceParams,
        low_params: DeviceParams,
        high_counter: CounterConfig | None,
        low_counter: CounterConfig | None,
        *,
        functional: bool = True,
        log: list | None = None,
        demote_on_expiry: bool = True,
    ):
        self.name = name
        self.demote_on_expiry = demote_on_expiry
        self.demotions = 0
        half = size // 2
        self.regions = {
            Bank.HIGH: RetentionCache(f"{name}_high", half, block_size, associativity, banks,
                                      subarrays, high_params, high_counter,
                                      functional=functional, log=log),
            Bank.LOW: RetentionCache(f"{name}_low", half, block_size, associativity, banks,
                                     subarrays, low_params, low_counter,
                                     functional=functional, log=log),
        }
        self.block_size = block_size
        self.lanes = block_size * 8 // 32
        self.latch: dict[int, Bank] = {}
        self.log = log
        self.transfers = 0
        self.latch_flips = 0

    @property
    def high(self) -> RetentionCache:
        return self.regions[Bank.HIGH]

    @property
    def low(self) -> RetentionCache:
        return self.regions[Bank.LOW]

    def home(self, block: int) -> tuple[int, int]:
        return self.high.home(block)

    def resolve_bank(self, block: int) -> Bank:
        """Bank a read of ``block`` is steered to (pure)."""
        return self.latch.get(block, Bank.HIGH)

    def _set_latch(self, block: int, bank: Bank, now: int) -> None:
        if self.resolve_bank(block) != bank:
            self.latch_flips += 1
            if self.log is not None:
                self.log.append({"cache": self.name, "kind": "latch", "block": block,
                                 "bank": int(bank), "time": now})
        if bank is Bank.HIGH:
            self.latch.pop(block, None)  # high is the reset value
        else:
            self.latch[block] = bank

    def sync(self, now: int) -> list[CacheEvent]:
        events = self.high.sync(now)
        return events + self._demote(self.low.sync(now), now)

    def _demote(self, events: list[CacheEvent], now: int) -> list[CacheEvent]:
        if not self.demote_on_expiry:
            return events
        out: list[CacheEvent] = []
        expired = set()
        for ev in events:
            if ev.kind == "expire":
                expired.add(ev.block)
            if ev.kind != "writeback" or ev.block not in expired:
                out.append(ev)
                continue
            # the low copy is gone already; charge its read-out and refill high
            self.low.stats.writebacks -= 1
            self.low.stats.energy_fj += self.low.block_bits * self.low.params.energy_fj("read_energy")
            self._set_latch(ev.block, Bank.HIGH, now)
            res = self.high.fill(ev.block, ev.data, now, dirty=True)
            self.demotions += 1
            if self.log is not None:
                self.log.append({"cache": self.name, "kind": "demote", "block": ev.block, "time": now})
            out.extend(res.events)
        return out

    def contains(self, block: int) -> bool:
        return self.regions[self.resolve_bank(block)].contains(block)

    def peek(self, block: int):
        return self.regions[self.resolve_bank(block)].peek(block)

    def resident_in(self, block: int) -> Bank | None:
        for bank, region in self.regions.items():
            if region.contains(block):
                return bank
        return None

    def read(self, block: int, now: int) -> AccessResult:
        events = self.sync(now)
        region = self.regions[self.resolve_bank(block)]
        res = region.access(CacheRequest(RequestKind.READ, (block * self.block_size,)), now)
        res.events = events + res.events
        return res

    def write_with_retention(self, block: int, retention_bit: int, now: int, data=None,
                             dirty: bool = True) -> AccessResult:
        """Full-block write into the bank named by ``retention_bit``."""
        bank = Bank(retention_bit)
        events = self.sync(now)
        self.regions[Bank(1 - bank)].invalidate(block)
        self._set_latch(block, bank, now)
        res = self.regions[bank].fill(block, data, now, dirty=dirty)
        res.events = events + res.events
        return res

    def store_pim_write(self, block: int, data, now: int) -> AccessResult:
        return self.write_with_retention(block, Bank.LOW, now, data)

    def transfer_to_low_bank(self, block: int, now: int) -> AccessResult:
        """Move a high-bank block to the low bank (read + write)."""
        events = self.sync(now)
        if self.low.contains(block):
            return AccessResult(True, 0, 0, events)
        st = self.high.peek(block)
        if st is None:
            raise ExpiredOperand(block, "not resident in either bank")
        rd = self.high.access(CacheRequest(RequestKind.READ, (block * self.block_size,)), now)
        self.high.invalidate(block)
        self._set_latch(block, Bank.LOW, now)
        wr = self.low.fill(block, rd.data, now, dirty=st.dirty)
        self.transfers += 1
        if self.log is not None:
            self.log.append({"cache": self.name, "kind": "transfer", "block": block, "time": now})
        return AccessResult(True, rd.latency + wr.latency, rd.energy_fj + wr.energy_fj,
                            events + rd.events + wr.events, rd.data)

    def invalidate(self, block: int):
        st = None
        for region in self.regions.values():
            st = region.invalidate(block) or st
        self.latch.pop(block, None)
        return st

    def mark_clean(self, block: int) -> None:
        for region in self.regions.values():
            region.mark_clean(block)

    def pic_execute(self, req: CacheRequest, now: int) -> AccessResult:
        """Compute in the low bank; every operand must already live there."""
        events = self.sync(now)
        srcs = [a // self.block_size for a in req.addrs]
        for b in srcs:
            if self.resolve_bank(b) is not Bank.LOW:
                raise WrongBank(b, "is in the high-retention bank")
        dest = req.dest // self.block_size
        self.high.invalidate(dest)
        self._set_latch(dest, Bank.LOW, now)
        res = self.low.pic_execute(req, now)
        res.events = events + res.events
        return res


# ---------------------------------------------------------------------------
# controller
# ---------------------------------------------------------------------------


class ComputeLevel(Protocol):
    """What the controller needs from the level hosting the compute units."""

    lanes: int  # 32-bit compute lanes

    def operand_ready(self, block: int) -> bool: ...

    def prepare(self, block: int, now: int) -> tuple[int, int]:
        """Start moving ``block`` into place.

        Returns (cycles until the data reaches the level's fill port, cycles
        the port is then occupied).
        """

    def execute(self, entry: PicEntry, now: int) -> AccessResult: ...


@dataclass
class WaveRecord:
    start: int
    end: int
    entries: list[int]


@dataclass
class PicController:
    """Dispatches table entries in waves of ``lanes // block_lanes`` blocks.

    Ready entries launch in FIFO order; an entry whose operands are not in
    place gets its transfers/fetches issued and is skipped so later ready
    entries are not held behind it.  The scan window is the table capacity.
    """

    level: ComputeLevel
    table: InstructionTable
    block_lanes: int = 16
    busy_until: int = 0
    port_free: int = 0
    prepping: dict[int, int] = field(default_factory=dict)  # block -> arrival time
    inflight: list[PicEntry] = field(default_factory=list)
    waves: list[WaveRecord] = field(default_factory=list)
    deferred: int = 0
    prep_count: int = 0

    @property
    def width(self) -> int:
        return max(1, self.level.lanes // self.block_lanes)

    def retire(self, now: int) -> list[PicEntry]:
        """Remove entries whose wave finished by ``now``."""
        done = [e for e in self.inflight if e.done <= now]
        for e in done:
            self.inflight.remove(e)
            self.table.remove(e)
        return done

    def _blocked(self, entry: PicEntry, before: list[PicEntry]) -> bool:
        return any(entry.conflicts_with(f) for f in before)

    def _operand_ok(self, block: int, now: int) -> bool:
        arrival = self.prepping.get(block)
        if arrival is not None and arrival > now:
            return False
        return self.level.operand_ready(block)

    def _prep(self, block: int, now: int) -> None:
        arrival, port = self.level.prepare(block, now)
        ready = max(now + arrival, self.port_free) + port
        self.port_free = ready
        self.prepping[block] = ready
        self.prep_count += 1

    def step(self, now: int) -> int | None:
        """Launch work at ``now`` if idle.

        Returns the next time the controller wants to be woken (wave end or
        operand arrival), or None when there is nothing to do.
        """
        self.retire(now)
        busy = self.busy_until > now
        for b in [b for b, t in self.prepping.items() if t <= now]:
            del self.prepping[b]
        pending = [e for e in self.table if e.started is None]
        if not pending and not busy:
            return None
        wave: list[PicEntry] = []
        earlier: list[PicEntry] = list(self.inflight)
        for entry in pending:
            if not self._blocked(entry, earlier):
                ready = [self._operand_ok(b, now) for b in entry.srcs]
                if not busy and len(wave) < self.width and all(ready):
                    wave.append(entry)
                    earlier.append(entry)
                    continue
                # issue transfers/fetches and move on to later entries
                for b, ok in zip(entry.srcs, ready):
                    if not ok and b not in self.prepping:
                        self._prep(b, now)
                if not all(ready):
                    self.deferred += 1
            earlier.append(entry)
        if wave:
            latency = 0
            launched = []
            for entry in wave:
                try:
                    res = self.level.execute(entry, now)
                except ExpiredOperand as exc:
                    # lost between the readiness check and the launch: refetch
                    self._prep(exc.block, now)
                    continue
                entry.started = now
                entry.ready = [True] * len(entry.srcs)
                latency = max(latency, res.latency)
                self.inflight.append(entry)
                launched.append(entry)
            if launched:
                end = now + latency
                for entry in launched:
                    entry.done = end
                self.busy_until = end
                self.waves.append(WaveRecord(now, end, [e.id for e in launched]))
        upcoming = [t for t in self.prepping.values() if t > now]
        if self.busy_until > now:
            upcoming.append(self.busy_until)
        return min(upcoming) if upcoming else None

    def run_until_empty(self, now: int) -> int:
        """Drive the controller with no other agent; returns the DONE time."""
        t = now
        while self.table.entries:
            nxt = self.step(t)
            if nxt is None:
                if self.table.entries:
                    raise RuntimeError("controller stalled with pending entries")
                break
            t = max(nxt, t + (nxt == t))
        self.retire(t)
        return max(t, now)


class HeteroLevel:
    """Adapter exposing a :class:`HeteroCache` to the controller.

    ``fetch(block, now)`` brings a block from the next level and returns
    (latency, data).  Evictions and writebacks raised while preparing or
    executing are collected in ``events`` for the owner to forward.
    """

    def __init__(self, cache: HeteroCache, lanes: int,
                 fetch: Callable[[int, int], tuple[int, np.ndarray | None]]):
        self.cache = cache
        self.lanes = lanes
        self.fetch = fetch
        self.events: list[CacheEvent] = []

    def operand_ready(self, block: int) -> bool:
        return self.cache.low.contains(block) and self.cache.resolve_bank(block) is Bank.LOW

    def prepare(self, block: int, now: int) -> tuple[int, int]:
        c = self.cache
        if c.high.contains(block):
            res = c.transfer_to_low_bank(block, now)
            self.events += res.events
            return c.high.params.read_latency, res.latency - c.high.params.read_latency
        latency, data = self.fetch(block, now)
        res = c.write_with_retention(block, Bank.LOW, now, data, dirty=False)
        self.events += res.events
        return latency, res.latency

    def execute(self, entry: PicEntry, now: int) -> AccessResult:
        bs = self.cache.block_size
        req = CacheRequest(RequestKind.PIC, tuple(b * bs for b in entry.srcs), entry.op,
                           entry.dst * bs, now)
        for b in entry.srcs:
            if not self.operand_ready(b):
                raise ExpiredOperand(b)
        res = self.cache.pic_execute(req, now)
        self.events += res.events
        return res


@dataclass
class DispatchRecord:
    entry: int
    status: str  # "executed"
    start: int
    end: int
    deferrals: int


def controller_dispatch(cache: HeteroCache, entries: list[PicEntry], now: int,
                        fetch: Callable[[int, int], tuple[int, np.ndarray | None]],
                        lanes: int | None = None, capacity: int | None = None) -> list[DispatchRecord]:
    """Execute ``entries`` on the low-retention bank of ``cache``.

    Every entry runs exactly once; the returned records are in entry order.
    """
    lanes = cache.lanes if lanes is None else lanes
    table = InstructionTable(capacity or max(len(entries), 1))
    backlog = list(entries)  # admitted in order as the table frees up

    def admit():
        while backlog and not table.full:
            table.insert(backlog.pop(0))

    admit()
    ctl = PicController(HeteroLevel(cache, lanes, fetch), table, block_lanes=cache.lanes)
    counts = {e.id: 0 for e in entries}
    t = now
    while table.entries:
        pending = [e for e in table if e.started is None]
        nxt = ctl.step(t)
        for e in pending:
            if e.started is None:
                counts[e.id] += 1
        if nxt is None:
            raise RuntimeError("controller stalled with pending entries")
        t = max(nxt, t + (nxt == t))
        ctl.retire(t)
        admit()
    return [DispatchRecord(e.id, "executed", e.started, e.done, counts[e.id]) for e in entries]
