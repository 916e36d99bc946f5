"""Operation chaining: instruction table, StorePIM/Compute/DONE handshake and
a list scheduler contrasting chained with phase-sequential execution.

In conventional mode the CPU and the compute units alternate strictly: a
compute phase only starts once the CPU phase has drained, and the CPU stays
idle until the compute phase finishes.  In chained mode both run whenever
their own dependencies allow.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from typing import Iterable

from .bitline import PicOp, as_op


class ChainMode(str, Enum):
    CHAINED = "chained"
    CONVENTIONAL = "conventional"


def as_mode(mode: ChainMode | str | bool) -> ChainMode:
    if isinstance(mode, ChainMode):
        return mode
    if isinstance(mode, bool):
        return ChainMode.CHAINED if mode else ChainMode.CONVENTIONAL
    mode = str(mode).lower()
    aliases = {"on": "chained", "off": "conventional"}
    return ChainMode(aliases.get(mode, mode))


class TableFull(Exception):
    """Back-pressure: the instruction table has no free entry."""


@dataclass
class PicEntry:
    """One pending bit-line instruction over whole blocks."""

    id: int
    op: PicOp
    srcs: tuple[int, ...]  # block numbers
    dst: int
    issue_time: int = 0
    ready: list[bool] = field(default_factory=list)  # per operand, maintained by the controller
    started: int | None = None
    done: int | None = None

    def __post_init__(self):
        self.op = as_op(self.op)
        self.srcs = tuple(self.srcs)
        if len(self.srcs) != self.op.arity:
            raise ValueError(f"{self.op.value} takes {self.op.arity} operand(s)")
        if not self.ready:
            self.ready = [False] * len(self.srcs)

    def conflicts_with(self, earlier: "PicEntry") -> bool:
        """RAW, WAR or WAW hazard against an earlier entry."""
        return (earlier.dst in self.srcs or earlier.dst == self.dst
                or self.dst in earlier.srcs)


def instruction_table_overhead(lanes: int, address_bits: int = 32, operands: int = 2) -> int:
    """Bytes of operand address storage for a table serving ``lanes`` lanes.

    One entry per lane, each holding ``operands`` addresses; destinations
    are not buffered.
    """
    if lanes < 1 or address_bits < 1 or operands < 1:
        raise ValueError("lanes, address_bits and operands must be >= 1")
    return lanes * operands * address_bits // 8


@dataclass
class InstructionTable:
    """Pending instructions; capacity counted in block instructions."""

    capacity: int
    entries: deque = field(default_factory=deque)
    address_bits: int = 32
    lanes_per_entry: int = 16

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("instruction table capacity must be >= 1")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    @property
    def empty(self) -> bool:
        return not self.entries

    def insert(self, entry: PicEntry) -> None:
        if self.full:
            raise TableFull(f"instruction table full ({self.capacity} entries)")
        self.entries.append(entry)

    def remove(self, entry: PicEntry) -> None:
        self.entries.remove(entry)

    @property
    def overhead_bytes(self) -> int:
        return instruction_table_overhead(self.capacity * self.lanes_per_entry, self.address_bits)

    @classmethod
    def for_lanes(cls, lanes: int, capacity_lanes: int | None = None, block_lanes: int = 16):
        """Default capacity is two instructions per compute lane."""
        cap_lanes = 2 * lanes if capacity_lanes is None else capacity_lanes
        return cls(max(1, cap_lanes // block_lanes), lanes_per_entry=block_lanes)


def store_pim(target, table: InstructionTable, entry: PicEntry | None, block: int, data, now: int):
    """Write a CPU result straight into the compute level and queue its consumer.

    ``target`` is a cache (heterogeneous or not) or memory exposing
    ``store_pim_write(block, data, now)``.  Raises :class:`TableFull` before
    touching anything when the table is full, so the caller can stall.
    """
    if entry is not None and entry not in table.entries and table.full:
        raise TableFull(f"instruction table full ({table.capacity} entries)")
    result = target.store_pim_write(block, data, now)
    if entry is not None and entry not in table.entries:
        table.insert(entry)
    return result


def compute_signal(controller, now: int) -> int:
    """Dispatch everything in the controller's table; returns the DONE time."""
    if controller.table.empty:
        return now
    return controller.run_until_empty(now)


# ---------------------------------------------------------------------------
# abstract list scheduler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    id: int
    unit: str  # "cpu" | "pic"
    duration: int
    deps: tuple[int, ...] = ()


@dataclass
class Segment:
    kind: str  # "cpu" | "pic" | "stall" | "done"
    start: int
    end: int
    unit: str
    task: int | None = None

    def to_record(self) -> dict:
        return {"segment": self.kind, "start": self.start, "end": self.end,
                "unit": self.unit, "task": self.task}


@dataclass
class ChainTimeline:
    mode: ChainMode
    segments: list[Segment] = field(default_factory=list)

    @property
    def latency(self) -> int:
        return max((s.end for s in self.segments), default=0)

    def busy(self, unit: str) -> int:
        return sum(s.end - s.start for s in self.segments if s.unit == unit and s.kind == unit)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_record(), sort_keys=True) + "\n" for s in self.segments)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


def check_acyclic(deps: dict[int, Iterable[int]]) -> list[int]:
    """Topological order of ``deps``; raises ValueError on a cycle."""
    try:
        return list(TopologicalSorter({k: tuple(v) for k, v in deps.items()}).static_order())
    except CycleError as exc:
        raise ValueError(f"dependency cycle: {exc.args[1]}") from None


def schedule(tasks: list[Task], mode: ChainMode | str) -> ChainTimeline:
    """Place fixed-duration tasks on one CPU and one compute unit.

    Each unit runs its own tasks in program order.  Conventional mode also
    forbids a task from starting before every earlier task of the other
    unit has finished.
    """
    mode = as_mode(mode)
    ids = {t.id for t in tasks}
    for t in tasks:
        missing = set(t.deps) - ids
        if missing:
            raise ValueError(f"task {t.id} depends on unknown tasks {sorted(missing)}")
    check_acyclic({t.id: t.deps for t in tasks})
    order = {t.id: i for i, t in enumerate(tasks)}
    for t in tasks:
        if any(order[d] > order[t.id] for d in t.deps):
            raise ValueError(f"task {t.id} depends on a later task")

    finish: dict[int, int] = {}
    unit_free = {"cpu": 0, "pic": 0}
    last_end = {"cpu": 0, "pic": 0}  # latest finish among issued tasks of each unit
    timeline = ChainTimeline(mode)
    for t in tasks:
        if t.unit not in unit_free:
            raise ValueError(f"unknown unit {t.unit!r}")
        other = "pic" if t.unit == "cpu" else "cpu"
        start = max([unit_free[t.unit]] + [finish[d] for d in t.deps])
        if mode is ChainMode.CONVENTIONAL:
            start = max(start, last_end[other])
        if start > unit_free[t.unit] and t.unit == "cpu":
            timeline.segments.append(Segment("stall", unit_free["cpu"], start, "cpu"))
        end = start + t.duration
        timeline.segments.append(Segment(t.unit, start, end, t.unit, t.id))
        finish[t.id] = end
        unit_free[t.unit] = end
        last_end[t.unit] = max(last_end[t.unit], end)
    if tasks:
        done = timeline.latency
        timeline.segments.append(Segment("done", done, done, "pic"))
    return timeline


# ---------------------------------------------------------------------------
# CPU power accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerRule:
    """How CPU cycles are billed in a mode.

    Busy cycles are always active.  Cycles spent waiting on the compute
    units are active in chained mode while CPU work is still outstanding,
    and idle in conventional mode (the execution unit is powered down).
    """

    mode: ChainMode
    wait_is_active: bool

    def energy_fj(self, busy: int, wait: int, total: int, active_mw, idle_mw, clock_mhz: int) -> int:
        active_cycles = busy + (wait if self.wait_is_active else 0)
        idle_cycles = max(0, total - active_cycles)
        return (power_energy_fj(active_mw, active_cycles, clock_mhz)
                + power_energy_fj(idle_mw, idle_cycles, clock_mhz))


def power_energy_fj(power_mw, cycles: int, clock_mhz: int) -> int:
    """Energy of ``power_mw`` over ``cycles``; integer fJ, rounded down."""
    uw = int(Decimal(str(power_mw)) * 1000)
    return uw * cycles * 1000 // clock_mhz


def cpu_power_mode(mode: ChainMode | str) -> PowerRule:
    mode = as_mode(mode)
    return PowerRule(mode, wait_is_active=mode is ChainMode.CHAINED)
