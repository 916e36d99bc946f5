"""Run traces on the cache/memory hierarchy and account latency and energy.

Two agents share simulated time: the in-order CPU, which walks the trace in
program order, and the compute controller of the chosen placement, which
drains the instruction table in waves.  Time is in integer CPU cycles and
energy in integer femtojoules; both are converted only when a report is
emitted.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Iterable

import numpy as np

from .cache import AccessResult, CacheEvent, CacheRequest, CounterConfig, MainMemory, RequestKind, RetentionCache
from .chaining import ChainMode, InstructionTable, PicEntry, as_mode, cpu_power_mode, power_energy_fj
from .device import HierarchyConfig, RETENTION_US, validate_config
from .hetero import Bank, HeteroCache, PicController
from .workloads import CPU_OPS, LANES, KernelSpec, Trace, checksum, generate, read_outputs, run_cpu_op

MEM_BANKS = 16
MEM_SUBARRAYS = 16


class Placement(str, Enum):
    CPU_ONLY = "CpuOnly"
    PIC_L1 = "PicL1"
    PIC_L2_HOM = "PicL2Hom"
    PIC_L2_HET = "PicL2Het"
    PIM_256 = "Pim256"
    PIM_512 = "Pim512"

    @property
    def level(self) -> str | None:
        return {
            Placement.CPU_ONLY: None,
            Placement.PIC_L1: "L1",
            Placement.PIC_L2_HOM: "L2",
            Placement.PIC_L2_HET: "L2",
            Placement.PIM_256: "Mem",
            Placement.PIM_512: "Mem",
        }[self]

    @property
    def hetero(self) -> bool:
        return self is Placement.PIC_L2_HET

    def lanes(self, cfg: HierarchyConfig) -> int:
        if self is Placement.PIC_L1:
            return cfg.l1.compute_units
        if self.level == "L2":
            return cfg.l2.compute_units
        if self is Placement.PIM_256:
            return 256
        if self is Placement.PIM_512:
            return 512
        return 0


PLACEMENTS = tuple(Placement)


def _counter(cfg: HierarchyConfig, retention: str) -> CounterConfig | None:
    if RETENTION_US.get(retention) is None:
        return None
    return CounterConfig(cfg.n_states(retention), cfg.period_cycles(retention))


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------


class Hierarchy:
    """L1, L2 (homogeneous or dual-retention) and memory, with data kept
    consistent: a copy in a higher level is never older than one below."""

    def __init__(self, cfg: HierarchyConfig, hetero: bool = False, functional: bool = True,
                 log: list | None = None):
        self.cfg = cfg
        self.functional = functional
        self.l1 = RetentionCache.from_level("l1", cfg.l1, cfg.l1_params, _counter(cfg, cfg.l1.retention),
                                            functional=functional, log=log)
        self.hetero = hetero
        if hetero:
            l2 = cfg.l2
            self.l2 = HeteroCache("l2", l2.size, l2.block_size, l2.associativity, l2.banks, l2.subarrays,
                                  cfg.l2_high_params, cfg.l2_low_params,
                                  _counter(cfg, cfg.l2_high_retention), _counter(cfg, cfg.l2_low_retention),
                                  functional=functional, log=log)
        else:
            self.l2 = RetentionCache.from_level("l2", cfg.l2, cfg.l2_params, _counter(cfg, cfg.l2.retention),
                                                functional=functional, log=log)
        self.mem = MainMemory(cfg.mem_params, cfg.l1.block_size, MEM_BANKS, MEM_SUBARRAYS,
                              cfg.mem_size, functional=functional)
        self.flushes = 0

    # -- L2 helpers ------------------------------------------------------
    def l2_regions(self) -> list[RetentionCache]:
        return list(self.l2.regions.values()) if self.hetero else [self.l2]

    def l2_peek(self, block: int):
        return self.l2.peek(block)

    def l2_read(self, block: int, t: int) -> AccessResult:
        if self.hetero:
            res = self.l2.read(block, t)
        else:
            res = self.l2.access(CacheRequest(RequestKind.READ, (block * self.l2.block_size,)), t)
        self.l2_events(res.events)
        return res

    def l2_write(self, block: int, data, t: int, dirty: bool, low: bool) -> AccessResult:
        if self.hetero:
            res = self.l2.write_with_retention(block, Bank.LOW if low else Bank.HIGH, t, data, dirty)
        else:
            res = self.l2.fill(block, data, t, dirty)
        self.l2_events(res.events)
        return res

    # -- writeback routing ---------------------------------------------
    def l1_events(self, events: list[CacheEvent]) -> None:
        for ev in events:
            if ev.kind == "writeback":
                self.l2_write(ev.block, ev.data, ev.time, dirty=True, low=False)

    def l2_events(self, events: list[CacheEvent]) -> None:
        for ev in events:
            if ev.kind == "writeback":
                self.mem.write(ev.block, ev.data)

    def sync(self, t: int) -> None:
        self.l1_events(self.l1.sync(t))
        self.l2_events(self.l2.sync(t))

    # -- CPU side --------------------------------------------------------
    def fetch_to_l1(self, block: int, t: int) -> tuple[int, int, np.ndarray | None]:
        """Miss path into L1: (cycles before the fill, fill cycles, data)."""
        probe = self.l1.access(CacheRequest(RequestKind.READ, (block * self.l1.block_size,)), t)
        self.l1_events(probe.events)
        lat = probe.latency
        if self.l2_peek(block) is not None:
            r2 = self.l2_read(block, t)
            lat += r2.latency
            data = r2.data
        else:
            m = self.mem.read(block)
            lat += m.latency
            data = m.data
            lat += self.l2_write(block, data, t, dirty=False, low=False).latency
        fill = self.l1.fill(block, data, t, dirty=False)
        self.l1_events(fill.events)
        return lat, fill.latency, data

    def cpu_read(self, block: int, t: int) -> tuple[int, np.ndarray | None]:
        if self.l1.contains(block):
            res = self.l1.access(CacheRequest(RequestKind.READ, (block * self.l1.block_size,)), t)
            self.l1_events(res.events)
            if res.hit:
                return res.latency, res.data
        before, fill, data = self.fetch_to_l1(block, t)
        return before + fill, data

    def cpu_write(self, block: int, data, t: int) -> int:
        res = self.l1.access(CacheRequest(RequestKind.WRITE, (block * self.l1.block_size,)), t, data)
        self.l1_events(res.events)
        return res.latency

    def store_pim(self, level: str, block: int, data, t: int) -> int:
        """Write a CPU result directly where it will be computed on."""
        if level == "L1":
            return self.cpu_write(block, data, t)
        self.l1.invalidate(block)
        if level == "L2":
            return self.l2_write(block, data, t, dirty=True, low=True).latency
        self.l2.invalidate(block)
        return self.mem.write(block, data).latency

    def newest(self, block: int) -> np.ndarray:
        for st in (self.l1.peek(block), self.l2_peek(block)):
            if st is not None:
                return st.data if st.data is not None else np.zeros(LANES, np.uint32)
        return self.mem.get(block)

    def l1_dirty(self, block: int) -> bool:
        st = self.l1.peek(block)
        return st is not None and st.dirty

    def l2_dirty(self, block: int) -> bool:
        st = self.l2_peek(block)
        return st is not None and st.dirty

    def _l1_read_for_flush(self, block: int, t: int) -> AccessResult:
        res = self.l1.access(CacheRequest(RequestKind.READ, (block * self.l1.block_size,)), t)
        self.l1_events(res.events)
        self.flushes += 1
        return res


# ---------------------------------------------------------------------------
# compute levels (controller adapters)
# ---------------------------------------------------------------------------


class _Level:
    def __init__(self, h: Hierarchy, lanes: int):
        self.h = h
        self.lanes = lanes

    def _req(self, entry: PicEntry, t: int, block_size: int) -> CacheRequest:
        return CacheRequest(RequestKind.PIC, tuple(b * block_size for b in entry.srcs), entry.op,
                            entry.dst * block_size, t)


class L1Level(_Level):
    name = "L1"

    def operand_ready(self, block: int) -> bool:
        return self.h.l1.contains(block)

    def prepare(self, block: int, t: int) -> tuple[int, int]:
        before, fill, _ = self.h.fetch_to_l1(block, t)
        return before, fill

    def execute(self, entry: PicEntry, t: int) -> AccessResult:
        res = self.h.l1.pic_execute(self._req(entry, t, self.h.l1.block_size), t)
        self.h.l1_events(res.events)
        return res


class L2Level(_Level):
    name = "L2"

    def operand_ready(self, block: int) -> bool:
        h = self.h
        if h.l1_dirty(block):
            return False
        if h.hetero:
            return h.l2.low.contains(block) and h.l2.resolve_bank(block) is Bank.LOW
        return h.l2.contains(block)

    def prepare(self, block: int, t: int) -> tuple[int, int]:
        h = self.h
        if h.l1_dirty(block):
            rd = h._l1_read_for_flush(block, t)
            wr = h.l2_write(block, rd.data, t, dirty=True, low=True)
            h.l1.mark_clean(block)
            return rd.latency, wr.latency
        if h.hetero and h.l2.high.contains(block):
            res = h.l2.transfer_to_low_bank(block, t)
            h.l2_events(res.events)
            read = h.l2.high.params.read_latency
            return read, res.latency - read
        m = h.mem.read(block)
        wr = h.l2_write(block, m.data, t, dirty=False, low=True)
        return m.latency, wr.latency

    def execute(self, entry: PicEntry, t: int) -> AccessResult:
        h = self.h
        res = h.l2.pic_execute(self._req(entry, t, h.l2.block_size), t)
        h.l2_events(res.events)
        h.l1.invalidate(entry.dst)
        return res


class MemLevel(_Level):
    name = "Mem"

    def operand_ready(self, block: int) -> bool:
        return not (self.h.l1_dirty(block) or self.h.l2_dirty(block))

    def prepare(self, block: int, t: int) -> tuple[int, int]:
        h = self.h
        if h.l1_dirty(block):
            rd = h._l1_read_for_flush(block, t)
            h.l1.mark_clean(block)
            h.l2.invalidate(block)
        else:
            rd = h.l2_read(block, t)
            h.l2.mark_clean(block)
            h.flushes += 1
        wr = h.mem.write(block, rd.data)
        return rd.latency, wr.latency

    def execute(self, entry: PicEntry, t: int) -> AccessResult:
        h = self.h
        res = h.mem.pic_execute(entry.op, list(entry.srcs), entry.dst)
        h.l1.invalidate(entry.dst)
        h.l2.invalidate(entry.dst)
        return res


def _make_level(placement: Placement, h: Hierarchy, cfg: HierarchyConfig):
    lanes = placement.lanes(cfg)
    return {"L1": L1Level, "L2": L2Level, "Mem": MemLevel}[placement.level](h, lanes)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class SimReport:
    kernel: str
    size: int
    seed: int
    placement: str
    chaining: str
    cycles: int
    clock_mhz: int
    dynamic_fj: dict[str, int]
    leakage_fj: dict[str, int]
    counters: dict[str, int]
    checksum: str | None
    extra: dict = field(default_factory=dict)

    @property
    def time_ns(self) -> Decimal:
        return Decimal(self.cycles) * 1000 / Decimal(self.clock_mhz)

    @property
    def total_fj(self) -> int:
        return sum(self.dynamic_fj.values()) + sum(self.leakage_fj.values())

    @property
    def key(self) -> tuple:
        return (self.kernel, self.size, self.seed, self.placement, self.chaining)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "size": self.size,
            "seed": self.seed,
            "placement": self.placement,
            "chaining": self.chaining,
            "cycles": self.cycles,
            "time_ns": str(self.time_ns.normalize()) if self.cycles else "0",
            "energy_fj": {
                "dynamic": dict(sorted(self.dynamic_fj.items())),
                "leakage": dict(sorted(self.leakage_fj.items())),
                "total": self.total_fj,
            },
            "counters": dict(sorted(self.counters.items())),
            "checksum": self.checksum,
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        clock_mhz = int(Decimal(d["cycles"]) * 1000 / Decimal(d["time_ns"])) if d["cycles"] else 2000
        return cls(d["kernel"], d["size"], d["seed"], d["placement"], d["chaining"], d["cycles"],
                   clock_mhz, dict(d["energy_fj"]["dynamic"]), dict(d["energy_fj"]["leakage"]),
                   dict(d["counters"]), d["checksum"], d.get("extra", {}))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _cpu_unit_cycles(cfg: HierarchyConfig) -> dict[str, int]:
    return {"alu": cfg.cpu.alu_cycles, "mul": cfg.cpu.mul_cycles, "div": cfg.cpu.div_cycles}


def run(trace: Trace, cfg: HierarchyConfig, placement: Placement | str,
        chaining: ChainMode | str | bool = ChainMode.CHAINED, *, functional: bool = True,
        timeline: list | None = None) -> SimReport:
    """Simulate ``trace`` under ``placement``; deterministic for fixed inputs.

    ``timeline``, if given, receives one record per CPU segment and compute
    wave.
    """
    validate_config(cfg)
    placement = Placement(placement)
    mode = ChainMode.CONVENTIONAL if placement is Placement.CPU_ONLY else as_mode(chaining)
    if placement.level == "Mem":
        cfg = cfg.with_mem_lanes(placement.lanes(cfg))
    h = Hierarchy(cfg, hetero=placement.hetero, functional=functional)
    for block, words in trace.initial_blocks():
        h.mem.load(block, words)

    unit_cycles = _cpu_unit_cycles(cfg)
    l1p = cfg.l1_params
    lanes_per_block = cfg.l1.lanes_per_block
    offload = placement.level is not None
    ctl = None
    if offload:
        level = _make_level(placement, h, cfg)
        table = InstructionTable.for_lanes(level.lanes, cfg.instruction_table_capacity, lanes_per_block)
        ctl = PicController(level, table, block_lanes=lanes_per_block)

    events = trace.events
    n = len(events)
    last_cpu = max((i for i, e in enumerate(events) if e.kind == "cpu" or not offload), default=-1)
    finish: dict[int, int] = {}
    t = 0
    i = 0
    cpu_free = 0
    busy = 0
    wait = 0
    table_stalls = 0

    def exec_cpu(ev, now) -> int:
        lat = 0
        datas = []
        for b in ev.srcs:
            cyc, data = h.cpu_read(b, now)
            lat += cyc + (lanes_per_block - 1) * l1p.read_latency
            datas.append(data)
        op = CPU_OPS[ev.op]
        lat += lanes_per_block * op.per_lane * unit_cycles[op.unit]
        out = run_cpu_op(ev.op, datas, ev.imm) if functional else None
        if (ev.store_pim and offload and mode is ChainMode.CHAINED and placement.level != "L1"):
            lat += lanes_per_block * l1p.write_latency + h.store_pim(placement.level, ev.dst, out, now)
        else:
            lat += h.cpu_write(ev.dst, out, now) + (lanes_per_block - 1) * l1p.write_latency
        return lat

    while True:
        if ctl is not None:
            ctl.retire(t)
        # CPU issues in program order until it has to wait
        while i < n and cpu_free <= t:
            ev = events[i]
            if ev.kind == "pic" and offload:
                if ctl.table.full:
                    table_stalls += 1
                    break
                ctl.table.insert(PicEntry(ev.id, ev.op, ev.srcs, ev.dst, t))
                i += 1
                continue
            if any(finish.get(d, t + 1) > t for d in ev.deps):
                break
            if mode is ChainMode.CONVENTIONAL and ctl is not None and not ctl.table.empty:
                break
            cost = exec_cpu(ev, t)
            if timeline is not None:
                timeline.append({"segment": "cpu", "unit": "cpu", "start": t, "end": t + cost, "event": ev.id})
            finish[ev.id] = t + cost
            cpu_free = t + cost
            busy += cost
            i += 1
        wake = None
        if ctl is not None:
            n_waves = len(ctl.waves)
            wake = ctl.step(t)
            for w in ctl.waves[n_waves:]:
                for eid in w.entries:
                    finish[eid] = w.end
                if timeline is not None:
                    timeline.append({"segment": "pic", "unit": placement.level, "start": w.start,
                                     "end": w.end, "events": w.entries})
        if i >= n and (ctl is None or ctl.table.empty):
            break
        cands = [x for x in (cpu_free, wake) if x is not None and x > t]
        if not cands:
            raise RuntimeError(f"simulation deadlock at cycle {t} (event {i})")
        t_next = min(cands)
        if cpu_free <= t and i <= last_cpu:
            wait += t_next - t
        t = t_next

    end = max([t, cpu_free] + list(finish.values()))
    h.sync(end)

    clock_mhz = int(Decimal(str(cfg.cpu_clock_ghz)) * 1000)
    rule = cpu_power_mode(mode)
    cpu_fj = rule.energy_fj(busy, wait, end, cfg.cpu.active_mw, cfg.cpu.idle_mw, clock_mhz)

    dynamic = {"cpu": cpu_fj, "l1": h.l1.stats.energy_fj, "mem": h.mem.stats.energy_fj}
    leakage = {
        "l1": power_energy_fj(cfg.l1_params.leakage_power, end, clock_mhz),
        "mem": power_energy_fj(cfg.mem_params.leakage_power, end, clock_mhz),
    }
    compute = h.l1.stats.compute_fj + h.mem.stats.compute_fj
    if h.hetero:
        for bank, region in (("l2_high", h.l2.high), ("l2_low", h.l2.low)):
            dynamic[bank] = region.stats.energy_fj
            compute += region.stats.compute_fj
            # each retention region is half of the array
            leakage[bank] = power_energy_fj(region.params.leakage_power / 2, end, clock_mhz)
    else:
        dynamic["l2"] = h.l2.stats.energy_fj
        compute += h.l2.stats.compute_fj
        leakage["l2"] = power_energy_fj(cfg.l2_params.leakage_power, end, clock_mhz)
    dynamic["compute"] = compute

    l2s = h.l2_regions()
    counters = {
        "l1_hits": h.l1.stats.hits,
        "l1_misses": h.l1.stats.misses,
        "l2_hits": sum(r.stats.hits for r in l2s),
        "l2_misses": sum(r.stats.misses for r in l2s),
        "mem_reads": h.mem.stats.reads,
        "mem_writes": h.mem.stats.writes,
        "expiries": h.l1.stats.expiries + sum(r.stats.expiries for r in l2s),
        "writebacks": h.l1.stats.writebacks + sum(r.stats.writebacks for r in l2s),
        "evictions": h.l1.stats.evictions + sum(r.stats.evictions for r in l2s),
        "transfers": h.l2.transfers if h.hetero else 0,
        "demotions": h.l2.demotions if h.hetero else 0,
        "latch_flips": h.l2.latch_flips if h.hetero else 0,
        "flushes": h.flushes,
        "pic_ops": h.l1.stats.pic_ops + h.mem.stats.pic_ops + sum(r.stats.pic_ops for r in l2s),
        "waves": len(ctl.waves) if ctl else 0,
        "operand_fetches": ctl.prep_count if ctl else 0,
        "cpu_busy_cycles": busy,
        "stall_cycles": wait,
        "table_full_stalls": table_stalls,
        "events": n,
    }
    digest = None
    if functional:
        digest = checksum(read_outputs(trace, h.newest))
    return SimReport(trace.spec.kernel, trace.spec.size, trace.spec.seed, placement.value, mode.value,
                     end, clock_mhz, dynamic, leakage, counters, digest)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


class ComparisonError(ValueError):
    """Reports disagree on their final data and cannot be compared."""


@dataclass(frozen=True)
class ComparisonRow:
    kernel: str
    placement: str
    chaining: str
    speedup: float
    energy_ratio: float


def _ratio(num: int, den: int) -> float:
    if num == den:
        return 1.0
    if den == 0 or num == 0:
        raise ComparisonError("cannot form a finite positive ratio with a zero-cost run")
    return num / den


def compare(baseline: SimReport, candidates: Iterable[SimReport]) -> list[ComparisonRow]:
    """Speedup and energy savings of each candidate over ``baseline``."""
    rows = [ComparisonRow(baseline.kernel, baseline.placement, baseline.chaining, 1.0, 1.0)]
    for c in candidates:
        if c.checksum != baseline.checksum:
            raise ComparisonError(
                f"{c.kernel}/{c.placement}/{c.chaining}: checksum {c.checksum} != baseline {baseline.checksum}")
        rows.append(ComparisonRow(c.kernel, c.placement, c.chaining,
                                  _ratio(baseline.cycles, c.cycles), _ratio(baseline.total_fj, c.total_fj)))
    return rows


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSpec:
    kernel: str
    placement: str
    chaining: str = "chained"
    size: int = 1024
    seed: int = 0
    config_name: str = "default"

    @property
    def key(self) -> tuple:
        return (self.kernel, self.size, self.seed, self.config_name, self.placement, self.chaining)


def _run_one(args) -> dict:
    spec, cfg = args
    if isinstance(cfg, Exception):
        return {"spec": spec.__dict__, "error": f"{type(cfg).__name__}: {cfg}"}
    try:
        trace = generate(KernelSpec(spec.kernel, spec.size, spec.seed))
        report = run(trace, cfg, spec.placement, spec.chaining)
        return {"spec": spec.__dict__, "report": report.to_dict()}
    except Exception as exc:  # isolated per run; recorded in the bundle
        return {"spec": spec.__dict__, "error": f"{type(exc).__name__}: {exc}"}


def sweep(specs: Iterable[tuple[RunSpec, HierarchyConfig]], workers: int = 1) -> dict:
    """Run every (spec, config) pair; the bundle is sorted by spec."""
    items = sorted(specs, key=lambda sc: sc[0].key)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, items))
    else:
        results = [_run_one(it) for it in items]
    runs = [r for r in results if "report" in r]
    errors = [r for r in results if "error" in r]
    _attach_ratios(runs)
    return {"runs": runs, "errors": errors}


def _attach_ratios(runs: list[dict]) -> None:
    base = {}
    for r in runs:
        s = r["spec"]
        if s["placement"] == Placement.CPU_ONLY.value:
            base[(s["kernel"], s["size"], s["seed"], s["config_name"])] = r["report"]
    for r in runs:
        s = r["spec"]
        b = base.get((s["kernel"], s["size"], s["seed"], s["config_name"]))
        if b is None:
            continue
        rep = r["report"]
        if rep["checksum"] != b["checksum"]:
            r["comparison_error"] = "checksum differs from the CpuOnly baseline"
            continue
        r["speedup"] = _ratio(b["cycles"], rep["cycles"])
        r["energy_ratio"] = _ratio(b["energy_fj"]["total"], rep["energy_fj"]["total"])


ENERGY_COLUMNS = ("cpu", "l1", "l2", "l2_high", "l2_low", "mem", "compute")
LEAKAGE_COLUMNS = ("l1", "l2", "l2_high", "l2_low", "mem")


def reports_csv(rows: Iterable[dict]) -> str:
    """One CSV line per run; ``rows`` are sweep bundle entries."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["workload", "placement", "chaining", "size", "seed", "config", "cycles", "time_ns"]
    header += [f"dyn_{c}_fj" for c in ENERGY_COLUMNS] + [f"leak_{c}_fj" for c in LEAKAGE_COLUMNS]
    header += ["total_fj", "speedup", "energy_ratio", "checksum"]
    w.writerow(header)
    for r in rows:
        rep = r["report"]
        dyn, leak = rep["energy_fj"]["dynamic"], rep["energy_fj"]["leakage"]
        w.writerow([rep["kernel"], rep["placement"], rep["chaining"], rep["size"], rep["seed"],
                    r.get("spec", {}).get("config_name", "default"), rep["cycles"], rep["time_ns"]]
                   + [dyn.get(c, "") for c in ENERGY_COLUMNS] + [leak.get(c, "") for c in LEAKAGE_COLUMNS]
                   + [rep["energy_fj"]["total"], _fmt(r.get("speedup")), _fmt(r.get("energy_ratio")),
                      rep["checksum"]])
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"
