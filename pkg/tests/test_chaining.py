import numpy as np
import pytest

from himcsim.cache import CounterConfig
from himcsim.chaining import (
    ChainMode,
    InstructionTable,
    PicEntry,
    TableFull,
    Task,
    as_mode,
    compute_signal,
    cpu_power_mode,
    instruction_table_overhead,
    power_energy_fj,
    schedule,
    store_pim,
)
from himcsim.device import lookup_params
from himcsim.hetero import Bank, HeteroCache, HeteroLevel, PicController

STRIDE = 128


def hetero():
    return HeteroCache("L2", 1 << 20, 64, 8, 8, 16, lookup_params("L2", "SttRam", "10ms"),
                       lookup_params("L2", "SttRam", "75us"),
                       CounterConfig(4, 5_000_000), CounterConfig(4, 37_500))


def blk(v):
    return np.full(16, v, np.uint32)


def controller(cache, capacity=8):
    level = HeteroLevel(cache, 16, lambda b, t: (32, blk(0)))
    return PicController(level, InstructionTable(capacity))


def test_table_overhead_is_128_bytes_for_16_lanes():
    assert instruction_table_overhead(16, 32) == 128
    assert InstructionTable(1, lanes_per_entry=16).overhead_bytes == 128
    with pytest.raises(ValueError):
        instruction_table_overhead(0)


def test_table_for_lanes_capacity():
    assert InstructionTable.for_lanes(16).capacity == 2
    assert InstructionTable.for_lanes(512).capacity == 64


def test_store_pim_queues_and_applies_back_pressure():
    c = hetero()
    table = InstructionTable(1)
    e0 = PicEntry(0, "Add", (0, STRIDE), 2 * STRIDE)
    store_pim(c, table, e0, 0, blk(1), 0)
    assert len(table) == 1 and c.resolve_bank(0) is Bank.LOW
    with pytest.raises(TableFull):
        store_pim(c, table, PicEntry(1, "Add", (1, 1 + STRIDE), 1 + 2 * STRIDE), 1, blk(1), 1)
    assert not c.contains(1)  # refused before writing
    store_pim(c, table, e0, STRIDE, blk(2), 2)  # second operand of a queued entry
    assert len(table) == 1


def test_entry_arity_and_hazards():
    with pytest.raises(ValueError):
        PicEntry(0, "Not", (1, 2), 3)
    a = PicEntry(0, "Add", (1, 2), 3)
    assert PicEntry(1, "Add", (3, 4), 5).conflicts_with(a)  # RAW
    assert PicEntry(1, "Add", (4, 5), 1).conflicts_with(a)  # WAR
    assert PicEntry(1, "Add", (4, 5), 3).conflicts_with(a)  # WAW
    assert not PicEntry(1, "Add", (4, 5), 6).conflicts_with(a)


def test_compute_signal_empty_table():
    assert compute_signal(controller(hetero()), 100) == 100


def test_compute_signal_low_bank_operands():
    c = hetero()
    c.write_with_retention(0, Bank.LOW, 0, blk(1))
    c.write_with_retention(STRIDE, Bank.LOW, 0, blk(2))
    ctl = controller(c)
    ctl.table.insert(PicEntry(0, "Add", (0, STRIDE), 2 * STRIDE))
    assert compute_signal(ctl, 100) == 115
    assert ctl.table.empty


def test_compute_signal_pays_transfer_for_high_operand():
    c = hetero()
    c.write_with_retention(0, Bank.HIGH, 0, blk(1))
    c.write_with_retention(STRIDE, Bank.LOW, 0, blk(2))
    ctl = controller(c)
    ctl.table.insert(PicEntry(0, "Add", (0, STRIDE), 2 * STRIDE))
    assert compute_signal(ctl, 100) == 100 + 2 + 3 + 15


def alternating(n=4, cpu=10, pic=15):
    tasks = []
    for i in range(n):
        tasks.append(Task(2 * i, "cpu", cpu))
        tasks.append(Task(2 * i + 1, "pic", pic, (2 * i,)))
    return tasks


def test_chaining_overlaps_producer_consumer_pairs():
    chained = schedule(alternating(), "chained")
    conv = schedule(alternating(), "conventional")
    assert conv.latency == 4 * (10 + 15)
    assert chained.latency == 10 + 4 * 15  # compute unit is the bottleneck
    assert chained.latency < conv.latency
    assert chained.segments[-1].kind == "done"


def test_pure_cpu_trace_unaffected_by_mode():
    tasks = [Task(i, "cpu", 7) for i in range(5)]
    assert schedule(tasks, "on").latency == schedule(tasks, "off").latency == 35


def test_independent_streams():
    tasks = [Task(0, "cpu", 30), Task(1, "pic", 20)]
    assert schedule(tasks, ChainMode.CHAINED).latency == 30
    assert schedule(tasks, ChainMode.CONVENTIONAL).latency == 50


def test_cpu_stall_segment_recorded():
    tl = schedule([Task(0, "pic", 20), Task(1, "cpu", 5, (0,))], "chained")
    stalls = [s for s in tl.segments if s.kind == "stall"]
    assert [(s.start, s.end) for s in stalls] == [(0, 20)]
    assert tl.busy("cpu") == 5 and tl.busy("pic") == 20


@pytest.mark.parametrize("tasks", [
    [Task(0, "cpu", 1, (1,)), Task(1, "pic", 1, (0,))],
    [Task(0, "cpu", 1, (5,))],
    [Task(0, "gpu", 1)],
])
def test_schedule_rejects_bad_graphs(tasks):
    with pytest.raises(ValueError):
        schedule(tasks, "chained")


def test_mode_aliases():
    assert as_mode("on") is ChainMode.CHAINED
    assert as_mode(False) is ChainMode.CONVENTIONAL
    with pytest.raises(ValueError):
        as_mode("sometimes")


def test_power_rule_conventional_wait_is_idle():
    # 1000 waiting cycles at 2 GHz, 50 mW idle: 50 mW x 500 ns
    rule = cpu_power_mode("conventional")
    assert rule.energy_fj(0, 1000, 1000, 750, 50, 2000) == 25_000_000
    chained = cpu_power_mode("chained")
    assert chained.energy_fj(0, 1000, 1000, 750, 50, 2000) == 375_000_000


def test_power_energy_rounds_down():
    assert power_energy_fj("0.001", 1, 2000) == 0
    assert power_energy_fj("182.8", 2000, 2000) == 182_800_000
