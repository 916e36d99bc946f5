import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from himcsim.cache import (
    AlignmentViolation,
    CacheRequest,
    CounterConfig,
    ExpiredOperand,
    MainMemory,
    PartialDestination,
    RequestKind,
    RetentionCache,
    counter_overhead_report,
)
from himcsim.device import lookup_params

L1P = lookup_params("L1", "SttRam", "75us")
BITS = 512


def make_l1(size=32 * 1024, assoc=4, subarrays=8, log=None):
    return RetentionCache("L1", size, 64, assoc, 4, subarrays, L1P, CounterConfig(), log=log)


def rd(addr):
    return CacheRequest(RequestKind.READ, (addr,))


def wr(addr):
    return CacheRequest(RequestKind.WRITE, (addr,))


def blk(v):
    return np.full(16, v, np.uint32)


def test_counter_defaults_match_75us():
    c = CounterConfig.from_us(4, "18.75")
    assert c == CounterConfig(4, 37_500)
    assert c.retention == 150_000 and c.flag_after == 112_500
    with pytest.raises(ValueError):
        CounterConfig.from_us(4, "0.0001")


def test_read_hit_and_write_costs():
    c = make_l1()
    w = c.access(wr(0), 0, blk(1))
    assert (w.latency, w.energy_fj) == (2, BITS * 4690)
    r = c.access(rd(0), 10)
    assert r.hit and (r.latency, r.energy_fj) == (1, BITS * 86)
    assert r.data.tolist() == [1] * 16


def test_read_miss_fill_is_clean_and_charged():
    c = make_l1()
    r = c.access(rd(64), 0, blk(3))
    assert not r.hit and r.latency == 1 + 2 and r.energy_fj == BITS * 4690
    assert not c.peek(1).dirty


def test_dirty_block_flags_at_three_periods():
    c = make_l1()
    c.access(wr(0), 0, blk(5))
    assert c.sync(112_499) == []
    evs = c.sync(112_500)
    assert [(e.kind, e.time) for e in evs] == [("expire", 112_500), ("writeback", 112_500)]
    assert evs[1].data.tolist() == [5] * 16
    assert not c.contains(0)


def test_rewrite_resets_counter_but_read_does_not():
    c = make_l1()
    c.access(wr(0), 0, blk(1))
    c.access(rd(0), 50_000)
    c.access(wr(64), 0, blk(1))
    c.access(wr(64), 60_000, blk(2))
    flagged = {e.block for e in c.sync(112_500) if e.kind == "expire"}
    assert flagged == {0}
    assert c.contains(1)
    assert [e.time for e in c.sync(172_500) if e.kind == "expire"] == [172_500]


def test_clean_block_expires_without_writeback():
    c = make_l1()
    c.access(rd(0), 0, blk(1))
    assert [e.kind for e in c.sync(200_000)] == ["expire"]
    assert c.stats.writebacks == 0


def test_lru_eviction_writes_back_dirty_victim():
    c = make_l1(size=64 * 4, assoc=4)  # a single set
    for i in range(4):
        c.access(wr(64 * i), i, blk(i))
    c.access(rd(0), 10)  # block 0 becomes most recent
    res = c.access(wr(64 * 4), 11, blk(9))
    assert [(e.kind, e.block) for e in res.events] == [("evict", 1), ("writeback", 1)]


def test_pic_add_cost_and_result():
    c = make_l1()
    c.access(wr(0), 0, blk(3))
    c.access(wr(64 * 32), 0, blk(4))  # same bank and subarray as block 0
    res = c.pic_execute(CacheRequest(RequestKind.PIC, (0, 64 * 32), "Add", dest=64 * 64), 5)
    assert res.latency == 15 and res.energy_fj == 16 * 32 * 5816
    assert res.data.tolist() == [7] * 16
    assert c.peek(64).dirty


def test_pic_alignment_and_residency():
    c = make_l1()
    c.access(wr(0), 0, blk(1))
    c.access(wr(64), 0, blk(1))
    with pytest.raises(AlignmentViolation):
        c.pic_execute(CacheRequest(RequestKind.PIC, (0, 64), "And", dest=128), 1)
    with pytest.raises(ExpiredOperand):
        c.pic_execute(CacheRequest(RequestKind.PIC, (0, 64 * 32), "And", dest=128), 1)
    with pytest.raises(PartialDestination):
        c.pic_execute(CacheRequest(RequestKind.PIC, (0, 0), "And", dest=130), 1)


def test_request_validation():
    with pytest.raises(ValueError):
        CacheRequest(RequestKind.PIC, (0, 64), "Add")
    with pytest.raises(ValueError):
        CacheRequest(RequestKind.PIC, (0,), "Add", dest=0)
    with pytest.raises(ValueError):
        CacheRequest(RequestKind.READ, (0, 64))


@pytest.mark.parametrize("n,bits,area", [(2, 1, 0.0039), (4, 2, 0.0078), (8, 3, 0.0117)])
def test_counter_overhead(n, bits, area):
    rep = counter_overhead_report(n)
    assert rep["bits_per_block"] == bits
    assert rep["area_fraction"] == pytest.approx(area)


def test_more_subarrays_widen_alignment_stride():
    assert make_l1().home(0) == make_l1().home(32)
    wide = make_l1(subarrays=16)
    assert wide.home(0) != wide.home(32) and wide.home(0) == wide.home(64)


def test_event_log_energy_adds_up():
    log = []
    c = make_l1(log=log)
    c.access(wr(0), 0, blk(1))
    c.access(rd(0), 1)
    c.access(rd(64), 2, blk(2))
    c.access(wr(64 * 32), 3, blk(2))
    c.pic_execute(CacheRequest(RequestKind.PIC, (0, 64 * 32), "Xor", dest=64 * 64), 4)
    assert sum(r.get("energy_fj", 0) for r in log) == c.stats.energy_fj + c.stats.compute_fj


def test_memory_reads_zero_and_computes():
    mem = MainMemory(lookup_params("Mem", "SttRam", "nonvolatile"))
    assert mem.read(5).data.tolist() == [0] * 16
    mem.write(0, blk(6))
    mem.write(16 * 16, blk(3))  # same bank/subarray
    res = mem.pic_execute("Or", [0, 256], 512)
    assert res.latency == 88 and mem.get(512).tolist() == [7] * 16
    with pytest.raises(AlignmentViolation):
        mem.pic_execute("And", [0, 1], 2)


# A randomized trace over few sets so evictions, expiries and rewrites mix.
ops = st.lists(
    st.tuples(st.sampled_from(["r", "w"]), st.integers(0, 23), st.integers(0, 60_000)),
    min_size=1, max_size=60,
)


@settings(max_examples=200, deadline=None)
@given(ops)
def test_no_stale_reads_and_ways_bounded(trace):
    c = make_l1(size=64 * 4 * 2, assoc=4)
    retention = c.counter.retention
    last_write: dict[int, int] = {}
    now = 0
    for kind, block, gap in trace:
        now += gap
        for ev in c.sync(now):
            if ev.kind == "writeback":
                assert ev.time == last_write[ev.block] + c.counter.flag_after
        if kind == "w":
            c.access(wr(block * 64), now, blk(block))
            last_write[block] = now
        else:
            res = c.access(rd(block * 64), now)
            if res.hit:
                assert now - last_write[block] < retention
                assert res.data.tolist() == [block] * 16
        for ways in c.sets:
            assert len(ways) <= c.associativity
