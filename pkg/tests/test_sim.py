import json
from dataclasses import replace

import pytest

from himcsim.chaining import power_energy_fj
from himcsim.device import ConfigError, default_config
from himcsim.sim import (
    PLACEMENTS,
    ComparisonError,
    Placement,
    RunSpec,
    SimReport,
    compare,
    reports_csv,
    run,
    sweep,
)
from himcsim.workloads import KERNELS, KernelSpec, Trace, generate, golden_checksum

CFG = default_config()


def trace(kernel="mat_add", size=64, seed=0):
    return generate(KernelSpec(kernel, size, seed))


def test_hand_tallied_cpu_only_mat_add():
    # one block: 8 source arrays accumulated by the CPU.
    # first add: two cold 16-word reads (1+32+4+2 fill, +15 more reads), 16 ALU, store 2+15*2
    # later adds: accumulator hit (16), one cold source (54), 16 ALU, store 32
    first = 2 * (1 + 32 + 4 + 2 + 15) + 16 + (2 + 15 * 2)
    later = 16 + 54 + 16 + 32
    rep = run(trace(size=4), CFG, "CpuOnly")
    assert rep.cycles == first + 6 * later == 864
    assert run(trace(size=1024), CFG, "CpuOnly").cycles == 64 * 864


def test_cpu_only_ignores_chaining_flag():
    t = trace("conv", 128)
    on, off = run(t, CFG, "CpuOnly", "on"), run(t, CFG, "CpuOnly", "off")
    assert on.chaining == off.chaining == "conventional"
    assert on.cycles == off.cycles and on.total_fj == off.total_fj


def test_offload_beats_cpu_for_mat_add():
    t = trace(size=512)
    assert run(t, CFG, "PicL1").cycles < run(t, CFG, "CpuOnly").cycles


def test_empty_trace():
    spec = KernelSpec("mat_add", 1)
    rep = run(Trace(spec, [], {}, {}, ()), CFG, "PicL2Het")
    assert rep.cycles == 0 and rep.total_fj == 0


@pytest.mark.parametrize("placement", PLACEMENTS)
@pytest.mark.parametrize("mode", ["chained", "conventional"])
def test_functional_transparency_small(placement, mode):
    for kernel in ("rmse", "cmul"):
        t = trace(kernel, 96, 3)
        assert run(t, CFG, placement, mode).checksum == golden_checksum(t)


@pytest.mark.parametrize("placement", PLACEMENTS)
def test_energy_ledger_closes(placement):
    t = trace("knn", 128)
    rep = run(t, CFG, placement)
    d = rep.to_dict()
    assert d["energy_fj"]["total"] == sum(d["energy_fj"]["dynamic"].values()) + sum(d["energy_fj"]["leakage"].values())
    assert all(v >= 0 for v in rep.dynamic_fj.values())
    assert rep.leakage_fj["l1"] == power_energy_fj(CFG.l1_params.leakage_power, rep.cycles, 2000)
    if Placement(placement).hetero:
        assert set(rep.leakage_fj) == {"l1", "l2_high", "l2_low", "mem"}
    else:
        assert rep.leakage_fj["l2"] == power_energy_fj(CFG.l2_params.leakage_power, rep.cycles, 2000)
    pic_events = sum(e.kind == "pic" for e in t.events)
    assert rep.counters["pic_ops"] == (0 if placement == "CpuOnly" else pic_events)


def test_timing_only_matches_functional_cycles():
    t = trace("string", 256)
    for p in ("PicL2Het", "Pim256"):
        a, b = run(t, CFG, p), run(t, CFG, p, functional=False)
        assert a.cycles == b.cycles and a.total_fj == b.total_fj
        assert b.checksum is None


def test_run_is_deterministic():
    t = trace("bnn", 200)
    assert run(t, CFG, "PicL2Het").to_json() == run(t, CFG, "PicL2Het").to_json()


def test_timeline_records_cpu_and_compute():
    tl = []
    run(trace("rmse", 64), CFG, "PicL1", timeline=tl)
    assert {r["segment"] for r in tl} == {"cpu", "pic"}


def test_invalid_config_rejected():
    bad = replace(CFG, l1=replace(CFG.l1, compute_units=24))
    with pytest.raises(ConfigError):
        run(trace(), bad, "PicL1")


def test_report_round_trip():
    rep = run(trace(), CFG, "Pim512")
    again = SimReport.from_dict(json.loads(rep.to_json()))
    assert again.to_dict() == rep.to_dict()
    assert rep.time_ns * 2 == rep.cycles


def test_compare():
    t = trace(size=128)
    base = run(t, CFG, "CpuOnly")
    assert compare(base, [base])[1].speedup == 1.0
    half = replace(base, cycles=base.cycles // 2)
    assert compare(base, [half])[1].speedup == pytest.approx(2.0, rel=1e-3)
    with pytest.raises(ComparisonError):
        compare(base, [replace(base, checksum="0" * 64)])
    zero = replace(base, cycles=0)
    with pytest.raises(ComparisonError):
        compare(base, [zero])


def small_matrix():
    return [(RunSpec(k, p.value, "chained", 32), CFG) for k in KERNELS for p in PLACEMENTS]


def test_sweep_full_matrix_and_ratios():
    bundle = sweep(small_matrix())
    assert len(bundle["runs"]) == 48 and not bundle["errors"]
    for r in bundle["runs"]:
        assert r["speedup"] > 0 and r["energy_ratio"] > 0
        if r["spec"]["placement"] == "CpuOnly":
            assert r["speedup"] == r["energy_ratio"] == 1.0
    lines = reports_csv(bundle["runs"]).splitlines()
    assert len(lines) == 49 and lines[0].startswith("workload,placement,chaining")


def test_sweep_isolates_failing_run():
    specs = small_matrix()
    specs[5] = (specs[5][0], ConfigError(["l1.compute_units: must be a power of two"]))
    bundle = sweep(specs)
    assert len(bundle["runs"]) == 47 and len(bundle["errors"]) == 1
    assert "ConfigError" in bundle["errors"][0]["error"]


def test_sweep_is_byte_identical_across_repeats_and_workers():
    specs = [(RunSpec(k, p, "chained", 48, 1), CFG) for k in ("knn", "cmul") for p in ("CpuOnly", "PicL2Het")]
    a = json.dumps(sweep(specs), sort_keys=True)
    assert a == json.dumps(sweep(list(reversed(specs))), sort_keys=True)
    assert a == json.dumps(sweep(specs, workers=2), sort_keys=True)
