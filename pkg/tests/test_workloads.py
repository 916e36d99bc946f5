import json

import numpy as np
import pytest

from himcsim.workloads import (
    CATEGORIES,
    KERNELS,
    KernelSpec,
    TraceError,
    checksum,
    first_mismatch,
    generate,
    golden_checksum,
    read_trace,
    reference_output,
    replay,
    trace_to_jsonl,
    validate_trace,
    write_trace,
)


def test_categories():
    assert set(KERNELS) == {"knn", "conv", "hist", "rmse", "bnn", "mat_add", "string", "cmul"}
    assert {k for k, c in CATEGORIES.items() if c == "cpu_dependent"} == {"knn", "conv", "hist", "rmse"}
    assert CATEGORIES["cmul"] == "indep_low_reuse"


def test_unknown_kernel_and_size():
    with pytest.raises(ValueError):
        KernelSpec("fft")
    with pytest.raises(ValueError):
        KernelSpec("knn", 0)


def pic_ops(kernel, size=256):
    return {e.op for e in generate(KernelSpec(kernel, size)).events if e.kind == "pic"}


def test_op_mix_per_kernel():
    assert pic_ops("mat_add") == {"Add"}
    assert pic_ops("cmul") <= {"And", "Xor"} and pic_ops("cmul")
    assert pic_ops("string") == {"Xor"}


def test_hist_is_almost_all_cpu():
    assert generate(KernelSpec("hist", 1024)).metadata["pic_eligible_fraction"] < 0.05


@pytest.mark.parametrize("size", [256, 1024])
def test_dependent_kernels_offload_less(size):
    frac = {k: generate(KernelSpec(k, size)).metadata["pic_eligible_fraction"] for k in KERNELS}
    dep = [frac[k] for k in KERNELS if CATEGORIES[k] == "cpu_dependent"]
    indep = [frac[k] for k in KERNELS if CATEGORIES[k] != "cpu_dependent"]
    assert max(dep) < min(indep)


def test_generation_is_deterministic():
    a = trace_to_jsonl(generate(KernelSpec("conv", 300, 4)))
    assert a == trace_to_jsonl(generate(KernelSpec("conv", 300, 4)))
    assert a != trace_to_jsonl(generate(KernelSpec("conv", 300, 5)))


def test_mat_add_reference_example():
    out = reference_output(KernelSpec("mat_add", 2), {"m0": [1, 2], "m1": [3, 4]})
    assert out["acc"][:2].tolist() == [4, 6]


def test_mat_add_wraps_at_32_bits():
    out = reference_output(KernelSpec("mat_add", 1), {"m0": [0xFFFFFFFF], "m1": [2]})
    assert out["acc"][0] == 1


def test_cmul_reference_is_carryless():
    # 0b11 clmul 0b11 = 0b101 (XOR, not integer 9)
    out = reference_output(KernelSpec("cmul", 1), {"a": [3], "b": [3]})
    assert out["acc"][0] == 5


def test_first_mismatch():
    assert first_mismatch("abcd", "abxd") == 2
    assert first_mismatch("abc", "abc") is None
    assert first_mismatch("ab", "abc") == 2


def test_hist_reference():
    out = reference_output(KernelSpec("hist", 3), {"data": [0, 0x10000000, 0xF0000000]})
    assert out["hist"][:2].tolist() == [1, 1] and out["hist"][15] == 1


@pytest.mark.parametrize("kernel", KERNELS)
def test_replay_matches_reference(kernel):
    trace = generate(KernelSpec(kernel, 200, 1))
    assert checksum(replay(trace)) == golden_checksum(trace)


def test_checksum_sensitive_to_values_and_names():
    a = {"x": np.arange(4, dtype=np.uint32)}
    assert checksum(a) != checksum({"x": np.arange(1, 5, dtype=np.uint32)})
    assert checksum(a) != checksum({"y": a["x"]})


def test_jsonl_round_trip(tmp_path):
    trace = generate(KernelSpec("rmse", 100, 2))
    path = tmp_path / "t.jsonl"
    write_trace(trace, path)
    back = read_trace(path)
    assert trace_to_jsonl(back) == trace_to_jsonl(trace)
    assert golden_checksum(back) == golden_checksum(trace)


def _rewrite(tmp_path, mutate):
    trace = generate(KernelSpec("mat_add", 32))
    lines = trace_to_jsonl(trace).splitlines()
    lines = mutate(lines)
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def _edit_last(field, value):
    def mutate(lines):
        rec = json.loads(lines[-1])
        rec[field] = value
        return lines[:-1] + [json.dumps(rec)]
    return mutate


@pytest.mark.parametrize("mutate", [
    lambda lines: lines[1:],  # no header
    lambda lines: lines + ["{broken"],
    _edit_last("kind", "bogus"),
    _edit_last("op", "Mul"),
    _edit_last("deps", [10 ** 6]),
    _edit_last("srcs", [1]),
])
def test_bad_traces_rejected(tmp_path, mutate):
    with pytest.raises(TraceError):
        read_trace(_rewrite(tmp_path, mutate))


def test_validate_catches_misnumbered_events():
    trace = generate(KernelSpec("mat_add", 32))
    trace.events[3].id = 99
    with pytest.raises(TraceError):
        validate_trace(trace)
