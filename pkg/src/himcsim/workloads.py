"""Deterministic workload traces and their golden outputs.

A trace is a program-ordered list of block-granular events.  ``pic`` events
are bit-line operations that a placement may run in a cache or in memory
(or lower to CPU code); ``cpu`` events always run on the core.  Every event
reads whole 64-byte blocks and writes one whole block.  Block numbers, not
byte addresses, are used throughout; data regions start on
``ALIGN_BLOCKS`` boundaries so same-index blocks of different arrays share
bank and subarray at every level.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .bitline import PicOp

LANES = 16  # 32-bit words per 64-byte block
ALIGN_BLOCKS = 256  # lcm of banks x subarrays over all levels

CATEGORIES = {
    "knn": "cpu_dependent",
    "conv": "cpu_dependent",
    "hist": "cpu_dependent",
    "rmse": "cpu_dependent",
    "bnn": "indep_high_reuse",
    "mat_add": "indep_high_reuse",
    "string": "indep_high_reuse",
    "cmul": "indep_low_reuse",
}
KERNELS = tuple(CATEGORIES)

MAT_ADD_K = 8
CMUL_BITS = 16
STRING_QUERIES = 4
BNN_ROWS = 4
BNN_FILTERS = 2
CONV_WIDTH = 64
RMSE_ROWS = 4
KNN_QUERIES = 2
HIST_BINS = 16
LOOKAHEAD = 2
RING_DEPTH = 4
M32 = 0xFFFFFFFF


class TraceError(ValueError):
    """Malformed or cyclic trace."""


@dataclass(frozen=True)
class KernelSpec:
    kernel: str
    size: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in CATEGORIES:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {', '.join(KERNELS)}")
        if self.size < 1:
            raise ValueError("size must be >= 1")

    @property
    def category(self) -> str:
        return CATEGORIES[self.kernel]


@dataclass
class TraceEvent:
    id: int
    kind: str  # "cpu" | "pic"
    op: str  # PicOp value for pic events, a CPU_OPS key for cpu events
    srcs: tuple[int, ...]
    dst: int
    imm: tuple[int, ...] = ()
    deps: tuple[int, ...] = ()
    store_pim: bool = False  # cpu result consumed by a pic event

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["srcs"] = list(self.srcs)
        rec["imm"] = list(self.imm)
        rec["deps"] = list(self.deps)
        return rec


@dataclass
class Region:
    base: int  # first block
    words: int

    @property
    def blocks(self) -> int:
        return -(-self.words // LANES)

    def block(self, j: int) -> int:
        return self.base + j


@dataclass
class Trace:
    spec: KernelSpec
    events: list[TraceEvent]
    regions: dict[str, Region]
    inputs: dict[str, np.ndarray]  # region name -> padded uint32 words
    outputs: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def initial_blocks(self):
        """(block, 16-word array) for every input block."""
        for name, words in self.inputs.items():
            reg = self.regions[name]
            for j in range(reg.blocks):
                yield reg.base + j, words[j * LANES:(j + 1) * LANES]


# ---------------------------------------------------------------------------
# CPU operations on one block
# ---------------------------------------------------------------------------


def _isqrt(values: np.ndarray) -> np.ndarray:
    return np.array([math.isqrt(int(v)) for v in values], dtype=np.uint32)


def _cpu_mulwin(srcs, imm):
    w, shift = imm
    window = np.concatenate(srcs)[shift:shift + LANES].astype(np.uint64)
    return ((window * w) & M32).astype(np.uint32)


def _cpu_hist(srcs, imm):
    data, hist = srcs
    (valid,) = imm
    out = hist.copy()
    bins = data[:valid] >> np.uint32(28)
    np.add.at(out, bins.astype(np.intp), np.uint32(1))
    return out


def _cpu_argmin(srcs, imm):
    dist, best = srcs
    valid, base_index = imm
    out = best.copy()
    d = dist[:valid].astype(np.int64)
    i = int(np.argmin(d))
    if int(d[i]) < int(best[0]):
        out[0] = d[i]
        out[1] = base_index + i
    return out


def _cpu_sqr(srcs, imm):
    a = srcs[0].astype(np.uint64)
    return ((a * a) & M32).astype(np.uint32)


def _cpu_isqrt_mean(srcs, imm):
    (rows,) = imm
    return _isqrt(srcs[0] // np.uint32(rows))


_LOWERED = {
    PicOp.AND: lambda s, i: s[0] & s[1],
    PicOp.NAND: lambda s, i: ~(s[0] & s[1]),
    PicOp.OR: lambda s, i: s[0] | s[1],
    PicOp.NOR: lambda s, i: ~(s[0] | s[1]),
    PicOp.XOR: lambda s, i: s[0] ^ s[1],
    PicOp.NOT: lambda s, i: ~s[0],
    PicOp.ADD: lambda s, i: s[0] + s[1],
}


@dataclass(frozen=True)
class CpuOp:
    fn: Callable
    unit: str  # "alu" | "mul" | "div"
    per_lane: int  # operations of ``unit`` per 32-bit lane


CPU_OPS: dict[str, CpuOp] = {
    "sqr": CpuOp(_cpu_sqr, "mul", 1),
    "mulwin": CpuOp(_cpu_mulwin, "mul", 1),
    "hist": CpuOp(_cpu_hist, "alu", 2),
    "argmin": CpuOp(_cpu_argmin, "alu", 1),
    "isqrt_mean": CpuOp(_cpu_isqrt_mean, "div", 2),
}
for _op, _fn in _LOWERED.items():
    CPU_OPS[_op.value] = CpuOp(_fn, "alu", 1)


def run_cpu_op(op: str, srcs: list[np.ndarray], imm=()) -> np.ndarray:
    with np.errstate(over="ignore"):
        out = CPU_OPS[op].fn([np.asarray(s, dtype=np.uint32) for s in srcs], tuple(imm))
    return np.asarray(out, dtype=np.uint32)


# ---------------------------------------------------------------------------
# trace builder
# ---------------------------------------------------------------------------


class TraceBuilder:
    """Allocates aligned regions and derives RAW/WAR/WAW dependencies."""

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self.events: list[TraceEvent] = []
        self.regions: dict[str, Region] = {}
        self.inputs: dict[str, np.ndarray] = {}
        self._next = ALIGN_BLOCKS  # keep block 0 unused
        self._writer: dict[int, int] = {}
        self._readers: dict[int, list[int]] = {}

    def region(self, name: str, words: int, data=None) -> Region:
        reg = Region(self._next, words)
        span = -(-reg.blocks // ALIGN_BLOCKS) * ALIGN_BLOCKS
        self._next += span
        self.regions[name] = reg
        if data is not None:
            padded = np.zeros(reg.blocks * LANES, dtype=np.uint32)
            padded[:len(data)] = np.asarray(data, dtype=np.uint32)
            self.inputs[name] = padded
        return reg

    def _add(self, kind: str, op: str, srcs, dst: int, imm=()) -> int:
        eid = len(self.events)
        deps = set()
        for b in srcs:
            if b in self._writer:
                deps.add(self._writer[b])
        if dst in self._writer:
            deps.add(self._writer[dst])
        deps.update(self._readers.get(dst, ()))
        deps.discard(eid)
        ev = TraceEvent(eid, kind, op, tuple(srcs), dst, tuple(imm), tuple(sorted(deps)))
        if kind == "pic":
            for b in srcs:
                w = self._writer.get(b)
                if w is not None and self.events[w].kind == "cpu":
                    self.events[w].store_pim = True
        self.events.append(ev)
        for b in srcs:
            self._readers.setdefault(b, []).append(eid)
        self._writer[dst] = eid
        self._readers[dst] = []
        return eid

    def pic(self, op: PicOp | str, srcs, dst: int) -> int:
        op = PicOp(op).value
        return self._add("pic", op, srcs, dst)

    def cpu(self, op: str, srcs, dst: int, imm=()) -> int:
        if op not in CPU_OPS:
            raise ValueError(f"unknown cpu op {op!r}")
        return self._add("cpu", op, srcs, dst, imm)

    def build(self, outputs) -> Trace:
        trace = Trace(self.spec, self.events, self.regions, self.inputs, tuple(outputs))
        trace.metadata = trace_metadata(trace)
        return trace


def trace_metadata(trace: Trace) -> dict:
    n = len(trace.events)
    pic = sum(e.kind == "pic" for e in trace.events)
    reads = sum(len(e.srcs) for e in trace.events)
    distinct = len({b for e in trace.events for b in e.srcs})
    input_blocks = sum(trace.regions[r].blocks for r in trace.inputs)
    return {
        "events": n,
        "pic_eligible_fraction": pic / n if n else 0.0,
        "write_intensity": n / input_blocks if input_blocks else 0.0,
        "reuse_factor": reads / distinct if distinct else 0.0,
    }


def _ring(reg: Region, j: int, k: int) -> int:
    """Scratch slot aligned with block ``j`` (ring of ``RING_DEPTH``)."""
    return reg.base + ALIGN_BLOCKS * (k % RING_DEPTH) + j % ALIGN_BLOCKS


def _replicated(b: TraceBuilder, name: str, nb: int, value: int) -> Region:
    n = min(nb, ALIGN_BLOCKS) * LANES
    return b.region(name, n, np.full(n, value, dtype=np.uint32))


def _const_slot(reg: Region, j: int) -> int:
    return reg.base + j % ALIGN_BLOCKS


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _gen_mat_add(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    mats = [b.region(f"m{k}", n, rng.integers(0, 1 << 31, n, dtype=np.uint32)) for k in range(MAT_ADD_K)]
    acc = b.region("acc", n)
    for k in range(1, MAT_ADD_K):
        for j in range(acc.blocks):
            first = mats[0].block(j) if k == 1 else acc.block(j)
            b.pic(PicOp.ADD, (first, mats[k].block(j)), acc.block(j))
    return ("acc",)


def _gen_cmul(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    a = rng.integers(0, 1 << CMUL_BITS, n, dtype=np.uint32)
    bb = rng.integers(0, 1 << CMUL_BITS, n, dtype=np.uint32)
    b.region("a", n, a)
    b.region("b", n, bb)
    shifted = [b.region(f"a_sh{i}", n, (a.astype(np.uint64) << i) & M32) for i in range(CMUL_BITS)]
    masks = [b.region(f"b_mask{i}", n, np.where((bb >> i) & 1, M32, 0)) for i in range(CMUL_BITS)]
    tmp = [b.region(f"tmp{p}", n) for p in range(2)]
    acc = b.region("acc", n)
    for i in range(CMUL_BITS):
        dst = acc if i == 0 else tmp[i % 2]
        for j in range(acc.blocks):
            b.pic(PicOp.AND, (shifted[i].block(j), masks[i].block(j)), dst.block(j))
        if i:
            for j in range(acc.blocks):
                b.pic(PicOp.XOR, (acc.block(j), tmp[i % 2].block(j)), acc.block(j))
    return ("acc",)


def _gen_string(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    text = rng.integers(0, 26, n, dtype=np.uint32)
    t = b.region("text", n, text)
    outs = []
    for q in range(STRING_QUERIES):
        query = text.copy()
        flips = rng.integers(0, n, max(1, n // 100))
        query[flips] = (query[flips] + 1 + rng.integers(0, 25, flips.size, dtype=np.uint32)) % 26
        qr = b.region(f"q{q}", n, query)
        out = b.region(f"x{q}", n)
        outs.append(f"x{q}")
        for j in range(t.blocks):
            b.pic(PicOp.XOR, (t.block(j), qr.block(j)), out.block(j))
    return tuple(outs)


def _gen_bnn(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    rows = [b.region(f"a{r}", n, rng.integers(0, 2, n, dtype=np.uint32)) for r in range(BNN_ROWS)]
    filters = [b.region(f"w{f}", n, rng.integers(0, 2, n, dtype=np.uint32)) for f in range(BNN_FILTERS)]
    nb = rows[0].blocks
    ones = _replicated(b, "ones", nb, 1)
    tmp = b.region("tmp", RING_DEPTH * ALIGN_BLOCKS * LANES)
    counts = [b.region(f"c{f}", n) for f in range(BNN_FILTERS)]
    k = 0
    for f in range(BNN_FILTERS):
        for r in range(BNN_ROWS):
            for j in range(nb):
                t = _ring(tmp, j, k + j // ALIGN_BLOCKS)
                b.pic(PicOp.XOR, (rows[r].block(j), filters[f].block(j)), t)
                b.pic(PicOp.XOR, (t, _const_slot(ones, j)), t)  # xnor of the 0/1 lanes
                b.pic(PicOp.ADD, (counts[f].block(j), t), counts[f].block(j))
            k += 1
    return tuple(f"c{f}" for f in range(BNN_FILTERS))


def _gen_conv(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    height = -(-n // CONV_WIDTH)
    img = b.region("img", height * CONV_WIDTH, rng.integers(0, 256, n, dtype=np.uint32))
    weights = [int(w) for w in rng.integers(0, 8, 9)]
    zero = b.region("zero", LANES, np.zeros(LANES, dtype=np.uint32))
    out = b.region("out", height * CONV_WIDTH)
    tmp = b.region("tmp", RING_DEPTH * ALIGN_BLOCKS * LANES)
    per_row = CONV_WIDTH // LANES
    k = 0
    for y in range(height):
        for xb in range(per_row):
            o = y * per_row + xb
            first = True
            for dy in range(3):
                if y + dy >= height:
                    continue
                row = (y + dy) * per_row
                cur = img.block(row + xb)
                nxt = img.block(row + xb + 1) if xb + 1 < per_row else zero.block(0)
                for dx in range(3):
                    imm = (weights[3 * dy + dx], dx)
                    if first:
                        b.cpu("mulwin", (cur, nxt), out.block(o), imm)
                        first = False
                        continue
                    t = _ring(tmp, o, k)
                    k += 1
                    b.cpu("mulwin", (cur, nxt), t, imm)
                    b.pic(PicOp.ADD, (out.block(o), t), out.block(o))
    b.conv_weights = weights
    return ("out",)


def _gen_rmse(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    preds = [b.region(f"p{r}", n, rng.integers(0, 4096, n, dtype=np.uint32)) for r in range(RMSE_ROWS)]
    targs = [b.region(f"t{r}", n, rng.integers(0, 4096, n, dtype=np.uint32)) for r in range(RMSE_ROWS)]
    nb = preds[0].blocks
    one = _replicated(b, "one", nb, 1)
    nt, d1, d, sq = (b.region(name, RING_DEPTH * ALIGN_BLOCKS * LANES) for name in ("nt", "d1", "d", "sq"))
    acc = b.region("acc", n)
    out = b.region("rmse", n)
    items = [(j, r) for j in range(nb) for r in range(RMSE_ROWS)]

    def front(i):
        j, r = items[i]
        k = i // ALIGN_BLOCKS + r
        b.pic(PicOp.NOT, (targs[r].block(j),), _ring(nt, j, k))
        b.pic(PicOp.ADD, (preds[r].block(j), _ring(nt, j, k)), _ring(d1, j, k))
        b.pic(PicOp.ADD, (_ring(d1, j, k), _const_slot(one, j)), _ring(d, j, k))

    for i in range(min(LOOKAHEAD, len(items))):
        front(i)
    for i, (j, r) in enumerate(items):
        if i + LOOKAHEAD < len(items):
            front(i + LOOKAHEAD)
        k = i // ALIGN_BLOCKS + r
        b.cpu("sqr", (_ring(d, j, k),), _ring(sq, j, k))
        b.pic(PicOp.ADD, (acc.block(j), _ring(sq, j, k)), acc.block(j))
        if r == RMSE_ROWS - 1:
            b.cpu("isqrt_mean", (acc.block(j),), out.block(j), (RMSE_ROWS,))
    return ("rmse",)


def _gen_knn(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    xs = b.region("x", n, rng.integers(0, 4096, n, dtype=np.uint32))
    ys = b.region("y", n, rng.integers(0, 4096, n, dtype=np.uint32))
    nb = xs.blocks
    queries = rng.integers(0, 4096, (KNN_QUERIES, 2), dtype=np.uint32)
    one = _replicated(b, "one", nb, 1)
    neg = []
    for q in range(KNN_QUERIES):
        pair = []
        for c, coord in enumerate("xy"):
            src = _replicated(b, f"q{q}{coord}", nb, int(queries[q, c]))
            nq = b.region(f"nq{q}{coord}", src.words)
            for s in range(src.blocks):
                b.pic(PicOp.NOT, (src.block(s),), nq.block(s))
                b.pic(PicOp.ADD, (nq.block(s), one.block(s)), nq.block(s))
            pair.append(nq)
        neg.append(pair)
    dx, dy, sx, sy, dist = (b.region(name, RING_DEPTH * ALIGN_BLOCKS * LANES)
                            for name in ("dx", "dy", "sx", "sy", "dist"))
    best = [b.region(f"best{q}", LANES, [M32, 0] + [0] * (LANES - 2)) for q in range(KNN_QUERIES)]
    items = [(q, j) for q in range(KNN_QUERIES) for j in range(nb)]

    def slot(reg, i):
        q, j = items[i]
        return _ring(reg, j, j // ALIGN_BLOCKS + q)

    def front(i):
        q, j = items[i]
        b.pic(PicOp.ADD, (xs.block(j), _const_slot(neg[q][0], j)), slot(dx, i))
        b.pic(PicOp.ADD, (ys.block(j), _const_slot(neg[q][1], j)), slot(dy, i))

    for i in range(min(LOOKAHEAD, len(items))):
        front(i)
    for i, (q, j) in enumerate(items):
        if i + LOOKAHEAD < len(items):
            front(i + LOOKAHEAD)
        b.cpu("sqr", (slot(dx, i),), slot(sx, i))
        b.cpu("sqr", (slot(dy, i),), slot(sy, i))
        b.pic(PicOp.ADD, (slot(sx, i), slot(sy, i)), slot(dist, i))
        valid = min(LANES, n - j * LANES)
        b.cpu("argmin", (slot(dist, i), best[q].block(0)), best[q].block(0), (valid, j * LANES))
    return tuple(f"best{q}" for q in range(KNN_QUERIES))


def _gen_hist(b: TraceBuilder, rng: np.random.Generator, n: int) -> tuple[str, ...]:
    data = b.region("data", n, rng.integers(0, 1 << 32, n, dtype=np.uint64).astype(np.uint32))
    subs = [b.region(f"sub{p}", HIST_BINS, np.zeros(HIST_BINS, dtype=np.uint32)) for p in range(2)]
    out = b.region("hist", HIST_BINS)
    for j in range(data.blocks):
        valid = min(LANES, n - j * LANES)
        sub = subs[j % 2]
        b.cpu("hist", (data.block(j), sub.block(0)), sub.block(0), (valid,))
    b.pic(PicOp.ADD, (subs[0].block(0), subs[1].block(0)), out.block(0))
    return ("hist",)


_GENERATORS = {
    "mat_add": _gen_mat_add,
    "cmul": _gen_cmul,
    "string": _gen_string,
    "bnn": _gen_bnn,
    "conv": _gen_conv,
    "rmse": _gen_rmse,
    "knn": _gen_knn,
    "hist": _gen_hist,
}


def generate(spec: KernelSpec) -> Trace:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    builder = TraceBuilder(spec)
    outputs = _GENERATORS[spec.kernel](builder, rng, spec.size)
    trace = builder.build(outputs)
    if spec.kernel == "conv":
        trace.metadata["weights"] = builder.conv_weights
    return trace


# ---------------------------------------------------------------------------
# golden outputs
# ---------------------------------------------------------------------------


def _clmul(a: int, b: int) -> int:
    out = 0
    for i in range(b.bit_length()):
        if (b >> i) & 1:
            out ^= a << i
    return out


def first_mismatch(a, b) -> int | None:
    """Index of the first differing symbol, or None if equal."""
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    if len(a) != len(b):
        return min(len(a), len(b))
    return None


def _pad(words, total: int) -> np.ndarray:
    out = np.zeros(total, dtype=np.uint64)
    out[:len(words)] = np.asarray(words, dtype=np.uint64)
    return out


def reference_output(spec: KernelSpec, inputs: dict, metadata: dict | None = None) -> dict[str, np.ndarray]:
    """Scalar re-implementation of each kernel over the named inputs.

    Arrays are zero-padded to whole blocks; outputs cover the padding too
    (the padding lanes go through the same arithmetic).
    """
    k = spec.kernel
    ins = {name: np.asarray(v, dtype=np.uint64) for name, v in inputs.items()}
    first = next(iter(ins.values()))
    n = spec.size
    total = -(-max(n, len(first)) // LANES) * LANES

    def arr(name):
        return _pad(ins[name], total)

    if k == "mat_add":
        mats = sorted((m for m in ins if m.startswith("m")), key=lambda m: int(m[1:]))
        acc = np.zeros(total, dtype=np.uint64)
        for m in mats:
            acc = (acc + arr(m)) & M32
        return {"acc": acc.astype(np.uint32)}
    if k == "cmul":
        a, b = arr("a"), arr("b")
        return {"acc": np.array([_clmul(int(x), int(y)) & M32 for x, y in zip(a, b)], dtype=np.uint32)}
    if k == "string":
        text = arr("text")
        return {f"x{q}": (text ^ arr(f"q{q}")).astype(np.uint32)
                for q in range(STRING_QUERIES) if f"q{q}" in ins}
    if k == "bnn":
        out = {}
        for f in range(BNN_FILTERS):
            count = np.zeros(total, dtype=np.uint64)
            for r in range(BNN_ROWS):
                count += (arr(f"a{r}") == arr(f"w{f}")).astype(np.uint64)
            out[f"c{f}"] = count.astype(np.uint32)
        return out
    if k == "conv":
        weights = (metadata or {}).get("weights")
        if weights is None:
            raise ValueError("conv reference needs the weights from the trace metadata")
        height = -(-n // CONV_WIDTH)
        img = _pad(ins["img"], height * CONV_WIDTH).reshape(height, CONV_WIDTH)
        padded = np.zeros((height + 2, CONV_WIDTH + 2), dtype=np.uint64)
        padded[:height, :CONV_WIDTH] = img
        out = np.zeros((height, CONV_WIDTH), dtype=np.uint64)
        for dy in range(3):
            for dx in range(3):
                out += weights[3 * dy + dx] * padded[dy:dy + height, dx:dx + CONV_WIDTH]
        return {"out": (out & M32).astype(np.uint32).reshape(-1)}
    if k == "rmse":
        acc = np.zeros(total, dtype=np.uint64)
        for r in range(RMSE_ROWS):
            diff = (arr(f"p{r}").astype(np.int64) - arr(f"t{r}").astype(np.int64))
            acc += (diff * diff).astype(np.uint64)
        return {"rmse": np.array([math.isqrt(int(v) // RMSE_ROWS) for v in acc], dtype=np.uint32)}
    if k == "knn":
        xs, ys = ins["x"][:n].astype(np.int64), ins["y"][:n].astype(np.int64)
        out = {}
        for q in range(KNN_QUERIES):
            qx, qy = int(ins[f"q{q}x"][0]), int(ins[f"q{q}y"][0])
            d = (xs - qx) ** 2 + (ys - qy) ** 2
            i = int(np.argmin(d))
            best = np.zeros(LANES, dtype=np.uint32)
            best[0], best[1] = d[i], i
            out[f"best{q}"] = best
        return out
    if k == "hist":
        data = ins["data"][:n]
        counts = np.bincount((data >> 28).astype(np.intp), minlength=HIST_BINS)
        return {"hist": counts.astype(np.uint32)}
    raise ValueError(f"unknown kernel {k!r}")


def checksum(outputs: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(outputs):
        h.update(name.encode())
        h.update(np.asarray(outputs[name], dtype="<u4").tobytes())
    return h.hexdigest()


def golden_checksum(trace: Trace) -> str:
    return checksum(reference_output(trace.spec, trace.inputs, trace.metadata))


# ---------------------------------------------------------------------------
# JSON-lines trace files
# ---------------------------------------------------------------------------

TRACE_FORMAT = "himcsim-trace"


def trace_to_jsonl(trace: Trace) -> str:
    header = {
        "format": TRACE_FORMAT,
        "version": 1,
        "kernel": trace.spec.kernel,
        "size": trace.spec.size,
        "seed": trace.spec.seed,
        "category": trace.spec.category,
        "metadata": trace.metadata,
        "regions": {k: [r.base, r.words] for k, r in trace.regions.items()},
        "outputs": list(trace.outputs),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for name in sorted(trace.inputs):
        lines.append(json.dumps({"input": name, "words": trace.inputs[name].tolist()}))
    lines += [json.dumps(e.to_record(), sort_keys=True) for e in trace.events]
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(trace_to_jsonl(trace))


def validate_trace(trace: Trace) -> None:
    """Reject malformed events and non-causal dependencies."""
    from .chaining import check_acyclic

    known = set()
    for i, e in enumerate(trace.events):
        if e.id != i:
            raise TraceError(f"event {i} has id {e.id}")
        if e.kind == "pic":
            try:
                op = PicOp(e.op)
            except ValueError:
                raise TraceError(f"event {i}: unknown pic op {e.op!r}") from None
            if len(e.srcs) != op.arity:
                raise TraceError(f"event {i}: {op.value} takes {op.arity} operand(s)")
        elif e.kind == "cpu":
            if e.op not in CPU_OPS:
                raise TraceError(f"event {i}: unknown cpu op {e.op!r}")
        else:
            raise TraceError(f"event {i}: unknown kind {e.kind!r}")
        bad = [d for d in e.deps if d not in known]
        if bad:
            raise TraceError(f"event {i}: dependency on later or unknown events {bad}")
        known.add(e.id)
    try:
        check_acyclic({e.id: e.deps for e in trace.events})
    except ValueError as exc:
        raise TraceError(str(exc)) from None


def read_trace(path: str | Path) -> Trace:
    try:
        lines = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise TraceError(f"{path}: {exc}") from None
    if not lines or lines[0].get("format") != TRACE_FORMAT:
        raise TraceError(f"{path}: missing {TRACE_FORMAT} header")
    head = lines[0]
    try:
        spec = KernelSpec(head["kernel"], int(head["size"]), int(head["seed"]))
        regions = {k: Region(int(v[0]), int(v[1])) for k, v in head["regions"].items()}
        inputs = {}
        events = []
        for rec in lines[1:]:
            if "input" in rec:
                inputs[rec["input"]] = np.array(rec["words"], dtype=np.uint32)
            else:
                events.append(TraceEvent(int(rec["id"]), rec["kind"], rec["op"],
                                         tuple(int(x) for x in rec["srcs"]), int(rec["dst"]),
                                         tuple(int(x) for x in rec.get("imm", ())),
                                         tuple(int(x) for x in rec.get("deps", ())),
                                         bool(rec.get("store_pim", False))))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceError(f"{path}: malformed record ({exc})") from None
    trace = Trace(spec, events, regions, inputs, tuple(head["outputs"]), head.get("metadata", {}))
    validate_trace(trace)
    return trace


def replay(trace: Trace) -> dict[str, np.ndarray]:
    """Execute the trace in program order with no timing; returns outputs."""
    from .bitline import compute_lanes

    mem: dict[int, np.ndarray] = dict(trace.initial_blocks())
    zero = np.zeros(LANES, dtype=np.uint32)
    for e in trace.events:
        srcs = [mem.get(b, zero) for b in e.srcs]
        if e.kind == "pic":
            mem[e.dst] = compute_lanes(e.op, *srcs)
        else:
            mem[e.dst] = run_cpu_op(e.op, srcs, e.imm)
    return read_outputs(trace, lambda b: mem.get(b, zero))


def read_outputs(trace: Trace, fetch: Callable[[int], np.ndarray]) -> dict[str, np.ndarray]:
    out = {}
    for name in trace.outputs:
        reg = trace.regions[name]
        words = np.concatenate([fetch(reg.base + j) for j in range(reg.blocks)])
        out[name] = words
    return out
