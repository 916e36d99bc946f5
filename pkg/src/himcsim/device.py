"""Calibrated device parameters and hierarchy configuration.

The frozen device table lives in ``data/device_table.json`` (one record per
memory technology column).  Energies are kept as :class:`~decimal.Decimal`
so they convert to integer femtojoules without rounding.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

LEVELS = ("L1", "L2", "Mem")
TECHNOLOGIES = ("SRAM", "SttRam")

# retention class -> microseconds (None: not a relaxed-retention region)
RETENTION_US: dict[str, Decimal | None] = {
    "n/a": None,
    "75us": Decimal(75),
    "10ms": Decimal(10_000),
    "nonvolatile": None,
}

ENERGY_FIELDS = ("read_energy", "write_energy", "logic_energy", "add_energy")
LATENCY_FIELDS = ("read_latency", "write_latency", "logic_op_latency", "add_op_latency")


class UnsupportedDevice(KeyError):
    def __str__(self) -> str:
        return f"unsupported device configuration: {self.args[0]!r}"


class ConfigError(ValueError):
    """Raised by :func:`validate_config`; ``violations`` lists every problem."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def _dec(value: Any) -> Decimal:
    return value if isinstance(value, Decimal) else Decimal(str(value))


@dataclass(frozen=True)
class DeviceParams:
    level: str
    technology: str
    retention: str
    read_latency: int
    write_latency: int
    logic_op_latency: int
    add_op_latency: int
    read_energy: Decimal  # pJ/bit
    write_energy: Decimal
    logic_energy: Decimal
    add_energy: Decimal
    leakage_power: Decimal  # mW

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.level, self.technology, self.retention)

    @property
    def retention_us(self) -> Decimal | None:
        return RETENTION_US.get(self.retention)

    def energy_fj(self, name: str) -> int:
        """Per-bit energy ``name`` (e.g. ``"write_energy"``) in integer fJ."""
        value = getattr(self, name) * 1000
        if value != value.to_integral_value():
            raise ValueError(f"{name}={getattr(self, name)} pJ is not a whole number of fJ")
        return int(value)

    @property
    def leakage_uw(self) -> int:
        return int(self.leakage_power * 1000)

    def violations(self) -> list[str]:
        out = []
        tag = "/".join(self.key)
        for name in LATENCY_FIELDS:
            if getattr(self, name) < 1:
                out.append(f"{tag}: {name} must be >= 1 cycle")
        for name in ENERGY_FIELDS + ("leakage_power",):
            if getattr(self, name) < 0:
                out.append(f"{tag}: {name} must be >= 0")
        if self.technology == "SttRam":
            if self.write_latency < self.read_latency:
                out.append(f"{tag}: write_latency < read_latency")
            if self.write_energy <= self.read_energy:
                out.append(f"{tag}: write_energy <= read_energy")
        if self.logic_energy < self.write_energy:
            out.append(f"{tag}: logic_energy < write_energy")
        if self.add_energy < self.logic_energy:
            out.append(f"{tag}: add_energy < logic_energy")
        return out

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "DeviceParams":
        kwargs = dict(rec)
        for name in ENERGY_FIELDS + ("leakage_power",):
            kwargs[name] = _dec(kwargs[name])
        for name in LATENCY_FIELDS:
            kwargs[name] = int(kwargs[name])
        return cls(**kwargs)

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        for name in ENERGY_FIELDS + ("leakage_power",):
            rec[name] = float(rec[name])
        return rec


def _read_table_file(path: str | Path | None = None) -> dict[str, Any]:
    if path is None:
        text = resources.files("himcsim").joinpath("data/device_table.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text, parse_float=Decimal)


def load_device_table(path: str | Path | None = None) -> dict[tuple[str, str, str], DeviceParams]:
    table = {}
    for rec in _read_table_file(path)["entries"]:
        params = DeviceParams.from_record(rec)
        bad = params.violations()
        if bad:
            raise ConfigError(bad)
        table[params.key] = params
    return table


_DEFAULT_TABLE: dict[tuple[str, str, str], DeviceParams] | None = None


def default_table() -> dict[tuple[str, str, str], DeviceParams]:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_device_table()
    return _DEFAULT_TABLE


def lookup_params(
    level: str,
    technology: str,
    retention: str,
    overrides: Iterable[DeviceParams] = (),
) -> DeviceParams:
    """Return the calibrated row for ``(level, technology, retention)``.

    User-supplied ``overrides`` take precedence over the shipped table.
    """
    key = (level, technology, retention)
    for params in overrides:
        if params.key == key:
            return params
    try:
        return default_table()[key]
    except KeyError:
        raise UnsupportedDevice(key) from None


# ---------------------------------------------------------------------------
# retention requirement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RetentionRequirement:
    """Times in ns; ``k`` is the worst-case number of block loads that may
    happen before the oldest operand is consumed."""

    t_process: Decimal | int | float
    t_rw: Decimal | int | float
    t_mem: Decimal | int | float
    t_overhead: Decimal | int | float
    k: int

    def __post_init__(self):
        for name in ("t_process", "t_rw", "t_mem", "t_overhead"):
            if _dec(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def required_retention(req: RetentionRequirement) -> Decimal:
    """Required retention time in ns."""
    total = _dec(req.t_process) + _dec(req.t_rw) + _dec(req.t_mem) + _dec(req.t_overhead)
    return total * req.k


# ---------------------------------------------------------------------------
# hierarchy configuration
# ---------------------------------------------------------------------------


@dataclass
class LevelConfig:
    size: int
    block_size: int
    associativity: int
    banks: int
    subarrays: int
    compute_units: int  # 32-bit lanes
    technology: str = "SttRam"
    retention: str = "75us"

    @property
    def n_sets(self) -> int:
        return self.size // (self.block_size * self.associativity)

    @property
    def lanes_per_block(self) -> int:
        return self.block_size * 8 // 32


@dataclass
class CounterParams:
    n_states: int = 4
    clock_period_us: Decimal = Decimal("18.75")


@dataclass
class CpuModel:
    # artifact defaults, not calibrated values
    active_mw: Decimal = Decimal(750)
    idle_mw: Decimal = Decimal(50)
    alu_cycles: int = 1
    mul_cycles: int = 3
    div_cycles: int = 20


def _default_l1() -> LevelConfig:
    return LevelConfig(32 * 1024, 64, 4, banks=4, subarrays=8, compute_units=16,
                       technology="SttRam", retention="75us")


def _default_l2() -> LevelConfig:
    return LevelConfig(1024 * 1024, 64, 8, banks=8, subarrays=16, compute_units=64,
                       technology="SttRam", retention="10ms")


def _default_counters() -> dict[str, CounterParams]:
    return {
        "75us": CounterParams(4, Decimal("18.75")),
        "10ms": CounterParams(4, Decimal("2500")),
    }


@dataclass
class HierarchyConfig:
    cpu_clock_ghz: Decimal = Decimal(2)
    l1: LevelConfig = field(default_factory=_default_l1)
    l2: LevelConfig = field(default_factory=_default_l2)
    # banks of the heterogeneous L2 (low retention serves PiC, high serves the CPU)
    l2_low_retention: str = "75us"
    l2_high_retention: str = "10ms"
    mem_technology: str = "SttRam"
    mem_retention: str = "nonvolatile"
    mem_size: int = 512 * 1024 * 1024
    mem_compute_units: int = 256
    counters: dict[str, CounterParams] = field(default_factory=_default_counters)
    cpu: CpuModel = field(default_factory=CpuModel)
    instruction_table_capacity: int | None = None  # lane instructions; None -> 2 x lanes
    l1_hetero: bool = False
    allow_hetero_l1: bool = False
    device_overrides: list[DeviceParams] = field(default_factory=list)

    def device(self, level: str, technology: str, retention: str) -> DeviceParams:
        return lookup_params(level, technology, retention, self.device_overrides)

    @property
    def l1_params(self) -> DeviceParams:
        return self.device("L1", self.l1.technology, self.l1.retention)

    @property
    def l2_params(self) -> DeviceParams:
        return self.device("L2", self.l2.technology, self.l2.retention)

    @property
    def l2_low_params(self) -> DeviceParams:
        return self.device("L2", self.l2.technology, self.l2_low_retention)

    @property
    def l2_high_params(self) -> DeviceParams:
        return self.device("L2", self.l2.technology, self.l2_high_retention)

    @property
    def mem_params(self) -> DeviceParams:
        return self.device("Mem", self.mem_technology, self.mem_retention)

    def period_cycles(self, retention: str) -> int | None:
        """Counter clock period in CPU cycles for a retention region."""
        if RETENTION_US.get(retention) is None:
            return None
        counter = self.counters[retention]
        cycles = _dec(counter.clock_period_us) * 1000 * _dec(self.cpu_clock_ghz)
        return int(cycles)

    def n_states(self, retention: str) -> int:
        return self.counters[retention].n_states

    def with_mem_lanes(self, lanes: int) -> "HierarchyConfig":
        return replace(self, mem_compute_units=lanes)


def _pow2(n: int) -> bool:
    return isinstance(n, int) and n > 0 and n & (n - 1) == 0


def config_violations(cfg: HierarchyConfig) -> list[str]:
    out: list[str] = []
    if _dec(cfg.cpu_clock_ghz) <= 0:
        out.append("cpu_clock_ghz: must be > 0")
    used_retentions = []
    for name, lvl, level in (("l1", cfg.l1, "L1"), ("l2", cfg.l2, "L2")):
        for attr in ("size", "block_size", "associativity", "banks", "subarrays"):
            if not _pow2(getattr(lvl, attr)):
                out.append(f"{name}.{attr}: {getattr(lvl, attr)} is not a power of two")
        if _pow2(lvl.block_size) and _pow2(lvl.size):
            if lvl.size % lvl.block_size:
                out.append(f"{name}.block_size: does not divide size")
            elif _pow2(lvl.associativity) and lvl.size < lvl.block_size * lvl.associativity:
                out.append(f"{name}.associativity: larger than the number of blocks")
        if lvl.compute_units < 1 or (lvl.compute_units * 32) % (lvl.block_size * 8):
            out.append(
                f"{name}.compute_units: {lvl.compute_units} x 32 bits is not a multiple "
                f"of the {lvl.block_size}B block"
            )
        try:
            cfg.device(level, lvl.technology, lvl.retention)
        except UnsupportedDevice as exc:
            out.append(f"{name}.retention: {exc}")
        if RETENTION_US.get(lvl.retention) is not None:
            used_retentions.append((f"{name}.retention", lvl.retention))
    for attr in ("l2_low_retention", "l2_high_retention"):
        retention = getattr(cfg, attr)
        try:
            cfg.device("L2", cfg.l2.technology, retention)
        except UnsupportedDevice as exc:
            out.append(f"{attr}: {exc}")
        if RETENTION_US.get(retention) is not None:
            used_retentions.append((attr, retention))
    try:
        cfg.mem_params
    except UnsupportedDevice as exc:
        out.append(f"mem: {exc}")
    if cfg.mem_compute_units not in (256, 512):
        out.append(f"mem_compute_units: {cfg.mem_compute_units} not in (256, 512)")
    if not _pow2(cfg.mem_size):
        out.append("mem_size: not a power of two")
    for attr, retention in used_retentions:
        counter = cfg.counters.get(retention)
        if counter is None:
            out.append(f"counters.{retention}: missing for {attr}")
            continue
        if counter.n_states < 2:
            out.append(f"counters.{retention}.n_states: must be >= 2")
        span = counter.n_states * _dec(counter.clock_period_us)
        if span != RETENTION_US[retention]:
            out.append(
                f"counters.{retention}: n_states x clock_period = {span}us "
                f"!= retention {RETENTION_US[retention]}us"
            )
    cpu = cfg.cpu
    if cpu.active_mw < 0 or cpu.idle_mw < 0:
        out.append("cpu: power must be >= 0")
    for attr in ("alu_cycles", "mul_cycles", "div_cycles"):
        if getattr(cpu, attr) < 1:
            out.append(f"cpu.{attr}: must be >= 1")
    if cfg.instruction_table_capacity is not None and cfg.instruction_table_capacity < cfg.l1.lanes_per_block:
        out.append("instruction_table_capacity: smaller than one block instruction")
    if cfg.l1_hetero and not cfg.allow_hetero_l1:
        out.append("l1_hetero: heterogeneous L1 refused without allow_hetero_l1")
    for params in cfg.device_overrides:
        out.extend(params.violations())
    return out


def validate_config(cfg: HierarchyConfig) -> HierarchyConfig:
    bad = config_violations(cfg)
    if bad:
        raise ConfigError(bad)
    return cfg


def default_config() -> HierarchyConfig:
    return HierarchyConfig()


# ---------------------------------------------------------------------------
# (de)serialisation -- same field names as the dataclasses
# ---------------------------------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Decimal):
        return int(obj) if obj == obj.to_integral_value() else float(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_to_dict(cfg: HierarchyConfig) -> dict[str, Any]:
    data = asdict(cfg)
    data["device_overrides"] = [p.to_record() for p in cfg.device_overrides]
    return _jsonable(data)


def config_from_dict(data: dict[str, Any]) -> HierarchyConfig:
    data = dict(data)
    known = set(HierarchyConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError([f"unknown config key: {k}" for k in sorted(unknown)])
    kwargs: dict[str, Any] = {}
    try:
        for key, value in data.items():
            if key in ("l1", "l2"):
                # omitted level fields keep the default geometry
                kwargs[key] = replace(getattr(HierarchyConfig(), key), **value)
            elif key == "counters":
                kwargs[key] = {
                    r: CounterParams(int(c["n_states"]), _dec(c["clock_period_us"]))
                    for r, c in value.items()
                }
            elif key == "cpu":
                cpu = {k: (_dec(v) if k.endswith("_mw") else int(v)) for k, v in value.items()}
                kwargs[key] = CpuModel(**cpu)
            elif key == "device_overrides":
                kwargs[key] = [DeviceParams.from_record(r) for r in value]
            elif key == "cpu_clock_ghz":
                kwargs[key] = _dec(value)
            else:
                kwargs[key] = value
    except (TypeError, AttributeError) as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    return HierarchyConfig(**kwargs)


def load_config(path: str | Path) -> HierarchyConfig:
    try:
        data = json.loads(Path(path).read_text(), parse_float=Decimal)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    return config_from_dict(data)
