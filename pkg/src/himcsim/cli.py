"""Command-line entry point: ``himcsim run|sweep|margins|trace-dump``.

Exit codes: 0 success, 2 configuration error, 3 trace error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from .chaining import as_mode
from .device import ConfigError, config_from_dict, default_config, load_config
from .sim import Placement, RunSpec, reports_csv, run, sweep
from .variation import VariationSpec, histogram_csv, margin_report
from .workloads import KERNELS, KernelSpec, TraceError, generate, read_trace, write_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRACE = 3


def _config(path: str | None):
    return load_config(path) if path else default_config()


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _config(args.config)
    if args.trace:
        trace = read_trace(args.trace)
    else:
        trace = generate(KernelSpec(args.kernel, args.size, args.seed))
    report = run(trace, cfg, args.placement, as_mode(args.chaining), functional=not args.timing_only)
    if args.format == "csv":
        text = reports_csv([{"report": report.to_dict()}])
    else:
        text = report.to_json() + "\n"
    _write(text, args.out)
    return EXIT_OK


def _matrix_specs(matrix: dict, base_cfg) -> list:
    kernels = matrix.get("kernels", list(KERNELS))
    placements = matrix.get("placements", [p.value for p in Placement])
    modes = [as_mode(m).value for m in matrix.get("chaining", ["on"])]
    sizes = matrix.get("sizes", [1024])
    seeds = matrix.get("seeds", [0])
    configs: dict = {}
    for name, value in matrix.get("configs", {"default": None}).items():
        try:
            if value is None:
                configs[name] = base_cfg
            elif isinstance(value, str):
                configs[name] = load_config(value)
            else:
                configs[name] = config_from_dict(value)
        except ConfigError as exc:
            configs[name] = exc  # reported per run, siblings still execute
    specs = []
    for k, p, m, n, s, c in itertools.product(kernels, placements, modes, sizes, seeds, sorted(configs)):
        specs.append((RunSpec(k, Placement(p).value, m, int(n), int(s), c), configs[c]))
    return specs


def cmd_sweep(args) -> int:
    cfg = _config(args.config)
    try:
        matrix = json.loads(Path(args.matrix).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{args.matrix}: {exc}"]) from None
    try:
        specs = _matrix_specs(matrix, cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError([f"{args.matrix}: {exc}"]) from None
    bundle = sweep(specs, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bundle.json").write_text(json.dumps(bundle, sort_keys=True, indent=2) + "\n")
    (out / "reports.csv").write_text(reports_csv(bundle["runs"]))
    print(f"{len(bundle['runs'])} runs, {len(bundle['errors'])} errors -> {out}")
    return EXIT_OK


def cmd_margins(args) -> int:
    spec = VariationSpec(args.tmr, args.sigma, args.samples, args.seed)
    _write(json.dumps(margin_report(spec), sort_keys=True, indent=2) + "\n", args.out)
    if args.histogram:
        Path(args.histogram).write_text(histogram_csv(spec, args.bins))
    return EXIT_OK


def cmd_trace_dump(args) -> int:
    trace = generate(KernelSpec(args.kernel, args.size, args.seed))
    if args.out:
        write_trace(trace, args.out)
    else:
        from .workloads import trace_to_jsonl

        sys.stdout.write(trace_to_jsonl(trace))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="himcsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one kernel under one placement")
    p.add_argument("--config", help="hierarchy config (JSON); defaults built in")
    p.add_argument("--kernel", choices=KERNELS, default="mat_add")
    p.add_argument("--trace", help="replay a trace file instead of generating one")
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--placement", choices=[x.value for x in Placement], default="PicL2Het")
    p.add_argument("--chaining", choices=["on", "off"], default="on")
    p.add_argument("--timing-only", action="store_true", help="skip data values (no checksum)")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a kernel x placement matrix")
    p.add_argument("--config")
    p.add_argument("--matrix", required=True, help="JSON: kernels, placements, chaining, sizes, seeds, configs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("margins", help="Monte Carlo sense-margin report")
    p.add_argument("--tmr", type=float, default=1.5)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--histogram", help="also write per-class histogram CSV here")
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_margins)

    p = sub.add_parser("trace-dump", help="write a generated trace as JSON lines")
    p.add_argument("--kernel", choices=KERNELS, required=True)
    p.add_argument("--size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace_dump)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except ValueError as exc:  # bad sizes, margins parameters
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
