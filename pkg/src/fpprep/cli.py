"""``fpprep`` command line: ingest-check, sweep, verify, compress, decompress."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, codec
from . import fp_core as fc
from .errors import FpprepError, TransformError
from .gd import BYTE_COMPRESSORS, GdArchive, compression_ratio, gd_compress, gd_decompress
from .transforms import Technique, forward, inverse

TECHNIQUES = [t.cli_name for t in bench.ALL_TECHNIQUES]


def parse_range(text: str) -> tuple[int, ...]:
    try:
        if ":" in text:
            a, b = (int(p) for p in text.split(":", 1))
            if a > b:
                raise ValueError
            return tuple(range(a, b + 1))
        return (int(text),)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B with A <= B, got {text!r}") from None


def parse_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _column(text: str) -> str | int:
    return int(text) if text.isdigit() else text


def _add_source(p: argparse.ArgumentParser, required=False) -> None:
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--input", type=Path, help="CSV file with a header row")
    src.add_argument("--synthetic", choices=bench.FAMILIES, help="use a generated dataset instead of --input")
    p.add_argument("--column", type=_column, default=0, help="column name or 0-based index (default 0)")
    p.add_argument("--limit", type=int, default=1000, help="use the first N rows (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="seed for --synthetic")


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--technique", choices=TECHNIQUES, action="append", help="repeatable; default all four")
    p.add_argument("--d-range", type=parse_range, default=tuple(range(1, 53)), metavar="A:B", help="d grid (default 1:52)")
    p.add_argument(
        "--bins-k", type=parse_list, default=bench.DEFAULT_BINS_K, metavar="LIST", help="k grid for compact bins"
    )
    p.add_argument("--checked", action="store_true", help="assert every arithmetic invariant while running")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpprep", description="Lossless float preprocessing for shared-bit compression.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ingest-check", help="parse a CSV column and summarise it")
    _add_source(p, required=True)

    p = sub.add_parser("sweep", help="CR metrics over a technique/parameter grid")
    _add_source(p, required=True)
    _add_grid(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", "-o", type=Path, help="report path (default stdout)")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (makes reports non-deterministic)")

    p = sub.add_parser("verify", help="round-trip every grid point through the container")
    _add_source(p, required=True)
    _add_grid(p)

    p = sub.add_parser("compress", help="write a preprocessed container")
    _add_source(p, required=True)
    p.add_argument("--technique", choices=TECHNIQUES + ["identity"], required=True)
    p.add_argument("--param", type=int, default=1, help="k for bins, d otherwise")
    p.add_argument("--output", "-o", type=Path, required=True, help="FPP1 container path")
    p.add_argument("--gd-output", type=Path, help="also write a GD archive of the preprocessed values")
    p.add_argument("--byte-compressor", choices=sorted(BYTE_COMPRESSORS), default="none")
    p.add_argument("--checked", action="store_true")

    p = sub.add_parser("decompress", help="restore values from an FPP1 container or FPGD archive")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", "-o", type=Path, help="CSV path (default stdout)")
    return ap


def _load(args) -> np.ndarray:
    if args.synthetic:
        return bench.synthetic(args.synthetic, args.limit, args.seed)
    return bench.ingest(bench.RunConfig(input=args.input, column=args.column, limit=args.limit))


def _config(args) -> bench.RunConfig:
    techs = tuple(Technique.from_name(t) for t in (args.technique or TECHNIQUES))
    return bench.RunConfig(
        input=getattr(args, "input", None),
        column=args.column,
        limit=args.limit,
        techniques=techs,
        d_values=args.d_range,
        bins_k=args.bins_k,
        fmt=getattr(args, "format", "csv"),
        checked=args.checked,
        timing=getattr(args, "timing", False),
    )


def cmd_ingest_check(args, out) -> int:
    x = _load(args)
    nz = x[x != 0]
    sb = fc.shared_bits(x)
    print(f"values: {x.size}", file=out)
    print(f"unique: {np.unique(x).size}", file=out)
    print(f"zeros: {x.size - nz.size}", file=out)
    if nz.size:
        reg = fc.regions(nz)
        print(f"min: {nz.min()!r}  max: {x.max()!r}", file=out)
        print(f"exponent regions: {reg.min()}..{reg.max()} ({np.unique(reg).size} distinct)", file=out)
    print(f"shared bits: sign={sb.s_sign} exponent={sb.s_e} mantissa={sb.s_m} total={sb.s_tot}", file=out)
    return 0


def cmd_sweep(args, out) -> int:
    cfg = _config(args)
    report = bench.sweep_values(_load(args), cfg)
    if args.output:
        bench.report_emit(report, args.output, cfg.fmt)
    else:
        out.write(bench.report_text(report, cfg.fmt))
    return 0


def cmd_verify(args, out) -> int:
    cfg = _config(args)
    x = _load(args)
    failures = 0
    for tech, param in cfg.grid():
        try:
            res = bench.verify(x, tech, param, checked=cfg.checked)
        except TransformError as exc:
            print(f"{tech.cli_name} param={param}: skipped ({type(exc).__name__})", file=out)
            continue
        failures += not res.ok
        print(res.describe(), file=out)
    print(f"{failures} failure(s)", file=out)
    return 1 if failures else 0


def cmd_compress(args, out) -> int:
    x = _load(args)
    pd = forward(x, args.technique, args.param, checked=args.checked)
    blob = codec.encode(pd)
    back = inverse(codec.decode(blob))
    if bench.first_mismatch(x, back) is not None:
        print("round trip failed; nothing written", file=sys.stderr)
        return 1
    args.output.write_bytes(blob)
    meta = codec.metadata_size_bytes(pd)
    print(f"{args.output}: {len(blob)} bytes ({pd.technique.cli_name}, metadata {meta} bytes)", file=out)
    if args.gd_output:
        a = gd_compress(pd.values, args.byte_compressor)
        data = a.to_bytes()
        args.gd_output.write_bytes(data)
        cr = compression_ratio(8 * len(data), 8 * meta, 64 * x.size)
        print(f"{args.gd_output}: {len(data)} bytes, CR {float(cr):.6f}", file=out)
    return 0


def cmd_decompress(args, out) -> int:
    data = args.input.read_bytes()
    if data[:4] == codec.MAGIC:
        vals = inverse(codec.decode(data))
    else:
        vals = gd_decompress(GdArchive.from_bytes(data))
    lines = ["value"] + [repr(float(v)) for v in vals]
    text = "\n".join(lines) + "\n"
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return 0


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args, out)
    except (FpprepError, OSError) as exc:
        print(f"fpprep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
