"""Benchmark harness: ingest a CSV column, sweep techniques and parameters, report CR metrics.

Report columns, in order::

    technique,param,cr_prep,cr_noprep,delta_cr,z,s_m,s_e,s_tot,iterations,status,wall_ms

``param`` is ``k`` for compact bins and ``d`` for the other techniques.
``cr_*`` are (archive bytes + transform metadata bytes) / raw bytes,
``delta_cr = (cr_prep - cr_noprep) / cr_noprep`` (negative is better) and
``z`` is transform metadata bytes over archive bytes. Grid points where a
technique cannot reach its target carry a status other than ``ok`` and blank
metric columns.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import codec
from . import fp_core as fc
from .errors import (
    CapacityError,
    CellParseError,
    ContractError,
    InfeasibleShiftError,
    IntegrityError,
    MissingColumnError,
    NonConvergenceError,
    RangeExhaustedError,
    RoundTripError,
    ScopeError,
)
from .gd import compression_ratio, gd_compress
from .transforms import Technique, forward, inverse

COLUMNS = (
    "technique",
    "param",
    "cr_prep",
    "cr_noprep",
    "delta_cr",
    "z",
    "s_m",
    "s_e",
    "s_tot",
    "iterations",
    "status",
    "wall_ms",
)
ITERATIVE = (Technique.MULSHIFT, Technique.EVENODD, Technique.EVENNESS)
ALL_TECHNIQUES = (Technique.BINS,) + ITERATIVE
DEFAULT_BINS_K = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)

_STATUS = {
    CapacityError: "capacity",
    NonConvergenceError: "non_convergence",
    RangeExhaustedError: "range_exhausted",
    InfeasibleShiftError: "infeasible_shift",
}


@dataclass
class RunConfig:
    input: Path | None = None
    column: str | int = 0
    limit: int = 1000
    techniques: tuple[Technique, ...] = ALL_TECHNIQUES
    d_values: tuple[int, ...] = tuple(range(1, 53))
    bins_k: tuple[int, ...] = DEFAULT_BINS_K
    output: Path | None = None
    fmt: str = "csv"
    checked: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.limit < 1:
            raise ContractError("row limit must be at least 1")
        if Technique.BINS in self.techniques and not self.bins_k:
            raise ContractError("compact bins needs at least one k")
        if any(t in ITERATIVE for t in self.techniques) and not self.d_values:
            raise ContractError("the d grid is empty")
        if any(not 1 <= d <= fc.MANTISSA_BITS for d in self.d_values):
            raise ContractError("every d must lie in [1, 52]")
        if any(k < 1 for k in self.bins_k):
            raise ContractError("every k must be at least 1")
        if self.fmt not in ("csv", "json"):
            raise ContractError(f"unknown report format {self.fmt!r}")

    def grid(self) -> list[tuple[Technique, int]]:
        out = []
        for t in self.techniques:
            params = self.bins_k if t is Technique.BINS else self.d_values
            out += [(t, p) for p in params]
        return out


@dataclass(frozen=True)
class ReportRow:
    technique: str
    param: int
    cr_prep: float | None
    cr_noprep: float
    delta_cr: float | None
    z: float | None
    s_m: int | None
    s_e: int | None
    s_tot: int | None
    iterations: int | None
    status: str
    wall_ms: float | None = None


@dataclass(frozen=True)
class CompressionReport:
    rows: tuple[ReportRow, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.rows)


# -- ingest ---------------------------------------------------------------


def _parse_cell(text: str, row: int) -> float:
    t = text.strip().replace("−", "-")
    try:
        v = float(t)
    except ValueError:
        raise CellParseError(f"row {row}: cannot parse {text!r} as a number", row=row) from None
    if not math.isfinite(v):
        raise ScopeError(f"row {row}: {text!r} is not a finite number", row=row)
    if v < 0:
        raise ScopeError(f"row {row}: negative value {text!r}; only non-negative data is supported", row=row)
    return v


def ingest_text(text: str, column: str | int = 0, limit: int = 1000) -> np.ndarray:
    """Parse the first ``limit`` values of ``column`` from CSV text with a header row.

    Rows are numbered from 1 for the first data row (the header is row 0).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumnError("input has no header row") from None
    if isinstance(column, int) or (isinstance(column, str) and column not in header and column.isdigit()):
        idx = int(column)
        if not 0 <= idx < len(header):
            raise MissingColumnError(f"column index {idx} out of range ({len(header)} columns)")
    else:
        if column not in header:
            raise MissingColumnError(f"column {column!r} not found; header is {header}")
        idx = header.index(column)
    out = []
    for row_no, row in enumerate(reader, start=1):
        if len(out) >= limit:
            break
        if not row:
            continue
        if idx >= len(row):
            raise CellParseError(f"row {row_no}: missing cell for column {column!r}", row=row_no)
        out.append(_parse_cell(row[idx], row_no))
    if not out:
        raise CellParseError("no data rows")
    arr = np.asarray(out, dtype=np.float64)
    exp = (fc.as_bits(arr) >> np.uint64(52)) & np.uint64(0x7FF)
    bad = np.flatnonzero((exp == 0) & (arr != 0))
    if bad.size:
        raise ScopeError(f"row {int(bad[0]) + 1}: subnormal values are not supported", row=int(bad[0]) + 1)
    return arr


def ingest(config: RunConfig) -> np.ndarray:
    if config.input is None:
        raise ContractError("no input path given")
    text = Path(config.input).read_text(encoding="utf-8-sig")
    return ingest_text(text, config.column, config.limit)


# -- synthetic datasets ---------------------------------------------------

FAMILIES = ("constant", "single", "uniform", "gaussian", "fare", "multi_region")


def synthetic(family: str, n: int = 1000, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in datasets."""
    rng = np.random.default_rng(seed)
    if family == "constant":
        return np.full(n, np.round(rng.uniform(1, 100), 2))
    if family == "single":
        return np.array([rng.uniform(0.5, 1000.0)])
    if family == "uniform":
        return rng.uniform(1.0, 2.0, n)
    if family == "gaussian":
        return np.abs(rng.normal(100.0, 15.0, n)) + 1e-3
    if family == "fare":
        return rng.integers(200, 12800, n) / 100.0
    if family == "multi_region":
        return rng.uniform(1.0, 2.0, n) * np.exp2(rng.integers(-8, 9, n)).astype(np.float64)
    raise ContractError(f"unknown synthetic family {family!r}; choose from {FAMILIES}")


# -- verification ---------------------------------------------------------


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    technique: str
    param: int
    index: int | None = None
    expected_bits: int | None = None
    actual_bits: int | None = None
    message: str = ""

    def describe(self) -> str:
        head = f"{self.technique} param={self.param}: "
        if self.ok:
            return head + "pass"
        if self.index is None:
            return head + f"FAIL {self.message}"
        return head + f"FAIL at index {self.index}: expected {self.expected_bits:#018x}, got {self.actual_bits:#018x}"


def first_mismatch(a: np.ndarray, b: np.ndarray) -> int | None:
    if a.size != b.size:
        return min(a.size, b.size)
    diff = np.flatnonzero(fc.as_bits(a) != fc.as_bits(b))
    return int(diff[0]) if diff.size else None


def verify(values, technique: Technique | str, param: int, *, checked: bool = False, corrupt=None) -> VerifyResult:
    """forward, encode, decode, inverse, compare. ``corrupt`` may mangle the container bytes (fault injection).

    Transform errors (capacity, non-convergence, ...) propagate; they are not round-trip failures.
    """
    tech = Technique.from_name(technique) if isinstance(technique, str) else technique
    x = np.asarray(values, dtype=np.float64)
    pd = forward(x, tech, param, checked=checked)
    blob = codec.encode(pd)
    if corrupt is not None:
        blob = corrupt(blob)
    try:
        back = inverse(codec.decode(blob), checked=checked)
    except IntegrityError as exc:
        return VerifyResult(False, tech.cli_name, param, message=f"{type(exc).__name__}: {exc}")
    i = first_mismatch(x, back)
    if i is None:
        return VerifyResult(True, tech.cli_name, param)
    if i >= min(x.size, back.size):
        return VerifyResult(False, tech.cli_name, param, message=f"length {back.size} != {x.size}")
    return VerifyResult(
        False, tech.cli_name, param, i, int(fc.as_bits(x)[i]), int(fc.as_bits(back)[i]), "bit mismatch"
    )


# -- sweep ----------------------------------------------------------------


def _cr(archive_bytes: int, meta_bytes: int, n: int) -> float:
    return float(compression_ratio(8 * archive_bytes, 8 * meta_bytes, 64 * n))


def evaluate(values: np.ndarray, technique: Technique, param: int, cr_noprep: float, *, checked=False, timing=False) -> ReportRow:
    t0 = time.perf_counter()
    name = technique.cli_name
    try:
        pd = forward(values, technique, param, checked=checked)
    except tuple(_STATUS) as exc:
        status = next(s for cls, s in _STATUS.items() if isinstance(exc, cls))
        wall = (time.perf_counter() - t0) * 1e3 if timing else None
        return ReportRow(name, param, None, cr_noprep, None, None, None, None, None, None, status, wall)
    blob = codec.encode(pd)
    back = inverse(codec.decode(blob), checked=checked)
    i = first_mismatch(values, back)
    if i is not None:
        raise RoundTripError(f"{name} param={param}: round trip differs at index {i}")
    meta = codec.metadata_size_bytes(pd)
    archive = gd_compress(pd.values).size_bytes
    sb = fc.shared_bits(pd.values)
    cr_prep = _cr(archive, meta, values.size)
    wall = (time.perf_counter() - t0) * 1e3 if timing else None
    return ReportRow(
        name,
        param,
        cr_prep,
        cr_noprep,
        (cr_prep - cr_noprep) / cr_noprep,
        meta / archive,
        sb.s_m,
        sb.s_e,
        sb.s_tot,
        pd.iteration_count,
        "ok",
        wall,
    )


def sweep_values(values, config: RunConfig) -> CompressionReport:
    x = np.asarray(values, dtype=np.float64)
    cr_noprep = _cr(gd_compress(x).size_bytes, 0, x.size)
    rows = [evaluate(x, t, p, cr_noprep, checked=config.checked, timing=config.timing) for t, p in config.grid()]
    return CompressionReport(tuple(rows))


def sweep(config: RunConfig) -> CompressionReport:
    return sweep_values(ingest(config), config)


# -- report I/O -----------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_text(report: CompressionReport, fmt: str = "csv") -> str:
    if fmt == "json":
        payload = {"columns": list(COLUMNS), "rows": [asdict(r) for r in report.rows]}
        return json.dumps(payload, indent=1) + "\n"
    if fmt != "csv":
        raise ContractError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(_fmt(getattr(r, c)) for c in COLUMNS)
    return buf.getvalue()


def report_emit(report: CompressionReport, path: Path | str, fmt: str = "csv") -> None:
    if not report.rows:
        raise ContractError("refusing to write an empty report")
    Path(path).write_text(report_text(report, fmt), encoding="utf-8")


_INT_COLS = {"param", "s_m", "s_e", "s_tot", "iterations"}
_FLOAT_COLS = {"cr_prep", "cr_noprep", "delta_cr", "z", "wall_ms"}


def _parse_field(name: str, text: str):
    if text == "":
        return None
    if name in _INT_COLS:
        return int(text)
    if name in _FLOAT_COLS:
        return float(text)
    return text


def report_parse(text: str, fmt: str = "csv") -> CompressionReport:
    if fmt == "json":
        payload = json.loads(text)
        if payload.get("columns") != list(COLUMNS):
            raise IntegrityError("report columns do not match the schema")
        return CompressionReport(tuple(ReportRow(**r) for r in payload["rows"]))
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != COLUMNS:
        raise IntegrityError("report columns do not match the schema")
    rows = [ReportRow(**{c: _parse_field(c, v) for c, v in zip(COLUMNS, row)}) for row in reader if row]
    return CompressionReport(tuple(rows))


def report_load(path: Path | str, fmt: str | None = None) -> CompressionReport:
    p = Path(path)
    fmt = fmt or ("json" if p.suffix == ".json" else "csv")
    return report_parse(p.read_text(encoding="utf-8"), fmt)


def best_row(report: CompressionReport) -> ReportRow | None:
    ok = [r for r in report.rows if r.status == "ok"]
    return min(ok, key=lambda r: r.delta_cr) if ok else None

