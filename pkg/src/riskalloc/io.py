"""File formats: profile/update CSV, hazards JSON, allocation CSV, drift JSON,
feature CSV and the per-cycle record CSV.

Floats are written with ``repr`` so every file reads back bit-exactly, and
all writes go through :func:`atomic_write_text`.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .drift import DriftSchedule
from .errors import FileFormatError, RiskAllocError
from .hazard import HazardScenario, TestAllocation
from .profile import OccurrenceCounts
from .strategies import CycleRecord

PROFILE_HEADER = ["bin_id", "count"]
ALLOCATION_HEADER = ["hazard_id", "bin_id", "tests"]
RECORD_HEADER = [f.name for f in fields(CycleRecord)]


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory and rename over ``path``.

    Readers see either the old file or the complete new one.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        if isinstance(exc, OSError):
            raise FileFormatError(f"{path}: write failed: {exc}") from exc
        raise


def _rows_to_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read_rows(path, header: Sequence[str]) -> list[dict]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != list(header):
                raise FileFormatError(f"{path}: expected header {','.join(header)}, got {reader.fieldnames}")
            return list(reader)
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def _int(value: str, path, line: int, name: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise FileFormatError(f"{path}:{line}: {name} must be an integer, got {value!r}") from None


# --- profiles ------------------------------------------------------------------

def read_profile_csv(path) -> OccurrenceCounts:
    rows = _read_rows(path, PROFILE_HEADER)
    if not rows:
        raise FileFormatError(f"{path}: no bins")
    pairs = [(_int(r["bin_id"], path, i + 2, "bin_id"), _int(r["count"], path, i + 2, "count"))
             for i, r in enumerate(rows)]
    ids = sorted(b for b, _ in pairs)
    if ids != list(range(len(pairs))):
        raise FileFormatError(f"{path}: bin_id values must be exactly 0..{len(pairs) - 1}")
    counts = np.zeros(len(pairs), dtype=np.uint64)
    for b, c in pairs:
        if c < 0:
            raise FileFormatError(f"{path}: negative count for bin {b}")
        counts[b] = c
    return OccurrenceCounts(counts)


def write_profile_csv(path, counts: OccurrenceCounts) -> None:
    atomic_write_text(path, _rows_to_text(PROFILE_HEADER, ((i, int(c)) for i, c in enumerate(counts.counts))))


# --- hazards -------------------------------------------------------------------

def read_hazards_json(path) -> list[HazardScenario]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list) or not data:
        raise FileFormatError(f"{path}: expected a non-empty JSON array of hazards")
    hazards = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) - {"id", "lambda", "epsilon"} or not {"id", "lambda"} <= set(item):
            raise FileFormatError(f"{path}: hazard #{i} needs keys id, lambda[, epsilon]")
        try:
            hazards.append(HazardScenario(str(item["id"]), float(item["lambda"]), float(item.get("epsilon", 1.0))))
        except (TypeError, ValueError, RiskAllocError) as exc:
            raise FileFormatError(f"{path}: hazard #{i}: {exc}") from exc
    if len({h.id for h in hazards}) != len(hazards):
        raise FileFormatError(f"{path}: duplicate hazard ids")
    return hazards


def write_hazards_json(path, hazards: Sequence[HazardScenario]) -> None:
    data = [{"id": h.id, "lambda": h.lam, "epsilon": h.epsilon} for h in hazards]
    atomic_write_text(path, json.dumps(data, indent=2) + "\n")


# --- allocations -----------------------------------------------------------------

def read_allocation_csv(path, hazards: Sequence[HazardScenario], n_bins: int) -> TestAllocation:
    """Cells missing from the file are zero."""
    index = {h.id: k for k, h in enumerate(hazards)}
    tests = np.zeros((len(hazards), n_bins), dtype=np.int64)
    seen = set()
    for i, row in enumerate(_read_rows(path, ALLOCATION_HEADER)):
        line = i + 2
        hid = row["hazard_id"]
        if hid not in index:
            raise FileFormatError(f"{path}:{line}: unknown hazard_id {hid!r}")
        b = _int(row["bin_id"], path, line, "bin_id")
        t = _int(row["tests"], path, line, "tests")
        if not 0 <= b < n_bins:
            raise FileFormatError(f"{path}:{line}: bin_id {b} out of range 0..{n_bins - 1}")
        if t < 0:
            raise FileFormatError(f"{path}:{line}: negative test count")
        if (hid, b) in seen:
            raise FileFormatError(f"{path}:{line}: duplicate cell ({hid}, {b})")
        seen.add((hid, b))
        tests[index[hid], b] = t
    return TestAllocation(tests)


def allocation_csv_text(alloc: TestAllocation, hazards: Sequence[HazardScenario]) -> str:
    rows = ((h.id, b, int(alloc.tests[k, b])) for k, h in enumerate(hazards) for b in range(alloc.shape[1]))
    return _rows_to_text(ALLOCATION_HEADER, rows)


def write_allocation_csv(path, alloc: TestAllocation, hazards: Sequence[HazardScenario]) -> None:
    atomic_write_text(path, allocation_csv_text(alloc, hazards))


# --- drift schedule ----------------------------------------------------------------

DRIFT_KEYS = {"ramp_start", "ramp_end", "r_max", "shape"}


def drift_from_dict(data: dict, source: str = "drift") -> DriftSchedule:
    if not isinstance(data, dict):
        raise FileFormatError(f"{source}: expected a JSON object")
    unknown = set(data) - DRIFT_KEYS
    if unknown:
        raise FileFormatError(f"{source}: unknown key(s) {sorted(unknown)}")
    missing = {"ramp_start", "ramp_end"} - set(data)
    if missing:
        raise FileFormatError(f"{source}: missing key(s) {sorted(missing)}")
    try:
        return DriftSchedule(int(data["ramp_start"]), int(data["ramp_end"]),
                             float(data.get("r_max", 0.5)), str(data.get("shape", "linear")))
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{source}: {exc}") from exc


def read_drift_json(path) -> DriftSchedule:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON: {exc}") from exc
    return drift_from_dict(data, str(path))


def write_drift_json(path, drift: DriftSchedule) -> None:
    atomic_write_text(path, json.dumps(asdict(drift), indent=2) + "\n")


# --- features ------------------------------------------------------------------

def read_features_csv(path) -> np.ndarray:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]  # header
    if not rows:
        raise FileFormatError(f"{path}: no feature rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FileFormatError(f"{path}: rows have differing numbers of columns")
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_features_csv(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float64)
    header = [f"x{j}" for j in range(data.shape[1])]
    atomic_write_text(path, _rows_to_text(header, ([repr(float(v)) for v in row] for row in data)))


# --- cycle records -------------------------------------------------------------------

def records_csv_text(records: Sequence[CycleRecord]) -> str:
    rows = ((r.cycle, repr(float(r.delta_to_initial)), repr(float(r.risk_controlled)),
             repr(float(r.risk_uncontrolled)), r.tests_added, r.tests_total) for r in records)
    return _rows_to_text(RECORD_HEADER, rows)


def emit_records(records: Sequence[CycleRecord], path) -> None:
    if not records:
        raise RiskAllocError("no cycle records to write")
    atomic_write_text(path, records_csv_text(records))


def read_records_csv(path) -> list[CycleRecord]:
    out = []
    for i, row in enumerate(_read_rows(path, RECORD_HEADER)):
        try:
            out.append(CycleRecord(int(row["cycle"]), float(row["delta_to_initial"]),
                                   float(row["risk_controlled"]), float(row["risk_uncontrolled"]),
                                   int(row["tests_added"]), int(row["tests_total"])))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{i + 2}: {exc}") from exc
    return out
