"""Field-record data model, CSV reading/writing and crop-type lookup."""
from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from typing import BinaryIO, Iterable, Mapping

import numpy as np

from .errors import DataError, SchemaError

CRS_NOTE = "WGS84-lonlat"

CANONICAL_COLUMNS = (
    "field_id", "longitude", "latitude", "crop_name",
    "ph", "p", "k", "mg", "sand", "clay", "silt",
)
MANDATORY_COLUMNS = ("field_id", "longitude", "latitude")
MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "-", "?"})
TEXTURE_TOLERANCE = 1.5


class CropType(str, enum.Enum):
    CROPS = "Crops"
    VEGETABLES = "Vegetables"
    FRUITS = "Fruits"
    GRASS = "Grass"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class FieldRecord:
    """One sampled field.  Missing measurements are ``None``, never 0."""

    field_id: str
    longitude: float
    latitude: float
    crop_name: str = ""
    crop_type: CropType = CropType.UNKNOWN
    ph: float | None = None
    p_index: float | None = None
    k_index: float | None = None
    mg_index: float | None = None
    sand_pct: float | None = None
    clay_pct: float | None = None
    silt_pct: float | None = None


@dataclass(frozen=True)
class FieldDataset:
    records: tuple[FieldRecord, ...]
    crs_note: str = CRS_NOTE

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @cached_property
    def lon(self) -> np.ndarray:
        return np.array([r.longitude for r in self.records], dtype=np.float64)

    @cached_property
    def lat(self) -> np.ndarray:
        return np.array([r.latitude for r in self.records], dtype=np.float64)

    @cached_property
    def ph(self) -> np.ndarray:
        """pH per record with NaN marking missing values."""
        return np.array([np.nan if r.ph is None else r.ph for r in self.records],
                        dtype=np.float64)

    @cached_property
    def field_ids(self) -> list[str]:
        return [r.field_id for r in self.records]

    def without(self, handle: int) -> "FieldDataset":
        """Copy of the dataset with one record removed."""
        recs = self.records[:handle] + self.records[handle + 1:]
        return FieldDataset(recs, self.crs_note)


@dataclass
class ValidationReport:
    accepted_count: int = 0
    rejected_count: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"accepted {self.accepted_count}, rejected {self.rejected_count}"]
        lines += [f"  row {row}: {reason}" for row, reason in self.rejections]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# crop types


def _normalize_name(name: str) -> str:
    return " ".join(str(name).strip().lower().split())


def parse_crop_mapping(lines: Iterable[str]) -> dict[str, CropType]:
    """Parse ``name=Type`` lines (``#`` starts a comment)."""
    mapping = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"crop mapping line {lineno}: expected name=Type", code="crop_mapping")
        name, _, kind = line.partition("=")
        try:
            ctype = CropType(kind.strip())
        except ValueError:
            raise SchemaError(f"crop mapping line {lineno}: unknown type {kind.strip()!r}",
                              code="crop_mapping") from None
        mapping[_normalize_name(name)] = ctype
    return mapping


def load_crop_mapping(path: str | os.PathLike | None = None) -> dict[str, CropType]:
    if path is None:
        return dict(_bundled_mapping())
    with open(path, encoding="utf-8") as fh:
        return parse_crop_mapping(fh)


@lru_cache(maxsize=1)
def _bundled_mapping():
    text = resources.files("soilph").joinpath("data/crop_types.txt").read_text(encoding="utf-8")
    return tuple(parse_crop_mapping(text.splitlines()).items())


def map_crop_type(crop_name: str, mapping: Mapping[str, CropType] | None = None) -> CropType:
    """Crop type for a crop name; ``UNKNOWN`` when the name is not listed."""
    if mapping is None:
        mapping = dict(_bundled_mapping())
    return mapping.get(_normalize_name(crop_name), CropType.UNKNOWN)


# ---------------------------------------------------------------------------
# CSV


def _parse_optional(cell: str | None) -> float | None:
    if cell is None:
        return None
    s = cell.strip()
    if s.lower() in MISSING_TOKENS:
        return None
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _texture_problem(sand, clay, silt) -> str | None:
    parts = (sand, clay, silt)
    if any(v is not None and not 0.0 <= v <= 100.0 for v in parts):
        return "texture_range"
    if all(v is not None for v in parts) and abs(sand + clay + silt - 100.0) > TEXTURE_TOLERANCE:
        return "texture_sum"
    return None


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (bytes, bytearray)):
        return io.TextIOWrapper(io.BytesIO(source), encoding="utf-8-sig", newline="")
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8-sig", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_field_csv(source: BinaryIO | bytes | str | os.PathLike,
                    schema: Mapping[str, str] | None = None,
                    crop_mapping: Mapping[str, CropType] | None = None,
                    ) -> tuple[FieldDataset, ValidationReport]:
    """Read field records from a UTF-8 CSV with a header row.

    ``schema`` maps canonical column names to the headers used in the file
    (unlisted names default to themselves).  Rows that cannot become a
    record are listed in the report with a reason code; data rows are
    numbered from 1.
    """
    schema = {c: c for c in CANONICAL_COLUMNS} | dict(schema or {})
    unknown = set(schema) - set(CANONICAL_COLUMNS)
    if unknown:
        raise SchemaError(f"unknown canonical column(s): {sorted(unknown)}")
    if crop_mapping is None:
        crop_mapping = dict(_bundled_mapping())

    try:
        fh = _open_text(source)
        reader = csv.reader(fh)
        header = next(reader, None)
    except (OSError, UnicodeDecodeError) as exc:
        raise OSError(f"cannot read field data: {exc}") from exc
    if header is None:
        raise SchemaError("empty file: no header row", code="schema")
    header = [h.strip() for h in header]
    pos = {name: header.index(col) for name, col in schema.items() if col in header}
    missing = [schema[c] for c in MANDATORY_COLUMNS if c not in pos]
    if missing:
        raise SchemaError(f"missing mandatory column(s): {', '.join(missing)}", code="schema")

    records: list[FieldRecord] = []
    report = ValidationReport()
    seen: set[str] = set()

    def cell(row, name):
        i = pos.get(name)
        return row[i] if i is not None and i < len(row) else None

    try:
        for rowno, row in enumerate(reader, 1):
            if not row or all(not c.strip() for c in row):
                report.rejections.append((rowno, "empty_row"))
                continue
            fid = (cell(row, "field_id") or "").strip()
            if not fid:
                report.rejections.append((rowno, "missing_id"))
                continue
            lon = _parse_optional(cell(row, "longitude"))
            lat = _parse_optional(cell(row, "latitude"))
            if lon is None or lat is None:
                report.rejections.append((rowno, "coord_missing"))
                continue
            if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
                report.rejections.append((rowno, "coord_range"))
                continue
            if fid in seen:
                report.rejections.append((rowno, "dup_id"))
                continue
            ph = _parse_optional(cell(row, "ph"))
            if ph is not None and not 0.0 <= ph <= 14.0:
                report.rejections.append((rowno, "ph_range"))
                continue
            nutrients = [_parse_optional(cell(row, c)) for c in ("p", "k", "mg")]
            if any(v is not None and v < 0 for v in nutrients):
                report.rejections.append((rowno, "nutrient_range"))
                continue
            texture = [_parse_optional(cell(row, c)) for c in ("sand", "clay", "silt")]
            problem = _texture_problem(*texture)
            if problem:
                report.rejections.append((rowno, problem))
                continue
            crop = (cell(row, "crop_name") or "").strip()
            seen.add(fid)
            records.append(FieldRecord(
                field_id=fid, longitude=lon, latitude=lat, crop_name=crop,
                crop_type=map_crop_type(crop, crop_mapping), ph=ph,
                p_index=nutrients[0], k_index=nutrients[1], mg_index=nutrients[2],
                sand_pct=texture[0], clay_pct=texture[1], silt_pct=texture[2],
            ))
    except UnicodeDecodeError as exc:
        raise OSError(f"cannot decode field data as UTF-8: {exc}") from exc
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()

    report.accepted_count = len(records)
    report.rejected_count = len(report.rejections)
    return FieldDataset(tuple(records)), report


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_field_csv(ds: FieldDataset, dest) -> None:
    """Write records with the canonical header; missing values become empty cells."""
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANONICAL_COLUMNS)
        for r in ds.records:
            w.writerow([r.field_id, repr(r.longitude), repr(r.latitude), r.crop_name,
                        _fmt(r.ph), _fmt(r.p_index), _fmt(r.k_index), _fmt(r.mg_index),
                        _fmt(r.sand_pct), _fmt(r.clay_pct), _fmt(r.silt_pct)])
    finally:
        if own:
            fh.close()


def field_csv_bytes(ds: FieldDataset) -> bytes:
    buf = io.StringIO()
    write_field_csv(ds, buf)
    return buf.getvalue().encode("utf-8")


def validate_dataset(ds: FieldDataset) -> ValidationReport:
    """Audit a dataset without modifying it.

    Reason codes: ``dup_id`` (every repeat after the first occurrence),
    ``coord_range``, ``ph_range``, ``texture_range``, ``texture_sum``.
    Rows are 0-based record positions.
    """
    report = ValidationReport()
    seen: set[str] = set()
    bad: set[int] = set()
    for i, r in enumerate(ds.records):
        reasons = []
        if r.field_id in seen:
            reasons.append("dup_id")
        seen.add(r.field_id)
        if not (-180.0 <= r.longitude <= 180.0 and -90.0 <= r.latitude <= 90.0):
            reasons.append("coord_range")
        if r.ph is not None and not 0.0 <= r.ph <= 14.0:
            reasons.append("ph_range")
        problem = _texture_problem(r.sand_pct, r.clay_pct, r.silt_pct)
        if problem:
            reasons.append(problem)
        for reason in reasons:
            report.rejections.append((i, reason))
            bad.add(i)
    report.rejected_count = len(bad)
    report.accepted_count = len(ds) - len(bad)
    return report


def require_nonempty(ds: FieldDataset) -> None:
    if len(ds) == 0:
        raise DataError("dataset has no records", code="empty_dataset")
