import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from soilph import FieldDataset, FieldRecord, SchemaError, parse_field_csv, validate_dataset
from soilph.ingest import (CropType, field_csv_bytes, load_crop_mapping, map_crop_type,
                           parse_crop_mapping, write_field_csv)

HEADER = "field_id,longitude,latitude,crop_name,ph\n"


def test_minimal_row():
    ds, rep = parse_field_csv((HEADER + "F1,-1.5,52.1,wheat,6.8\n").encode())
    assert len(ds) == 1 and rep.accepted_count == 1 and rep.rejected_count == 0
    r = ds[0]
    assert (r.field_id, r.longitude, r.latitude, r.crop_name, r.ph) == ("F1", -1.5, 52.1, "wheat", 6.8)
    assert r.crop_type is CropType.CROPS
    assert r.p_index is None and r.sand_pct is None


def test_latitude_out_of_range_rejected():
    text = HEADER + "F1,-1.5,52.1,wheat,6.8\nF2,-1.5,95.0,wheat,6.8\n"
    ds, rep = parse_field_csv(text.encode())
    assert len(ds) == 1 and rep.accepted_count == 1
    assert rep.rejections == [(2, "coord_range")]


def test_unparsable_ph_is_missing_not_rejected():
    rows = [f"F{i},-1.5,52.{i},wheat,{'n/a' if i in (3, 7) else '6.5'}" for i in range(10)]
    ds, rep = parse_field_csv((HEADER + "\n".join(rows) + "\n").encode())
    assert len(ds) == 10 and rep.rejected_count == 0
    assert sum(r.ph is None for r in ds.records) == 2
    assert math.isnan(ds.ph[3]) and math.isnan(ds.ph[7])


@pytest.mark.parametrize("row,reason", [
    (",-1.5,52.1,wheat,6.8", "missing_id"),
    ("F9,,52.1,wheat,6.8", "coord_missing"),
    ("F9,181,52.1,wheat,6.8", "coord_range"),
    ("F1,-1.5,52.1,wheat,6.9", "dup_id"),
    ("F9,-1.5,52.1,wheat,14.5", "ph_range"),
])
def test_rejection_reasons(row, reason):
    ds, rep = parse_field_csv((HEADER + "F1,-1.5,52.1,wheat,6.8\n" + row + "\n").encode())
    assert rep.rejections == [(2, reason)]
    assert len(ds) == 1


def test_texture_checks():
    head = "field_id,longitude,latitude,sand,clay,silt\n"
    ok, rep = parse_field_csv((head + "F1,0,0,40,30,30\n").encode())
    assert rep.rejected_count == 0 and ok[0].silt_pct == 30
    _, rep = parse_field_csv((head + "F1,0,0,40,30,40\n").encode())
    assert rep.rejections == [(1, "texture_sum")]
    _, rep = parse_field_csv((head + "F1,0,0,40.5,30,30.9\n").encode())
    assert rep.rejected_count == 0  # 101.4 is within the rounding tolerance


def test_missing_mandatory_column():
    with pytest.raises(SchemaError, match="latitude"):
        parse_field_csv(b"field_id,longitude,ph\nF1,0,7\n")


def test_empty_file():
    with pytest.raises(SchemaError):
        parse_field_csv(b"")


def test_schema_remap_and_bom():
    text = "﻿ID;x;y\n".replace(";", ",") + "A,1.0,2.0\n"
    ds, _ = parse_field_csv(text.encode("utf-8"), {"field_id": "ID", "longitude": "x", "latitude": "y"})
    assert ds[0].field_id == "A" and ds[0].latitude == 2.0


def test_text_stream_and_blank_rows():
    ds, rep = parse_field_csv(io.StringIO(HEADER + "F1,0,0,wheat,7\n,,,,\n"))
    assert len(ds) == 1 and rep.rejections == [(2, "empty_row")]


@pytest.mark.parametrize("name,expected", [
    ("Grass", CropType.GRASS),
    ("  wheat ", CropType.CROPS),
    ("unmapped-xyz", CropType.UNKNOWN),
    ("POTATOES", CropType.VEGETABLES),
    ("apples", CropType.FRUITS),
])
def test_map_crop_type(name, expected):
    assert map_crop_type(name) is expected


def test_crop_mapping_file(tmp_path):
    p = tmp_path / "map.txt"
    p.write_text("# comment\nSpelt = Crops  # trailing\n\nclover=Grass\n")
    m = load_crop_mapping(p)
    assert m == {"spelt": CropType.CROPS, "clover": CropType.GRASS}
    with pytest.raises(SchemaError):
        parse_crop_mapping(["oats=Cereal"])


def test_validate_dataset():
    recs = [FieldRecord("F1", 0, 0), FieldRecord("F1", 0, 0),
            FieldRecord("F2", 0, 0, sand_pct=40, clay_pct=30, silt_pct=30),
            FieldRecord("F3", 0, 0, sand_pct=40, clay_pct=30, silt_pct=40)]
    rep = validate_dataset(FieldDataset(tuple(recs)))
    assert rep.rejections == [(1, "dup_id"), (3, "texture_sum")]
    assert rep.accepted_count == 2 and rep.rejected_count == 2


def test_without_drops_one_record(synth_small):
    smaller = synth_small.without(5)
    assert len(smaller) == len(synth_small) - 1
    assert synth_small.field_ids[5] not in smaller.field_ids


opt = st.one_of(st.none(), st.floats(0, 100, allow_nan=False))
record = st.builds(
    lambda lon, lat, crop, ph, p: (lon, lat, crop, ph, p),
    st.floats(-180, 180, allow_nan=False), st.floats(-90, 90, allow_nan=False),
    st.text(st.characters(min_codepoint=97, max_codepoint=122), max_size=8),
    st.one_of(st.none(), st.floats(0, 14, allow_nan=False)), opt,
)


@given(st.lists(record, max_size=25))
def test_write_parse_round_trip(rows):
    recs = tuple(FieldRecord(f"F{i}", lon, lat, crop, map_crop_type(crop), ph, p_index=p)
                 for i, (lon, lat, crop, ph, p) in enumerate(rows))
    ds = FieldDataset(recs)
    back, rep = parse_field_csv(field_csv_bytes(ds))
    assert rep.rejected_count == 0
    assert back.records == ds.records
    assert field_csv_bytes(back) == field_csv_bytes(ds)


@given(st.lists(st.tuples(st.floats(-200, 200, allow_nan=False), st.floats(-100, 100, allow_nan=False)),
                max_size=30))
def test_counts_add_up(coords):
    lines = [f"F{i},{lon!r},{lat!r}" for i, (lon, lat) in enumerate(coords)]
    ds, rep = parse_field_csv(("field_id,longitude,latitude\n" + "\n".join(lines)).encode())
    assert rep.accepted_count + rep.rejected_count == len(coords)
    assert all(-180 <= r.longitude <= 180 and -90 <= r.latitude <= 90 for r in ds.records)


def test_write_to_path(tmp_path, synth_small):
    p = tmp_path / "out.csv"
    write_field_csv(synth_small, p)
    back, _ = parse_field_csv(p)
    assert back.records == synth_small.records
