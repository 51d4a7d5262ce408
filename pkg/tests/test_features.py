import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soilph import (Block, DataError, FeatureSpec, SchemaError, SynthConfig, brute_force_radius_query,
                    build_design_matrix, build_index, centroid, encode_categorical,
                    generate_synthetic_fields, haversine_distance, neighbor_stats,
                    neighbor_summary_table, parse_feature_spec, stats_at_point)
from soilph.features import CategoricalEncoder, format_summary_table, radius_stats
from soilph.spatial import GeoPoint

from conftest import make_dataset, north_of


def _brute_stats(ds, h, r):
    ns = brute_force_radius_query(ds, h, r)
    hs = [j for j in ns.handles.tolist() if not math.isnan(ds.ph[j])]
    if not hs:
        return 0, None, None, None, None
    ph = [ds.ph[j] for j in hs]
    c = centroid([GeoPoint(ds.lon[j], ds.lat[j]) for j in hs])
    d = haversine_distance(GeoPoint(ds.lon[h], ds.lat[h]), c)
    return len(hs), sum(ph) / len(ph), min(ph), max(ph), d


def test_single_neighbor():
    lon, lat = -1.5, 52.1
    ds = make_dataset([lon, north_of(lon, lat, 150)[0]], [lat, north_of(lon, lat, 150)[1]], [7.0, 6.4])
    f = neighbor_stats(ds, build_index(ds, 400), 0, 400)
    assert f.k == 1 and f.ph_avg == f.ph_min == f.ph_max == 6.4
    assert abs(f.dist_centroid_m - 150) < 0.5


def test_three_neighbors_arithmetic():
    lon, lat = 0.0, 0.0
    pts = [(lon, lat)] + [north_of(lon, lat, m) for m in (50, 100, 150)]
    ds = make_dataset([p[0] for p in pts], [p[1] for p in pts], [5.0, 6.0, 7.0, 8.0])
    f = neighbor_stats(ds, build_index(ds, 200), 0, 200)
    assert (f.k, f.ph_avg, f.ph_min, f.ph_max) == (3, 7.0, 6.0, 8.0)
    assert f.dist_centroid_m == pytest.approx(100.0, abs=0.5)


def test_missing_ph_neighbors_are_ignored():
    lon, lat = 0.0, 0.0
    pts = [(lon, lat), north_of(lon, lat, 50), north_of(lon, lat, 100)]
    ds = make_dataset([p[0] for p in pts], [p[1] for p in pts], [5.0, None, 7.0])
    f = neighbor_stats(ds, build_index(ds, 200), 0, 200)
    assert f.k == 1 and f.ph_avg == 7.0


def test_no_neighbors_leaves_stats_missing():
    ds = make_dataset([0.0, 1.0], [0.0, 0.0])
    f = neighbor_stats(ds, build_index(ds, 500), 0, 500)
    assert f.k == 0 and f.ph_avg is None and f.dist_centroid_m is None


def test_matches_brute_force_everywhere():
    ds = generate_synthetic_fields(SynthConfig(n_fields=50, seed=11))
    radii = [100, 300, 500, 1000, 2000]
    stats = radius_stats(ds, build_index(ds, 2000), radii)
    for r in radii:
        for h in range(len(ds)):
            k, avg, lo, hi, d = _brute_stats(ds, h, r)
            got = stats[float(r)].row(h)
            assert got.k == k
            if k:
                assert got.ph_avg == pytest.approx(avg, rel=1e-12)
                assert (got.ph_min, got.ph_max) == (lo, hi)
                assert got.dist_centroid_m == pytest.approx(d, rel=1e-9, abs=1e-6)


def test_leakage_guard(synth_small):
    idx = build_index(synth_small, 1000)
    for h in (0, 17, 123, 299):
        own = neighbor_stats(synth_small, idx, h, 1000)
        rec = synth_small[h]
        assert stats_at_point(synth_small.without(h), rec.longitude, rec.latitude, 1000) == own


def test_summary_table_matches_brute_force():
    ds = generate_synthetic_fields(SynthConfig(n_fields=200, seed=4))
    radii = [200, 500, 1000]
    rows = neighbor_summary_table(ds, build_index(ds, 1000), radii)
    for row, r in zip(rows, radii):
        ks, dists, spreads = [], [], []
        for h in range(len(ds)):
            ns = brute_force_radius_query(ds, h, r)
            if len(ns):
                ks.append(len(ns))
                dists.append(float(np.mean(ns.distances)))
                ph = ds.ph[ns.handles]
                spreads.append(ph.max() - ph.min())
        assert row.radius_m == r and row.fields_with_neighbors == len(ks)
        assert row.mean_k == pytest.approx(np.mean(ks), rel=1e-12)
        assert row.mean_dist_m == pytest.approx(np.mean(dists), rel=1e-9)
        assert row.mean_ph_spread == pytest.approx(np.mean(spreads), rel=1e-9)


def test_summary_single_field():
    rows = neighbor_summary_table(make_dataset([0.0], [0.0]), build_index(make_dataset([0.0], [0.0]), 500),
                                  [100, 500])
    assert [r.fields_with_neighbors for r in rows] == [0, 0]
    assert all(r.mean_k is None and r.mean_ph_spread is None for r in rows)
    assert len(format_summary_table(rows).splitlines()) == 3


def test_parse_feature_spec():
    spec = parse_feature_spec("CropName+Min/Max/Avg400")
    assert spec.blocks == (Block("CropName"), Block("Min", 400.0), Block("Max", 400.0), Block("Avg", 400.0))
    assert spec.radii == (400.0,)
    spec = parse_feature_spec("Long/Lat/CropName+Nb/Dist/Avg200+Nb/Dist/Avg300")
    assert len(spec.blocks) == 9 and spec.radii == (200.0, 300.0)
    assert FeatureSpec.from_dict(spec.to_dict()) == spec
    for bad in ("Foo", "Avg", "Long400", "Avg400+Avg400"):
        with pytest.raises(SchemaError):
            parse_feature_spec(bad)


def test_design_matrix_long_lat():
    rng = np.random.default_rng(0)
    ds = make_dataset(rng.uniform(0, 1, 10), rng.uniform(0, 1, 10), rng.uniform(5, 8, 10))
    dm = build_design_matrix(ds, build_index(ds, 100), parse_feature_spec("Long/Lat"))
    assert dm.shape == (10, 2) and dm.column_names == ["longitude", "latitude"]
    np.testing.assert_array_equal(dm.y, ds.ph)


def test_design_matrix_row_filter():
    # 13 fields in a tight cluster, 7 isolated ones spread far apart
    lon = [0.0 + 0.0005 * i for i in range(13)] + [1.0 + i for i in range(7)]
    lat = [0.0] * 13 + [10.0] * 7
    crops = ["wheat", "grass"] * 10
    ds = make_dataset(lon, lat, [6.0 + 0.1 * i for i in range(20)], crops)
    idx = build_index(ds, 400)
    isolated = sum(neighbor_stats(ds, idx, h, 400).k == 0 for h in range(20))
    assert isolated == 7
    dm = build_design_matrix(ds, idx, parse_feature_spec("Nb/Dist/Avg400+CropType"))
    assert dm.shape[0] == 13 and dm.block_shape == (13, 4)
    assert dm.row_fields.tolist() == list(range(13))


def test_design_matrix_columns(synth_small):
    idx = build_index(synth_small, 500)
    dm = build_design_matrix(synth_small, idx, parse_feature_spec("CropName+Min/Max/Avg500"))
    names = sorted({r.crop_name for r in (synth_small[i] for i in dm.row_fields)})
    assert dm.column_names == [f"crop_name={c}" for c in names] + ["ph_min_500", "ph_max_500", "ph_avg_500"]
    assert np.all(dm.x[:, :len(names)].sum(axis=1) == 1)
    assert not np.isnan(dm.x).any()
    sub = dm.subset([0, 2])
    assert sub.shape == (2, dm.shape[1])


def test_require_radii_fixes_rows(synth_small):
    idx = build_index(synth_small, 800)
    a = build_design_matrix(synth_small, idx, parse_feature_spec("Long/Lat", require_radii=[200]))
    b = build_design_matrix(synth_small, idx, parse_feature_spec("Long/Lat+Nb/Dist/Avg800",
                                                                  require_radii=[200]))
    assert a.row_fields.tolist() == b.row_fields.tolist()
    assert a.shape[0] < len(synth_small)


def test_radius_outside_index():
    ds = make_dataset([0.0, 0.001], [0.0, 0.0])
    with pytest.raises(DataError):
        build_design_matrix(ds, build_index(ds, 100), parse_feature_spec("Avg400"))


def test_reused_encoders_and_unseen():
    ds = make_dataset([0.0, 0.001, 0.002], [0, 0, 0], crops=["wheat", "oats", "rye"])
    enc = {"crop_name": CategoricalEncoder("crop_name", ("oats", "wheat"))}
    dm = build_design_matrix(ds, build_index(ds, 500), parse_feature_spec("CropName"), encoders=enc)
    assert dm.column_names == ["crop_name=oats", "crop_name=wheat"]
    assert dm.x.tolist() == [[0, 1], [1, 0], [0, 0]]
    assert dm.unseen_categories == {"crop_name": 1}


def test_encode_categorical_examples():
    cols, enc = encode_categorical(["a", "b", "a"], "onehot")
    assert enc.column_names == ["value=a", "value=b"]
    assert cols.tolist() == [[1, 0], [0, 1], [1, 0]]
    cols, _ = encode_categorical(["a", "b", "a"], "ordinal")
    assert cols[:, 0].tolist() == [0, 1, 0]


@given(st.lists(st.text(min_size=1, max_size=6), min_size=1, max_size=60))
def test_onehot_one_column_per_distinct_sorted(values):
    cols, enc = encode_categorical(values)
    assert list(enc.categories) == sorted(set(values))
    assert cols.shape == (len(values), len(set(values)))
    assert np.all(cols.sum(axis=1) == 1)


def test_forty_crop_names():
    names = [f"crop{i:02d}" for i in range(40)][::-1] * 2
    cols, enc = encode_categorical(names)
    assert cols.shape[1] == 40 and list(enc.categories) == sorted(set(names))


def test_design_matrix_csv(tmp_path, synth_small):
    dm = build_design_matrix(synth_small, build_index(synth_small, 300), parse_feature_spec("Long/Lat+Avg300"))
    p = tmp_path / "dm.csv"
    dm.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "longitude,latitude,ph_avg_300,ph"
    assert len(lines) == dm.shape[0] + 1
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, :3], dm.x)
