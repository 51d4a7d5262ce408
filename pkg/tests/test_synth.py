import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soilph import ConfigError, SynthConfig, generate_synthetic_fields
from soilph.ingest import CropType, field_csv_bytes
from soilph.kernels import haversine_np
from soilph.synth import PH_CLIP, ph_surface

from conftest import north_of


def test_deterministic_per_seed():
    a = generate_synthetic_fields(SynthConfig(n_fields=200, seed=9))
    b = generate_synthetic_fields(SynthConfig(n_fields=200, seed=9))
    assert field_csv_bytes(a) == field_csv_bytes(b)
    c = generate_synthetic_fields(SynthConfig(n_fields=200, seed=10))
    assert field_csv_bytes(a) != field_csv_bytes(c)


def test_smooth_at_one_meter():
    cfg = SynthConfig(n_fields=100, noise_sd=0.0, seed=1)
    lon0, lat0, lon1, lat1 = cfg.resolved_bbox()
    rng = np.random.default_rng(0)
    for _ in range(20):
        lon, lat = rng.uniform(lon0, lon1), rng.uniform(lat0, lat1)
        lon2, lat2 = north_of(lon, lat, 1.0)
        v = ph_surface(cfg, np.array([lon, lon2]), np.array([lat, lat2]))
        assert abs(v[0] - v[1]) < 0.01


def test_record_invariants():
    ds = generate_synthetic_fields(SynthConfig(n_fields=500, seed=2))
    lon0, lat0, lon1, lat1 = SynthConfig(n_fields=500, seed=2).resolved_bbox()
    assert len(set(ds.field_ids)) == 500
    assert np.all((ds.ph >= PH_CLIP[0]) & (ds.ph <= PH_CLIP[1]))
    assert np.all((ds.lon >= lon0) & (ds.lon <= lon1) & (ds.lat >= lat0) & (ds.lat <= lat1))
    for r in ds.records:
        assert abs(r.sand_pct + r.clay_pct + r.silt_pct - 100) <= 1.5
        assert r.crop_type is not CropType.UNKNOWN


def test_crop_pool():
    ds = generate_synthetic_fields(SynthConfig(n_fields=50, crop_pool=("wheat", "kale"), seed=0))
    assert {r.crop_name for r in ds.records} <= {"wheat", "kale"}


def test_spatial_autocorrelation():
    ds = generate_synthetic_fields(SynthConfig(n_fields=2000, correlation_length_m=800, seed=3))
    near, far = [], []
    for i in range(len(ds)):
        d = haversine_np(ds.lon[i], ds.lat[i], ds.lon[i + 1:], ds.lat[i + 1:])
        diff = np.abs(ds.ph[i] - ds.ph[i + 1:])
        near.append(diff[d <= 200])
        far.append(diff[(d >= 1500) & (d <= 2000)])
    assert np.concatenate(near).mean() < np.concatenate(far).mean()


@pytest.mark.parametrize("bad", [
    {"n_fields": 0}, {"correlation_length_m": 0}, {"noise_sd": -1},
    {"bbox": (1.0, 0.0, 0.0, 1.0)}, {"crop_pool": ()},
])
def test_bad_config(bad):
    with pytest.raises(ConfigError):
        SynthConfig(**bad)


@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(0.01, 0.5))
def test_explicit_bbox_respected(lat, lon, size):
    cfg = SynthConfig(n_fields=30, bbox=(lon, lat, lon + size, lat + size), seed=1)
    ds = generate_synthetic_fields(cfg)
    assert np.all((ds.lon >= lon) & (ds.lon <= lon + size))
    assert np.all((ds.lat >= lat) & (ds.lat <= lat + size))
