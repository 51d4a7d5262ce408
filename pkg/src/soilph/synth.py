"""Synthetic field datasets with spatially autocorrelated pH.

pH is a smooth random surface plus white noise:

    pH(x) = base + A * sum_i cos(w_i . x + phi_i) / sqrt(n_basis) + N(0, noise_sd)

with wave vectors ``w_i ~ N(0, I / L**2)`` over locally projected meters
(``L`` is the correlation length), giving a surface whose covariance is
close to ``exp(-d**2 / (2 L**2))``.  The result is clipped to [5, 8.5].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .ingest import FieldDataset, FieldRecord, _bundled_mapping, map_crop_type
from .kernels import EARTH_RADIUS_M

PH_CLIP = (5.0, 8.5)
# fields per km^2; uniform placement then gives ~3 neighbors within 400 m
DEFAULT_DENSITY_PER_KM2 = 6.0
DEFAULT_CENTER = (-1.5, 52.5)


@dataclass(frozen=True)
class SynthConfig:
    n_fields: int = 1000
    bbox: tuple[float, float, float, float] | None = None  # lon_min, lat_min, lon_max, lat_max
    correlation_length_m: float = 800.0
    ph_base: float = 6.5
    ph_amplitude: float = 1.0
    noise_sd: float = 0.25
    crop_pool: tuple[str, ...] | None = None
    n_basis: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_fields < 1:
            raise ConfigError("n_fields must be >= 1")
        if not self.correlation_length_m > 0:
            raise ConfigError("correlation_length_m must be > 0")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if self.n_basis < 1:
            raise ConfigError("n_basis must be >= 1")
        if self.bbox is not None:
            lon0, lat0, lon1, lat1 = self.bbox
            if not (-180 <= lon0 < lon1 <= 180 and -90 <= lat0 < lat1 <= 90):
                raise ConfigError("bbox must be (lon_min, lat_min, lon_max, lat_max) with positive extent")
        if self.crop_pool is not None and len(self.crop_pool) == 0:
            raise ConfigError("crop_pool must not be empty")

    def resolved_bbox(self) -> tuple[float, float, float, float]:
        """The configured box, or a square around central England sized to
        the default field density."""
        if self.bbox is not None:
            return tuple(float(v) for v in self.bbox)
        side_m = math.sqrt(self.n_fields / DEFAULT_DENSITY_PER_KM2) * 1000.0
        lon_c, lat_c = DEFAULT_CENTER
        dlat = math.degrees(side_m / EARTH_RADIUS_M) / 2
        dlon = dlat / math.cos(math.radians(lat_c))
        return (lon_c - dlon, lat_c - dlat, lon_c + dlon, lat_c + dlat)


def _project(lon, lat, lon_c, lat_c):
    k = math.pi / 180.0 * EARTH_RADIUS_M
    return (lon - lon_c) * k * math.cos(math.radians(lat_c)), (lat - lat_c) * k


def ph_surface(cfg: SynthConfig, lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
    """Noise-free, unclipped pH at the given points."""
    lon0, lat0, lon1, lat1 = cfg.resolved_bbox()
    lon_c, lat_c = (lon0 + lon1) / 2, (lat0 + lat1) / 2
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    w = rng.normal(0.0, 1.0 / cfg.correlation_length_m, size=(cfg.n_basis, 2))
    phase = rng.uniform(0.0, 2 * math.pi, size=cfg.n_basis)
    x, y = _project(np.asarray(lon, dtype=np.float64), np.asarray(lat, dtype=np.float64), lon_c, lat_c)
    s = np.cos(np.outer(x, w[:, 0]) + np.outer(y, w[:, 1]) + phase).sum(axis=1)
    return cfg.ph_base + cfg.ph_amplitude * s / math.sqrt(cfg.n_basis)


def generate_synthetic_fields(cfg: SynthConfig) -> FieldDataset:
    """Deterministic (per seed) dataset in the standard field schema."""
    lon0, lat0, lon1, lat1 = cfg.resolved_bbox()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence([cfg.seed, 0]).spawn(4)]
    loc_rng, noise_rng, crop_rng, soil_rng = streams
    n = cfg.n_fields
    lon = loc_rng.uniform(lon0, lon1, size=n)
    lat = loc_rng.uniform(lat0, lat1, size=n)
    ph = ph_surface(cfg, lon, lat) + noise_rng.normal(0.0, cfg.noise_sd, size=n)
    ph = np.clip(ph, *PH_CLIP)

    mapping = dict(_bundled_mapping())
    pool = tuple(cfg.crop_pool) if cfg.crop_pool is not None else tuple(sorted(mapping))
    crops = crop_rng.integers(0, len(pool), size=n)

    nutrients = soil_rng.integers(0, 6, size=(n, 3)).astype(float)
    texture = np.round(soil_rng.dirichlet([4.0, 3.0, 3.0], size=n) * 100.0, 1)
    texture[:, 2] = np.round(100.0 - texture[:, 0] - texture[:, 1], 1)

    width = max(5, len(str(n)))
    records = []
    for i in range(n):
        name = pool[crops[i]]
        records.append(FieldRecord(
            field_id=f"S{i + 1:0{width}d}",
            longitude=float(lon[i]), latitude=float(lat[i]),
            crop_name=name, crop_type=map_crop_type(name, mapping),
            ph=float(ph[i]),
            p_index=float(nutrients[i, 0]), k_index=float(nutrients[i, 1]),
            mg_index=float(nutrients[i, 2]),
            sand_pct=float(texture[i, 0]), clay_pct=float(texture[i, 1]),
            silt_pct=float(texture[i, 2]),
        ))
    return FieldDataset(tuple(records))
