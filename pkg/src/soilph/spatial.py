"""Radius queries over field locations.

Distances are haversine great-circle meters on a sphere of radius
6,371,000 m.  The index buckets points into a lat/lon grid whose cells are
at least ``max_radius_m`` wide in both directions, so a query only has to
scan the 3x3 block of cells around its center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .ingest import FieldDataset
from .kernels import EARTH_RADIUS_M, haversine_np, radius_batch


class GeoPoint(NamedTuple):
    longitude: float
    latitude: float


@dataclass(frozen=True)
class NeighborSet:
    handles: np.ndarray
    distances: np.ndarray
    query_center: GeoPoint
    radius_m: float

    def __len__(self):
        return len(self.handles)

    @property
    def neighbors(self) -> list[tuple[int, float]]:
        return list(zip(self.handles.tolist(), self.distances.tolist()))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    return float(haversine_np(a[0], a[1], b[0], b[1]))


def centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    """Arithmetic mean of longitudes and latitudes."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise DataError("centroid of an empty point set", code="empty_set")
    # sorting first makes the float sum independent of input order
    lon = np.sort(pts[:, 0])
    lat = np.sort(pts[:, 1])
    return GeoPoint(float(math.fsum(lon) / len(lon)), float(math.fsum(lat) / len(lat)))


class SpatialIndex:
    """Immutable grid index answering radius queries up to ``max_radius_m``."""

    def __init__(self, lon: np.ndarray, lat: np.ndarray, max_radius_m: float):
        lon = np.array(lon, dtype=np.float64)
        lat = np.array(lat, dtype=np.float64)
        if lon.size == 0:
            raise DataError("cannot index an empty dataset", code="empty_dataset")
        if not max_radius_m > 0:
            raise DataError("max_radius_m must be positive", code="radius_range")
        self.max_radius_m = float(max_radius_m)
        delta = self.max_radius_m / EARTH_RADIUS_M  # angular radius
        if delta >= math.pi / 2:
            raise DataError("max_radius_m too large for a grid index", code="radius_range")
        self.cell_lat = math.degrees(delta) * (1.0 + 1e-9)
        self.lat0 = float(lat.min())
        # widest longitude span a radius-delta disc can cover at the most
        # poleward latitude reachable from the data
        phi = min(90.0, float(np.abs(lat).max()) + self.cell_lat)
        ratio = math.sin(delta) / max(math.cos(math.radians(phi)), 1e-300)
        if ratio >= 1.0:
            self.n_cols = 1
        else:
            min_width = math.degrees(math.asin(ratio)) * (1.0 + 1e-9)
            self.n_cols = max(1, int(360.0 // min_width))
        self.cell_lon = 360.0 / self.n_cols

        rows = np.floor((lat - self.lat0) / self.cell_lat).astype(np.int64)
        cols = np.floor((lon + 180.0) / self.cell_lon).astype(np.int64) % self.n_cols
        cell = rows * self.n_cols + cols
        order = np.argsort(cell, kind="stable")
        keys, starts = np.unique(cell[order], return_index=True)
        self._lon, self._lat = lon, lat
        self._rows, self._cols = rows, cols
        self._keys = keys.astype(np.int64)
        self._starts = np.append(starts, lon.size).astype(np.int64)
        self._members = order.astype(np.int64)
        for arr in (self._lon, self._lat, self._rows, self._cols, self._keys,
                    self._starts, self._members):
            arr.setflags(write=False)

    def __len__(self):
        return self._lon.size

    def point(self, handle: int) -> GeoPoint:
        return GeoPoint(float(self._lon[handle]), float(self._lat[handle]))

    def _check(self, radius_m: float):
        if not 0 < radius_m <= self.max_radius_m:
            raise DataError(f"radius {radius_m} outside (0, {self.max_radius_m}]",
                            code="radius_range")

    def query_many(self, handles, radius_m: float, use_numba=None):
        """CSR ``(offsets, handles, distances)`` for many query handles."""
        self._check(radius_m)
        handles = np.asarray(handles, dtype=np.int64)
        if handles.size and (handles.min() < 0 or handles.max() >= len(self)):
            raise DataError("query handle not indexed", code="handle")
        return radius_batch(self._lon, self._lat, self._rows, self._cols, self.n_cols,
                            self._keys, self._starts, self._members, handles, radius_m,
                            use_numba=use_numba)

    def query(self, handle: int, radius_m: float) -> NeighborSet:
        off, hs, ds = self.query_many([handle], radius_m)
        return NeighborSet(hs, ds, self.point(handle), float(radius_m))


def build_index(ds: FieldDataset, max_radius_m: float) -> SpatialIndex:
    if len(ds) == 0:
        raise DataError("cannot index an empty dataset", code="empty_dataset")
    return SpatialIndex(ds.lon, ds.lat, max_radius_m)


def radius_query(idx: SpatialIndex, center_handle: int, radius_m: float) -> NeighborSet:
    """Fields within ``radius_m`` of the center, excluding the center itself,
    sorted by distance then handle."""
    return idx.query(center_handle, radius_m)


def brute_force_radius_query(ds: FieldDataset, center_handle: int, radius_m: float,
                             max_radius_m: float | None = None) -> NeighborSet:
    """Exhaustive-scan reference for :func:`radius_query`."""
    if not radius_m > 0 or (max_radius_m is not None and radius_m > max_radius_m):
        raise DataError(f"radius {radius_m} out of range", code="radius_range")
    if not 0 <= center_handle < len(ds):
        raise DataError("query handle not in dataset", code="handle")
    lon, lat = ds.lon, ds.lat
    d = haversine_np(lon[center_handle], lat[center_handle], lon, lat)
    hs = np.flatnonzero(d <= radius_m)
    hs = hs[hs != center_handle]
    ds_ = d[hs]
    order = np.lexsort((hs, ds_))
    return NeighborSet(hs[order].astype(np.int64), ds_[order],
                       GeoPoint(float(lon[center_handle]), float(lat[center_handle])),
                       float(radius_m))
