"""Neighbor pH statistics and design-matrix assembly.

For a field ``y`` and radius ``r`` the neighbor statistics are taken over
the ``k`` other fields within ``r`` meters whose pH is known:

    ph_avg  = sum(pH(x_j)) / k
    ph_min  = min(pH(x_j)),  ph_max = max(pH(x_j))
    dist    = haversine(y, centre of the k neighbor locations)

A field never counts as its own neighbor.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, SchemaError
from .ingest import FieldDataset
from .kernels import haversine_np
from .spatial import SpatialIndex

STAT_BLOCKS = ("Nb", "Dist", "Avg", "Min", "Max")
PLAIN_BLOCKS = ("Long", "Lat", "CropName", "CropType")
ENCODINGS = ("onehot", "ordinal")


@dataclass(frozen=True)
class RadiusFeatures:
    radius_m: float
    k: int
    ph_avg: float | None
    ph_min: float | None
    ph_max: float | None
    dist_centroid_m: float | None


@dataclass(frozen=True)
class RadiusStats:
    """Column-wise neighbor statistics for many query fields at one radius.

    Statistics are NaN where ``k == 0``.
    """

    radius_m: float
    k: np.ndarray
    ph_avg: np.ndarray
    ph_min: np.ndarray
    ph_max: np.ndarray
    dist_centroid: np.ndarray
    mean_dist: np.ndarray

    def row(self, i: int) -> RadiusFeatures:
        k = int(self.k[i])
        if k == 0:
            return RadiusFeatures(self.radius_m, 0, None, None, None, None)
        return RadiusFeatures(self.radius_m, k, float(self.ph_avg[i]), float(self.ph_min[i]),
                              float(self.ph_max[i]), float(self.dist_centroid[i]))


def _segment_stats(radius, q_lon, q_lat, offsets, hs, dists, ph, lon, lat):
    """Aggregate CSR neighbor lists into :class:`RadiusStats`.

    Sums run in ascending-handle order inside each segment, which keeps the
    result independent of how distance ties were ordered.
    """
    nq = offsets.size - 1
    owner = np.repeat(np.arange(nq), np.diff(offsets))
    use = ~np.isnan(ph[hs])
    owner, hs, dists = owner[use], hs[use], dists[use]
    order = np.lexsort((hs, owner))
    owner, hs, dists = owner[order], hs[order], dists[order]

    k = np.bincount(owner, minlength=nq)
    has = k > 0
    nan = np.full(nq, np.nan)
    vals = ph[hs]
    s = np.bincount(owner, weights=vals, minlength=nq)
    ph_avg = np.divide(s, k, out=nan.copy(), where=has)
    ph_min = np.full(nq, np.inf)
    ph_max = np.full(nq, -np.inf)
    np.minimum.at(ph_min, owner, vals)
    np.maximum.at(ph_max, owner, vals)
    ph_min[~has] = np.nan
    ph_max[~has] = np.nan
    c_lon = np.divide(np.bincount(owner, weights=lon[hs], minlength=nq), k, out=nan.copy(), where=has)
    c_lat = np.divide(np.bincount(owner, weights=lat[hs], minlength=nq), k, out=nan.copy(), where=has)
    dist_c = nan.copy()
    dist_c[has] = haversine_np(q_lon[has], q_lat[has], c_lon[has], c_lat[has])
    mean_d = np.divide(np.bincount(owner, weights=dists, minlength=nq), k, out=nan.copy(), where=has)
    return RadiusStats(float(radius), k.astype(np.int64), ph_avg, ph_min, ph_max, dist_c, mean_d)


def radius_stats(ds: FieldDataset, idx: SpatialIndex, radii: Sequence[float],
                 handles=None) -> dict[float, RadiusStats]:
    """Neighbor statistics for ``handles`` (default: every field) at each radius.

    One query at the largest radius is filtered down for the smaller ones.
    """
    radii = sorted({float(r) for r in radii})
    if not radii:
        return {}
    handles = np.arange(len(ds)) if handles is None else np.asarray(handles, dtype=np.int64)
    off, hs, d = idx.query_many(handles, radii[-1])
    for r in radii:
        idx._check(r)
    q_lon, q_lat = ds.lon[handles], ds.lat[handles]
    out = {}
    owner = np.repeat(np.arange(handles.size), np.diff(off))
    for r in radii:
        keep = d <= r
        off_r = np.zeros_like(off)
        off_r[1:] = np.cumsum(np.bincount(owner[keep], minlength=handles.size))
        out[r] = _segment_stats(r, q_lon, q_lat, off_r, hs[keep], d[keep], ds.ph, ds.lon, ds.lat)
    return out


def neighbor_stats(ds: FieldDataset, idx: SpatialIndex, field: int, radius_m: float) -> RadiusFeatures:
    """Neighbor pH statistics of one field; ``k == 0`` leaves them missing."""
    return radius_stats(ds, idx, [radius_m], handles=[field])[float(radius_m)].row(0)


def stats_at_point(ds: FieldDataset, lon: float, lat: float, radius_m: float) -> RadiusFeatures:
    """Statistics for an arbitrary location against every record of ``ds``.

    Used to score locations that are not part of the dataset (all records
    are eligible neighbors).
    """
    d = haversine_np(lon, lat, ds.lon, ds.lat)
    hs = np.flatnonzero(d <= radius_m)
    off = np.array([0, hs.size])
    st = _segment_stats(radius_m, np.array([lon]), np.array([lat]), off, hs, d[hs],
                        ds.ph, ds.lon, ds.lat)
    return st.row(0)


# ---------------------------------------------------------------------------
# neighbor summary


@dataclass(frozen=True)
class NeighborSummaryRow:
    radius_m: float
    fields_with_neighbors: int
    mean_k: float | None
    mean_dist_m: float | None
    mean_ph_spread: float | None


def neighbor_summary_table(ds: FieldDataset, idx: SpatialIndex,
                           radii: Sequence[float]) -> list[NeighborSummaryRow]:
    """Per-radius averages over the fields that have at least one neighbor."""
    stats = radius_stats(ds, idx, radii)
    rows = []
    for r in sorted(float(x) for x in radii):
        st = stats[r]
        has = st.k > 0
        n = int(has.sum())
        if n == 0:
            rows.append(NeighborSummaryRow(r, 0, None, None, None))
            continue
        rows.append(NeighborSummaryRow(
            r, n,
            float(st.k[has].mean()),
            float(st.mean_dist[has].mean()),
            float((st.ph_max[has] - st.ph_min[has]).mean()),
        ))
    return rows


def format_summary_table(rows: Sequence[NeighborSummaryRow]) -> str:
    head = ("radius_m", "fields_with_neighbors", "mean_k", "mean_dist_m", "mean_ph_spread")
    body = [[f"{r.radius_m:g}", str(r.fields_with_neighbors),
             "" if r.mean_k is None else f"{r.mean_k:.2f}",
             "" if r.mean_dist_m is None else f"{r.mean_dist_m:.2f}",
             "" if r.mean_ph_spread is None else f"{r.mean_ph_spread:.2f}"] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def summary_rows_as_csv(rows: Sequence[NeighborSummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius_m", "fields_with_neighbors", "mean_k", "mean_dist_m", "mean_ph_spread"])
    for r in rows:
        w.writerow([f"{r.radius_m:g}", r.fields_with_neighbors,
                    *("" if v is None else repr(v) for v in (r.mean_k, r.mean_dist_m, r.mean_ph_spread))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# feature specs


class Block(NamedTuple):
    kind: str
    radius: float | None = None

    @property
    def label(self) -> str:
        return self.kind if self.radius is None else f"{self.kind}{self.radius:g}"


@dataclass(frozen=True)
class FeatureSpec:
    blocks: tuple[Block, ...]
    encoding: str = "onehot"
    # rows must also have neighbors at these radii even if no block uses them
    require_radii: tuple[float, ...] = ()

    def __post_init__(self):
        blocks = tuple(Block(b[0], None if b[1] is None else float(b[1])) if not isinstance(b, Block)
                       else b for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "require_radii", tuple(float(r) for r in self.require_radii))
        if not blocks:
            raise SchemaError("feature spec has no blocks", code="feature_spec")
        if len(set(blocks)) != len(blocks):
            raise SchemaError("duplicate feature block", code="feature_spec")
        for b in blocks:
            if b.kind in PLAIN_BLOCKS:
                if b.radius is not None:
                    raise SchemaError(f"{b.kind} takes no radius", code="feature_spec")
            elif b.kind in STAT_BLOCKS:
                if b.radius is None or not b.radius > 0:
                    raise SchemaError(f"{b.kind} needs a positive radius", code="feature_spec")
            else:
                raise SchemaError(f"unknown feature block {b.kind!r}", code="feature_spec")
        if self.encoding not in ENCODINGS:
            raise SchemaError(f"unknown encoding {self.encoding!r}", code="feature_spec")

    @property
    def radii(self) -> tuple[float, ...]:
        """Every radius the row filter depends on, ascending."""
        rs = {b.radius for b in self.blocks if b.radius is not None} | set(self.require_radii)
        return tuple(sorted(rs))

    @property
    def label(self) -> str:
        return "+".join(b.label for b in self.blocks)

    def to_dict(self) -> dict:
        return {"blocks": [[b.kind, b.radius] for b in self.blocks],
                "encoding": self.encoding,
                "require_radii": list(self.require_radii)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(tuple(Block(k, r) for k, r in d["blocks"]), d.get("encoding", "onehot"),
                   tuple(d.get("require_radii", ())))


_TOKEN = re.compile(r"^([A-Za-z]+?)(\d+(?:\.\d+)?)?$")


def parse_feature_spec(text: str, encoding: str = "onehot",
                       require_radii: Sequence[float] = ()) -> FeatureSpec:
    """Parse notation such as ``CropName+Min/Max/Avg400`` or
    ``Long/Lat/CropName+Nb/Dist/Avg200``.

    Groups are separated by ``+`` and items by ``/``; a radius written on
    the last item of a group applies to every statistic in that group.
    """
    blocks = []
    for group in filter(None, (g.strip() for g in text.split("+"))):
        items = [t.strip() for t in group.split("/") if t.strip()]
        parsed = []
        for t in items:
            m = _TOKEN.match(t)
            if not m:
                raise SchemaError(f"cannot parse feature token {t!r}", code="feature_spec")
            parsed.append((_canonical_kind(m.group(1)), None if m.group(2) is None else float(m.group(2))))
        group_r = next((r for _, r in reversed(parsed) if r is not None), None)
        for kind, r in parsed:
            if kind in STAT_BLOCKS and r is None:
                r = group_r
            blocks.append(Block(kind, r))
    return FeatureSpec(tuple(blocks), encoding, tuple(require_radii))


def _canonical_kind(name: str) -> str:
    for k in PLAIN_BLOCKS + STAT_BLOCKS:
        if k.lower() == name.lower():
            return k
    aliases = {"longitude": "Long", "lon": "Long", "latitude": "Lat", "nb": "Nb"}
    if name.lower() in aliases:
        return aliases[name.lower()]
    raise SchemaError(f"unknown feature block {name!r}", code="feature_spec")


# ---------------------------------------------------------------------------
# categorical encoding


@dataclass(frozen=True)
class CategoricalEncoder:
    name: str
    categories: tuple[str, ...]
    scheme: str = "onehot"

    @classmethod
    def fit(cls, name: str, values: Sequence[str], scheme: str = "onehot") -> "CategoricalEncoder":
        if len(values) == 0:
            raise DataError("cannot encode an empty column", code="empty_design")
        if scheme not in ENCODINGS:
            raise SchemaError(f"unknown encoding {scheme!r}", code="feature_spec")
        return cls(name, tuple(sorted(set(values))), scheme)

    @property
    def column_names(self) -> list[str]:
        if self.scheme == "ordinal":
            return [self.name]
        return [f"{self.name}={c}" for c in self.categories]

    def transform(self, values: Sequence[str]) -> tuple[np.ndarray, int]:
        """Encoded columns and the number of values not seen at fit time.

        Unseen values map to an all-zero row (one-hot) or -1 (ordinal).
        """
        lookup = {c: i for i, c in enumerate(self.categories)}
        codes = np.array([lookup.get(v, -1) for v in values], dtype=np.int64)
        unseen = int((codes < 0).sum())
        if self.scheme == "ordinal":
            return codes.astype(np.float64)[:, None], unseen
        out = np.zeros((len(values), len(self.categories)))
        ok = codes >= 0
        out[np.flatnonzero(ok), codes[ok]] = 1.0
        return out, unseen

    def to_dict(self) -> dict:
        return {"name": self.name, "categories": list(self.categories), "scheme": self.scheme}

    @classmethod
    def from_dict(cls, d: dict) -> "CategoricalEncoder":
        return cls(d["name"], tuple(d["categories"]), d["scheme"])


def encode_categorical(values: Sequence[str], scheme: str = "onehot",
                       name: str = "value") -> tuple[np.ndarray, CategoricalEncoder]:
    enc = CategoricalEncoder.fit(name, values, scheme)
    cols, _ = enc.transform(values)
    return cols, enc


# ---------------------------------------------------------------------------
# design matrix


@dataclass
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray | None
    row_fields: np.ndarray
    column_names: list[str]
    spec: FeatureSpec
    encoders: dict[str, CategoricalEncoder] = field(default_factory=dict)
    unseen_categories: dict[str, int] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    @property
    def block_shape(self) -> tuple[int, int]:
        """Rows and feature blocks before categorical expansion."""
        return self.x.shape[0], len(self.spec.blocks)

    def subset(self, rows) -> "DesignMatrix":
        return DesignMatrix(self.x[rows], None if self.y is None else self.y[rows],
                            self.row_fields[rows], self.column_names, self.spec, self.encoders)

    def to_csv(self, dest) -> None:
        """Header is the column names plus ``ph``; one line per row."""
        own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
        fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.column_names) + ["ph"])
            ys = self.y if self.y is not None else np.full(self.x.shape[0], np.nan)
            for row, target in zip(self.x, ys):
                w.writerow([repr(float(v)) for v in row] + ["" if np.isnan(target) else repr(float(target))])
        finally:
            if own:
                fh.close()


def _stat_column(st: RadiusStats, kind: str) -> np.ndarray:
    return {
        "Nb": st.k.astype(np.float64),
        "Dist": st.dist_centroid,
        "Avg": st.ph_avg,
        "Min": st.ph_min,
        "Max": st.ph_max,
    }[kind]


_STAT_NAMES = {"Nb": "nb", "Dist": "dist", "Avg": "ph_avg", "Min": "ph_min", "Max": "ph_max"}


def build_design_matrix(ds: FieldDataset, idx: SpatialIndex, spec: FeatureSpec,
                        encoders: dict[str, CategoricalEncoder] | None = None,
                        require_target: bool = True,
                        stats: dict[float, RadiusStats] | None = None) -> DesignMatrix:
    """Assemble features for one spec.

    Rows are the fields that have at least one usable neighbor at every
    radius in ``spec.radii`` (and, when ``require_target``, a known pH).
    Passing ``encoders`` reuses categorical vocabularies from training;
    otherwise they are fitted on the retained rows.  ``stats`` may hold
    precomputed :func:`radius_stats` output for every field.
    """
    n = len(ds)
    if n == 0:
        raise DataError("dataset has no records", code="empty_dataset")
    for r in spec.radii:
        if not 0 < r <= idx.max_radius_m:
            raise DataError(f"radius {r:g} outside index range", code="radius_range")
    if stats is None or any(r not in stats for r in spec.radii):
        stats = radius_stats(ds, idx, spec.radii)

    keep = np.ones(n, dtype=bool)
    if require_target:
        keep &= ~np.isnan(ds.ph)
    for r in spec.radii:
        keep &= stats[r].k > 0
    rows = np.flatnonzero(keep)
    if rows.size == 0:
        raise DataError(f"no rows satisfy {spec.label}", code="empty_design")

    fitted = dict(encoders or {})
    unseen = {}
    cols, names = [], []
    for b in spec.blocks:
        if b.kind == "Long":
            cols.append(ds.lon[rows][:, None])
            names.append("longitude")
        elif b.kind == "Lat":
            cols.append(ds.lat[rows][:, None])
            names.append("latitude")
        elif b.kind in ("CropName", "CropType"):
            key = "crop_name" if b.kind == "CropName" else "crop_type"
            vals = [ds.records[i].crop_name.strip().lower() if key == "crop_name"
                    else ds.records[i].crop_type.value for i in rows]
            if key not in fitted:
                fitted[key] = CategoricalEncoder.fit(key, vals, spec.encoding)
            block, unseen[key] = fitted[key].transform(vals)
            cols.append(block)
            names.extend(fitted[key].column_names)
        else:
            cols.append(_stat_column(stats[b.radius], b.kind)[rows][:, None])
            names.append(f"{_STAT_NAMES[b.kind]}_{b.radius:g}")
    x = np.ascontiguousarray(np.hstack(cols), dtype=np.float64)
    y = ds.ph[rows].copy() if require_target else None
    used = {k: v for k, v in fitted.items()
            if any(b.kind == ("CropName" if k == "crop_name" else "CropType") for b in spec.blocks)}
    return DesignMatrix(x, y, rows.astype(np.int64), names, spec, used,
                        {k: v for k, v in unseen.items() if v})
