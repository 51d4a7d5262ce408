"""Great-circle distances and grid-bucketed radius search."""
import numpy as np

from .._accel import USE_NUMBA, njit

EARTH_RADIUS_M = 6371000.0


def haversine_np(lon1, lat1, lon2, lat2):
    """Vectorised haversine distance in meters (inputs in degrees, broadcastable)."""
    d2r = np.pi / 180.0
    lon1 = np.asarray(lon1, dtype=np.float64) * d2r
    lat1 = np.asarray(lat1, dtype=np.float64) * d2r
    lon2 = np.asarray(lon2, dtype=np.float64) * d2r
    lat2 = np.asarray(lat2, dtype=np.float64) * d2r
    s_lat = np.sin((lat2 - lat1) * 0.5)
    s_lon = np.sin((lon2 - lon1) * 0.5)
    h = s_lat * s_lat + np.cos(lat1) * np.cos(lat2) * s_lon * s_lon
    h = np.minimum(np.maximum(h, 0.0), 1.0)
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))


@njit
def _haversine_scalar(lon1, lat1, lon2, lat2):
    d2r = np.pi / 180.0
    lon1 = lon1 * d2r
    lat1 = lat1 * d2r
    lon2 = lon2 * d2r
    lat2 = lat2 * d2r
    s_lat = np.sin((lat2 - lat1) * 0.5)
    s_lon = np.sin((lon2 - lon1) * 0.5)
    h = s_lat * s_lat + np.cos(lat1) * np.cos(lat2) * s_lon * s_lon
    if h < 0.0:
        h = 0.0
    elif h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))


@njit
def _haversine_nb(lon0, lat0, lons, lats):
    out = np.empty(lons.shape[0])
    for i in range(lons.shape[0]):
        out[i] = _haversine_scalar(lon0, lat0, lons[i], lats[i])
    return out


def haversine_to_many(lon0, lat0, lons, lats):
    """Distances from one point to each of ``lons/lats`` (meters)."""
    lons = np.ascontiguousarray(lons, dtype=np.float64)
    lats = np.ascontiguousarray(lats, dtype=np.float64)
    if USE_NUMBA:
        return _haversine_nb(float(lon0), float(lat0), lons, lats)
    return haversine_np(lon0, lat0, lons, lats)


# Grid layout shared by both radius-search backends:
#   keys    sorted unique cell ids (row * n_cols + col)
#   starts  len(keys) + 1 offsets into ``members``
#   members point handles grouped by cell, ascending handle inside a cell


@njit
def _cell_candidates_nb(row, col, n_cols, keys, starts, members):
    if n_cols <= 3:
        c_lo, c_hi = 0, n_cols - 1
    else:
        c_lo, c_hi = col - 1, col + 1
    lo = np.empty(9, dtype=np.int64)
    hi = np.empty(9, dtype=np.int64)
    n = 0
    total = 0
    for r in range(row - 1, row + 2):
        if r < 0:
            continue
        for cc in range(c_lo, c_hi + 1):
            key = r * n_cols + cc % n_cols
            pos = np.searchsorted(keys, key)
            if pos < keys.shape[0] and keys[pos] == key:
                lo[n] = starts[pos]
                hi[n] = starts[pos + 1]
                total += hi[n] - lo[n]
                n += 1
    out = np.empty(total, dtype=np.int64)
    t = 0
    for i in range(n):
        out[t:t + hi[i] - lo[i]] = members[lo[i]:hi[i]]
        t += hi[i] - lo[i]
    return out


@njit
def _radius_batch_nb(lons, lats, rows, cols, n_cols, keys, starts, members,
                     queries, radius):
    nq = queries.shape[0]
    counts = np.zeros(nq, dtype=np.int64)
    cand_lists = []
    dist_lists = []
    for qi in range(nq):
        h = queries[qi]
        cand = _cell_candidates_nb(rows[h], cols[h], n_cols, keys, starts, members)
        cand = np.sort(cand)
        d = np.empty(cand.shape[0])
        keep = np.zeros(cand.shape[0], dtype=np.bool_)
        m = 0
        for t in range(cand.shape[0]):
            j = cand[t]
            if j == h:
                continue
            d[t] = _haversine_scalar(lons[h], lats[h], lons[j], lats[j])
            if d[t] <= radius:
                keep[t] = True
                m += 1
        sel = np.empty(m, dtype=np.int64)
        sd = np.empty(m)
        m = 0
        for t in range(cand.shape[0]):
            if keep[t]:
                sel[m] = cand[t]
                sd[m] = d[t]
                m += 1
        order = np.argsort(sd, kind="mergesort")
        cand_lists.append(sel[order])
        dist_lists.append(sd[order])
        counts[qi] = m
    offsets = np.zeros(nq + 1, dtype=np.int64)
    for qi in range(nq):
        offsets[qi + 1] = offsets[qi] + counts[qi]
    handles = np.empty(offsets[nq], dtype=np.int64)
    dists = np.empty(offsets[nq])
    for qi in range(nq):
        handles[offsets[qi]:offsets[qi + 1]] = cand_lists[qi]
        dists[offsets[qi]:offsets[qi + 1]] = dist_lists[qi]
    return offsets, handles, dists


def _cell_candidates_np(row, col, n_cols, keys, starts, members):
    if n_cols <= 3:
        cs = np.arange(n_cols)
    else:
        cs = np.array([col - 1, col, col + 1]) % n_cols
    rs = np.arange(row - 1, row + 2)
    rs = rs[rs >= 0]
    want = (rs[:, None] * n_cols + cs[None, :]).ravel()
    pos = np.searchsorted(keys, want)
    inside = pos < keys.shape[0]
    want, pos = want[inside], pos[inside]
    # an absent key lands on the next stored key, which may be wanted too
    pos = pos[keys[pos] == want]
    if pos.size == 0:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([members[starts[p]:starts[p + 1]] for p in pos])


def _radius_batch_np(lons, lats, rows, cols, n_cols, keys, starts, members,
                     queries, radius):
    offsets = np.zeros(len(queries) + 1, dtype=np.int64)
    h_parts, d_parts = [], []
    for qi, h in enumerate(queries):
        cand = np.sort(_cell_candidates_np(rows[h], cols[h], n_cols, keys, starts, members))
        cand = cand[cand != h]
        d = haversine_np(lons[h], lats[h], lons[cand], lats[cand])
        keep = d <= radius
        cand, d = cand[keep], d[keep]
        order = np.argsort(d, kind="mergesort")
        h_parts.append(cand[order])
        d_parts.append(d[order])
        offsets[qi + 1] = offsets[qi] + cand.size
    if not h_parts:
        return offsets, np.empty(0, dtype=np.int64), np.empty(0)
    return offsets, np.concatenate(h_parts), np.concatenate(d_parts)


def radius_batch(lons, lats, rows, cols, n_cols, keys, starts, members, queries,
                 radius, use_numba=None):
    """Neighbors within ``radius`` meters for each handle in ``queries``.

    Returns CSR arrays ``(offsets, handles, dists)``; each query's slice is
    sorted by distance with ascending handle as tie-break and never contains
    the query handle itself.
    """
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = _radius_batch_nb if use_numba else _radius_batch_np
    queries = np.ascontiguousarray(queries, dtype=np.int64)
    return fn(lons, lats, rows, cols, int(n_cols), keys, starts, members,
              queries, float(radius))
