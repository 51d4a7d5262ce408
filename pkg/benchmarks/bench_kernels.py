"""Time each hot kernel on its numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

The first numba call (compilation, or cache load) is excluded by a warm-up
run. Reported times are the best of ``--repeat`` runs.
"""
import argparse
import json
import sys
import time

import numpy as np

from soilph import SynthConfig, _accel, build_index, generate_synthetic_fields
from soilph.kernels import grow_tree, lasso_cd, predict_tree, smo_svr


def _best(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    ds = generate_synthetic_fields(SynthConfig(n_fields=2000, seed=0))
    idx = build_index(ds, 2000)
    handles = np.arange(len(ds))

    rng = np.random.default_rng(0)
    xt = rng.normal(size=(2000, 8))
    yt = xt[:, 0] * xt[:, 1] + np.sin(xt[:, 2]) + rng.normal(0, 0.3, 2000)
    tree = grow_tree(xt, yt, max_depth=8)

    xl = rng.normal(size=(2000, 40))
    yl = xl[:, :5] @ rng.normal(size=5) + rng.normal(size=2000)
    yl -= yl.mean()

    xs = rng.normal(size=(400, 3))
    ys = np.sin(xs[:, 0]) + 0.1 * rng.normal(size=400)
    K = np.exp(-((xs[:, None, :] - xs[None, :, :]) ** 2).sum(-1) / 3)

    return {
        "radius_batch (2000 fields, r=1000 m)": lambda nb: idx.query_many(handles, 1000, use_numba=nb),
        "grow_tree (2000x8, depth 8)": lambda nb: grow_tree(xt, yt, max_depth=8, use_numba=nb),
        "predict_tree (2000 rows)": lambda nb: predict_tree(xt, *tree[:5], use_numba=nb),
        "lasso_cd (2000x40, alpha 0.01)": lambda nb: lasso_cd(xl, yl, 0.01, use_numba=nb),
        "smo_svr (400 points)": lambda nb: smo_svr(K, ys, 1.0, 0.1, use_numba=nb),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can run", file=sys.stderr)
        return 1

    rows = []
    print(f"{'kernel':<40}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for name, fn in cases().items():
        t_nb = _best(lambda: fn(True), args.repeat)
        t_np = _best(lambda: fn(False), args.repeat)
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np})
        print(f"{name:<40}{t_nb:>12.5f}{t_np:>12.5f}{t_np / t_nb:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
