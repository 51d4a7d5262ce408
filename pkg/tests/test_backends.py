"""The numba kernels and their pure-numpy twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from soilph import _accel, build_index, generate_synthetic_fields, SynthConfig
from soilph.kernels import grow_tree, lasso_cd, predict_tree, smo_svr
from soilph.kernels.geo import haversine_np, haversine_to_many

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def test_radius_batch_parity():
    ds = generate_synthetic_fields(SynthConfig(n_fields=400, seed=2))
    idx = build_index(ds, 1500)
    h = np.arange(len(ds))
    a = idx.query_many(h, 900, use_numba=True)
    b = idx.query_many(h, 900, use_numba=False)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_allclose(a[2], b[2], rtol=1e-14, atol=0)


def test_haversine_parity():
    rng = np.random.default_rng(0)
    lon, lat = rng.uniform(-180, 180, 500), rng.uniform(-90, 90, 500)
    # libm and numpy's vectorized sin/cos may differ in the last bit
    np.testing.assert_allclose(haversine_to_many(10.0, 20.0, lon, lat),
                               haversine_np(10.0, 20.0, lon, lat), rtol=1e-14, atol=0)


def _same_tree(a, b):
    """Identical structure and thresholds; leaf means may differ by summation order."""
    feature, threshold, left, right, value, n_samples = range(6)
    for i in (feature, threshold, left, right, n_samples):
        np.testing.assert_array_equal(a[i], b[i])
    np.testing.assert_allclose(a[value], b[value], rtol=0, atol=1e-12)


@pytest.mark.parametrize("kw", [{}, {"max_depth": 3}, {"min_samples_leaf": 5}])
def test_tree_parity(kw):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 5))
    x[:, 2] = np.round(x[:, 2])  # ties
    y = x[:, 0] * x[:, 2] + rng.normal(size=300)
    a = grow_tree(x, y, use_numba=True, **kw)
    b = grow_tree(x, y, use_numba=False, **kw)
    _same_tree(a, b)
    np.testing.assert_allclose(predict_tree(x, *a[:5], use_numba=True),
                               predict_tree(x, *b[:5], use_numba=False), rtol=0, atol=1e-12)


def test_tree_feature_subsampling_parity():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(200, 6))
    y = x.sum(axis=1) + rng.normal(size=200)
    keys = rng.random((401, 6))
    _same_tree(grow_tree(x, y, 4, 2, 1, 3, keys, use_numba=True),
               grow_tree(x, y, 4, 2, 1, 3, keys, use_numba=False))


@pytest.mark.parametrize("alpha", [0.0, 0.05, 0.5])
def test_lasso_parity(alpha):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(100, 8))
    y = x @ rng.normal(size=8) + rng.normal(size=100)
    y -= y.mean()
    a, na, _ = lasso_cd(x, y, alpha, use_numba=True)
    b, nb, _ = lasso_cd(x, y, alpha, use_numba=False)
    assert na == nb
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_svr_parity():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(60, 2))
    y = np.sin(x[:, 0]) + 0.1 * rng.normal(size=60)
    K = np.exp(-0.5 * ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    a = smo_svr(K, y, 1.0, 0.1, use_numba=True)
    b = smo_svr(K, y, 1.0, 0.1, use_numba=False)
    assert a[2] == b[2]  # same number of iterations
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    assert a[1] == pytest.approx(b[1], abs=1e-12)


def test_env_flag_selects_numpy():
    code = "from soilph import _accel; print(_accel.backend())"
    env = dict(os.environ, SOILPH_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    env.pop("SOILPH_NO_NUMBA")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numba"


def test_benchmark_script_runs(tmp_path):
    script = os.path.join(os.path.dirname(__file__), "..", "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--repeat", "1", "--json", str(tmp_path / "b.json")],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "smo_svr" in out.stdout and (tmp_path / "b.json").exists()
