import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from openulam import kernels
from openulam._jit import ENV_FLAG, HAVE_NUMBA, resolve

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _random_sweep(rng, k=60, g=45):
    edges = np.concatenate([[0.0], np.sort(rng.random(k - 1)), [1.0]])
    pre = np.concatenate([[0.1], np.sort(rng.uniform(0.1, 0.9, g - 1)), [0.9]])
    cols = rng.integers(0, k, g)
    cuts = np.sort(rng.uniform(0, 1, 6))
    return edges, cuts[0::2], cuts[1::2], pre, cols


@needs_numba
def test_sweep_backends_agree(rng):
    for _ in range(20):
        args = _random_sweep(rng)
        a = kernels.ulam_sweep(*args, backend="numpy")
        b = kernels.ulam_sweep(*args, backend="numba")
        ka = np.lexsort((a[1], a[0]))
        kb = np.lexsort((b[1], b[0]))
        assert np.array_equal(a[0][ka], b[0][kb]) and np.array_equal(a[1][ka], b[1][kb])
        assert np.max(np.abs(a[2][ka] - b[2][kb])) <= 1e-15


def test_sweep_total_length(rng):
    edges, lo, hi, pre, cols = _random_sweep(rng)
    r, c, ln = kernels.ulam_sweep(edges, lo, hi, pre, cols, backend="numpy")
    live = np.clip(hi, 0.1, 0.9) - np.clip(lo, 0.1, 0.9)
    assert ln.sum() == pytest.approx(live.sum(), abs=1e-14)
    assert np.all(ln > 0)


@needs_numba
@pytest.mark.parametrize("left", [True, False])
def test_power_backends_agree(rng, left):
    m = sp.random(80, 80, density=0.1, random_state=np.random.RandomState(0), format="csr")
    m = m + sp.eye(80, format="csr") * 0.01
    m.sort_indices()
    x0 = np.ones(80)
    a = kernels.power_iterate(m.indptr, m.indices, m.data, x0, 1e-13, 10000, left, backend="numpy")
    b = kernels.power_iterate(m.indptr, m.indices, m.data, x0, 1e-13, 10000, left, backend="numba")
    assert abs(a[1] - b[1]) <= 1e-13 * a[1]
    assert np.max(np.abs(a[0] - b[0])) <= 1e-11
    dense = m.toarray()
    rho = np.max(np.abs(np.linalg.eigvals(dense)))
    assert a[1] == pytest.approx(rho, rel=1e-10)


def test_resolve():
    assert resolve("numpy") == "numpy"
    with pytest.raises(ValueError):
        resolve("cuda")


def test_env_flag_selects_numpy():
    env = dict(os.environ, **{ENV_FLAG: "1"})
    out = subprocess.run([sys.executable, "-c", "from openulam._jit import default_backend; print(default_backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
