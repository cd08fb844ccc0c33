import os
import subprocess
import sys

import numpy as np
import pytest

from meanshrink import _backend, _kernels_py


def test_python_backend_always_available():
    assert "python" in _backend.available()
    assert _backend.get("python") is _kernels_py
    with pytest.raises(ValueError, match="unknown backend"):
        _backend.get("fortran")


@pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")
@pytest.mark.parametrize("n, p", [(2, 1), (3, 7), (10, 100), (57, 33)])
def test_kernels_agree(n, p):
    rng = np.random.default_rng(n * p)
    X = rng.standard_normal((n, p)) * 3 + 10
    xbar = X.mean(axis=0)
    q = rng.uniform(0.1, 5, p)
    py, ext = _backend.get("python"), _backend.get("compiled")
    for a, b in zip(py.col_mean_var(X), ext.col_mean_var(X)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(py.centered_qsums(X, xbar, q), ext.centered_qsums(X, xbar, q), rtol=1e-12)


def test_wrappers_accept_non_contiguous(backend):
    X = np.asfortranarray(np.arange(12.0).reshape(4, 3))
    mean, var = _backend.col_mean_var(X)
    np.testing.assert_allclose(mean, X.mean(axis=0))
    np.testing.assert_allclose(var, X.var(axis=0, ddof=1))
    w, v = _backend.centered_qsums(X[:, ::2], mean[::2], np.ones(2))
    dev = X[:, ::2] - mean[::2]
    assert w == pytest.approx((dev**2).sum()) and v == pytest.approx((dev.sum(axis=1) ** 2).sum())


def _backend_in_subprocess(value):
    env = dict(os.environ, MEANSHRINK_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "import meanshrink; print(meanshrink.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_forces_python():
    res = _backend_in_subprocess("python")
    assert res.returncode == 0 and res.stdout.strip() == "python"


def test_env_rejects_unknown_value():
    res = _backend_in_subprocess("gpu")
    assert res.returncode != 0 and "MEANSHRINK_BACKEND" in res.stderr


@pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")
def test_compiled_is_default():
    assert _backend_in_subprocess("auto").stdout.strip() == "compiled"
