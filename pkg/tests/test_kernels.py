import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abpverify import _kernels_py, kernels

try:
    from abpverify import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

needs_ext = pytest.mark.skipif(_compiled is None, reason="compiled kernels not built")
BACKENDS = [_kernels_py] + ([_compiled] if _compiled is not None else [])


def _w(points, values, targets, idx):
    return values[idx] - np.einsum("sd,sd->s", points[idx], targets)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_argmin_matches_brute_force(impl):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(500, 3))
    u = rng.normal(size=500)
    xi = rng.normal(size=(64, 3))
    idx = impl.contact_argmin(x, u, xi)
    w = u[None, :] - xi @ x.T
    assert np.allclose(_w(x, u, xi, idx), w.min(axis=1), rtol=0, atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_argmin_ties_take_lowest_index(impl):
    x = np.zeros((4, 2))
    u = np.array([1.0, 0.0, 0.0, 0.0])
    assert impl.contact_argmin(x, u, np.zeros((1, 2)))[0] == 1


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_rk4_constant_curvature(impl):
    # P'' = -kappa P from P = I, P' = 0 gives cos(sqrt(kappa) t)
    kappa, steps, dt = 2.0, 400, 1e-3
    s = np.broadcast_to(kappa * np.eye(2), (2 * steps + 1, 2, 2))
    p, v = impl.jacobi_rk4(s, np.eye(2), np.zeros((2, 2)), dt)
    t = dt * np.arange(steps + 1)
    assert np.abs(p[:, 0, 0] - np.cos(np.sqrt(kappa) * t)).max() <= 1e-12
    assert np.abs(v[:, 1, 1] + np.sqrt(kappa) * np.sin(np.sqrt(kappa) * t)).max() <= 1e-11
    assert np.abs(p[:, 0, 1]).max() == 0.0


@needs_ext
@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.integers(1, 60))
@settings(max_examples=30)
def test_backends_agree_argmin(seed, d, count):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(200, d))
    u = rng.normal(size=200)
    xi = rng.normal(size=(count, d))
    a = _kernels_py.contact_argmin(x, u, xi)
    b = _compiled.contact_argmin(x, u, xi)
    assert np.allclose(_w(x, u, xi, a), _w(x, u, xi, b), rtol=0, atol=1e-12)


@needs_ext
@given(st.integers(0, 2 ** 31), st.integers(1, 4))
@settings(max_examples=30)
def test_backends_agree_rk4(seed, k):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(41, k, k))
    s = b @ np.swapaxes(b, 1, 2)
    p0 = np.eye(k)
    v0 = rng.normal(size=(k, k))
    v0 = 0.5 * (v0 + v0.T)
    pa, va = _kernels_py.jacobi_rk4(s, p0, v0, 0.01)
    pb, vb = _compiled.jacobi_rk4(s, p0, v0, 0.01)
    assert np.allclose(pa, pb, rtol=1e-12, atol=1e-13)
    assert np.allclose(va, vb, rtol=1e-12, atol=1e-13)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env["ABPVERIFY_PURE"] = env_value
    out = subprocess.run([sys.executable, "-c", "import abpverify; print(abpverify.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_pure_switch():
    assert _backend_in_subprocess("1") == "python"
    expected = "cython" if _compiled is not None else "python"
    assert _backend_in_subprocess("0") == expected


def test_dispatch_consistent():
    assert kernels.BACKEND in ("cython", "python")
    impl = _kernels_py if kernels.BACKEND == "python" else _compiled
    assert kernels.contact_argmin is impl.contact_argmin
