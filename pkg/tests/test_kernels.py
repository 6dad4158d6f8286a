"""Kernel backends: the compiled and numpy conv implementations must agree
to near machine precision in both dtypes, forward and backward."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videosemnet import _kernels
from videosemnet._kernels import numpy_backend

try:
    from videosemnet._kernels import _convcy as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernel unavailable")


def _case(rng, T=9, cin=4, cout=3, k=3, dtype=np.float64):
    x = rng.standard_normal((T, cin)).astype(dtype)
    w = rng.standard_normal((k, cin, cout)).astype(dtype)
    b = rng.standard_normal(cout).astype(dtype)
    g = rng.standard_normal((T, cout)).astype(dtype)
    return x, w, b, g


def test_numpy_forward_same_padding_hand_example():
    x = np.array([[1.0], [2.0], [3.0]])
    w = np.ones((3, 1, 1))
    out = numpy_backend.conv1d_forward(x, w, np.zeros(1))
    assert np.allclose(out[:, 0], [3.0, 6.0, 5.0])


def test_numpy_backward_matches_finite_differences(rng):
    x, w, b, g = _case(rng)
    h = 1e-6
    gx, gw, gb = numpy_backend.conv1d_backward(x, w, g)
    for arr, grad in ((x, gx), (w, gw)):
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(0, flat.size, 5):
            orig = flat[i]
            flat[i] = orig + h
            fp = float((numpy_backend.conv1d_forward(x, w, b) * g).sum())
            flat[i] = orig - h
            fm = float((numpy_backend.conv1d_forward(x, w, b) * g).sum())
            flat[i] = orig
            assert gflat[i] == pytest.approx((fp - fm) / (2 * h), rel=1e-4, abs=1e-6)
    assert np.allclose(gb, g.sum(axis=0))


@needs_compiled
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_backends_agree(rng, dtype):
    x, w, b, g = _case(rng, dtype=dtype)
    tol = 1e-5 if dtype == np.float32 else 1e-12
    f_np = numpy_backend.conv1d_forward(x, w, b)
    f_cy = compiled.conv1d_forward(x, w, b)
    assert f_np.dtype == f_cy.dtype == dtype
    assert np.allclose(f_np, f_cy, atol=tol)
    for a, b_ in zip(numpy_backend.conv1d_backward(x, w, g), compiled.conv1d_backward(x, w, g)):
        assert np.allclose(a, b_, atol=tol)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_backends_agree_property(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 12))
    k = int(rng.choice([1, 3, 5]))
    x, w, b, g = _case(rng, T=T, cin=int(rng.integers(1, 5)), cout=int(rng.integers(1, 5)), k=k)
    assert np.allclose(
        numpy_backend.conv1d_forward(x, w, b), compiled.conv1d_forward(x, w, b), atol=1e-12
    )
    for a, b_ in zip(numpy_backend.conv1d_backward(x, w, g), compiled.conv1d_backward(x, w, g)):
        assert np.allclose(a, b_, atol=1e-12)


def test_backend_selection_env(tmp_path):
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import videosemnet; print(videosemnet.kernel_backend)"],
        env={"PATH": "/usr/bin:/bin", "VIDEOSEMNET_KERNELS": "numpy"},
        capture_output=True,
        text=True,
    )
    assert out.stdout.strip() == "numpy"
    assert _kernels.BACKEND in ("cython", "numpy")
