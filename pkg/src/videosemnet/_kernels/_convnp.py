"""Pure-numpy temporal convolution kernels (fallback backend).

Layout conventions match the compiled backend: x is (T, c_in), filters are
(k, c_in, c_out) with k odd, output is (T, c_out) under "same" zero padding.
"""

import numpy as np


def _windowed(xpad: np.ndarray, T: int, k: int) -> np.ndarray:
    """Strided (T, k, c_in) view over the zero-padded input."""
    s0, s1 = xpad.strides
    return np.lib.stride_tricks.as_strided(
        xpad, shape=(T, k, xpad.shape[1]), strides=(s0, s0, s1), writeable=False
    )


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    T = x.shape[0]
    k = w.shape[0]
    h = k // 2
    xpad = np.zeros((T + 2 * h, x.shape[1]), dtype=x.dtype)
    xpad[h : h + T] = x
    out = np.einsum("tkc,kco->to", _windowed(xpad, T, k), w, optimize=True)
    out += b
    return out


def conv1d_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    T = x.shape[0]
    k = w.shape[0]
    h = k // 2

    xpad = np.zeros((T + 2 * h, x.shape[1]), dtype=x.dtype)
    xpad[h : h + T] = x
    gw = np.einsum("tkc,to->kco", _windowed(xpad, T, k), gy, optimize=True)
    gb = gy.sum(axis=0)

    # gx is the "same" correlation of gy with the kernel flipped in time and
    # transposed in channels.
    gypad = np.zeros((T + 2 * h, gy.shape[1]), dtype=gy.dtype)
    gypad[h : h + T] = gy
    wflip = w[::-1].transpose(0, 2, 1)
    gx = np.einsum("tko,koc->tc", _windowed(gypad, T, k), wflip, optimize=True)
    return gx, gw, gb
