"""Compiled weighted-convolution kernel with a numpy fallback."""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _wconv_numpy(a, b, W, gather):
    return np.einsum("bj,bkj,kj->bk", a, b[:, gather], W)


if numba is not None:
    @numba.njit(cache=True)
    def _wconv_compiled(a, b, W, out):
        nb = a.shape[0]
        N = W.shape[0] - 1
        for bi in range(nb):
            for k in range(N + 1):
                acc = 0j
                for j in range(k - N, N + 1):
                    acc += a[bi, j + N] * b[bi, k - j + N] * W[k, j + N]
                out[bi, k] = acc
else:  # pragma: no cover
    _wconv_compiled = None


def weighted_convolution(a: np.ndarray, b: np.ndarray, W: np.ndarray, gather: np.ndarray) -> np.ndarray:
    """``out_k = sum_j a_j b_{k-j} W[k, j]`` for ``k = 0..N`` over leading batch axes.

    ``a``, ``b`` are full spectra (length ``2N+1``); ``W`` has shape
    ``(N+1, 2N+1)`` and must vanish where ``|k-j| > N``.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    lead = a.shape[:-1]
    a2 = np.ascontiguousarray(a.reshape(-1, a.shape[-1]))
    b2 = np.ascontiguousarray(b.reshape(-1, b.shape[-1]))
    W = np.ascontiguousarray(W, dtype=complex)
    if _wconv_compiled is None:
        out = _wconv_numpy(a2, b2, W, gather)
    else:
        out = np.empty((a2.shape[0], W.shape[0]), dtype=complex)
        _wconv_compiled(a2, b2, W, out)
    return out.reshape(lead + (W.shape[0],))
