"""Complex numbers as ``[re, im]`` pairs, matrices as row-major nested lists."""
from __future__ import annotations

import numpy as np


def encode_complex(a):
    """Encode a complex scalar/vector/matrix into nested ``[re, im]`` lists."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_complex(obj, ndim: int) -> np.ndarray:
    """Inverse of :func:`encode_complex` for an array of rank ``ndim``.

    Purely real data (no trailing pair axis) is accepted as well, so
    ``[[1, 0], [0, 1]]`` with ``ndim=2`` is the real identity while
    ``[[1, 0], [0, 1]]`` with ``ndim=1`` is the complex vector ``(1, 1j)``.
    """
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise ValueError(f"expected a rank-{ndim} complex array as [re, im] pairs, got shape {arr.shape}")
