"""Dense complex-matrix helpers shared by every other module.

All tolerances are absolute and measured in the max-norm (largest entry
modulus).  Matrix functions of Hermitian operators go through
:func:`eig_hermitian` so that they all see the same spectral decomposition.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, NotHermitian

DEFAULT_TOL = 1e-9


def as_operator(a, dim: int | None = None) -> np.ndarray:
    """Return ``a`` as a finite square complex128 array.

    Scalars are promoted to ``a * identity(dim)`` when ``dim`` is given.
    """
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        if dim is None:
            arr = arr.reshape(1, 1)
        else:
            arr = arr * np.eye(dim, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"operator must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("operator has non-finite entries")
    return arr


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def max_norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermiticity_defect(a: np.ndarray) -> float:
    return max_norm(a - dag(a))


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition ``A = U diag(values) U^dagger`` with ascending values."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ dag(self.vectors)


def eig_hermitian(a, tol: float = DEFAULT_TOL) -> Spectrum:
    a = as_operator(a)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise NotHermitian(f"hermiticity defect {defect:.3e} exceeds tol {tol:.1e}")
    try:
        values, vectors = np.linalg.eigh(0.5 * (a + dag(a)))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return Spectrum(values, vectors)


def hermitian_function(a, fn: Callable[[np.ndarray], np.ndarray], tol: float = DEFAULT_TOL) -> np.ndarray:
    """Apply the scalar function ``fn`` to the spectrum of a Hermitian matrix."""
    spec = eig_hermitian(a, tol)
    return (spec.vectors * fn(spec.values)) @ dag(spec.vectors)


def min_eigenvalue(a, tol: float = DEFAULT_TOL) -> float:
    return float(eig_hermitian(a, tol).values[0])


def check_psd(a, tol: float = DEFAULT_TOL) -> bool:
    a = as_operator(a)
    if hermiticity_defect(a) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (a + dag(a)))[0] >= -tol)


def check_unitary(u, tol: float = DEFAULT_TOL) -> bool:
    u = as_operator(u)
    return max_norm(dag(u) @ u - np.eye(u.shape[0])) <= tol


def herm_split(a) -> tuple[np.ndarray, np.ndarray]:
    """Split ``a = h + 1j * k`` with ``h`` and ``k`` both Hermitian."""
    a = as_operator(a)
    ad = dag(a)
    return 0.5 * (a + ad), -0.5j * (a - ad)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (z + dag(z))


def random_psd(dim: int, rng: np.random.Generator, eig_range=(0.0, 1.0)) -> np.ndarray:
    u = random_unitary(dim, rng)
    lam = rng.uniform(*eig_range, size=dim)
    return (u * lam) @ dag(u)
