"""Reduced state of a bosonic field: single-particle density matrix plus averaged field."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DimensionMismatch, DivergentOccupation, InvalidState
from .jsonio import decode_complex, encode_complex
from .linalg import DEFAULT_TOL, as_operator, eig_hermitian, hermiticity_defect, max_norm

# eigenvalues of the correlation matrix in [-CLAMP_TOL, 0) are treated as 0
CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Pair ``(rho, alpha)`` with ``rho - |alpha><alpha|`` positive semidefinite.

    ``rho[k, l] = <a_l^dagger a_k>`` and ``alpha[k] = <a_k>``.  The default
    constructor validates; use :meth:`unchecked` inside integrators.
    """

    rho: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        rho = as_operator(self.rho)
        alpha = np.asarray(self.alpha, dtype=complex).reshape(-1)
        if rho.shape[0] == 0:
            raise InvalidState("zero-dimensional state")
        if alpha.shape[0] != rho.shape[0]:
            raise DimensionMismatch(f"rho is {rho.shape[0]}-dim but alpha has {alpha.shape[0]} entries")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "alpha", alpha)
        self.validate()

    @classmethod
    def unchecked(cls, rho, alpha) -> "ReducedState":
        obj = cls.__new__(cls)
        object.__setattr__(obj, "rho", np.asarray(rho, dtype=complex))
        object.__setattr__(obj, "alpha", np.asarray(alpha, dtype=complex).reshape(-1))
        return obj

    @classmethod
    def pure(cls, alpha) -> "ReducedState":
        alpha = np.asarray(alpha, dtype=complex).reshape(-1)
        return cls(np.outer(alpha, alpha.conj()), alpha)

    @classmethod
    def thermal(cls, occupations) -> "ReducedState":
        n = np.asarray(occupations, dtype=float).reshape(-1)
        return cls(np.diag(n), np.zeros(n.shape[0]))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        defect = hermiticity_defect(self.rho)
        if defect > tol:
            raise InvalidState(f"rho is not Hermitian (defect {defect:.3e})")
        lam = eig_hermitian(self.correlation_matrix(), tol).values[0]
        if lam < -tol:
            raise InvalidState(f"correlation matrix has eigenvalue {lam:.3e} < -{tol:.1e}")

    def correlation_matrix(self) -> np.ndarray:
        return self.rho - np.outer(self.alpha, self.alpha.conj())

    def to_json(self) -> dict:
        return {"dim": self.dim, "rho": encode_complex(self.rho), "alpha": encode_complex(self.alpha)}

    @classmethod
    def from_json(cls, obj) -> "ReducedState":
        if isinstance(obj, str):
            obj = json.loads(obj)
        rho = decode_complex(obj["rho"], 2)
        alpha = decode_complex(obj["alpha"], 1)
        if "dim" in obj and (rho.shape[0] != obj["dim"] or alpha.shape[0] != obj["dim"]):
            raise DimensionMismatch(f"declared dim {obj['dim']} does not match data")
        return cls(rho, alpha)

    def __eq__(self, other):
        if not isinstance(other, ReducedState):
            return NotImplemented
        return np.array_equal(self.rho, other.rho) and np.array_equal(self.alpha, other.alpha)


def correlation_matrix(s: ReducedState, tol: float = DEFAULT_TOL) -> np.ndarray:
    corr = s.correlation_matrix()
    lam = eig_hermitian(corr, tol).values[0]
    if lam < -tol:
        raise InvalidState(f"correlation matrix has eigenvalue {lam:.3e}")
    return corr


def particle_number(s: ReducedState) -> float:
    return float(np.trace(s.rho).real)


def is_pure(s: ReducedState, tol: float = DEFAULT_TOL) -> bool:
    return max_norm(s.correlation_matrix()) <= tol


def purity_defect(s: ReducedState) -> float:
    return max_norm(s.correlation_matrix())


def bose_entropy(occupations, clamp_tol: float = CLAMP_TOL) -> float:
    """Sum of ``(n+1) ln(n+1) - n ln n`` over the given occupations."""
    lam = np.asarray(occupations, dtype=float)
    if lam.size and lam.min() < -clamp_tol:
        raise InvalidState(f"negative occupation {lam.min():.3e}")
    lam = np.where(lam < 0, 0.0, lam)
    return float(np.sum(xlogy(lam + 1, lam + 1) - xlogy(lam, lam)))


def rsf_entropy(s: ReducedState, k_b: float = 1.0, clamp_tol: float = CLAMP_TOL) -> float:
    """Entropy of the maximum-entropy (displaced Gaussian) field state with RSF ``s``.

    Natural logarithm; ``k_b`` only scales the result.
    """
    lam = eig_hermitian(s.correlation_matrix(), max(clamp_tol, DEFAULT_TOL)).values
    return k_b * bose_entropy(lam, clamp_tol)


def quasi_free_spdm(r, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Occupation matrix ``(exp(r) - 1)^-1`` of the Gaussian state ``exp(-R)/Z``."""
    spec = eig_hermitian(as_operator(r), tol)
    if spec.values[0] <= tol:
        raise DivergentOccupation(f"r has eigenvalue {spec.values[0]:.3e} <= {tol:.1e}")
    occ = 1.0 / np.expm1(spec.values)
    return (spec.vectors * occ) @ spec.vectors.conj().T
