"""Combined Mueller/Jones calculus for a two-mode (polarization) field.

Stokes parameters use the optics ordering of the Pauli basis:

    sigma_0 = 1, sigma_1 = diag(1, -1), sigma_2 = [[0, 1], [1, 0]], sigma_3 = [[0, -1j], [1j, 0]]

so that an x-polarized beam ``S = diag(1, 0)`` has Stokes vector ``(1, 1, 0, 0)``.
``S = 1/2 sum_mu s_mu sigma_mu`` and ``s_mu = Tr(S sigma_mu)``.

A Mueller map acts on Stokes matrices through Kraus operators,
``Phi(S) = sum_b V_b S V_b^+``; the Choi matrix is
``sum_ij |i><j| (x) Phi(|i><j|)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidState, NotCompletelyPositive, NotHermitian
from .integrate import IntegratorOptions, integrate
from .jsonio import decode_complex, encode_complex
from .linalg import DEFAULT_TOL, as_operator, check_psd, check_unitary, dag, herm_split, hermiticity_defect
from .state import ReducedState, rsf_entropy

PAULI = np.array([
    [[1, 0], [0, 1]],
    [[1, 0], [0, -1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
], dtype=complex)

# device_map integrates to this local error so Mueller entries are accurate to ~1e-10
DEVICE_OPTS = IntegratorOptions(initial_step=0.01, local_error=1e-12)


def stokes_vector(S, tol: float = DEFAULT_TOL) -> np.ndarray:
    S = as_operator(S)
    if S.shape != (2, 2):
        raise ValueError("Stokes matrix must be 2x2")
    if hermiticity_defect(S) > tol:
        raise NotHermitian("Stokes matrix must be Hermitian")
    return np.real(np.einsum("mij,ji->m", PAULI, S))


def stokes_matrix(s) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(4)
    return 0.5 * np.einsum("m,mij->ij", s, PAULI)


def stokes_inequality(s, tol: float = DEFAULT_TOL) -> bool:
    """``s0 >= 0`` and ``s0^2 >= s1^2 + s2^2 + s3^2`` up to ``tol``."""
    s = np.asarray(s, dtype=float)
    return bool(s[0] >= -tol and s[0] ** 2 - np.dot(s[1:], s[1:]) >= -tol)


def _kraus_array(kraus) -> np.ndarray:
    k = np.asarray(kraus, dtype=complex)
    if k.ndim == 2:
        k = k[None]
    if k.ndim != 3 or k.shape[1:] != (2, 2):
        raise ValueError(f"Kraus operators must be 2x2 matrices, got shape {k.shape}")
    return k


def apply_kraus(kraus, S) -> np.ndarray:
    k = _kraus_array(kraus)
    return np.einsum("bij,jk,blk->il", k, np.asarray(S, dtype=complex), k.conj())


def mueller_from_cp(kraus) -> np.ndarray:
    """Real 4x4 matrix with ``M[mu, nu] = 1/2 Tr(sigma_mu Phi(sigma_nu))``."""
    images = np.array([apply_kraus(kraus, p) for p in PAULI])
    return 0.5 * np.real(np.einsum("mij,nji->mn", PAULI, images))


def apply_mueller(M, X) -> np.ndarray:
    """Action of a Mueller matrix on an arbitrary (not necessarily Hermitian) 2x2 matrix."""
    coeffs = np.einsum("mij,ji->m", PAULI, np.asarray(X, dtype=complex))
    return 0.5 * np.einsum("m,mij->ij", np.asarray(M) @ coeffs, PAULI)


def _units():
    out = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            out.append(((i, j), e))
    return out


def choi_from_mueller(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ValueError("Mueller matrix must be 4x4")
    choi = np.zeros((4, 4), dtype=complex)
    for (i, j), e in _units():
        choi[2 * i:2 * i + 2, 2 * j:2 * j + 2] = apply_mueller(M, e)
    return choi


def choi_from_kraus(kraus) -> np.ndarray:
    k = _kraus_array(kraus)
    vecs = k.transpose(0, 2, 1).reshape(k.shape[0], 4)
    return vecs.T @ vecs.conj()


def kraus_from_choi(choi, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    choi = 0.5 * (choi + dag(choi))
    lam, vec = np.linalg.eigh(choi)
    if lam[0] < -tol:
        raise NotCompletelyPositive(f"Choi matrix has eigenvalue {lam[0]:.3e}")
    kraus = [np.sqrt(l) * v.reshape(2, 2).T for l, v in zip(lam[::-1], vec.T[::-1]) if l > tol]
    return kraus


def cp_from_mueller(M, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Kraus operators (at most 4) reproducing the Mueller matrix ``M``.

    Raises :class:`NotCompletelyPositive` when ``M`` does not describe a CP map.
    """
    return kraus_from_choi(choi_from_mueller(M), tol)


def check_passivity(kraus, tol: float = DEFAULT_TOL) -> bool:
    k = _kraus_array(kraus)
    return check_psd(np.eye(2) - np.einsum("bij,bkj->ik", k, k.conj()), tol)


def check_doubly_contracting(kraus, tol: float = DEFAULT_TOL) -> bool:
    k = _kraus_array(kraus)
    heisenberg = np.eye(2) - np.einsum("bji,bjk->ik", k.conj(), k)
    return check_passivity(k, tol) and check_psd(heisenberg, tol)


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` quasi-uniform unit vectors on the 2-sphere."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5 ** 0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True)
class CompatibilityResult:
    ok: bool
    certificate: str  # "choi", "sampled" or "violated"
    min_eigenvalue: float
    n_samples: int = 0
    seed: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_compatibility(kraus, jones, n_samples: int = 20000, tol: float = DEFAULT_TOL,
                        seed: int | None = None) -> CompatibilityResult:
    """Check that ``Phi - V . V^+`` maps positive matrices to positive matrices.

    A positive semidefinite Choi matrix of the difference certifies it
    outright.  Otherwise the difference is evaluated on ``n_samples`` pure
    states from a Fibonacci lattice on the Bloch sphere (randomly rotated when
    ``seed`` is given).
    """
    v = as_operator(jones)
    diff_choi = choi_from_kraus(kraus) - choi_from_kraus(v)
    lam = float(np.linalg.eigvalsh(diff_choi)[0])
    if lam >= -tol:
        return CompatibilityResult(True, "choi", lam)

    pts = fibonacci_sphere(n_samples)
    if seed is not None:
        q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
        pts = pts @ q.T
    # optics-ordered Bloch coordinates: P = (1 + x s1 + y s2 + z s3) / 2
    projectors = 0.5 * (PAULI[0] + np.einsum("nm,mij->nij", pts, PAULI[1:]))
    k = _kraus_array(kraus)
    image = np.einsum("bij,njk,blk->nil", k, projectors, k.conj())
    image -= np.einsum("ij,njk,lk->nil", v, projectors, v.conj())
    min_eigs = np.linalg.eigvalsh(0.5 * (image + dag(image)))[:, 0]
    worst = float(min_eigs.min())
    ok = worst >= -tol
    return CompatibilityResult(ok, "sampled" if ok else "violated", worst, n_samples, seed)


@dataclass(frozen=True, eq=False)
class MuellerJonesMap:
    """A linear optical device: CP map on Stokes matrices plus Jones matrix."""

    kraus: tuple
    jones: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kraus", tuple(np.array(k, dtype=complex) for k in _kraus_array(self.kraus)))
        v = as_operator(self.jones)
        if v.shape != (2, 2):
            raise ValueError("Jones matrix must be 2x2")
        object.__setattr__(self, "jones", v)

    @property
    def mueller(self) -> np.ndarray:
        if "_mueller" not in self.__dict__:
            object.__setattr__(self, "_mueller", mueller_from_cp(self.kraus))
        return self.__dict__["_mueller"]

    @classmethod
    def identity(cls) -> "MuellerJonesMap":
        return cls((np.eye(2),), np.eye(2))

    @classmethod
    def jones_only(cls, v) -> "MuellerJonesMap":
        return cls((v,), v)

    @classmethod
    def from_mueller(cls, M, jones, tol: float = DEFAULT_TOL) -> "MuellerJonesMap":
        return cls(tuple(cp_from_mueller(M, tol)), jones)

    def apply(self, state: "StokesState") -> "StokesState":
        S = apply_kraus(self.kraus, state.S)
        return StokesState.unchecked(0.5 * (S + dag(S)), self.jones @ state.alpha)

    def is_doubly_contracting(self, tol: float = DEFAULT_TOL) -> bool:
        return check_doubly_contracting(self.kraus, tol)

    def compatibility(self, n_samples: int = 20000, tol: float = DEFAULT_TOL, seed=None) -> CompatibilityResult:
        return check_compatibility(self.kraus, self.jones, n_samples, tol, seed)

    def to_json(self) -> dict:
        return {"kraus": [encode_complex(k) for k in self.kraus], "jones": encode_complex(self.jones),
                "mueller": self.mueller.tolist()}

    @classmethod
    def from_json(cls, obj: dict, tol: float = DEFAULT_TOL) -> "MuellerJonesMap":
        jones = decode_complex(obj["jones"], 2)
        if "kraus" in obj:
            return cls(tuple(decode_complex(k, 2) for k in obj["kraus"]), jones)
        return cls.from_mueller(np.asarray(obj["mueller"], dtype=float), jones, tol)


def compose(d1: MuellerJonesMap, d2: MuellerJonesMap, tol: float = 1e-12) -> MuellerJonesMap:
    """Device ``d2`` followed by ``d1``: ``(Phi1 Phi2, V1 V2)``.

    The pairwise Kraus products are compressed back to at most four operators
    through the Choi matrix.
    """
    products = [a @ b for a in d1.kraus for b in d2.kraus]
    kraus = kraus_from_choi(choi_from_kraus(products), tol)
    if not kraus:
        kraus = [np.zeros((2, 2), dtype=complex)]
    return MuellerJonesMap(tuple(kraus), d1.jones @ d2.jones)


@dataclass(frozen=True, eq=False)
class StokesState:
    """Stokes matrix ``S`` and averaged Jones vector ``alpha`` with ``S >= |alpha><alpha|``."""

    S: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        S = as_operator(self.S)
        alpha = np.asarray(self.alpha, dtype=complex).reshape(-1)
        if S.shape != (2, 2) or alpha.shape != (2,):
            raise ValueError("Stokes state needs a 2x2 matrix and a 2-vector")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "alpha", alpha)
        if not check_psd(S):
            raise InvalidState("Stokes matrix is not positive semidefinite")
        if not check_psd(S - np.outer(alpha, alpha.conj())):
            raise InvalidState("Stokes matrix does not dominate |alpha><alpha|")

    @classmethod
    def unchecked(cls, S, alpha) -> "StokesState":
        obj = cls.__new__(cls)
        object.__setattr__(obj, "S", np.asarray(S, dtype=complex))
        object.__setattr__(obj, "alpha", np.asarray(alpha, dtype=complex).reshape(-1))
        return obj

    @classmethod
    def from_stokes(cls, s, alpha=(0, 0)) -> "StokesState":
        return cls(stokes_matrix(s), alpha)

    @property
    def stokes(self) -> np.ndarray:
        return stokes_vector(self.S)

    def to_json(self) -> dict:
        return {"S": encode_complex(self.S), "alpha": encode_complex(self.alpha),
                "stokes": self.stokes.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "StokesState":
        alpha = decode_complex(obj.get("alpha", [0, 0]), 1)
        if "S" in obj:
            return cls(decode_complex(obj["S"], 2), alpha)
        return cls.from_stokes(obj["stokes"], alpha)


def polarization_entropy(s: StokesState, k_b: float = 1.0) -> float:
    return rsf_entropy(ReducedState(s.S, s.alpha), k_b)


@dataclass(frozen=True, eq=False)
class PolarizationDeviceSpec:
    """Transmission generator of a device: rotation, absorption, random unitary scattering."""

    omega: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    gamma_down: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    scattering: Sequence[tuple[float, np.ndarray]] = ()
    duration: float = 1.0

    def __post_init__(self):
        omega, gd = as_operator(self.omega, 2), as_operator(self.gamma_down, 2)
        if omega.shape != (2, 2) or gd.shape != (2, 2):
            raise ValueError("omega and gamma_down must be 2x2")
        if hermiticity_defect(omega) > DEFAULT_TOL:
            raise ValueError("omega must be Hermitian")
        if not check_psd(gd):
            raise ValueError("gamma_down must be positive semidefinite")
        scattering = tuple((float(w), as_operator(u)) for w, u in self.scattering)
        for w, u in scattering:
            if not w > 0 or u.shape != (2, 2) or not check_unitary(u):
                raise ValueError("scattering entries must be (weight > 0, 2x2 unitary)")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "gamma_down", gd)
        object.__setattr__(self, "scattering", scattering)

    def decoherence_split(self) -> tuple[np.ndarray, np.ndarray]:
        """``(delta, gamma_dec)`` with ``sum_j w_j (1 - u_j) = gamma_dec + 1j*delta``."""
        total = sum((w * (np.eye(2) - u) for w, u in self.scattering), np.zeros((2, 2), dtype=complex))
        gamma_dec, delta = herm_split(total)
        return delta, gamma_dec

    def stokes_rhs(self, S: np.ndarray) -> np.ndarray:
        out = -1j * (self.omega @ S - S @ self.omega) - 0.5 * (self.gamma_down @ S + S @ self.gamma_down)
        for w, u in self.scattering:
            out += w * (u @ S @ dag(u) - S)
        return out

    def jones_generator(self) -> np.ndarray:
        delta, gamma_dec = self.decoherence_split()
        return -(1j * (self.omega + delta) + 0.5 * self.gamma_down + gamma_dec)

    def to_json(self) -> dict:
        return {"omega": encode_complex(self.omega), "gamma_down": encode_complex(self.gamma_down),
                "scattering": [{"weight": w, "u": encode_complex(u)} for w, u in self.scattering],
                "duration": self.duration}

    @classmethod
    def from_json(cls, obj: dict) -> "PolarizationDeviceSpec":
        kw = {}
        if "omega" in obj:
            kw["omega"] = decode_complex(obj["omega"], 2)
        if "gamma_down" in obj:
            kw["gamma_down"] = decode_complex(obj["gamma_down"], 2)
        kw["scattering"] = [(el["weight"], decode_complex(el["u"], 2)) for el in obj.get("scattering", [])]
        kw["duration"] = float(obj.get("duration", 1.0))
        return cls(**kw)


def device_map(spec: PolarizationDeviceSpec, opts: IntegratorOptions | None = None) -> MuellerJonesMap:
    """Integrate the Stokes-matrix and Jones equations over the device length."""
    if spec.duration == 0:
        return MuellerJonesMap.identity()
    opts = opts or DEVICE_OPTS
    grid = [0.0, spec.duration]

    def stokes_f(t, y):
        return np.array([spec.stokes_rhs(x) for x in y])

    images = integrate(stokes_f, PAULI.copy(), grid, opts)[-1]
    M = 0.5 * np.real(np.einsum("mij,nji->mn", PAULI, images))

    gen = spec.jones_generator()
    jones = integrate(lambda t, y: gen @ y, np.eye(2, dtype=complex), grid, opts)[-1]
    return MuellerJonesMap.from_mueller(M, jones)
