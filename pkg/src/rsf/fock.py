"""Truncated multimode Fock space: the brute-force reference for the reduced equations.

Every mode keeps occupations ``0..cutoff``; basis states are ordered like
``np.kron`` with mode 0 as the most significant digit.  Ladder and additive
operators are stored as sparse CSR matrices because the master equation only
ever multiplies them against dense density matrices; states themselves are
dense.

Rate-matrix convention: for a damping operator ``gamma_down`` with entries
``G[k, l]`` the dissipator is ``sum_kl G[k, l] (a_l rho a_k^+ - 1/2 {a_k^+ a_l, rho})``,
i.e. the coefficient of ``a_k rho a_l^+`` is ``G[l, k]``.  The pumping
dissipator uses ``sum_kl G[k, l] (a_k^+ rho a_l - 1/2 {a_l a_k^+, rho})``.
With these choices both damping and pumping enter the reduced equations as
``gamma`` itself rather than its transpose.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import xlogy

from .dynamics import GeneratorSpec
from .errors import (
    DimensionLimitExceeded,
    InvalidState,
    InvariantViolation,
    LogBranchAmbiguity,
    TruncationUnreliable,
)
from .integrate import IntegratorOptions, integrate
from .linalg import DEFAULT_TOL, as_operator, check_unitary, dag, hermiticity_defect
from .state import ReducedState

DEFAULT_DIM_LIMIT = 4096
TRUNCATION_THRESHOLD = 1e-6
STATE_TOL = 1e-8


@dataclass(frozen=True)
class FockSpace:
    modes: int
    cutoff: int
    dim_limit: int = DEFAULT_DIM_LIMIT

    def __post_init__(self):
        if self.modes < 1 or self.cutoff < 1:
            raise ValueError("need modes >= 1 and cutoff >= 1")
        if self.dim > self.dim_limit:
            raise DimensionLimitExceeded(f"Fock dimension {self.dim} exceeds limit {self.dim_limit}")

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.modes

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, modes)`` integer array of per-mode occupations of each basis state."""
        grids = np.indices((self.cutoff + 1,) * self.modes).reshape(self.modes, -1)
        return grids.T.copy()

    @cached_property
    def total_number(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    @cached_property
    def sector_order(self) -> np.ndarray:
        """Permutation sorting basis states by total particle number."""
        return np.argsort(self.total_number, kind="stable")

    @cached_property
    def sector_bounds(self) -> list[tuple[int, int]]:
        edges = np.concatenate([[0], np.cumsum(np.bincount(self.total_number))])
        return list(zip(edges[:-1].tolist(), edges[1:].tolist()))

    @cached_property
    def edge_mask(self) -> np.ndarray:
        """Basis states with at least one mode at the cutoff."""
        return np.any(self.occupations == self.cutoff, axis=1)

    def basis_index(self, occupation: Sequence[int]) -> int:
        idx = 0
        for n in occupation:
            if not 0 <= n <= self.cutoff:
                raise ValueError(f"occupation {n} outside 0..{self.cutoff}")
            idx = idx * (self.cutoff + 1) + int(n)
        return idx

    def ops(self) -> "ModeOperators":
        return build_mode_operators(self)


class ModeOperators:
    """Annihilation/creation operators of every mode as sparse matrices."""

    def __init__(self, space: FockSpace, a: list):
        self.space = space
        self.a = a
        self.adag = [x.conj().T.tocsr() for x in a]

    def dense(self, k: int) -> np.ndarray:
        return self.a[k].toarray()

    def additive(self, b) -> sp.csr_matrix:
        """Additive lift ``sum_kl b[k, l] a_k^+ a_l`` of a single-particle operator."""
        b = as_operator(b)
        out = sp.csr_matrix((self.space.dim, self.space.dim), dtype=complex)
        for k in range(self.space.modes):
            for l in range(self.space.modes):
                if b[k, l] != 0:
                    out = out + b[k, l] * (self.adag[k] @ self.a[l])
        return out.tocsr()

    def creation(self, c) -> sp.csr_matrix:
        """``sum_k c_k a_k^+``."""
        return self._combine(self.adag, c)

    def annihilation(self, c) -> sp.csr_matrix:
        """``sum_k c_k a_k``."""
        return self._combine(self.a, c)

    def _combine(self, ops, c) -> sp.csr_matrix:
        out = sp.csr_matrix((self.space.dim, self.space.dim), dtype=complex)
        for op, ck in zip(ops, np.asarray(c, dtype=complex)):
            if ck != 0:
                out = out + ck * op
        return out.tocsr()


def build_mode_operators(space: FockSpace) -> ModeOperators:
    n = space.cutoff + 1
    single = sp.diags(np.sqrt(np.arange(1, n, dtype=float)), offsets=1, shape=(n, n), format="csr")
    a = []
    for k in range(space.modes):
        left = sp.identity(n ** k, format="csr")
        right = sp.identity(n ** (space.modes - k - 1), format="csr")
        a.append(sp.kron(sp.kron(left, single), right, format="csr").astype(complex))
    return ModeOperators(space, a)


def _expect(rho: np.ndarray, op) -> complex:
    """``Tr(rho @ op)`` for sparse or dense ``op``."""
    if sp.issparse(op):
        return complex(op.multiply(rho.T).sum())
    return complex(np.sum(rho.T * op))


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    space: FockSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {m.shape} does not match Fock dimension {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def checked(cls, space: FockSpace, matrix, tol: float = STATE_TOL) -> "FockDensityMatrix":
        out = cls(space, matrix)
        out.validate(tol)
        return out

    @classmethod
    def from_vector(cls, space: FockSpace, psi) -> "FockDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()))

    def validate(self, tol: float = STATE_TOL) -> None:
        m = self.matrix
        if hermiticity_defect(m) > tol:
            raise InvalidState("Fock density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > tol:
            raise InvalidState(f"trace {tr.real:.10f} differs from 1")
        lam = np.linalg.eigvalsh(0.5 * (m + dag(m)))[0]
        if lam < -tol:
            raise InvalidState(f"negative eigenvalue {lam:.3e}")

    def edge_population(self) -> float:
        """Total population of basis states with some mode at the cutoff."""
        return float(np.real(np.diag(self.matrix)[self.space.edge_mask]).sum())

    def check_truncation(self, threshold: float = TRUNCATION_THRESHOLD) -> None:
        p = self.edge_population()
        if p > threshold:
            raise TruncationUnreliable(f"population {p:.3e} at the cutoff exceeds {threshold:.1e}")


def vacuum(space: FockSpace) -> FockDensityMatrix:
    m = np.zeros((space.dim, space.dim), dtype=complex)
    m[0, 0] = 1.0
    return FockDensityMatrix(space, m)


def fock_state(space: FockSpace, occupation: Sequence[int]) -> FockDensityMatrix:
    m = np.zeros((space.dim, space.dim), dtype=complex)
    i = space.basis_index(occupation)
    m[i, i] = 1.0
    return FockDensityMatrix(space, m)


def _check_amplitude(space: FockSpace, alpha: np.ndarray) -> None:
    n = float(np.sum(np.abs(alpha) ** 2))
    if n > space.cutoff / 2:
        raise TruncationUnreliable(f"mean occupation {n:.3g} exceeds cutoff/2 = {space.cutoff / 2}")
    if n > space.cutoff / 4:
        warnings.warn(f"mean occupation {n:.3g} exceeds cutoff/4; truncation error may be visible",
                      RuntimeWarning, stacklevel=3)


def weyl_operator(space: FockSpace, alpha, ops: ModeOperators | None = None) -> np.ndarray:
    """Displacement ``exp(sum_k alpha_k a_k^+ - conj(alpha_k) a_k)`` on the truncated space."""
    ops = ops or build_mode_operators(space)
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    gen = ops.creation(alpha) - ops.annihilation(alpha.conj())
    return scipy.linalg.expm(gen.toarray())


def coherent_state(space: FockSpace, alpha) -> FockDensityMatrix:
    """Coherent state with ``<a_k> = alpha_k``.

    One mode: normalized truncated series ``sum alpha^n / sqrt(n!) |n>``.
    Several modes: displacement of the vacuum.
    """
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    if alpha.shape[0] != space.modes:
        raise ValueError(f"alpha has {alpha.shape[0]} entries for {space.modes} modes")
    _check_amplitude(space, alpha)
    if space.modes == 1:
        n = np.arange(space.cutoff + 1)
        log_fact = np.cumsum(np.log(np.maximum(n, 1)))
        psi = np.exp(-0.5 * log_fact) * alpha[0] ** n
        return FockDensityMatrix.from_vector(space, psi)
    w = weyl_operator(space, alpha)
    return FockDensityMatrix.from_vector(space, w[:, 0])


def quasi_free_state(space: FockSpace, r, check: bool = True) -> FockDensityMatrix:
    """Gaussian state ``exp(-R)/Tr exp(-R)`` with ``R`` the additive lift of ``r``."""
    r = as_operator(r)
    if r.shape[0] != space.modes:
        raise ValueError(f"r is {r.shape[0]}-dim for {space.modes} modes")
    if np.linalg.eigvalsh(0.5 * (r + dag(r)))[0] <= 0:
        raise ValueError("r must be positive definite")
    big_r = build_mode_operators(space).additive(r).toarray()
    lam, vec = np.linalg.eigh(0.5 * (big_r + dag(big_r)))
    weights = np.exp(-(lam - lam[0]))
    m = (vec * weights) @ dag(vec)
    out = FockDensityMatrix(space, m / np.trace(m).real)
    if check:
        out.check_truncation()
    return out


def displace(state: FockDensityMatrix, alpha, check: bool = True) -> FockDensityMatrix:
    space = state.space
    alpha = np.asarray(alpha, dtype=complex).reshape(-1)
    _check_amplitude(space, alpha)
    w = weyl_operator(space, alpha)
    out = FockDensityMatrix(space, w @ state.matrix @ dag(w))
    if check:
        out.check_truncation()
    return out


def lift_unitary(space: FockSpace, u, ops: ModeOperators | None = None, tol: float = DEFAULT_TOL) -> sp.csr_matrix:
    """Multiplicative lift ``exp(iB)`` of a single-particle unitary ``u = exp(ib)``.

    ``B`` conserves the total particle number, so the exponential is taken
    sector by sector and the result is returned as a sparse block-diagonal
    matrix.  A warning is issued when ``u`` has an eigenvalue at ``-1``.
    """
    u = as_operator(u)
    if u.shape[0] != space.modes:
        raise ValueError(f"u is {u.shape[0]}-dim for {space.modes} modes")
    if not check_unitary(u, tol):
        raise ValueError("u is not unitary")
    ops = ops or build_mode_operators(space)
    t, z = scipy.linalg.schur(u, output="complex")
    phases = np.diag(t)
    if np.any(np.abs(phases + 1) < 1e-8):
        warnings.warn("unitary has eigenvalue -1; using the principal logarithm branch",
                      LogBranchAmbiguity, stacklevel=2)
    theta = np.angle(phases)
    b = (z * theta) @ dag(z)
    big_b = ops.additive(b).toarray()
    rows, cols, vals = [], [], []
    for n in np.unique(space.total_number):
        idx = np.flatnonzero(space.total_number == n)
        block = big_b[np.ix_(idx, idx)]
        lam, vec = np.linalg.eigh(0.5 * (block + dag(block)))
        ublock = (vec * np.exp(1j * lam)) @ dag(vec)
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(ublock.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.dim, space.dim))


class FockGenerator:
    """Master-equation right-hand side on a truncated Fock space, assembled once.

    The generator is written as ``K rho + rho K^+ + sum_j c_j J_j rho J_j^+``
    with ``K`` collecting the Hamiltonian, the source and all anticommutator
    terms.
    """

    def __init__(self, space: FockSpace, g: GeneratorSpec, hbar: float = 1.0):
        if g.dim != space.modes:
            raise ValueError(f"generator is {g.dim}-dim for {space.modes} modes")
        self.space = space
        ops = build_mode_operators(space)
        dim = space.dim
        k = -1j / hbar * ops.additive(g.h)
        k = k + ops.creation(g.xi) - ops.annihilation(g.xi.conj())
        jumps: list[tuple[float, sp.csr_matrix]] = []

        lam, vec = np.linalg.eigh(g.gamma_down)
        for lj, v in zip(lam, vec.T):
            if lj > 0:
                jumps.append((lj, ops.annihilation(v.conj())))
        lam, vec = np.linalg.eigh(g.gamma_up)
        for lj, v in zip(lam, vec.T):
            if lj > 0:
                jumps.append((lj, ops.creation(v)))
        for c, j in jumps:
            k = k - 0.5 * c * (j.conj().T @ j)

        # lifted unitaries are block diagonal in the total-number sectors
        order = space.sector_order
        self.scattering = []
        for w, u in g.scattering:
            lifted = lift_unitary(space, u, ops).toarray()[np.ix_(order, order)]
            blocks = [np.ascontiguousarray(lifted[a:b, a:b]) for a, b in space.sector_bounds]
            self.scattering.append((w, blocks, [dag(x).copy() for x in blocks]))
        total_weight = sum(w for w, _ in g.scattering)
        k = k - 0.5 * total_weight * sp.identity(dim, dtype=complex, format="csr")

        for q in g.diffusion:
            big_q = ops.additive(q)
            k = k - big_q @ big_q
            jumps.append((2.0, big_q))

        self.k = sp.csr_matrix(k)
        self.jumps = [(c, sp.csr_matrix(j)) for c, j in jumps]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        # rho is Hermitian, so rho K^+ = (K rho)^+ and J rho J^+ = J (J rho)^+
        x = self.k @ rho
        out = x + dag(x)
        for c, j in self.jumps:
            out += c * (j @ dag(j @ rho))
        if self.scattering:
            out += self._scatter(rho)
        return out

    def _scatter(self, rho: np.ndarray) -> np.ndarray:
        order = self.space.sector_order
        bounds = self.space.sector_bounds
        r = rho[np.ix_(order, order)]
        acc = np.zeros_like(r)
        x = np.empty_like(r)
        for w, blocks, blocks_h in self.scattering:
            for (a, b), blk in zip(bounds, blocks):
                x[a:b] = blk @ r[a:b]
            for (a, b), blk_h in zip(bounds, blocks_h):
                acc[:, a:b] += w * (x[:, a:b] @ blk_h)
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        return acc[np.ix_(inv, inv)]


def gmme_rhs(g: GeneratorSpec, rho_f: FockDensityMatrix, hbar: float = 1.0) -> np.ndarray:
    """Time derivative of the full Fock-space density matrix."""
    return FockGenerator(rho_f.space, g, hbar)(rho_f.matrix)


def evolve_fock(
    g: GeneratorSpec | Callable[[float], GeneratorSpec],
    rho_f0: FockDensityMatrix,
    t_grid,
    opts: IntegratorOptions | None = None,
    hbar: float = 1.0,
    tol: float = STATE_TOL,
    truncation_threshold: float = TRUNCATION_THRESHOLD,
) -> list[FockDensityMatrix]:
    """Integrate the master equation and re-validate every snapshot."""
    space = rho_f0.space
    dim = space.dim
    if isinstance(g, GeneratorSpec):
        gen = FockGenerator(space, g, hbar)
        rhs = lambda t, y: gen(y.reshape(dim, dim)).reshape(-1)  # noqa: E731
    else:
        rhs = lambda t, y: FockGenerator(space, g(t), hbar)(y.reshape(dim, dim)).reshape(-1)  # noqa: E731
    ys = integrate(rhs, rho_f0.matrix.reshape(-1), t_grid, opts)
    out = []
    for t, y in zip(np.asarray(t_grid, dtype=float), ys):
        state = FockDensityMatrix(space, y.reshape(dim, dim))
        try:
            state.validate(tol)
        except InvalidState as exc:
            raise InvariantViolation(str(exc), time=float(t)) from exc
        p = state.edge_population()
        if p > truncation_threshold:
            raise TruncationUnreliable(f"population {p:.3e} at the cutoff at t={t:.6g}")
        out.append(state)
    return out


def reduce(rho_f: FockDensityMatrix, ops: ModeOperators | None = None) -> ReducedState:
    """Single-particle density matrix and averaged field of a Fock-space state."""
    space = rho_f.space
    ops = ops or build_mode_operators(space)
    m = rho_f.matrix
    d = space.modes
    alpha = np.array([_expect(m, ops.a[k]) for k in range(d)])
    rho = np.empty((d, d), dtype=complex)
    for k in range(d):
        for l in range(d):
            rho[k, l] = _expect(m, ops.adag[l] @ ops.a[k])
    return ReducedState.unchecked(rho, alpha)


def expectation(rho_f: FockDensityMatrix, op) -> complex:
    return _expect(rho_f.matrix, op)


def von_neumann_entropy(rho_f: FockDensityMatrix, k_b: float = 1.0) -> float:
    m = rho_f.matrix
    p = np.linalg.eigvalsh(0.5 * (m + dag(m)))
    p = np.clip(p, 0.0, None)
    return float(-k_b * np.sum(xlogy(p, p)))
