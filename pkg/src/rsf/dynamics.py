"""Reduced kinetic equations for ``(rho, alpha)`` and their time integration."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, InvariantViolation, NotClassicalLimit
from .integrate import IntegratorOptions, integrate
from .jsonio import decode_complex, encode_complex
from .linalg import DEFAULT_TOL, as_operator, check_psd, check_unitary, dag, hermiticity_defect, max_norm
from .state import ReducedState, bose_entropy, particle_number


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Coefficients shared by the Fock-space master equation and the reduced equations.

    ``h`` is the single-particle Hamiltonian (energy units, divided by hbar in
    the equations), ``gamma_down``/``gamma_up`` the damping and pumping rate
    operators, ``xi`` the coherent source, ``scattering`` a finite list of
    ``(weight, unitary)`` pairs and ``diffusion`` a list of Hermitian ``q``
    generating double-commutator terms ``-[Q, [Q, rho]]``.
    """

    h: np.ndarray
    gamma_down: np.ndarray | None = None
    gamma_up: np.ndarray | None = None
    xi: np.ndarray | None = None
    scattering: Sequence[tuple[float, np.ndarray]] = field(default_factory=tuple)
    diffusion: Sequence[np.ndarray] = field(default_factory=tuple)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        h = as_operator(self.h)
        d = h.shape[0]
        if d == 0:
            raise DimensionMismatch("zero-dimensional generator")

        def op(x):
            if x is None:
                return np.zeros((d, d), dtype=complex)
            x = as_operator(x, d)
            if x.shape != (d, d):
                raise DimensionMismatch(f"expected {d}x{d} operator, got {x.shape}")
            return x

        gd, gu = op(self.gamma_down), op(self.gamma_up)
        xi = np.zeros(d, dtype=complex) if self.xi is None else np.asarray(self.xi, dtype=complex).reshape(-1)
        if xi.shape[0] != d:
            raise DimensionMismatch(f"xi has {xi.shape[0]} entries, expected {d}")
        scattering = tuple((float(w), op(u)) for w, u in self.scattering)
        diffusion = tuple(op(q) for q in self.diffusion)

        if hermiticity_defect(h) > self.tol:
            raise ValueError("h must be Hermitian")
        for name, g in (("gamma_down", gd), ("gamma_up", gu)):
            if not check_psd(g, self.tol):
                raise ValueError(f"{name} must be positive semidefinite")
        for w, u in scattering:
            if not w > 0:
                raise ValueError(f"scattering weight must be > 0, got {w}")
            if not check_unitary(u, self.tol):
                raise ValueError("scattering element is not unitary")
        for q in diffusion:
            if hermiticity_defect(q) > self.tol:
                raise ValueError("diffusion operator must be Hermitian")

        for name, val in (("h", h), ("gamma_down", gd), ("gamma_up", gu), ("xi", xi),
                          ("scattering", scattering), ("diffusion", diffusion)):
            object.__setattr__(self, name, val)

    @classmethod
    def zero(cls, dim: int) -> "GeneratorSpec":
        return cls(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def max_rate(self) -> float:
        """Largest dissipative rate: top eigenvalue of the gammas, total scattering weight, or |q|^2."""
        rates = [np.linalg.eigvalsh(self.gamma_down)[-1], np.linalg.eigvalsh(self.gamma_up)[-1],
                 sum(w for w, _ in self.scattering)]
        rates += [np.abs(np.linalg.eigvalsh(q)).max() ** 2 for q in self.diffusion]
        return float(max(rates))

    def to_json(self) -> dict:
        return {
            "h": encode_complex(self.h),
            "gamma_down": encode_complex(self.gamma_down),
            "gamma_up": encode_complex(self.gamma_up),
            "xi": encode_complex(self.xi),
            "scattering": [{"weight": w, "u": encode_complex(u)} for w, u in self.scattering],
            "diffusion": [encode_complex(q) for q in self.diffusion],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorSpec":
        known = {"h", "gamma_down", "gamma_up", "xi", "scattering", "diffusion"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown generator fields: {sorted(unknown)}")
        mat = lambda key: None if obj.get(key) is None else decode_complex(obj[key], 2)  # noqa: E731
        return cls(
            h=decode_complex(obj["h"], 2),
            gamma_down=mat("gamma_down"),
            gamma_up=mat("gamma_up"),
            xi=None if obj.get("xi") is None else decode_complex(obj["xi"], 1),
            scattering=[(el["weight"], decode_complex(el["u"], 2)) for el in obj.get("scattering", [])],
            diffusion=[decode_complex(q, 2) for q in obj.get("diffusion", [])],
        )


GeneratorLike = Union[GeneratorSpec, Callable[[float], GeneratorSpec]]


def rke_rhs(g: GeneratorSpec, s: ReducedState, hbar: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(d rho/dt, d alpha/dt)`` of the reduced kinetic equations."""
    if g.dim != s.dim:
        raise DimensionMismatch(f"generator is {g.dim}-dim, state is {s.dim}-dim")
    rho, alpha = s.rho, s.alpha
    net = g.gamma_up - g.gamma_down

    drho = -1j / hbar * (g.h @ rho - rho @ g.h)
    drho += np.outer(g.xi, alpha.conj()) + np.outer(alpha, g.xi.conj())
    drho += 0.5 * (net @ rho + rho @ net) + g.gamma_up

    dalpha = -1j / hbar * (g.h @ alpha) + 0.5 * (net @ alpha) + g.xi

    for w, u in g.scattering:
        drho += w * (u @ rho @ dag(u) - rho)
        dalpha += w * (u @ alpha - alpha)
    for q in g.diffusion:
        qq = q @ q
        drho -= qq @ rho + rho @ qq - 2.0 * q @ rho @ q
        dalpha -= qq @ alpha
    return drho, dalpha


def classical_field_rhs(g: GeneratorSpec, alpha, hbar: float = 1.0) -> np.ndarray:
    """Damped, driven classical wave equation; valid only without pumping and scattering."""
    if max_norm(g.gamma_up) > g.tol or g.scattering or g.diffusion:
        raise NotClassicalLimit("classical field equation needs gamma_up = 0 and no scattering")
    alpha = np.asarray(alpha, dtype=complex)
    return -(1j / hbar * g.h + 0.5 * g.gamma_down) @ alpha + g.xi


def _pack(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.concatenate([rho.reshape(-1), alpha])


def _unpack(y: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    return y[: d * d].reshape(d, d), y[d * d:]


class Trajectory:
    """Immutable record of states on a time grid with per-time diagnostics."""

    def __init__(self, times, states: Sequence[ReducedState], clamp_tol: float = 1e-6):
        self.times = np.array(times, dtype=float)
        self.states = tuple(states)
        if self.times.size != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = len(self.states)
        self.particle_number = np.empty(n)
        self.entropy = np.empty(n)
        self.purity_defect = np.empty(n)
        self.min_eig_corr = np.empty(n)
        for i, s in enumerate(self.states):
            corr = s.correlation_matrix()
            lam = np.linalg.eigvalsh(0.5 * (corr + dag(corr)))
            self.particle_number[i] = particle_number(s)
            self.min_eig_corr[i] = lam[0]
            self.purity_defect[i] = max_norm(corr)
            self.entropy[i] = bose_entropy(lam, clamp_tol) if lam[0] >= -clamp_tol else np.nan
        for arr in (self.times, self.particle_number, self.entropy, self.purity_defect, self.min_eig_corr):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.states)

    @property
    def rho(self) -> np.ndarray:
        return np.array([s.rho for s in self.states])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([s.alpha for s in self.states])

    def csv_header(self) -> list[str]:
        d = self.states[0].dim
        cols = ["t", "N", "S", "purity_defect", "min_eig_corr"]
        for k in range(d):
            cols += [f"Re(alpha_{k})", f"Im(alpha_{k})"]
        for i in range(d):
            for j in range(i, d):
                cols += [f"Re(rho_{i}_{j})", f"Im(rho_{i}_{j})"]
        return cols

    def csv_rows(self) -> list[list[float]]:
        d = self.states[0].dim
        iu = np.triu_indices(d)
        rows = []
        for i, s in enumerate(self.states):
            row = [self.times[i], self.particle_number[i], self.entropy[i],
                   self.purity_defect[i], self.min_eig_corr[i]]
            row += np.column_stack([s.alpha.real, s.alpha.imag]).reshape(-1).tolist()
            upper = s.rho[iu]
            row += np.column_stack([upper.real, upper.imag]).reshape(-1).tolist()
            rows.append([float(x) for x in row])
        return rows

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_header())
        for row in self.csv_rows():
            writer.writerow([repr(x) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def evolve(
    g: GeneratorLike,
    s0: ReducedState,
    t_grid,
    opts: IntegratorOptions | None = None,
    hbar: float = 1.0,
    tol: float = DEFAULT_TOL,
) -> Trajectory:
    """Integrate the reduced kinetic equations from ``s0`` over ``t_grid``.

    ``g`` is either a constant :class:`GeneratorSpec` or a function ``t -> GeneratorSpec``.
    Raises :class:`InvariantViolation` if the correlation matrix develops an
    eigenvalue below ``-1e3 * tol`` at a grid time.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    gen = g if callable(g) and not isinstance(g, GeneratorSpec) else (lambda t, _g=g: _g)
    d = s0.dim
    if gen(0.0).dim != d:
        raise DimensionMismatch(f"generator is {gen(0.0).dim}-dim, state is {d}-dim")

    def f(t, y):
        rho, alpha = _unpack(y, d)
        drho, dalpha = rke_rhs(gen(t), ReducedState.unchecked(rho, alpha), hbar)
        return _pack(drho, dalpha)

    ys = integrate(f, _pack(s0.rho, s0.alpha), t_grid, opts)
    states = []
    for t, y in zip(t_grid, ys):
        rho, alpha = _unpack(y, d)
        s = ReducedState.unchecked(rho.copy(), alpha.copy())
        corr = s.correlation_matrix()
        lam = np.linalg.eigvalsh(corr)[0]
        if lam < -1e3 * tol:
            raise InvariantViolation(f"correlation matrix eigenvalue {lam:.3e}", time=float(t))
        states.append(s)
    return Trajectory(t_grid, states, clamp_tol=1e3 * tol)


def purity_defect(traj: Trajectory) -> float:
    return float(np.max(traj.purity_defect))
