"""Static and rotating thermal baths in the secular (mode-diagonal) approximation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import GeneratorSpec
from .errors import DiagonalityViolation
from .linalg import DEFAULT_TOL, as_operator

DAMPED = "damped"
POPULATION_SUPERRADIANT = "population_superradiant"
AMPLITUDE_AMPLIFIED = "amplitude_amplified"


@dataclass(frozen=True)
class BathMode:
    omega: float
    gamma_down: float
    m: int = 0


@dataclass(frozen=True)
class ThermalBathSpec:
    """Bath temperature, rotation frequency and per-mode parameters.

    ``Omega = 0`` is a static bath.  ``T`` is in the same energy units as
    ``hbar * omega`` once multiplied by ``k_B``.
    """

    T: float
    modes: tuple[BathMode, ...]
    Omega: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"temperature must be > 0, got {self.T}")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")
        modes = tuple(m if isinstance(m, BathMode) else BathMode(**m) for m in self.modes)
        for mode in modes:
            if mode.gamma_down < 0:
                raise ValueError("gamma_down must be >= 0")
        object.__setattr__(self, "modes", modes)

    @property
    def omega(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes], dtype=float)

    @property
    def gamma_down(self) -> np.ndarray:
        return np.array([m.gamma_down for m in self.modes], dtype=float)

    @property
    def m(self) -> np.ndarray:
        return np.array([m.m for m in self.modes], dtype=float)

    @classmethod
    def from_json(cls, obj: dict) -> "ThermalBathSpec":
        modes = tuple(BathMode(float(x["omega"]), float(x["gamma_down"]), int(x.get("m", 0)))
                      for x in obj["modes"])
        return cls(T=float(obj["T"]), modes=modes, Omega=float(obj.get("Omega", 0.0)))

    def to_json(self) -> dict:
        return {"T": self.T, "Omega": self.Omega,
                "modes": [{"omega": m.omega, "gamma_down": m.gamma_down, "m": m.m} for m in self.modes]}


def kms_rates(spec: ThermalBathSpec, hbar: float = 1.0, k_b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Pumping and damping rates obeying detailed balance in the rotating frame.

    Returns ``(gamma_up, gamma_down)`` with
    ``gamma_up = exp(-hbar (omega - m Omega) / (k_B T)) * gamma_down``.
    """
    gd = spec.gamma_down
    exponent = -hbar * (spec.omega - spec.m * spec.Omega) / (k_b * spec.T)
    return np.exp(exponent) * gd, gd


def bose_einstein(omega, T: float, hbar: float = 1.0, k_b: float = 1.0):
    return 1.0 / np.expm1(hbar * np.asarray(omega, dtype=float) / (k_b * T))


def occupation_solution(n0, gamma_up, gamma_down, t):
    """Closed-form occupation ``n(t)`` for ``dn/dt = -(gd - gu) n + gu``.

    Valid for any sign of the net damping; at ``gd == gu`` the growth is linear.
    """
    t = np.asarray(t, dtype=float)
    net = gamma_down - gamma_up
    if net == 0:
        return n0 + gamma_up * t
    n_inf = gamma_up / net
    return n_inf + (n0 - n_inf) * np.exp(-net * t)


def amplitude_solution(alpha0, omega_prime, gamma_up, gamma_down, gamma_dec, t):
    if gamma_dec < 0:
        raise ValueError("gamma_dec must be >= 0")
    t = np.asarray(t, dtype=float)
    rate = 1j * omega_prime + 0.5 * (gamma_down - gamma_up) + gamma_dec
    return alpha0 * np.exp(-rate * t)


def decoherence_rate(scattering: Sequence[tuple[float, np.ndarray]], k: int,
                     tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Field decoherence rate of mode ``k`` and the accompanying frequency shift.

    Returns ``(gamma_dec, delta)`` where ``sum_j w_j (1 - <k|u_j|k>) = gamma_dec + 1j*delta``;
    the renormalized frequency is ``omega + delta``.  Every ``u_j`` must be
    diagonal in the mode basis.
    """
    total = 0.0 + 0.0j
    for w, u in scattering:
        u = as_operator(u)
        off = u - np.diag(np.diag(u))
        if np.max(np.abs(off), initial=0.0) > tol:
            raise DiagonalityViolation("scattering unitary is not diagonal in the mode basis")
        total += w * (1.0 - u[k, k])
    return float(total.real), float(total.imag)


def thermal_generator(spec: ThermalBathSpec, scattering: Sequence[tuple[float, np.ndarray]] = (),
                      hbar: float = 1.0, k_b: float = 1.0) -> GeneratorSpec:
    """Diagonal generator ``h = hbar*omega``, KMS rates and the given scattering."""
    gu, gd = kms_rates(spec, hbar, k_b)
    return GeneratorSpec(h=np.diag(hbar * spec.omega), gamma_down=np.diag(gd), gamma_up=np.diag(gu),
                         scattering=list(scattering))


def classify_modes(spec: ThermalBathSpec, scattering: Sequence[tuple[float, np.ndarray]] = (),
                   hbar: float = 1.0, k_b: float = 1.0) -> list[str]:
    """Label each mode ``damped``, ``population_superradiant`` or ``amplitude_amplified``.

    ``amplitude_amplified`` modes are also population-superradiant.
    """
    gu, gd = kms_rates(spec, hbar, k_b)
    labels = []
    for k in range(len(spec.modes)):
        gdec, _ = decoherence_rate(scattering, k)
        net = gd[k] - gu[k]
        if 0.5 * net + gdec < 0:
            labels.append(AMPLITUDE_AMPLIFIED)
        elif net < 0:
            labels.append(POPULATION_SUPERRADIANT)
        else:
            labels.append(DAMPED)
    return labels
