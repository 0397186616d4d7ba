import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsf.dynamics import GeneratorSpec, Trajectory, classical_field_rhs, evolve, purity_defect, rke_rhs
from rsf.errors import DimensionMismatch, NotClassicalLimit, StepSizeUnderflow
from rsf.integrate import IntegratorOptions, integrate
from rsf.linalg import random_hermitian, random_psd, random_unitary
from rsf.state import ReducedState

from _util import random_cvec, random_generator


def test_integrate_exponential():
    ys = integrate(lambda t, y: -1j * y, np.array([1.0]), np.linspace(0, 5, 11))
    assert np.max(np.abs(ys[:, 0] - np.exp(-1j * np.linspace(0, 5, 11)))) < 1e-8


def test_integrate_step_underflow():
    with pytest.raises(StepSizeUnderflow):
        integrate(lambda t, y: y ** 2, np.array([1.0]), [0.0, 2.0], IntegratorOptions(min_step=1e-3))


def test_rhs_reversible_limit():
    rng = np.random.default_rng(1)
    h = random_hermitian(3, rng)
    s = ReducedState(random_psd(3, rng), np.zeros(3))
    drho, dalpha = rke_rhs(GeneratorSpec(h), s, hbar=2.0)
    assert np.allclose(drho, -0.5j * (h @ s.rho - s.rho @ h))
    assert np.allclose(dalpha, 0)


def test_rhs_pure_damping():
    g = GeneratorSpec(h=[[0.0]], gamma_down=[[0.4]])
    drho, dalpha = rke_rhs(g, ReducedState([[2.0]], [1.0 + 0.5j]))
    assert drho[0, 0] == pytest.approx(-0.8)
    assert dalpha[0] == pytest.approx(-0.2 * (1 + 0.5j))


def test_rhs_parity_scattering():
    g = GeneratorSpec(h=[[0.0]], scattering=[(0.3, [[-1.0]])])
    drho, dalpha = rke_rhs(g, ReducedState([[2.0]], [1.0]))
    assert drho[0, 0] == pytest.approx(0.0)
    assert dalpha[0] == pytest.approx(-0.6)


def test_rhs_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        rke_rhs(GeneratorSpec.zero(2), ReducedState.thermal([1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_rhs_drho_hermitian(seed, d):
    rng = np.random.default_rng(seed)
    g = random_generator(d, rng, diffusion=True)
    a = random_cvec(d, rng, 0.5)
    s = ReducedState(random_psd(d, rng) + np.outer(a, a.conj()), a)
    drho, _ = rke_rhs(g, s)
    assert np.max(np.abs(drho - drho.conj().T)) < 1e-13


def test_generator_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(h=[[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        GeneratorSpec(h=np.zeros((1, 1)), gamma_down=[[-1.0]])
    with pytest.raises(ValueError):
        GeneratorSpec(h=np.zeros((1, 1)), scattering=[(0.1, [[2.0]])])
    with pytest.raises(ValueError):
        GeneratorSpec(h=np.zeros((1, 1)), scattering=[(0.0, [[1.0]])])


def test_generator_json_roundtrip():
    g = random_generator(2, np.random.default_rng(4), diffusion=True)
    back = GeneratorSpec.from_json(g.to_json())
    for name in ("h", "gamma_down", "gamma_up", "xi"):
        assert np.array_equal(getattr(back, name), getattr(g, name))
    assert np.array_equal(back.scattering[0][1], g.scattering[0][1])
    assert np.array_equal(back.diffusion[0], g.diffusion[0])


def test_evolve_zero_generator():
    s0 = ReducedState.thermal([0.3, 0.1])
    traj = evolve(GeneratorSpec.zero(2), s0, [0, 1, 2])
    for s in traj.states:
        assert np.array_equal(s.rho, s0.rho)


def test_evolve_thermal_relaxation():
    # frozen oracle: dn/dt = -(2 - 1) n + 1 from n = 0 gives n(t) = 1 - exp(-t)
    g = GeneratorSpec(h=[[1.0]], gamma_down=[[2.0]], gamma_up=[[1.0]])
    t = np.linspace(0, 8, 17)
    traj = evolve(g, ReducedState([[0.0]], [0.0]), t)
    assert np.max(np.abs(traj.particle_number - (1 - np.exp(-t)))) < 1e-9


def test_classical_field_damped_oscillator():
    omega, gamma, a0 = 1.3, 0.4, 0.5 - 0.2j
    g = GeneratorSpec(h=[[omega]], gamma_down=[[gamma]])
    t = np.linspace(0, 5, 11)
    ys = integrate(lambda _, a: classical_field_rhs(g, a), np.array([a0]), t)
    assert np.max(np.abs(ys[:, 0] - a0 * np.exp(-1j * omega * t - gamma * t / 2))) < 1e-8
    traj = evolve(g, ReducedState.pure([a0]), t)
    assert np.max(np.abs(traj.alpha[:, 0] - ys[:, 0])) < 1e-8


def test_classical_field_steady_state():
    g = GeneratorSpec(h=[[0.0]], gamma_down=[[0.5]], xi=[0.2])
    assert classical_field_rhs(g, [2 * 0.2 / 0.5]) == pytest.approx(0)


def test_classical_field_rejects_pumping():
    with pytest.raises(NotClassicalLimit):
        classical_field_rhs(GeneratorSpec(h=[[0.0]], gamma_up=[[0.1]]), [0.0])
    with pytest.raises(NotClassicalLimit):
        classical_field_rhs(GeneratorSpec(h=[[0.0]], scattering=[(0.1, [[1j]])]), [0.0])


def test_purity_defect_with_pumping_grows():
    g = GeneratorSpec(h=[[1.0]], gamma_down=[[0.3]], gamma_up=[[0.1]])
    traj = evolve(g, ReducedState.pure([0.5]), np.linspace(0, 1, 5))
    assert traj.purity_defect[0] == pytest.approx(0, abs=1e-15)
    assert np.all(np.diff(traj.purity_defect) > 0)


def test_purity_unitary_flow():
    rng = np.random.default_rng(3)
    g = GeneratorSpec(h=random_hermitian(3, rng))
    traj = evolve(g, ReducedState.pure(random_cvec(3, rng, 0.5)), np.linspace(0, 5, 6))
    assert purity_defect(traj) <= 1e-8


def test_trace_constant_under_scattering():
    rng = np.random.default_rng(7)
    g = GeneratorSpec(h=random_hermitian(2, rng), scattering=[(0.5, random_unitary(2, rng))])
    traj = evolve(g, ReducedState(random_psd(2, rng), [0, 0]), np.linspace(0, 4, 5))
    assert np.ptp(traj.particle_number) < 1e-9


def test_semigroup_property():
    rng = np.random.default_rng(11)
    g = random_generator(2, rng)
    s0 = ReducedState(random_psd(2, rng, (0.1, 0.5)), [0, 0])
    full = evolve(g, s0, [0, 1.7]).states[-1]
    mid = evolve(g, s0, [0, 0.6]).states[-1]
    two = evolve(g, mid, [0, 1.1]).states[-1]
    assert np.max(np.abs(full.rho - two.rho)) < 1e-8
    assert np.max(np.abs(full.alpha - two.alpha)) < 1e-8


def test_time_dependent_generator():
    # h(t) = t: phase is t^2 / 2
    traj = evolve(lambda t: GeneratorSpec(h=[[t]]), ReducedState.pure([1.0]), [0, 1, 2])
    assert traj.alpha[:, 0] == pytest.approx(np.exp(-0.5j * np.array([0, 1, 2]) ** 2), abs=1e-8)


def test_evolve_grid_must_start_at_zero():
    with pytest.raises(ValueError):
        evolve(GeneratorSpec.zero(1), ReducedState.thermal([0.1]), [1, 2])


def test_trajectory_csv_layout():
    g = GeneratorSpec(h=np.diag([1.0, 2.0]), gamma_down=np.eye(2) * 0.1)
    traj = evolve(g, ReducedState(np.diag([0.5, 0.2]), [0.3, 0.1j]), [0, 0.5, 1.0])
    rows = list(csv.reader(io.StringIO(traj.to_csv())))
    assert rows[0] == ["t", "N", "S", "purity_defect", "min_eig_corr",
                       "Re(alpha_0)", "Im(alpha_0)", "Re(alpha_1)", "Im(alpha_1)",
                       "Re(rho_0_0)", "Im(rho_0_0)", "Re(rho_0_1)", "Im(rho_0_1)",
                       "Re(rho_1_1)", "Im(rho_1_1)"]
    assert len(rows) == 4
    assert float(rows[1][1]) == pytest.approx(0.7)
    assert traj.to_csv() == evolve(g, traj.states[0], [0, 0.5, 1.0]).to_csv()


def test_trajectory_is_read_only():
    t = np.array([0.0, 1.0])
    traj = Trajectory(t, [ReducedState.thermal([0.1])] * 2)
    t[1] = 5.0
    assert traj.times[1] == 1.0
    with pytest.raises(ValueError):
        traj.entropy[0] = 1.0
    assert traj.entropy[0] == pytest.approx((1.1 * math.log(1.1) - 0.1 * math.log(0.1)))
