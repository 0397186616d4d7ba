import math
import warnings

import numpy as np
import pytest

from rsf import fock
from rsf.dynamics import GeneratorSpec, evolve
from rsf.errors import DimensionLimitExceeded, LogBranchAmbiguity, TruncationUnreliable
from rsf.linalg import random_hermitian, random_unitary
from rsf.state import ReducedState, is_pure, particle_number, quasi_free_spdm, rsf_entropy

from _util import random_cvec, random_generator, random_initial


def test_ladder_matrix_elements():
    ops = fock.FockSpace(1, 2).ops()
    assert np.allclose(ops.dense(0), [[0, 1, 0], [0, 0, math.sqrt(2)], [0, 0, 0]])
    a, ad = ops.a[0].toarray(), ops.adag[0].toarray()
    assert np.allclose(np.diag(ad @ a), [0, 1, 2])
    assert np.allclose(a @ ad - ad @ a, np.diag([1, 1, -2]))


def test_two_mode_ladder_commute():
    ops = fock.FockSpace(2, 3).ops()
    a0, a1 = ops.a[0].toarray(), ops.a[1].toarray()
    assert np.allclose(a0 @ a1, a1 @ a0)
    assert np.allclose(a0 @ ops.adag[1].toarray(), ops.adag[1].toarray() @ a0)


def test_dimension_limit():
    with pytest.raises(DimensionLimitExceeded):
        fock.FockSpace(3, 16)
    assert fock.FockSpace(2, 63).dim == 4096


def test_coherent_state_examples():
    sp = fock.FockSpace(1, 8)
    assert np.allclose(fock.coherent_state(sp, [0]).matrix, fock.vacuum(sp).matrix)
    st = fock.coherent_state(sp, [0.5])
    assert abs(fock.expectation(st, sp.ops().a[0]) - 0.5) < 1e-6
    red = fock.reduce(st)
    assert is_pure(red, 1e-6)
    assert rsf_entropy(ReducedState.pure(red.alpha)) == 0.0


def test_coherent_series_matches_displacement():
    sp = fock.FockSpace(1, 12)
    series = fock.coherent_state(sp, [0.4 - 0.3j]).matrix
    disp = fock.displace(fock.vacuum(sp), [0.4 - 0.3j]).matrix
    assert np.max(np.abs(series - disp)) < 1e-6


def test_coherent_amplitude_guards():
    sp = fock.FockSpace(1, 4)
    with pytest.warns(RuntimeWarning):
        fock.coherent_state(sp, [1.2])
    with pytest.raises(TruncationUnreliable):
        fock.coherent_state(sp, [1.5])


def test_quasi_free_thermal_state():
    sp = fock.FockSpace(1, 30)
    st = fock.quasi_free_state(sp, [[math.log(2)]], check=False)
    p = np.real(np.diag(st.matrix))
    assert np.allclose(p[:10] / p[0], 2.0 ** -np.arange(10))
    assert fock.von_neumann_entropy(st) == pytest.approx(2 * math.log(2), abs=1e-5)
    assert fock.reduce(st).rho[0, 0] == pytest.approx(1.0, abs=1e-5)


def test_quasi_free_spdm_matches_oracle():
    rng = np.random.default_rng(2)
    r = 2.0 * np.eye(2) + random_hermitian(2, rng, 0.3)
    red = fock.reduce(fock.quasi_free_state(fock.FockSpace(2, 16), r))
    assert np.max(np.abs(red.rho - quasi_free_spdm(r))) < 1e-6
    assert np.max(np.abs(red.alpha)) < 1e-12


def test_quasi_free_cold_limit_is_vacuum():
    sp = fock.FockSpace(2, 3)
    st = fock.quasi_free_state(sp, 40 * np.eye(2))
    assert np.max(np.abs(st.matrix - fock.vacuum(sp).matrix)) < 1e-15


def test_displace_group_property_and_reduction():
    sp = fock.FockSpace(2, 10)
    a = np.array([0.2 + 0.1j, -0.15j])
    thermal = fock.quasi_free_state(sp, math.log(1 + 1 / 0.1) * np.eye(2))
    back = fock.displace(fock.displace(thermal, a), -a)
    assert np.max(np.abs(back.matrix - thermal.matrix)) < 1e-6
    red = fock.reduce(fock.displace(thermal, a))
    assert np.max(np.abs(red.alpha - a)) < 1e-6
    assert np.max(np.abs(red.rho - (0.1 * np.eye(2) + np.outer(a, a.conj())))) < 1e-6


def test_reduce_examples():
    sp = fock.FockSpace(1, 4)
    vac = fock.reduce(fock.vacuum(sp))
    assert np.allclose(vac.rho, 0) and np.allclose(vac.alpha, 0)
    two = fock.reduce(fock.fock_state(sp, [2]))
    assert particle_number(two) == pytest.approx(2) and np.allclose(two.alpha, 0)
    one = fock.reduce(fock.fock_state(sp, [1]))
    assert not is_pure(one)


def test_reduce_index_convention():
    # one particle in mode 0 superposed with one in mode 1: rho[k, l] = <a_l^+ a_k>
    sp = fock.FockSpace(2, 1)
    c = np.array([0.6, 0.8j])
    psi = np.zeros(sp.dim, dtype=complex)
    psi[sp.basis_index([1, 0])] = c[0]
    psi[sp.basis_index([0, 1])] = c[1]
    red = fock.reduce(fock.FockDensityMatrix.from_vector(sp, psi))
    assert np.allclose(red.rho, np.outer(c, c.conj()))


def test_von_neumann_entropy_examples():
    sp = fock.FockSpace(1, 5)
    assert fock.von_neumann_entropy(fock.coherent_state(sp, [0.3])) == pytest.approx(0, abs=1e-12)
    mixed = fock.FockDensityMatrix(sp, np.eye(sp.dim) / sp.dim)
    assert fock.von_neumann_entropy(mixed) == pytest.approx(math.log(sp.dim))


def test_gmme_zero_and_trace():
    sp = fock.FockSpace(2, 7)
    rng = np.random.default_rng(5)
    st = random_initial(sp, rng)
    assert np.allclose(fock.gmme_rhs(GeneratorSpec.zero(2), st), 0)
    rhs = fock.gmme_rhs(random_generator(2, rng, diffusion=True), st)
    assert abs(np.trace(rhs)) < 1e-12
    assert np.max(np.abs(rhs - rhs.conj().T)) < 1e-12


def test_gmme_single_photon_decay_rate():
    sp = fock.FockSpace(1, 3)
    rhs = fock.gmme_rhs(GeneratorSpec(h=[[0.0]], gamma_down=[[0.7]]), fock.fock_state(sp, [1]))
    n_op = (sp.ops().adag[0] @ sp.ops().a[0]).toarray()
    assert np.real(np.trace(rhs @ n_op)) == pytest.approx(-0.7)


def test_lift_unitary_examples():
    sp = fock.FockSpace(2, 4)
    assert np.allclose(fock.lift_unitary(sp, np.eye(2)).toarray(), np.eye(sp.dim))
    theta = 0.9
    lifted = fock.lift_unitary(sp, np.diag([np.exp(1j * theta), 1])).toarray()
    n0 = sp.occupations[:, 0]
    assert np.allclose(lifted, np.diag(np.exp(1j * theta * n0)))


def test_lift_unitary_maps_coherent_states():
    sp = fock.FockSpace(2, 10)
    rng = np.random.default_rng(8)
    u = random_unitary(2, rng)
    a = random_cvec(2, rng, 0.2)
    lifted = fock.lift_unitary(sp, u).toarray()
    out = lifted @ fock.coherent_state(sp, a).matrix @ lifted.conj().T
    assert np.max(np.abs(out - fock.coherent_state(sp, u @ a).matrix)) < 1e-6


def test_lift_unitary_branch_warning():
    with pytest.warns(LogBranchAmbiguity):
        fock.lift_unitary(fock.FockSpace(1, 3), [[-1.0]])


def test_reduction_covariance_and_additive_observables():
    sp = fock.FockSpace(2, 8)
    rng = np.random.default_rng(9)
    st = random_initial(sp, rng)
    red = fock.reduce(st)
    u = random_unitary(2, rng)
    lifted = fock.lift_unitary(sp, u).toarray()
    red_u = fock.reduce(fock.FockDensityMatrix(sp, lifted @ st.matrix @ lifted.conj().T))
    assert np.max(np.abs(red_u.rho - u @ red.rho @ u.conj().T)) < 1e-8
    assert np.max(np.abs(red_u.alpha - u @ red.alpha)) < 1e-8
    b = random_hermitian(2, rng)
    big_b = sp.ops().additive(b)
    assert fock.expectation(st, big_b) == pytest.approx(np.trace(red.rho @ b), abs=1e-10)


def test_evolve_fock_zero_generator():
    sp = fock.FockSpace(1, 5)
    st = fock.coherent_state(sp, [0.3])
    out = fock.evolve_fock(GeneratorSpec.zero(1), st, [0, 1, 2])
    assert all(np.array_equal(s.matrix, st.matrix) for s in out)


def test_evolve_fock_coherent_damping():
    # frozen oracle: <a>(t) = a0 exp(-i w t - g t / 2)
    w, gam, a0 = 1.0, 0.5, 0.6
    sp = fock.FockSpace(1, 10)
    t = np.linspace(0, 4, 5)
    out = fock.evolve_fock(GeneratorSpec(h=[[w]], gamma_down=[[gam]]), fock.coherent_state(sp, [a0]), t)
    alpha = np.array([fock.reduce(s).alpha[0] for s in out])
    assert np.max(np.abs(alpha - a0 * np.exp(-1j * w * t - gam * t / 2))) < 1e-6


def test_evolve_fock_thermalizes_to_geometric():
    gd, gu = 1.0, 0.2
    nbar = gu / (gd - gu)
    sp = fock.FockSpace(1, 16)
    out = fock.evolve_fock(GeneratorSpec(h=[[1.0]], gamma_down=[[gd]], gamma_up=[[gu]]),
                           fock.vacuum(sp), [0, 30])
    p = np.real(np.diag(out[-1].matrix))
    geometric = nbar ** np.arange(17) / (1 + nbar) ** (np.arange(17) + 1)
    assert np.max(np.abs(p - geometric)) < 1e-6


def test_evolve_fock_truncation_abort():
    sp = fock.FockSpace(1, 3)
    with pytest.raises(TruncationUnreliable):
        fock.evolve_fock(GeneratorSpec(h=[[0.0]], gamma_up=[[1.0]]), fock.vacuum(sp), [0, 5])


@pytest.mark.parametrize("d", [1, 2])
def test_commuting_diagram_small(d):
    rng = np.random.default_rng(100 + d)
    g = random_generator(d, rng, diffusion=True)
    sp = fock.FockSpace(d, {1: 10, 2: 8}[d])
    st = random_initial(sp, rng)
    t = np.linspace(0, 2 / g.max_rate(), 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error", LogBranchAmbiguity)
        ref = [fock.reduce(s) for s in fock.evolve_fock(g, st, t)]
    rke = evolve(g, fock.reduce(st), t)
    for a, b in zip(ref, rke.states):
        assert np.max(np.abs(a.rho - b.rho)) < 1e-6
        assert np.max(np.abs(a.alpha - b.alpha)) < 1e-6
