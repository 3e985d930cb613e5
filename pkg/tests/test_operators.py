import numpy as np
import pytest
import scipy.linalg as la

from scarsim.basis import build_sector, enumerate_basis
from scarsim.errors import BasisMismatchError, ShapeError
from scarsim.operators import (HamiltonianParams, ModulatedParams, apply_phase_pulse,
                               apply_pi_reflection, build_modulated, build_pxp,
                               neel_state, pi_reflection_matrix, polarized_state)

from conftest import brute_force_hamiltonian, random_state


@pytest.mark.parametrize("bc", ["pbc", "obc"])
@pytest.mark.parametrize("mu", [0.0, -1.31, 2.4])
def test_matrix_matches_brute_force_n4(bc, mu):
    basis = enumerate_basis(4, bc)
    op = build_pxp(basis, HamiltonianParams(mu=mu, bc=basis.bc))
    states, dense = brute_force_hamiltonian(4, mu, pbc=(bc == "pbc"))
    assert np.array_equal(states, basis.states)
    assert np.allclose(op.toarray(), dense, atol=0)


def test_polarized_row_connects_to_single_excitations():
    basis = enumerate_basis(4, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.7))
    row = op.toarray()[basis.index_of(0)[0]]
    singles = basis.index_of([1, 2, 4, 8])
    assert sorted(np.nonzero(row)[0]) == sorted(singles)
    assert np.allclose(row[singles], 1.0)


def test_neel_diagonal_counts_excitations():
    for n in (4, 6, 8):
        basis = enumerate_basis(n, "pbc")
        mu = -1.7
        op = build_pxp(basis, HamiltonianParams(mu=mu))
        z2 = neel_state(basis)
        assert np.vdot(z2, op.matrix @ z2).real == pytest.approx(mu * n / 2, abs=1e-12)


@pytest.mark.parametrize("n", [6, 9, 12])
def test_hermiticity(n):
    basis = enumerate_basis(n, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.37))
    diff = op.matrix - op.matrix.T
    asym = np.abs(diff.data).max() if diff.nnz else 0.0
    assert asym <= 1e-12


def test_no_blockade_violating_elements():
    basis = enumerate_basis(8, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=1.0))
    coo = op.matrix.tocoo()
    for i, j in zip(coo.row, coo.col):
        si, sj = int(basis.states[i]), int(basis.states[j])
        assert bin(si ^ sj).count("1") in (0, 1)


def test_spectrum_reflection_under_sign_flip():
    basis = enumerate_basis(10, "pbc")
    for mu in (0.5, 1.31):
        w_plus = la.eigvalsh(build_pxp(basis, HamiltonianParams(mu=mu)).toarray())
        w_minus = la.eigvalsh(build_pxp(basis, HamiltonianParams(mu=-mu)).toarray())
        assert np.allclose(np.sort(w_minus), -np.sort(w_plus)[::-1], atol=1e-12)


@pytest.mark.parametrize("n", [6, 10, 12])
def test_reflection_anticommutation_exact(n):
    basis = enumerate_basis(n, "pbc")
    mu = 0.83
    h_plus = build_pxp(basis, HamiltonianParams(mu=mu)).matrix
    h_minus = build_pxp(basis, HamiltonianParams(mu=-mu)).matrix
    pi_mat = pi_reflection_matrix(basis)
    anti = pi_mat @ h_plus + h_minus @ pi_mat
    anti.eliminate_zeros()
    assert anti.nnz == 0  # exact cancellation, entry by entry


def test_sector_spectrum_is_submultiset_of_full():
    basis = enumerate_basis(12, "pbc")
    mu = -0.9
    full = np.sort(la.eigvalsh(build_pxp(basis, HamiltonianParams(mu=mu)).toarray()))
    for k, p in [(0, +1), (0, -1), (1, None), (6, +1)]:
        sec = build_sector(basis, k, p)
        block = build_pxp(sec, HamiltonianParams(mu=mu))
        sub = np.sort(la.eigvalsh(block.toarray()))
        remaining = list(full)
        for val in sub:
            i = int(np.argmin(np.abs(np.array(remaining) - val)))
            assert abs(remaining[i] - val) < 1e-10
            remaining.pop(i)


def test_modulated_reduces_to_uniform():
    basis = enumerate_basis(8, "pbc")
    mu = -2.2
    uniform = build_pxp(basis, HamiltonianParams(mu=mu)).toarray()
    modulated = build_modulated(basis, ModulatedParams(unit_cell_K=1, w=(mu,))).toarray()
    assert np.array_equal(uniform, modulated)
    pure = build_modulated(basis, ModulatedParams(unit_cell_K=2, w=(0.0, 0.0))).toarray()
    assert np.array_equal(pure, build_pxp(basis, HamiltonianParams(mu=0.0)).toarray())


def test_modulated_diagonal_by_site_parity():
    basis = enumerate_basis(4, "pbc")
    op = build_modulated(basis, ModulatedParams(unit_cell_K=2, w=(1.0, -1.0)))
    z2 = basis.index_of(0b0101)[0]      # sites 0 and 2 excited
    z2bar = basis.index_of(0b1010)[0]   # sites 1 and 3 excited
    dense = op.toarray()
    assert dense[z2, z2] == pytest.approx(2.0)
    assert dense[z2bar, z2bar] == pytest.approx(-2.0)


def test_modulated_shape_error():
    basis = enumerate_basis(9, "pbc")
    with pytest.raises(ShapeError):
        build_modulated(basis, ModulatedParams(unit_cell_K=2, w=(1.0, -1.0)))
    with pytest.raises(ShapeError):
        ModulatedParams(unit_cell_K=2, w=(1.0,))


def test_phase_pulse_identity_unitarity_inverse(rng):
    basis = enumerate_basis(8, "pbc")
    psi = random_state(rng, basis.dim)
    assert np.allclose(apply_phase_pulse(psi, basis, [0.0, 0.0]), psi)
    gamma = rng.normal(size=2)
    pulsed = apply_phase_pulse(psi, basis, gamma)
    assert abs(np.linalg.norm(pulsed) - 1.0) < 1e-14
    back = apply_phase_pulse(pulsed, basis, -gamma)
    assert np.linalg.norm(back - psi) < 1e-14


def test_phase_pulse_eigenvalue_on_polarized():
    basis = enumerate_basis(6, "pbc")
    vac = polarized_state(basis)
    gamma = [0.3]
    pulsed = apply_phase_pulse(vac, basis, gamma)
    # all sites unexcited: z_j = -1 at every site
    assert np.allclose(pulsed, np.exp(1j * 0.3 * 6) * vac)


def test_pi_reflection_involution_and_vacuum_sign(rng):
    for n in (5, 8):
        basis = enumerate_basis(n, "pbc")
        vac = polarized_state(basis)
        assert np.allclose(apply_pi_reflection(vac, basis), (-1.0) ** n * vac)
        psi = random_state(rng, basis.dim)
        assert np.allclose(apply_pi_reflection(apply_pi_reflection(psi, basis), basis), psi)


def test_reflection_maps_ground_state_to_ceiling_state():
    from scarsim.spectroscopy import ground_state

    basis = enumerate_basis(10, "pbc")
    mu = 1.2
    h_plus = build_pxp(basis, HamiltonianParams(mu=mu))
    h_minus = build_pxp(basis, HamiltonianParams(mu=-mu))
    e0, gs = ground_state(h_plus)
    mapped = apply_pi_reflection(gs, basis)
    w, v = la.eigh(h_minus.toarray())
    # top of the mirrored spectrum, energy -e0, overlap 1 up to phase
    assert w[-1] == pytest.approx(-e0, abs=1e-10)
    assert abs(np.vdot(v[:, -1], mapped)) == pytest.approx(1.0, abs=1e-9)


def test_dimension_mismatch_errors(rng):
    basis = enumerate_basis(6, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.0))
    with pytest.raises(BasisMismatchError):
        op.matvec(np.zeros(5))
    with pytest.raises(BasisMismatchError):
        apply_pi_reflection(np.zeros(4), basis)
    with pytest.raises(BasisMismatchError):
        build_pxp(basis, HamiltonianParams(mu=0.0, bc="obc"))
