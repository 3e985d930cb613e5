import numpy as np
import pytest

from scarsim.basis import build_sector, enumerate_basis
from scarsim.errors import PropagationError, ScheduleError
from scarsim.observables import fidelity
from scarsim.operators import HamiltonianParams, build_pxp, polarized_state
from scarsim.propagation import (TimeGrid, eig_decompose, evolve_exact, evolve_krylov,
                                 evolve_time_dependent)
from scarsim.ramping import RampSchedule
from scarsim.spectroscopy import ground_state

from conftest import random_state


def test_time_grid_sampling():
    grid = TimeGrid(0.0, 1.0, 0.25)
    assert np.allclose(grid.times(), [0.0, 0.25, 0.5, 0.75, 1.0])
    single = TimeGrid(2.0, 2.0, 0.1)
    assert np.allclose(single.times(), [2.0])
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0.0, 0.1)


def test_eig_reconstruction_checked():
    basis = enumerate_basis(10, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=-0.4))
    eig = eig_decompose(op, validate=True)
    dense = op.toarray()
    rebuilt = (eig.eigenvectors * eig.eigenvalues) @ eig.eigenvectors.conj().T
    assert np.abs(dense - rebuilt).max() <= 1e-9
    assert np.all(np.diff(eig.eigenvalues) >= -1e-12)


def test_exact_evolution_identity_at_t0(rng):
    basis = enumerate_basis(8, "pbc")
    eig = eig_decompose(build_pxp(basis, HamiltonianParams(mu=1.0)))
    psi0 = random_state(rng, basis.dim)
    out = evolve_exact(eig, psi0, np.array([0.0]))
    assert np.allclose(out[0], psi0, atol=1e-14)


def test_eigenvector_is_stationary():
    basis = enumerate_basis(8, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=-0.7))
    eig = eig_decompose(op)
    vec = eig.eigenvectors[:, 3].astype(complex)
    traj = evolve_exact(eig, vec, TimeGrid(0.0, 10.0, 1.0))
    for row in traj:
        assert fidelity(vec, row) == pytest.approx(1.0, abs=1e-12)


def test_exact_evolution_preserves_norm(rng):
    basis = enumerate_basis(10, "pbc")
    eig = eig_decompose(build_pxp(basis, HamiltonianParams(mu=0.3)))
    psi0 = random_state(rng, basis.dim)
    traj = evolve_exact(eig, psi0, TimeGrid(0.0, 20.0, 0.5))
    norms = np.linalg.norm(traj, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_krylov_diagonal_phases():
    # purely diagonal generator: every basis amplitude picks exp(-i mu n t)
    basis = enumerate_basis(8, "pbc")
    pops = basis.popcounts().astype(float)
    import scipy.sparse as sparse

    diag = sparse.diags(2.0 * pops).tocsr()
    psi0 = np.ones(basis.dim, dtype=complex) / np.sqrt(basis.dim)
    out = evolve_krylov(diag, psi0, 0.7, tol=1e-12)
    expected = psi0 * np.exp(-1j * 2.0 * pops * 0.7)
    assert np.linalg.norm(out - expected) < 1e-10


@pytest.mark.parametrize("n,t", [(10, 5.0), (12, 20.0)])
def test_krylov_matches_exact(rng, n, t):
    basis = enumerate_basis(n, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=-1.31))
    eig = eig_decompose(op)
    psi0 = random_state(rng, basis.dim)
    ref = evolve_exact(eig, psi0, np.array([t]))[0]
    out = evolve_krylov(op, psi0, t, tol=1e-10)
    assert np.linalg.norm(out - ref) < 1e-8


def test_krylov_norm_drift_long_time(rng):
    basis = enumerate_basis(14, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.6))
    psi0 = random_state(rng, basis.dim)
    out = evolve_krylov(op, psi0, 20.0, tol=1e-9)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-9


def test_krylov_time_reversal(rng):
    basis = enumerate_basis(12, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=1.6))
    psi0 = random_state(rng, basis.dim)
    there = evolve_krylov(op, psi0, 7.0, tol=1e-10)
    back = evolve_krylov(op, there, -7.0, tol=1e-10)
    assert np.linalg.norm(back - psi0) < 2e-10


def test_energy_conservation_static():
    basis = enumerate_basis(16, "pbc")
    sec = build_sector(basis, 0, +1)
    op = build_pxp(sec, HamiltonianParams(mu=1.6))
    _, psi0 = ground_state(build_pxp(sec, HamiltonianParams(mu=-0.76)))
    eig = eig_decompose(op, validate=False)
    traj = evolve_exact(eig, psi0, TimeGrid(0.0, 20.0, 0.5))
    energies = np.real(np.einsum("ti,ij,tj->t", traj.conj(), op.toarray(), traj))
    assert np.abs(energies - energies[0]).max() < 1e-8


def test_constant_schedule_reduces_to_static(rng):
    basis = enumerate_basis(10, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.9))
    psi0 = random_state(rng, basis.dim)
    ref = evolve_krylov(op, psi0, 3.0, tol=1e-12)
    out = evolve_time_dependent(lambda t: 0.9, basis, psi0, TimeGrid(0.0, 3.0, 0.01))
    assert np.linalg.norm(out - ref) < 1e-8


def test_zero_duration_schedule_is_identity(rng):
    basis = enumerate_basis(8, "pbc")
    psi0 = random_state(rng, basis.dim)
    out = evolve_time_dependent(lambda t: 1.0, basis, psi0, TimeGrid(0.0, 0.0, 0.1))
    assert np.array_equal(out, psi0)


def test_schedule_error_on_nonfinite():
    basis = enumerate_basis(6, "pbc")
    psi0 = polarized_state(basis)
    with pytest.raises(ScheduleError):
        evolve_time_dependent(lambda t: np.nan, basis, psi0, TimeGrid(0.0, 1.0, 0.1))


def test_ramp_schedule_dt_halving_richardson():
    # full preparation ramp at the acceptance settings, full basis, N=10:
    # halving the step must leave the final overlap unchanged at the 1e-6 level
    n = 10
    basis = enumerate_basis(n, "pbc")
    schedule = RampSchedule(A=-40.0)
    sec = build_sector(basis, 0, +1)
    _, target = ground_state(build_pxp(sec, HamiltonianParams(mu=2.0)))
    target_full = sec.expand(target)
    psi0 = polarized_state(basis)
    t_stop = 3.3
    overlaps = []
    for dt in (0.0025, 0.00125):
        out = evolve_time_dependent(schedule, basis, psi0, TimeGrid(0.0, t_stop, dt))
        overlaps.append(abs(np.vdot(target_full, out)) ** 2)
    assert abs(overlaps[1] - overlaps[0]) < 1e-6


def test_krylov_raises_on_budget_exhaustion():
    basis = enumerate_basis(10, "pbc")
    op = build_pxp(basis, HamiltonianParams(mu=0.2))
    psi0 = polarized_state(basis)
    with pytest.raises(PropagationError):
        evolve_krylov(op, psi0, 50.0, tol=1e-12, max_dim=3, max_substeps=5)
