"""Sparse Hamiltonians and diagonal unitaries for the constrained chain.

The Hamiltonian is a sum of projected spin flips (a site flips only when both
neighbours are unexcited) with Rabi scale ``omega`` plus a chemical-potential
term counting excitations. Matrices are real symmetric and stored in CSR
form; sector blocks are complex Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sparse

from .basis import BoundaryCondition, ConstrainedBasis, SymmetrySector, enumerate_basis
from .errors import BasisMismatchError, ShapeError

HERMITICITY_TOL = 1e-12

BasisLike = Union[ConstrainedBasis, SymmetrySector]


@dataclass(frozen=True)
class HamiltonianParams:
    """Uniform-chain parameters: Rabi scale, chemical potential, boundaries."""
    mu: float
    omega: float = 1.0
    bc: BoundaryCondition = BoundaryCondition.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition.coerce(self.bc))


@dataclass(frozen=True)
class ModulatedParams:
    """Site-periodic chemical potentials ``w`` and phase-pulse angles ``gamma``.

    ``unit_cell_K = 1`` with ``w = [mu]`` reproduces the uniform chain.
    """
    unit_cell_K: int
    w: tuple
    gamma: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))
        object.__setattr__(self, "gamma", tuple(float(x) for x in self.gamma))
        if len(self.w) != self.unit_cell_K:
            raise ShapeError(f"expected {self.unit_cell_K} site potentials, got {len(self.w)}")
        if self.gamma and len(self.gamma) != self.unit_cell_K:
            raise ShapeError(f"expected {self.unit_cell_K} pulse angles, got {len(self.gamma)}")


@dataclass(frozen=True)
class SparseOperator:
    """A Hermitian operator tagged with the basis it acts on."""

    matrix: sparse.csr_matrix = field(repr=False)
    basis: BasisLike

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        if vec.shape[-1] != self.dim:
            raise BasisMismatchError(f"operator dim {self.dim} vs state dim {vec.shape}")
        return self.matrix @ vec

    def expectation(self, vec: np.ndarray) -> float:
        return float(np.real(np.vdot(vec, self.matvec(vec))))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _check_hermitian(matrix: sparse.spmatrix, tol: float = HERMITICITY_TOL) -> None:
    diff = matrix - matrix.conj().T
    err = np.abs(diff.data).max() if diff.nnz else 0.0
    if err > tol:
        raise BasisMismatchError(f"operator not Hermitian: max asymmetry {err:.3e}")


def _flip_allowed(states: np.ndarray, site: int, n: int, bc: BoundaryCondition) -> np.ndarray:
    if bc is BoundaryCondition.PERIODIC:
        left, right = (site - 1) % n, (site + 1) % n
        ok = (((states >> left) & 1) == 0) & (((states >> right) & 1) == 0)
        if n == 1:
            ok = np.zeros(len(states), dtype=bool)  # site is its own neighbour
        return ok
    ok = np.ones(len(states), dtype=bool)
    if site > 0:
        ok &= ((states >> (site - 1)) & 1) == 0
    if site < n - 1:
        ok &= ((states >> (site + 1)) & 1) == 0
    return ok


def _kinetic_coo(basis: ConstrainedBasis, omega: float):
    """Row/col/value triplets of the projected-flip term on the full basis."""
    states = basis.states
    n = basis.n_sites
    rows, cols = [], []
    for j in range(n):
        src = np.where(_flip_allowed(states, j, n, basis.bc))[0]
        dst = basis.index_of(states[src] ^ (np.int64(1) << j))
        rows.append(src)
        cols.append(dst)
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    vals = np.full(len(rows), float(omega))
    return rows, cols, vals


def build_kinetic(basis: ConstrainedBasis, omega: float = 1.0) -> sparse.csr_matrix:
    """Projected-flip part of the Hamiltonian as a bare CSR matrix."""
    rows, cols, vals = _kinetic_coo(basis, omega)
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    return mat.tocsr()


def build_pxp(basis_or_sector: BasisLike, params: HamiltonianParams,
              validate: bool = True) -> SparseOperator:
    """Uniform-chain Hamiltonian on the full basis or a symmetry sector.

    Off-diagonal elements connect configurations differing by one legal flip
    and carry ``omega``; the diagonal of configuration ``s`` is
    ``mu * popcount(s)``.
    """
    if isinstance(basis_or_sector, SymmetrySector):
        sector = basis_or_sector
        full = build_pxp(sector.basis, params, validate=False)
        mat = sector.project_matrix(full.matrix)
        if validate:
            _check_hermitian(mat)
        return SparseOperator(matrix=mat, basis=sector)

    basis = basis_or_sector
    if basis.bc is not params.bc:
        raise BasisMismatchError(
            f"basis boundary {basis.bc} does not match params boundary {params.bc}")
    kin = build_kinetic(basis, params.omega)
    diag = sparse.diags(params.mu * basis.popcounts().astype(float))
    mat = (kin + diag).tocsr()
    if validate:
        _check_hermitian(mat)
    return SparseOperator(matrix=mat, basis=basis)


def build_modulated(basis: ConstrainedBasis, params: ModulatedParams,
                    validate: bool = True) -> SparseOperator:
    """Hamiltonian with a K-site-periodic chemical potential.

    The kinetic part is identical to :func:`build_pxp`; the diagonal of
    configuration ``s`` is ``sum_j w[j mod K] * bit_j(s)``.
    """
    n = basis.n_sites
    k = params.unit_cell_K
    if n % k != 0:
        raise ShapeError(f"unit cell {k} does not divide chain length {n}")
    states = basis.states
    diag = np.zeros(basis.dim)
    for j in range(n):
        diag += params.w[j % k] * ((states >> j) & 1)
    kin = build_kinetic(basis, 1.0)
    mat = (kin + sparse.diags(diag)).tocsr()
    if validate:
        _check_hermitian(mat)
    return SparseOperator(matrix=mat, basis=basis)


def number_operator(basis: ConstrainedBasis, density: bool = True) -> sparse.csr_matrix:
    """Diagonal excitation-number operator, optionally divided by N."""
    diag = basis.popcounts().astype(float)
    if density:
        diag /= basis.n_sites
    return sparse.diags(diag).tocsr()


def apply_phase_pulse(state: np.ndarray, basis: ConstrainedBasis,
                      gamma: Sequence[float], unit_cell_K: int | None = None) -> np.ndarray:
    """Apply the site-modulated diagonal phase pulse to a full-basis state.

    Each amplitude is multiplied by ``exp(-i sum_j gamma[j mod K] z_j)`` with
    ``z_j = +1`` for an excited site and ``-1`` otherwise. Norm preserving.
    """
    gamma = np.asarray(gamma, dtype=float)
    k = len(gamma) if unit_cell_K is None else int(unit_cell_K)
    if len(gamma) != k:
        raise ShapeError(f"expected {k} pulse angles, got {len(gamma)}")
    n = basis.n_sites
    if n % k != 0:
        raise ShapeError(f"unit cell {k} does not divide chain length {n}")
    state = np.asarray(state)
    if state.shape[-1] != basis.dim:
        raise BasisMismatchError(f"state dim {state.shape} vs basis dim {basis.dim}")
    states = basis.states
    phase_sum = np.zeros(basis.dim)
    for j in range(n):
        z = 2.0 * ((states >> j) & 1) - 1.0
        phase_sum += gamma[j % k] * z
    return state * np.exp(-1j * phase_sum)


def apply_pi_reflection(state: np.ndarray, basis: ConstrainedBasis) -> np.ndarray:
    """Multiply each amplitude by the product of single-site Z eigenvalues.

    Configuration ``s`` picks up ``(-1)**(N - popcount(s))``; applying the
    map twice is the identity. Conjugation by this operator flips the sign
    of the kinetic term, which reflects the spectrum when the chemical
    potential is negated.
    """
    state = np.asarray(state)
    if state.shape[-1] != basis.dim:
        raise BasisMismatchError(f"state dim {state.shape} vs basis dim {basis.dim}")
    signs = np.where((basis.n_sites - basis.popcounts()) % 2 == 0, 1.0, -1.0)
    return state * signs


def pi_reflection_matrix(basis: ConstrainedBasis) -> sparse.csr_matrix:
    signs = np.where((basis.n_sites - basis.popcounts()) % 2 == 0, 1.0, -1.0)
    return sparse.diags(signs).tocsr()


def neel_state(basis: ConstrainedBasis, offset: int = 0) -> np.ndarray:
    """Alternating configuration 1010... (or 0101... for ``offset=1``)."""
    n = basis.n_sites
    config = sum(1 << j for j in range(offset, n, 2))
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.index_of(config)[0]] = 1.0
    return vec


def neel_superposition(basis: ConstrainedBasis) -> np.ndarray:
    """Symmetric combination of the two alternating configurations."""
    if basis.n_sites % 2 != 0:
        raise ValueError("alternating states need an even chain")
    vec = (neel_state(basis, 0) + neel_state(basis, 1)) / np.sqrt(2.0)
    return vec


def polarized_state(basis: ConstrainedBasis) -> np.ndarray:
    """All-sites-unexcited configuration."""
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.index_of(0)[0]] = 1.0
    return vec
