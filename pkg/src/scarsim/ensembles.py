"""Canonical-ensemble reference values and the infinite-time diagonal ensemble.

The canonical side solves for the inverse temperature whose Gibbs state
matches a target energy, then reports the thermal excitation density. The
diagonal side evaluates the infinite-time average of the density, including
exact off-diagonal contributions inside degenerate eigenvalue blocks (the
zero-potential chain has an extensive zero-energy block where these terms
are essential).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize as opt

from .basis import ConstrainedBasis, SymmetrySector
from .errors import BracketError, SpectralEdgeError
from .operators import number_operator
from .propagation import EigDecomposition

BETA_CAP = 50.0           # units of inverse Rabi scale
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class CanonicalResult:
    """Inverse temperature with the matched thermal density and energy."""

    beta: float
    n_th: float
    mean_energy: float


def _number_matrix(eig: EigDecomposition) -> np.ndarray:
    """Density operator n-hat in the eigenbasis of the decomposition."""
    basis = eig.basis
    v = eig.eigenvectors
    if isinstance(basis, SymmetrySector):
        num = basis.project_matrix(number_operator(basis.basis)).toarray()
        return v.conj().T @ num @ v
    if isinstance(basis, ConstrainedBasis):
        diag = basis.popcounts() / basis.n_sites
        return v.conj().T @ (diag[:, None] * v)
    raise TypeError("decomposition carries no basis tag; cannot build the number operator")


def number_diagonal(eig: EigDecomposition) -> np.ndarray:
    """Eigenstate expectation values <E_j|n|E_j> without the full matrix."""
    basis = eig.basis
    v = eig.eigenvectors
    if isinstance(basis, SymmetrySector):
        num = basis.project_matrix(number_operator(basis.basis)).toarray()
        return np.real(np.einsum("ij,ik,kj->j", v.conj(), num, v))
    if isinstance(basis, ConstrainedBasis):
        diag = basis.popcounts() / basis.n_sites
        return (np.abs(v) ** 2 * diag[:, None]).sum(axis=0)
    raise TypeError("decomposition carries no basis tag; cannot build the number operator")


def _gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    shifted = -beta * energies
    shifted -= shifted.max()  # overflow-safe
    w = np.exp(shifted)
    return w / w.sum()


def canonical_energy(energies: np.ndarray, beta: float) -> float:
    return float(_gibbs_weights(energies, beta) @ energies)


def solve_beta(eig: EigDecomposition, e_target: float, tol: float = 1e-10,
               beta_cap: float = BETA_CAP) -> CanonicalResult:
    """Inverse temperature matching a target mean energy.

    Bracketed root solve on [-beta_cap, beta_cap]; the canonical energy is
    strictly decreasing in beta so any sign change is a unique root. Negative
    temperatures (targets above the infinite-temperature mean) are allowed.
    """
    energies = eig.eigenvalues
    e_min, e_max = float(energies[0]), float(energies[-1])
    if not e_min + tol < e_target < e_max - tol:
        raise SpectralEdgeError(
            f"target energy {e_target:.6g} at spectral edge [{e_min:.6g}, {e_max:.6g}]")

    def objective(beta: float) -> float:
        return canonical_energy(energies, beta) - e_target

    lo, hi = objective(beta_cap), objective(-beta_cap)
    if not lo <= 0.0 <= hi:
        raise BracketError(
            f"no sign change on beta in [-{beta_cap}, {beta_cap}]: "
            f"f({beta_cap})={lo:.3e}, f(-{beta_cap})={hi:.3e}")
    beta = opt.brentq(objective, -beta_cap, beta_cap, xtol=1e-14, rtol=8.9e-16)
    weights = _gibbs_weights(energies, beta)
    n_th = float(weights @ number_diagonal(eig))
    return CanonicalResult(beta=float(beta), n_th=n_th,
                           mean_energy=float(weights @ energies))


def _degenerate_blocks(energies: np.ndarray, tol: float = DEGENERACY_TOL):
    """Contiguous index blocks of (near-)equal eigenvalues."""
    blocks = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > tol:
            blocks.append(slice(start, i))
            start = i
    return blocks


def diagonal_ensemble_n(psi0: np.ndarray, eig: EigDecomposition,
                        degeneracy_tol: float = DEGENERACY_TOL,
                        warn_on_degeneracy: bool = True) -> float:
    """Infinite-time average of the excitation density.

    Singleton eigenvalues contribute |c_j|^2 <E_j|n|E_j>; inside degenerate
    blocks the full block of the number operator is kept, which reproduces
    the true long-time average (needed for the extensive zero-energy block
    of the zero-potential chain). A warning reports degenerate blocks that
    actually carry weight of the initial state, since they usually signal an
    unresolved symmetry.
    """
    coeff = eig.coefficients(np.asarray(psi0, dtype=complex))
    energies = eig.eigenvalues
    blocks = [b for b in _degenerate_blocks(energies, degeneracy_tol)]
    n_diag = number_diagonal(eig)
    total = 0.0
    weighted_blocks = []
    v = eig.eigenvectors
    basis = eig.basis
    if isinstance(basis, SymmetrySector):
        num_full = basis.project_matrix(number_operator(basis.basis)).toarray()
    else:
        num_full = None  # diagonal path below
    for blk in blocks:
        width = blk.stop - blk.start
        c = coeff[blk]
        weight = float(np.sum(np.abs(c) ** 2))
        if width == 1:
            total += weight * n_diag[blk.start]
            continue
        if weight > 1e-12:
            weighted_blocks.append((float(energies[blk.start]), width, weight))
        vb = v[:, blk]
        if num_full is None:
            diag = basis.popcounts() / basis.n_sites
            block_mat = vb.conj().T @ (diag[:, None] * vb)
        else:
            block_mat = vb.conj().T @ num_full @ vb
        total += float(np.real(c.conj() @ block_mat @ c))
    if warn_on_degeneracy:
        significant = [b for b in weighted_blocks if abs(b[0]) > degeneracy_tol]
        if significant:
            gaps = ", ".join(f"E={e:.6g} (x{w}, weight {p:.2e})"
                             for e, w, p in significant[:5])
            warnings.warn(
                f"initial state overlaps {len(significant)} degenerate block(s) away "
                f"from E=0; treated exactly via block off-diagonals: {gaps}",
                stacklevel=2)
    return float(total)


def ensemble_gap(psi0: np.ndarray, eig: EigDecomposition,
                 e_target: float | None = None) -> float:
    """Difference between infinite-time and canonical densities.

    ``e_target`` defaults to the initial-state energy under the quench
    operator, computed from the decomposition itself.
    """
    coeff = eig.coefficients(np.asarray(psi0, dtype=complex))
    if e_target is None:
        e_target = float(np.real(np.sum(np.abs(coeff) ** 2 * eig.eigenvalues)))
    canonical = solve_beta(eig, e_target)
    return diagonal_ensemble_n(psi0, eig) - canonical.n_th
