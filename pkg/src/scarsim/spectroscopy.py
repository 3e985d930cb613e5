"""Ground states, momentum-resolved excitation bands, and overlap spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .basis import BoundaryCondition, ConstrainedBasis, SymmetrySector, build_sector, enumerate_basis
from .errors import BasisMismatchError, SolverError
from .operators import HamiltonianParams, SparseOperator, build_pxp
from .propagation import EigDecomposition

GROUND_STATE_RESIDUAL = 1e-10
_DENSE_EIG_LIMIT = 1200


@dataclass(frozen=True)
class DispersionBand:
    """Lowest excitation energy per momentum, reported over k in [0, pi]."""

    momenta: np.ndarray = field(repr=False)      # 2 pi m / N
    energies: np.ndarray = field(repr=False)     # E_min(k) - E_GS
    n_sites: int = 0
    mu: float = 0.0

    def energy_at(self, m: int) -> float:
        """Excitation energy for momentum index m (folded into [0, N/2])."""
        n = self.n_sites
        m = min(m % n, (n - m % n) % n)
        return float(self.energies[m])


@dataclass(frozen=True)
class OverlapSpectrum:
    """Eigenstate energies with squared overlaps against a reference state."""

    energies: np.ndarray = field(repr=False)
    overlaps: np.ndarray = field(repr=False)


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    pivot = np.argmax(np.abs(vec))
    phase = vec[pivot] / abs(vec[pivot])
    return vec / phase


def ground_state(op: SparseOperator, residual_tol: float = GROUND_STATE_RESIDUAL
                 ) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a Hermitian operator.

    Uses a dense solve for small blocks and an iterative Lanczos solve above
    ``_DENSE_EIG_LIMIT``. The returned vector has its largest-magnitude
    amplitude rotated to the positive real axis, making the output
    deterministic whenever the ground state is non-degenerate.
    """
    mat = op.matrix
    if op.dim <= _DENSE_EIG_LIMIT:
        w, v = la.eigh(mat.toarray())
        energy, vec = float(w[0]), v[:, 0].astype(complex)
    else:
        v0 = np.ones(op.dim) / np.sqrt(op.dim)  # deterministic Lanczos start
        try:
            w, v = spla.eigsh(mat, k=1, which="SA", tol=0, v0=v0)
        except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
            raise SolverError(f"ground-state solve did not converge: {exc}") from exc
        energy, vec = float(w[0]), v[:, 0].astype(complex)
    res = np.linalg.norm(mat @ vec - energy * vec)
    scale = np.abs(mat.data).max() if mat.nnz else 1.0
    if res > max(residual_tol, 1e3 * np.finfo(float).eps * scale):
        raise SolverError(f"ground-state residual {res:.3e} exceeds {residual_tol:.1e}")
    return energy, _sign_fix(vec / np.linalg.norm(vec))


def _lowest_levels(op: SparseOperator, count: int) -> np.ndarray:
    mat = op.matrix
    if op.dim <= max(_DENSE_EIG_LIMIT, count + 1):
        return la.eigh(mat.toarray(), eigvals_only=True)[:count]
    v0 = np.ones(op.dim) / np.sqrt(op.dim)
    w = spla.eigsh(mat, k=count, which="SA", tol=0, v0=v0,
                   return_eigenvectors=False)
    return np.sort(w)


def dispersion(n_sites: int, mu: float) -> DispersionBand:
    """Excitation band: lowest level above the global ground state per momentum.

    Periodic even chains only. The k = 0 entry is the first excited level of
    that sector (its lowest level is the ground state itself); the band is
    inversion symmetric, so momenta are reported over [0, pi] and
    ``energy_at`` folds larger indices back.
    """
    if n_sites % 2 != 0:
        raise ValueError("dispersion needs an even chain")
    basis = enumerate_basis(n_sites, BoundaryCondition.PERIODIC)
    params = HamiltonianParams(mu=mu)
    momenta = []
    energies = []
    e_gs = None
    for m in range(n_sites // 2 + 1):
        sec = build_sector(basis, k=m)
        h = build_pxp(sec, params)
        if m == 0:
            levels = _lowest_levels(h, 2)
            e_gs = float(levels[0])
            energies.append(float(levels[1]))
        else:
            levels = _lowest_levels(h, 1)
            energies.append(float(levels[0]))
        momenta.append(2 * np.pi * m / n_sites)
    energies = np.asarray(energies) - e_gs
    return DispersionBand(momenta=np.asarray(momenta), energies=energies,
                          n_sites=n_sites, mu=mu)


def band_ground_energy(n_sites: int, mu: float) -> float:
    """Global ground-state energy (zero-momentum sector)."""
    basis = enumerate_basis(n_sites, BoundaryCondition.PERIODIC)
    sec = build_sector(basis, k=0, p=+1)
    e, _ = ground_state(build_pxp(sec, HamiltonianParams(mu=mu)))
    return e


def two_magnon_prediction(band: DispersionBand, e_gs: float) -> list[tuple[float, float]]:
    """Non-interacting pair energies E_GS + eps(k) + eps(-k) per band momentum.

    These approximate zero-total-momentum levels built from two independent
    excitations with opposite momenta.
    """
    return [(float(k), float(e_gs + 2.0 * eps))
            for k, eps in zip(band.momenta, band.energies)]


def overlap_spectrum(psi0: np.ndarray, eig: EigDecomposition) -> OverlapSpectrum:
    """Squared overlaps of a reference state with every eigenstate."""
    coeff = eig.coefficients(np.asarray(psi0, dtype=complex))
    return OverlapSpectrum(energies=eig.eigenvalues.copy(),
                           overlaps=np.abs(coeff) ** 2)


def tower_markers(e_gs: float, eps_pi: float, count: int = 3,
                  stride: int = 2) -> np.ndarray:
    """Expected scarred-tower energies at multiples of the pi-excitation energy.

    In the zero-momentum sector only even multiples carry weight (each
    pi-momentum excitation shifts the total momentum by pi), hence the
    default stride of two.
    """
    return e_gs + eps_pi * stride * np.arange(1, count + 1)


def tower_peaks(spectrum: OverlapSpectrum, e_gs: float, eps_pi: float,
                count: int = 3, stride: int = 2) -> list[tuple[float, float]]:
    """Dominant-overlap eigenstate inside each tower window.

    Window m is centered on E_GS + m*stride*eps(pi) with half-width
    stride*eps(pi)/2. Returns (energy, overlap) of the largest-overlap
    state per window.
    """
    peaks = []
    width = stride * eps_pi
    for m in range(1, count + 1):
        lo = e_gs + (m - 0.5) * width
        hi = e_gs + (m + 0.5) * width
        sel = np.where((spectrum.energies > lo) & (spectrum.energies <= hi))[0]
        if len(sel) == 0:
            raise BasisMismatchError(f"no eigenstates inside tower window {m}")
        best = sel[np.argmax(spectrum.overlaps[sel])]
        peaks.append((float(spectrum.energies[best]), float(spectrum.overlaps[best])))
    return peaks
