"""Unitary time evolution: exact eigenbasis propagation and adaptive Lanczos.

Full diagonalization is used automatically for small sectors; larger
problems step with a Lanczos-subspace exponential whose substep size is
controlled by an a-posteriori residual estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sparse

from .basis import ConstrainedBasis, SymmetrySector
from .errors import BasisMismatchError, PropagationError, ScheduleError
from .operators import SparseOperator, build_kinetic, number_operator

DENSE_DIM_LIMIT = 4000   # below this, quench pipelines prefer full diagonalization
KRYLOV_MAX_DIM = 40
DEFAULT_KRYLOV_TOL = 1e-9
RAMP_DEFAULT_DT = 0.0025


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling times in units of the inverse Rabi scale.

    A degenerate grid with ``t_end == t_start`` is allowed and represents a
    single sample (propagators return the input state unchanged).
    """

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.t_start:
            raise ValueError(f"t_end {self.t_end} precedes t_start {self.t_start}")

    def times(self) -> np.ndarray:
        n = int(np.floor((self.t_end - self.t_start) / self.dt + 1e-9)) + 1
        ts = self.t_start + self.dt * np.arange(n)
        if ts[-1] < self.t_end - 1e-9 * self.dt:
            ts = np.append(ts, self.t_end)
        return ts


@dataclass(frozen=True)
class EigDecomposition:
    """Dense eigendecomposition of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    basis: object = None

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        """Expansion coefficients <E_j|psi>."""
        if psi.shape[-1] != self.dim:
            raise BasisMismatchError(f"state dim {psi.shape} vs decomposition dim {self.dim}")
        return self.eigenvectors.conj().T @ psi


def eig_decompose(op: SparseOperator, validate: bool = True,
                  reconstruction_tol: float = 1e-9) -> EigDecomposition:
    """Full diagonalization with an optional reconstruction check.

    ``validate`` recomputes ``V diag(w) V^dag`` and compares entrywise with
    the input, guaranteeing the decomposition is usable for exact evolution.
    """
    dense = op.matrix.toarray()
    if np.iscomplexobj(dense) and np.abs(dense.imag).max() < 1e-300:
        dense = dense.real
    w, v = la.eigh(dense)
    if validate:
        err = np.abs(dense - (v * w) @ v.conj().T).max()
        if err > reconstruction_tol:
            raise PropagationError(f"eigendecomposition reconstruction error {err:.3e}")
    return EigDecomposition(eigenvalues=w, eigenvectors=v, basis=op.basis)


def evolve_exact(eig: EigDecomposition, psi0: np.ndarray, times) -> np.ndarray:
    """Propagate through the eigenbasis: psi(t) = V exp(-i w t) V^dag psi0.

    Returns an array of shape (n_times, dim); each row is the state at the
    corresponding grid time.
    """
    ts = times.times() if isinstance(times, TimeGrid) else np.atleast_1d(np.asarray(times, float))
    coeff = eig.coefficients(np.asarray(psi0, dtype=complex))
    phases = np.exp(-1j * np.outer(ts, eig.eigenvalues))
    return (phases * coeff) @ eig.eigenvectors.conj().T


def _lanczos_step(matvec: Callable, psi: np.ndarray, dt: float, tol: float,
                  max_dim: int) -> tuple[np.ndarray, float, int]:
    """One Lanczos exponential exp(-i dt H) psi with full reorthogonalization.

    Returns (state, error_estimate, krylov_dim). The error estimate is the
    usual last-component posterior bound; a happy breakdown makes the result
    exact within the built subspace.
    """
    dim = psi.shape[0]
    m_cap = min(max_dim, dim)
    norm0 = np.linalg.norm(psi)
    v = psi / norm0
    vecs = [v]
    alphas, betas = [], []
    w = matvec(v)
    alphas.append(np.real(np.vdot(v, w)))
    w = w - alphas[0] * v
    happy = False
    for _ in range(1, m_cap):
        beta = np.linalg.norm(w)
        if beta < 1e-14:
            happy = True
            break
        v_next = w / beta
        # full reorthogonalization: subspace dims are small (<= 40)
        for u in vecs:
            v_next = v_next - np.vdot(u, v_next) * u
        v_next /= np.linalg.norm(v_next)
        vecs.append(v_next)
        betas.append(beta)
        w = matvec(v_next) - beta * vecs[-2]
        alphas.append(np.real(np.vdot(v_next, w)))
        w = w - alphas[-1] * v_next
    m = len(vecs)
    tri = np.diag(np.asarray(alphas)) + 0j
    if betas:
        off = np.asarray(betas)
        tri += np.diag(off, 1) + np.diag(off, -1)
    small = la.expm(-1j * dt * tri)[:, 0]
    out = norm0 * (np.column_stack(vecs) @ small)
    if happy or m == dim:
        err = 0.0
    else:
        # Saad posterior estimate: next off-diagonal times last component
        beta_last = np.linalg.norm(w)
        err = abs(beta_last * small[-1]) * norm0
    return out, err, m


def evolve_krylov(H, psi0: np.ndarray, t: float, tol: float = DEFAULT_KRYLOV_TOL,
                  max_dim: int = KRYLOV_MAX_DIM, max_substeps: int = 100000) -> np.ndarray:
    """Adaptive Lanczos evaluation of exp(-i H t) psi0.

    ``H`` may be a SparseOperator, a sparse/dense matrix, or a callable
    matvec. Substeps shrink until the accumulated residual estimate fits in
    ``tol``; exceeding the substep budget raises with the residual attached.
    """
    if isinstance(H, SparseOperator):
        if psi0.shape[-1] != H.dim:
            raise BasisMismatchError(f"operator dim {H.dim} vs state dim {psi0.shape}")
        matvec = lambda v: H.matrix @ v
    elif callable(H):
        matvec = H
    else:
        matvec = lambda v: H @ v

    psi = np.asarray(psi0, dtype=complex).copy()
    if t == 0:
        return psi
    remaining = float(t)
    sign = np.sign(remaining)
    h = remaining
    steps = 0
    budget = tol / max(abs(t), 1e-300)  # error per unit time
    while abs(remaining) > 1e-14 * abs(t):
        h = sign * min(abs(h), abs(remaining))
        out, err, m = _lanczos_step(matvec, psi, h, tol, max_dim)
        if err > budget * abs(h) and abs(h) > 1e-12 * abs(t):
            h *= 0.5
            steps += 1
            if steps > max_substeps:
                raise PropagationError(
                    f"Krylov propagation stalled: residual {err:.3e} at step size {h:.3e}")
            continue
        psi = out
        remaining -= h
        steps += 1
        if steps > max_substeps:
            raise PropagationError(
                f"Krylov propagation exceeded {max_substeps} substeps (residual {err:.3e})")
        if m < max_dim // 2 and err < 0.1 * budget * abs(h):
            h *= 1.5  # subspace converged early; try longer substeps
    return psi


_DENSE_STEP_LIMIT = 192   # per-step dense exponentials below this dimension

# Gauss-Legendre two-node Magnus coefficients
_GAUSS_OFFSET = np.sqrt(3.0) / 6.0    # nodes at (1/2 +- offset) * dt
_MAGNUS_C = np.sqrt(3.0) / 12.0
_NODE_SPREAD_CAP = 0.5                # bisect steps whose mu spread exceeds this


@dataclass(frozen=True)
class HamiltonianParts:
    """Split H(mu) = K + mu * n_count prepared for schedule stepping."""

    kinetic: object
    number: object        # diagonal vector (full basis) or matrix (sector)
    diagonal_number: bool
    commutator: object    # i [K, n_count], Hermitian
    dim: int

    def dense(self, mu: float) -> np.ndarray:
        kin = self.kinetic.toarray() if sparse.issparse(self.kinetic) else self.kinetic
        if self.diagonal_number:
            return kin + mu * np.diag(self.number)
        return kin + mu * self.number

    def matvec(self, mu: float, comm_scale: float = 0.0) -> Callable:
        kin, num, comm = self.kinetic, self.number, self.commutator
        if self.diagonal_number:
            if comm_scale == 0.0:
                return lambda v: kin @ v + mu * (num * v)
            return lambda v: kin @ v + mu * (num * v) + comm_scale * (comm @ v)
        if comm_scale == 0.0:
            return lambda v: kin @ v + mu * (num @ v)
        return lambda v: kin @ v + mu * (num @ v) + comm_scale * (comm @ v)


def hamiltonian_parts(basis_or_sector) -> HamiltonianParts:
    if isinstance(basis_or_sector, SymmetrySector):
        sector = basis_or_sector
        kin = sector.project_matrix(build_kinetic(sector.basis)).toarray()
        num = sector.project_matrix(number_operator(sector.basis, density=False)).toarray()
        comm = 1j * (kin @ num - num @ kin)
        return HamiltonianParts(kinetic=kin, number=num, diagonal_number=False,
                                commutator=comm, dim=kin.shape[0])
    basis = basis_or_sector
    kin = build_kinetic(basis)
    num = basis.popcounts().astype(float)
    comm = (1j * (kin.multiply(num[None, :]) - kin.multiply(num[:, None]))).tocsr()
    return HamiltonianParts(kinetic=kin, number=num, diagonal_number=True,
                            commutator=comm, dim=kin.shape[0])


def evolve_time_dependent(schedule: Callable[[float], float], basis_or_sector,
                          psi0: np.ndarray, grid: TimeGrid,
                          tol: float = DEFAULT_KRYLOV_TOL,
                          observer: Callable[[float, np.ndarray], None] | None = None
                          ) -> np.ndarray:
    """Evolve under H(mu(t)) stepwise with a fourth-order Magnus generator.

    Each step uses the two-node Gauss quadrature of the schedule: the
    effective Hamiltonian is the node average plus the commutator correction
    (dt/sqrt(12)) (mu2 - mu1) i[K, n]. Freezing the schedule at the step
    midpoint is the leading term, so halving ``grid.dt`` is a valid
    convergence check and changes converged results at the discretization
    error level. Small problems take exact dense exponentials per step;
    larger ones use Lanczos stepping with the error budget split over steps.
    ``observer`` is called with (t, state) after every step and at t_start.
    """
    parts = hamiltonian_parts(basis_or_sector)
    psi = np.asarray(psi0, dtype=complex).copy()
    t0, t1, dt = grid.t_start, grid.t_end, grid.dt
    if observer is not None:
        observer(t0, psi)
    if t1 <= t0:
        return psi
    n_steps = int(np.ceil((t1 - t0) / dt - 1e-12))
    dense = parts.dim <= _DENSE_STEP_LIMIT
    step_tol = tol / n_steps
    if dense:
        kin_d = parts.kinetic.toarray() if sparse.issparse(parts.kinetic) else parts.kinetic
        num_d = np.diag(parts.number) if parts.diagonal_number else parts.number
        comm_d = parts.commutator.toarray() if sparse.issparse(parts.commutator) \
            else parts.commutator

    def advance(psi, x, y, depth=0):
        h = y - x
        mu1 = float(schedule(x + (0.5 - _GAUSS_OFFSET) * h))
        mu2 = float(schedule(x + (0.5 + _GAUSS_OFFSET) * h))
        if not (np.isfinite(mu1) and np.isfinite(mu2)):
            raise ScheduleError(f"schedule returned non-finite value on step [{x}, {y}]")
        # near schedule poles the node spread blows up; bisect until the
        # Magnus correction is a perturbation of the averaged generator
        # (relative cap: at huge |mu| the error couples only through the
        # order-one flip term, so proportionally larger spreads are harmless)
        cap = max(_NODE_SPREAD_CAP, 0.02 * abs(mu1 + mu2))
        if abs(mu2 - mu1) > cap and depth < 24:
            mid = 0.5 * (x + y)
            return advance(advance(psi, x, mid, depth + 1), mid, y, depth + 1)
        mu_bar = 0.5 * (mu1 + mu2)
        comm_scale = _MAGNUS_C * h * (mu2 - mu1)
        if dense:
            h_eff = kin_d + mu_bar * num_d + comm_scale * comm_d
            w, v = la.eigh(h_eff)
            return v @ (np.exp(-1j * w * h) * (v.conj().T @ psi))
        return evolve_krylov(parts.matvec(mu_bar, comm_scale), psi, h, tol=step_tol)

    for step in range(n_steps):
        a = t0 + step * dt
        b = min(a + dt, t1)
        psi = advance(psi, a, b)
        if observer is not None:
            observer(b, psi)
    return psi
