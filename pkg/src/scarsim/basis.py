"""Blockade-constrained configuration bases and their symmetry sectors.

Configurations are machine integers with bit ``j`` holding the occupation of
site ``j``. A configuration is legal when no two adjacent sites are both
excited; under periodic boundaries the pair ``(N-1, 0)`` counts as adjacent.
Legal states are stored sorted by integer value, so index lookup is a binary
search and the basis order is reproducible.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import BasisSizeError, UnsupportedSymmetryError

MAX_SITES = 32  # one configuration per machine word


class BoundaryCondition(enum.Enum):
    PERIODIC = "pbc"
    OPEN = "obc"

    @classmethod
    def coerce(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"pbc": cls.PERIODIC, "periodic": cls.PERIODIC,
                   "obc": cls.OPEN, "open": cls.OPEN}
        if key not in aliases:
            raise ValueError(f"unknown boundary condition {value!r}")
        return aliases[key]


def _check_n_sites(n_sites: int) -> int:
    n = int(n_sites)
    if not 1 <= n <= MAX_SITES:
        raise BasisSizeError(f"n_sites must be in [1, {MAX_SITES}], got {n_sites}")
    return n


def rotate_left(states: np.ndarray, n_sites: int, shift: int = 1) -> np.ndarray:
    """Cyclic shift of configurations: site j -> site (j + shift) mod N."""
    shift %= n_sites
    if shift == 0:
        return states.copy()
    mask = (np.int64(1) << n_sites) - 1
    return ((states << shift) | (states >> (n_sites - shift))) & mask


def reflect(states: np.ndarray, n_sites: int) -> np.ndarray:
    """Spatial inversion: site j -> site N-1-j (bit reversal in N bits)."""
    out = np.zeros_like(states)
    for j in range(n_sites):
        out |= ((states >> j) & 1) << (n_sites - 1 - j)
    return out


def popcounts(states: np.ndarray) -> np.ndarray:
    """Number of excitations in each configuration."""
    s = states.astype(np.uint64)
    counts = np.zeros(len(states), dtype=np.int64)
    while s.any():
        counts += (s & 1).astype(np.int64)
        s >>= 1
    return counts


@dataclass(frozen=True)
class ConstrainedBasis:
    """Sorted enumeration of the blockade-legal configurations of a chain.

    Attributes
    ----------
    n_sites : int
        Chain length N.
    bc : BoundaryCondition
        Boundary condition used for the adjacency constraint.
    states : ndarray of int64
        Legal configurations, strictly ascending.
    """

    n_sites: int
    bc: BoundaryCondition
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, configs) -> np.ndarray:
        """Map configurations to their ordinals in ``states``.

        Raises ``KeyError`` if any configuration is not in the basis.
        """
        configs = np.atleast_1d(np.asarray(configs, dtype=np.int64))
        idx = np.searchsorted(self.states, configs)
        bad = (idx >= self.dim) | (self.states[np.minimum(idx, self.dim - 1)] != configs)
        if bad.any():
            raise KeyError(f"configuration(s) not in basis: {configs[bad][:5]}")
        return idx

    def popcounts(self) -> np.ndarray:
        return popcounts(self.states)

    def __hash__(self):
        return hash((self.n_sites, self.bc))

    def __eq__(self, other):
        return (isinstance(other, ConstrainedBasis)
                and self.n_sites == other.n_sites and self.bc == other.bc)


def _open_chain_states(n_sites: int) -> np.ndarray:
    # S(n) = S(n-1) ++ [s | 1<<(n-1) for s in S(n-2)]; both halves stay sorted
    prev2 = np.array([0], dtype=np.int64)            # n = 0
    prev1 = np.array([0, 1], dtype=np.int64)         # n = 1
    if n_sites == 1:
        return prev1
    for n in range(2, n_sites + 1):
        cur = np.concatenate([prev1, prev2 + (np.int64(1) << (n - 1))])
        prev2, prev1 = prev1, cur
    return prev1


@functools.lru_cache(maxsize=128)
def enumerate_basis(n_sites: int, bc=BoundaryCondition.PERIODIC) -> ConstrainedBasis:
    """Enumerate all blockade-legal configurations of an N-site chain.

    Parameters
    ----------
    n_sites : int
        Chain length, 1 <= N <= 32.
    bc : BoundaryCondition or str
        ``PERIODIC`` adds the wrap-around adjacency constraint.

    Returns
    -------
    ConstrainedBasis
        States sorted ascending; dimension follows the usual hard-dimer
        counting (Fibonacci-like for open, Lucas-like for periodic chains).
    """
    n = _check_n_sites(n_sites)
    bc = BoundaryCondition.coerce(bc)
    states = _open_chain_states(n)
    if bc is BoundaryCondition.PERIODIC:
        wrap = ((states & 1) == 1) & (((states >> (n - 1)) & 1) == 1)
        if n == 1:
            wrap = states == 1  # single site is its own neighbour on a ring
        states = states[~wrap]
    return ConstrainedBasis(n_sites=n, bc=bc, states=states)


def dimension(n_sites: int, bc=BoundaryCondition.PERIODIC) -> int:
    """Dimension of the constrained space without materializing the states.

    Evaluates the two-term recurrence: open chains give F(N+2) with
    F(1)=F(2)=1; rings give F(N-1)+F(N+1).
    """
    n = _check_n_sites(n_sites)
    bc = BoundaryCondition.coerce(bc)

    def fib(k: int) -> int:
        a, b = 0, 1
        for _ in range(k):
            a, b = b, a + b
        return a

    if bc is BoundaryCondition.OPEN:
        return fib(n + 2)
    return fib(n - 1) + fib(n + 1)


@dataclass(frozen=True)
class SymmetrySector:
    """Momentum (and optionally inversion) resolved subspace of a ring basis.

    The sector basis vectors are normalized symmetrized sums
    ``sum_r exp(-2 pi i k r / N) T^r (1 + p I) |a>`` over orbit
    representatives ``a``; orbits whose character sum cancels are dropped.

    Attributes
    ----------
    basis : ConstrainedBasis
        Underlying full constrained basis (periodic).
    momentum_k : int
        Momentum index in [0, N).
    inversion_p : int or None
        +1/-1 for inversion-resolved sectors, None when unresolved.
    representatives : ndarray of int64
        Minimal-integer orbit representatives of the retained orbits.
    normalization : ndarray of float
        Norm of the raw symmetrized sum for each retained representative.
    isometry : scipy CSR matrix, shape (basis.dim, dim)
        Columns are the orthonormal sector basis vectors in the full basis.
    """

    basis: ConstrainedBasis
    momentum_k: int
    inversion_p: int | None
    representatives: np.ndarray = field(repr=False)
    normalization: np.ndarray = field(repr=False)
    isometry: sparse.csr_matrix = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    @property
    def dim(self) -> int:
        return self.isometry.shape[1]

    def expand(self, sector_vec: np.ndarray) -> np.ndarray:
        """Embed a sector state into the full constrained basis."""
        sector_vec = np.asarray(sector_vec)
        if sector_vec.shape[-1] != self.dim:
            raise ValueError(f"expected sector dimension {self.dim}, got {sector_vec.shape}")
        return self.isometry @ sector_vec.astype(complex)

    def compress(self, full_vec: np.ndarray) -> np.ndarray:
        """Project a full-basis state onto the sector (isometry adjoint)."""
        full_vec = np.asarray(full_vec)
        if full_vec.shape[-1] != self.basis.dim:
            raise ValueError(f"expected full dimension {self.basis.dim}, got {full_vec.shape}")
        return self.isometry.conj().T @ full_vec.astype(complex)

    def project_matrix(self, matrix: sparse.spmatrix) -> sparse.csr_matrix:
        """Sector block U^dag M U of a full-basis operator."""
        u = self.isometry
        block = (u.conj().T @ (matrix @ u)).tocsr()
        block.eliminate_zeros()
        return block

    def __hash__(self):
        return hash((self.basis, self.momentum_k, self.inversion_p))

    def __eq__(self, other):
        return (isinstance(other, SymmetrySector) and self.basis == other.basis
                and self.momentum_k == other.momentum_k
                and self.inversion_p == other.inversion_p)


@functools.lru_cache(maxsize=256)
def _build_sector_cached(n_sites, bc, k, p):
    basis = enumerate_basis(n_sites, bc)
    return _build_sector(basis, k, p)


def build_sector(basis: ConstrainedBasis, k: int, p=None) -> SymmetrySector:
    """Build the momentum-k (and inversion-p) sector of a periodic basis.

    Parameters
    ----------
    basis : ConstrainedBasis
        Must be periodic; open chains have no translation symmetry.
    k : int
        Momentum index, 0 <= k < N. Translation phases are exp(-2 pi i k r/N).
    p : {+1, -1, None}
        Inversion quantum number. Only available when 2k = 0 mod N (inversion
        maps k to -k, so mixed sectors exist only at k = 0 and k = N/2).
    """
    if basis.bc is not BoundaryCondition.PERIODIC:
        raise UnsupportedSymmetryError("momentum sectors require periodic boundaries")
    n = basis.n_sites
    if not 0 <= int(k) < n:
        raise UnsupportedSymmetryError(f"momentum index {k} outside [0, {n})")
    if p is not None and int(p) not in (1, -1):
        raise UnsupportedSymmetryError(f"inversion quantum number must be +1/-1/None, got {p}")
    if p is not None and (2 * int(k)) % n != 0:
        raise UnsupportedSymmetryError(
            f"inversion can only be resolved at k=0 or k=N/2, got k={k} for N={n}")
    return _build_sector_cached(n, basis.bc, int(k), None if p is None else int(p))


def _build_sector(basis: ConstrainedBasis, k: int, p) -> SymmetrySector:
    n = basis.n_sites
    states = basis.states
    dim = basis.dim

    # group images of every state: N translations, optionally composed with inversion
    images = np.empty((n if p is None else 2 * n, dim), dtype=np.int64)
    coeffs = np.empty(images.shape[0], dtype=complex)
    for r in range(n):
        images[r] = rotate_left(states, n, r)
        coeffs[r] = np.exp(-2j * np.pi * k * r / n)
    if p is not None:
        refl = reflect(states, n)
        for r in range(n):
            images[n + r] = rotate_left(refl, n, r)
            coeffs[n + r] = p * np.exp(-2j * np.pi * k * r / n)

    orbit_min = images.min(axis=0)
    is_rep = states == orbit_min
    reps = states[is_rep]
    rep_pos = np.searchsorted(states, reps)

    # raw symmetrized columns: sum over group elements of coeff * |g(rep)>
    n_group = images.shape[0]
    rows = np.empty(n_group * len(reps), dtype=np.int64)
    cols = np.empty_like(rows)
    data = np.empty(rows.shape, dtype=complex)
    for g in range(n_group):
        lo, hi = g * len(reps), (g + 1) * len(reps)
        rows[lo:hi] = np.searchsorted(states, images[g][rep_pos])
        cols[lo:hi] = np.arange(len(reps))
        data[lo:hi] = coeffs[g]
    raw = sparse.coo_matrix((data, (rows, cols)), shape=(dim, len(reps))).tocsc()
    raw.sum_duplicates()

    norms = np.sqrt(np.asarray(raw.multiply(raw.conj()).sum(axis=0)).real.ravel())
    keep = norms > 1e-9 * n_group
    raw = raw[:, keep]
    norms_kept = norms[keep]
    isometry = (raw @ sparse.diags(1.0 / norms_kept)).tocsr()

    return SymmetrySector(
        basis=basis,
        momentum_k=k,
        inversion_p=p,
        representatives=reps[keep],
        normalization=norms_kept,
        isometry=isometry,
    )
