import numpy as np
import pytest

from scarsim.basis import (BoundaryCondition, build_sector, dimension,
                           enumerate_basis, reflect, rotate_left)
from scarsim.errors import BasisSizeError, UnsupportedSymmetryError

from conftest import brute_force_states


@pytest.mark.parametrize("n", range(1, 15))
@pytest.mark.parametrize("bc", ["pbc", "obc"])
def test_enumeration_matches_brute_force(n, bc):
    basis = enumerate_basis(n, bc)
    expected = brute_force_states(n, pbc=(bc == "pbc"))
    assert basis.states.tolist() == expected


def test_documented_dimensions():
    assert enumerate_basis(4, "obc").dim == 8
    assert enumerate_basis(4, "pbc").dim == 7
    assert enumerate_basis(1, "obc").states.tolist() == [0, 1]
    assert dimension(6, "pbc") == 18
    assert dimension(3, "obc") == 5
    assert dimension(2, "pbc") == 3


@pytest.mark.parametrize("n", range(1, 21))
@pytest.mark.parametrize("bc", ["pbc", "obc"])
def test_dimension_recurrence_matches_enumeration(n, bc):
    assert dimension(n, bc) == enumerate_basis(n, bc).dim


def test_states_sorted_and_index_map_inverse():
    basis = enumerate_basis(12, "pbc")
    assert np.all(np.diff(basis.states) > 0)
    idx = basis.index_of(basis.states)
    assert np.array_equal(idx, np.arange(basis.dim))
    with pytest.raises(KeyError):
        basis.index_of(3)  # 11 in binary: blockade violating


def test_size_limits():
    with pytest.raises(BasisSizeError):
        enumerate_basis(0, "pbc")
    with pytest.raises(BasisSizeError):
        enumerate_basis(33, "obc")
    with pytest.raises(BasisSizeError):
        dimension(40, "pbc")


def test_bit_helpers():
    states = np.array([0b0101], dtype=np.int64)
    assert rotate_left(states, 4, 1)[0] == 0b1010
    assert reflect(states, 4)[0] == 0b1010


@pytest.mark.parametrize("n", [4, 6, 8, 10, 12, 14])
def test_momentum_sector_dimensions_sum(n):
    basis = enumerate_basis(n, "pbc")
    total = sum(build_sector(basis, k).dim for k in range(n))
    assert total == basis.dim


@pytest.mark.parametrize("n", [4, 6, 8, 10, 12])
def test_inversion_split_and_orbit_count(n):
    basis = enumerate_basis(n, "pbc")
    k0 = build_sector(basis, 0)
    plus = build_sector(basis, 0, +1)
    minus = build_sector(basis, 0, -1)
    assert plus.dim + minus.dim == k0.dim
    # zero-momentum dimension equals the number of translation orbits
    orbits = set()
    for s in basis.states:
        orbit = min(int(rotate_left(np.array([s]), n, r)[0]) for r in range(n))
        orbits.add(orbit)
    assert k0.dim == len(orbits)


def test_sector_isometry_orthonormal():
    basis = enumerate_basis(10, "pbc")
    for k, p in [(0, None), (0, +1), (1, None), (5, +1), (3, None)]:
        sec = build_sector(basis, k, p)
        gram = (sec.isometry.conj().T @ sec.isometry).toarray()
        assert np.allclose(gram, np.eye(sec.dim), atol=1e-12)
        assert np.all(sec.normalization > 0)


def test_neel_superposition_lives_in_k0_even_sector():
    from scarsim.operators import neel_superposition

    basis = enumerate_basis(4, "pbc")
    sec = build_sector(basis, 0, +1)
    zplus = neel_superposition(basis)
    back = sec.expand(sec.compress(zplus))
    assert np.linalg.norm(back - zplus) < 1e-12


def test_expand_compress_roundtrip(rng):
    basis = enumerate_basis(10, "pbc")
    sec = build_sector(basis, 2)
    vec = rng.normal(size=sec.dim) + 1j * rng.normal(size=sec.dim)
    vec /= np.linalg.norm(vec)
    full = sec.expand(vec)
    assert abs(np.linalg.norm(full) - 1.0) < 1e-12
    assert np.linalg.norm(sec.compress(full) - vec) < 1e-12


def test_sector_errors():
    with pytest.raises(UnsupportedSymmetryError):
        build_sector(enumerate_basis(6, "obc"), 0)
    basis = enumerate_basis(6, "pbc")
    with pytest.raises(UnsupportedSymmetryError):
        build_sector(basis, 6)
    with pytest.raises(UnsupportedSymmetryError):
        build_sector(basis, 1, +1)  # inversion incompatible at generic momentum
    with pytest.raises(UnsupportedSymmetryError):
        build_sector(basis, 0, 2)


def test_boundary_condition_coercion():
    assert BoundaryCondition.coerce("periodic") is BoundaryCondition.PERIODIC
    assert BoundaryCondition.coerce("OBC") is BoundaryCondition.OPEN
    with pytest.raises(ValueError):
        BoundaryCondition.coerce("twisted")
