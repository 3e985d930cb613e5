import numpy as np
import pytest


def brute_force_states(n_sites, pbc):
    """Filter all 2^N configurations; the independent basis oracle."""
    out = []
    for s in range(1 << n_sites):
        ok = True
        for j in range(n_sites - 1):
            if (s >> j) & 1 and (s >> (j + 1)) & 1:
                ok = False
                break
        if ok and pbc and n_sites >= 1:
            if (s & 1) and (s >> (n_sites - 1)) & 1:
                ok = False
            if n_sites == 1 and s == 1:
                ok = False
        if ok:
            out.append(s)
    return out


def brute_force_hamiltonian(n_sites, mu, pbc):
    """Dense chain Hamiltonian built from string manipulations only."""
    states = brute_force_states(n_sites, pbc)
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    h = np.zeros((dim, dim))
    for s in states:
        bits = [(s >> j) & 1 for j in range(n_sites)]
        h[index[s], index[s]] = mu * sum(bits)
        for j in range(n_sites):
            if pbc:
                left, right = bits[(j - 1) % n_sites], bits[(j + 1) % n_sites]
                if n_sites == 1:
                    continue
                allowed = (left == 0) and (right == 0)
            else:
                allowed = ((j == 0 or bits[j - 1] == 0)
                           and (j == n_sites - 1 or bits[j + 1] == 0))
            if allowed:
                flipped = s ^ (1 << j)
                h[index[flipped], index[s]] += 1.0
    return np.array(states), h


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_state(rng, dim):
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec / np.linalg.norm(vec)
