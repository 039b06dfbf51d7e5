import numpy as np
import pytest

from fourfermi.models import Model, ModelSpec


@pytest.fixture(scope="session")
def exact_cache():
    """Session-wide cache of exact ground-state solves keyed by spec, so
    the expensive 18- and 20-qubit eigensolves run at most once."""
    from fourfermi.exact import ground_state_for

    cache = {}

    def solve(spec: ModelSpec):
        key = (spec.model.value, spec.L, spec.Nf, spec.m, spec.g)
        if key not in cache:
            cache[key] = ground_state_for(spec)
        return cache[key]

    return solve


def random_hermitian_sum(n, rng, n_terms=8):
    """Random PauliSum with coefficients in [-1, 1]."""
    from fourfermi.pauli import PauliSum, PauliString

    terms = {}
    while len(terms) < n_terms:
        x = int(rng.integers(0, 1 << n))
        z = int(rng.integers(0, 1 << n))
        if (x, z) == (0, 0):
            continue
        terms[(x, z)] = float(rng.uniform(-1, 1))
    return PauliSum(n, terms)


def random_product_state(n, rng):
    psi = np.ones(1, dtype=complex)
    for _ in range(n):
        a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        a /= np.linalg.norm(a)
        psi = np.kron(a, psi)
    return psi
