"""Dynamical Lie algebra closure over Pauli strings.

The commutator of two Pauli strings is either zero (they commute) or, up to
a scalar, the single string with XOR-ed masks.  The Lie closure of a set of
strings is therefore again a set of strings and its dimension is exact
integer arithmetic: no numerical rank decisions are involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .models import Model, ModelSpec, build_hamiltonian
from .pauli import CapacityError, PauliString, PauliSum

CLOSURE_QUBIT_LIMIT = 8


@dataclass(frozen=True)
class DlaReport:
    generators: int
    closure_dimension: int
    iterations: int
    saturated: bool
    predicted_dimension: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "generators": self.generators,
                "closure_dimension": self.closure_dimension,
                "iterations": self.iterations,
                "saturated": self.saturated,
                "predicted_dimension": self.predicted_dimension,
            }
        )


def _anticommute(a: tuple[int, int], b: tuple[int, int]) -> bool:
    s = (a[0] & b[1]).bit_count() + (a[1] & b[0]).bit_count()
    return s % 2 == 1


def lie_closure(
    generators,
    limit: int = CLOSURE_QUBIT_LIMIT,
    predicted: int | None = None,
) -> DlaReport:
    """Frontier-based Lie closure of a set of Pauli strings.

    Only newly discovered strings are commuted against the accumulated
    basis, so the work is near-linear in discovered-element pairs; the
    closure dimension is the number of distinct (x, z) masks reached.
    """
    gens = list(generators)
    if not gens:
        raise ValueError("need at least one generator")
    n = gens[0].n_qubits
    if any(g.n_qubits != n for g in gens):
        raise ValueError("generators act on different register sizes")
    if n > limit:
        raise CapacityError(
            f"{n} qubits beyond the Lie-closure guard of {limit}"
        )
    basis: set[tuple[int, int]] = set()
    frontier: list[tuple[int, int]] = []
    for g in gens:
        key = (g.x_mask, g.z_mask)
        if key != (0, 0) and key not in basis:
            basis.add(key)
            frontier.append(key)
    n_generators = len(basis)
    iterations = 0
    while frontier:
        iterations += 1
        fresh: list[tuple[int, int]] = []
        snapshot = list(basis)
        for new in frontier:
            for old in snapshot + fresh:
                if _anticommute(new, old):
                    cand = (new[0] ^ old[0], new[1] ^ old[1])
                    if cand not in basis:
                        basis.add(cand)
                        fresh.append(cand)
        frontier = fresh
    return DlaReport(
        generators=n_generators,
        closure_dimension=len(basis),
        iterations=iterations,
        saturated=True,
        predicted_dimension=predicted,
    )


def hamiltonian_generators(h: PauliSum) -> list[PauliString]:
    """Non-identity strings of a Hamiltonian as closure generators."""
    return [
        PauliString(h.n_qubits, x, z)
        for (x, z) in h.terms
        if (x, z) != (0, 0)
    ]


def predicted_dla_dimension(spec: ModelSpec) -> int:
    """Direct-sum prediction: GN closes on 2^{2Nf} copies of
    su(2^{2NfL - 2Nf}), Thirring on 2^{Nf+1} copies of
    su(2^{2NfL - Nf - 1})."""
    n = spec.n_qubits
    if spec.model is Model.GROSS_NEVEU:
        sectors = 2 ** (2 * spec.Nf)
        block = 4 ** (n - 2 * spec.Nf)
    else:
        sectors = 2 ** (spec.Nf + 1)
        block = 4 ** (n - spec.Nf - 1)
    return sectors * (block - 1)


def verify_dla(spec: ModelSpec) -> tuple[bool, DlaReport]:
    """Closure of the built Hamiltonian's strings against the prediction."""
    h = build_hamiltonian(spec)
    report = lie_closure(
        hamiltonian_generators(h), predicted=predicted_dla_dimension(spec)
    )
    return report.closure_dimension == report.predicted_dimension, report


def free_theory_dla(spec: ModelSpec) -> DlaReport:
    """Closure for the g = 0 (quadratic) theory; dimension stays polynomial
    in the qubit count."""
    if spec.g != 0:
        raise ValueError("free-theory closure requires g = 0")
    h = build_hamiltonian(spec)
    return lie_closure(hamiltonian_generators(h))
