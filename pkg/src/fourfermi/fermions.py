"""Flavored lattice fermion modes and the Jordan-Wigner transformation.

Mode ordering is site-major, then flavor, then spinor component, so the
qubit index is q = 2*Nf*site + 2*flavor + component.  Annihilation maps to
c_q = (X_q + i Y_q)/2 with a Z string on every qubit below q; creation is
the adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .pauli import PauliString, PauliSum

HERMITICITY_TOL = 1e-9


@dataclass(frozen=True)
class ModeIndex:
    site: int
    flavor: int
    component: int  # 0 = upper spinor component, 1 = lower

    def __post_init__(self):
        if self.component not in (0, 1):
            raise IndexError("component must be 0 or 1")
        if self.site < 0 or self.flavor < 0:
            raise IndexError("negative site or flavor")


def qubit_index(m: ModeIndex, n_flavors: int) -> int:
    if not (0 <= m.flavor < n_flavors):
        raise IndexError(f"flavor {m.flavor} outside [0, {n_flavors})")
    return 2 * n_flavors * m.site + 2 * m.flavor + m.component


@dataclass(frozen=True)
class FermionTerm:
    """coefficient * product of ladder operators, applied right-to-left."""

    coefficient: complex
    factors: tuple[tuple[ModeIndex, bool], ...]  # (mode, dagger)

    @classmethod
    def build(
        cls, coefficient: complex, *factors: tuple[ModeIndex, bool]
    ) -> "FermionTerm":
        return cls(complex(coefficient), tuple(factors))

    def hermitian_conjugate(self) -> "FermionTerm":
        flipped = tuple(
            (mode, not dagger) for mode, dagger in reversed(self.factors)
        )
        return FermionTerm(complex(self.coefficient).conjugate(), flipped)


def _ladder_strings(
    q: int, dagger: bool, n_qubits: int
) -> list[tuple[complex, PauliString]]:
    """c_q (or c_q^dagger) as two weighted Pauli strings."""
    if not (0 <= q < n_qubits):
        raise IndexError(f"mode qubit {q} outside register of {n_qubits}")
    zstring = (1 << q) - 1  # Z on all qubits strictly below q
    x_part = PauliString(n_qubits, 1 << q, zstring)
    y_part = PauliString(n_qubits, 1 << q, zstring | (1 << q))
    sign = -0.5j if dagger else 0.5j
    return [(0.5, x_part), (sign, y_part)]


def _jw_term(
    t: FermionTerm, n_flavors: int, n_qubits: int
) -> dict[tuple[int, int], complex]:
    """Jordan-Wigner image of a single term as {(x, z): complex weight}."""
    acc: dict[tuple[int, int], complex] = {
        (0, 0): complex(t.coefficient)
    }
    # factors act right-to-left; left-multiply in left-to-right order
    for mode, dagger in t.factors:
        q = qubit_index(mode, n_flavors)
        factor = _ladder_strings(q, dagger, n_qubits)
        nxt: dict[tuple[int, int], complex] = {}
        for (x1, z1), w in acc.items():
            p1 = PauliString(n_qubits, x1, z1)
            for wf, pf in factor:
                # product p1 * pf, tracking the canonical phase
                x = x1 ^ pf.x_mask
                z = z1 ^ pf.z_mask
                e = (
                    (x1 & z1).bit_count()
                    + (pf.x_mask & pf.z_mask).bit_count()
                    + 2 * (z1 & pf.x_mask).bit_count()
                    - (x & z).bit_count()
                ) % 4
                k = (x, z)
                nxt[k] = nxt.get(k, 0.0) + w * wf * (1j**e)
        acc = nxt
    return acc


def jordan_wigner(
    terms: FermionTerm | Sequence[FermionTerm],
    n_flavors: int,
    n_qubits: int,
    tol: float = 1e-12,
) -> PauliSum:
    """Map fermionic terms to a Hermitian PauliSum.

    The input (a term or a Hermitian combination of terms) must produce real
    weights after merging; a significant imaginary residue raises.
    """
    if isinstance(terms, FermionTerm):
        terms = [terms]
    acc: dict[tuple[int, int], complex] = {}
    for t in terms:
        for k, w in _jw_term(t, n_flavors, n_qubits).items():
            acc[k] = acc.get(k, 0.0) + w
    real: dict[tuple[int, int], float] = {}
    scale = max((abs(w) for w in acc.values()), default=1.0)
    for (x, z), w in acc.items():
        if abs(w.imag) > HERMITICITY_TOL * max(1.0, scale):
            label = PauliString(n_qubits, x, z).label()
            raise ValueError(
                f"non-Hermitian Jordan-Wigner image: weight {w} on {label}"
            )
        if abs(w.real) > tol:
            real[(x, z)] = w.real
    return PauliSum(n_qubits, real, tol)


def number_operator(q: int, n_qubits: int) -> PauliSum:
    """n_q = (I - Z_q)/2."""
    return PauliSum(
        n_qubits, {(0, 0): 0.5, (0, 1 << q): -0.5}
    )


def modes(L: int, n_flavors: int) -> Iterable[ModeIndex]:
    for site in range(L):
        for flavor in range(n_flavors):
            for comp in (0, 1):
                yield ModeIndex(site, flavor, comp)
