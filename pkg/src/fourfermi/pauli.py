"""Bit-packed Pauli-string algebra over n qubits.

A Pauli string is stored as a pair of Python-int bit masks (x_mask, z_mask)
together with a phase exponent e, meaning the operator

    i^e * C(x, z),   C(x, z) = i^{|x & z|} X^x Z^z,

where C(x, z) is the canonical Hermitian tensor product of {I, X, Y, Z}
factors: a qubit with both bits set carries Y.  Sums of strings keep only
canonical (+1 phase) strings with real coefficients, which is all a
Hermitian Hamiltonian needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

PRUNE_TOL = 1e-12

_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_CHAR = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PHASES = (1, 1j, -1, -1j)


class DimensionError(ValueError):
    """Operands act on registers of different sizes."""


class CapacityError(RuntimeError):
    """Requested dense materialization beyond the configured qubit limit."""


def _check_same_size(a: "PauliString", b: "PauliString") -> None:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(
            f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}"
        )


@dataclass(frozen=True)
class PauliString:
    """Single n-qubit Pauli string with a tracked phase in {1, i, -1, -i}."""

    n_qubits: int
    x_mask: int
    z_mask: int
    phase_exp: int = 0  # exponent of i, mod 4

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        mask = (1 << self.n_qubits) - 1
        if self.x_mask & ~mask or self.z_mask & ~mask:
            raise ValueError("mask has bits outside the register")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    @classmethod
    def from_label(cls, label: str, phase_exp: int = 0) -> "PauliString":
        """Build from a string over {I, X, Y, Z}; qubit 0 is leftmost."""
        x = z = 0
        for q, ch in enumerate(label):
            try:
                xb, zb = _CHAR_TO_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli character {ch!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z, phase_exp)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @property
    def phase(self) -> complex:
        return PHASES[self.phase_exp]

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    def label(self) -> str:
        """Character form, qubit 0 leftmost, phase omitted."""
        return "".join(
            _BITS_TO_CHAR[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]
            for q in range(self.n_qubits)
        )

    def canonical(self) -> "PauliString":
        """Same string with phase reset to +1."""
        if self.phase_exp == 0:
            return self
        return PauliString(self.n_qubits, self.x_mask, self.z_mask)

    def key(self) -> tuple[int, int]:
        return (self.x_mask, self.z_mask)

    def to_dense(self) -> np.ndarray:
        """Dense matrix in the computational basis (bit q of the index is
        qubit q; qubit 0 is the least significant bit)."""
        if self.n_qubits > 14:
            raise CapacityError("dense Pauli limited to 14 qubits")
        out = np.array([[self.phase]], dtype=complex)
        for q in range(self.n_qubits - 1, -1, -1):
            ch = _BITS_TO_CHAR[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]
            out = np.kron(out, _PAULI_MATS[ch])
        return out

    def __repr__(self):
        pre = {0: "", 1: "i*", 2: "-", 3: "-i*"}[self.phase_exp]
        return f"PauliString({pre}{self.label()})"


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Product p*q with symplectic phase bookkeeping."""
    _check_same_size(p, q)
    x = p.x_mask ^ q.x_mask
    z = p.z_mask ^ q.z_mask
    e = (
        p.phase_exp
        + q.phase_exp
        + (p.x_mask & p.z_mask).bit_count()
        + (q.x_mask & q.z_mask).bit_count()
        + 2 * (p.z_mask & q.x_mask).bit_count()
        - (x & z).bit_count()
    )
    return PauliString(p.n_qubits, x, z, e % 4)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic form <p.x, q.z> + <p.z, q.x> vanishes mod 2."""
    _check_same_size(p, q)
    sym = (p.x_mask & q.z_mask).bit_count() + (p.z_mask & q.x_mask).bit_count()
    return sym % 2 == 0


@dataclass
class PauliSum:
    """Real-weighted sum of canonical Pauli strings.

    Coefficients are real; any phase produced during construction is folded
    into the sign.  Duplicate strings merge and entries below ``tol`` in
    absolute value are pruned.
    """

    n_qubits: int
    terms: dict[tuple[int, int], float] = field(default_factory=dict)
    tol: float = PRUNE_TOL

    @classmethod
    def from_terms(
        cls,
        n_qubits: int,
        entries: Iterable[tuple[PauliString, float]],
        tol: float = PRUNE_TOL,
    ) -> "PauliSum":
        acc: dict[tuple[int, int], float] = {}
        for p, c in entries:
            if p.n_qubits != n_qubits:
                raise DimensionError("term size mismatch")
            w = c * p.phase
            if abs(w.imag) > 1e-9 * max(1.0, abs(w.real)):
                raise ValueError(
                    f"non-real weight {w} for {p.label()}; sum not Hermitian"
                )
            k = p.key()
            acc[k] = acc.get(k, 0.0) + w.real
        s = cls(n_qubits, acc, tol)
        s.prune()
        return s

    def prune(self) -> None:
        dead = [k for k, c in self.terms.items() if abs(c) <= self.tol]
        for k in dead:
            del self.terms[k]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[PauliString, float]]:
        for (x, z), c in self.terms.items():
            yield PauliString(self.n_qubits, x, z), c

    def strings(self) -> list[PauliString]:
        return [PauliString(self.n_qubits, x, z) for (x, z) in self.terms]

    def coefficient(self, p: PauliString) -> float:
        return self.terms.get(p.key(), 0.0)

    @property
    def identity_coefficient(self) -> float:
        return self.terms.get((0, 0), 0.0)

    def without_identity(self) -> "PauliSum":
        rest = {k: c for k, c in self.terms.items() if k != (0, 0)}
        return PauliSum(self.n_qubits, rest, self.tol)

    def max_weight(self) -> int:
        return max(
            ((x | z).bit_count() for (x, z) in self.terms), default=0
        )

    def one_norm(self, include_identity: bool = True) -> float:
        """Sum of |coefficients| (the LCU rescaling factor when the identity
        is excluded)."""
        return math.fsum(
            abs(c)
            for k, c in self.terms.items()
            if include_identity or k != (0, 0)
        )

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(
            self.n_qubits,
            {k: factor * c for k, c in self.terms.items()},
            self.tol,
        )

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise DimensionError("sum size mismatch")
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc.get(k, 0.0) + c
        s = PauliSum(self.n_qubits, acc, min(self.tol, other.tol))
        s.prune()
        return s

    def to_dense(self, max_dense_qubits: int = 14) -> np.ndarray:
        """Dense Hermitian matrix; guarded by ``max_dense_qubits``."""
        if self.n_qubits > max_dense_qubits:
            raise CapacityError(
                f"dense matrix for {self.n_qubits} qubits exceeds the "
                f"{max_dense_qubits}-qubit guard"
            )
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for p, c in self:
            out += c * p.to_dense()
        return out

    # -- textual format: one term per line, "<coeff> <IXYZ string>" --

    def to_text(self) -> str:
        lines = []
        for (x, z), c in sorted(self.terms.items()):
            label = PauliString(self.n_qubits, x, z).label()
            lines.append(f"{c!r} {label}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        entries = []
        n = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            coeff_s, label = line.split()
            if n is None:
                n = len(label)
            elif len(label) != n:
                raise ValueError("inconsistent string lengths in Pauli text")
            entries.append((PauliString.from_label(label), float(coeff_s)))
        if n is None:
            raise ValueError("empty Pauli text")
        return cls.from_terms(n, entries)
