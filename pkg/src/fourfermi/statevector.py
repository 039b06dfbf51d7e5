"""Matrix-free statevector kernels.

Basis convention: amplitude index j encodes the computational basis state
with qubit q given by bit q of j (qubit 0 = least significant bit).  A
canonical Pauli string C(x, z) = i^{|x & z|} X^x Z^z acts as

    (C psi)[j] = i^{|x & z|} * (-1)^{parity((j ^ x) & z)} * psi[j ^ x],

so every string application is one gather plus a sign mask.  These kernels
accept either a single vector or a (dim, m) matrix of stacked states and are
the hot path for the variational runs, so they stay allocation-lean.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .pauli import PauliString, PauliSum

NORM_TOL = 1e-10


def _sign_vector(n_qubits: int, x_mask: int, z_mask: int) -> np.ndarray:
    """(-1)^{parity((j ^ x) & z)} over all indices j, as float 1/-1."""
    dim = 1 << n_qubits
    idx = np.arange(dim, dtype=np.uint64)
    par = np.bitwise_count((idx ^ np.uint64(x_mask)) & np.uint64(z_mask))
    return 1.0 - 2.0 * (par & np.uint64(1)).astype(np.float64)


def apply_pauli(p: PauliString, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Apply one Pauli string (including its phase) to a state or a stack
    of states laid out as rows of axis 0."""
    n = p.n_qubits
    dim = 1 << n
    if psi.shape[0] != dim:
        raise ValueError("state dimension mismatch")
    src = psi[_xor_index(n, p.x_mask)] if p.x_mask else psi
    sign = _sign_vector(n, p.x_mask, p.z_mask)
    scale = p.phase * (1j ** ((p.x_mask & p.z_mask).bit_count() % 4))
    if psi.ndim == 2:
        sign = sign[:, None]
    if out is None:
        return scale * sign * src
    np.multiply(sign, src, out=out)
    out *= scale
    return out


def _xor_index(n_qubits: int, x_mask: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits, dtype=np.uint64)
    dtype = np.uint32 if n_qubits < 32 else np.intp
    return (idx ^ np.uint64(x_mask)).astype(dtype)


class PauliSumOperator:
    """PauliSum prepared for fast repeated application.

    Diagonal (Z-only) terms are folded into a single real diagonal; the
    remaining terms are grouped by x_mask so each group costs one gather.
    """

    def __init__(self, h: PauliSum, dtype=np.complex128):
        self.n_qubits = h.n_qubits
        self.dim = 1 << h.n_qubits
        self.dtype = np.dtype(dtype)
        rdtype = np.float32 if self.dtype == np.complex64 else np.float64
        diag = np.zeros(self.dim)
        groups: dict[int, list[tuple[int, complex]]] = {}
        for (x, z), c in h.terms.items():
            if x == 0:
                diag += c * _sign_vector(h.n_qubits, 0, z)
            else:
                scale = c * (1j ** ((x & z).bit_count() % 4))
                groups.setdefault(x, []).append((z, scale))
        self.diag = diag.astype(rdtype)
        self._groups: list[tuple[np.ndarray, np.ndarray]] = []
        for x, entries in groups.items():
            vec = np.zeros(self.dim, dtype=complex)
            for z, scale in entries:
                vec += scale * _sign_vector(h.n_qubits, x, z)
            self._groups.append(
                (_xor_index(h.n_qubits, x), vec.astype(self.dtype))
            )
        self._scratch: np.ndarray | None = None

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if psi.ndim == 2:
            out = self.diag[:, None] * psi
            for perm, vec in self._groups:
                out += vec[:, None] * psi[perm]
            return out
        out = np.multiply(self.diag, psi)
        if self._groups:
            if self._scratch is None or self._scratch.dtype != psi.dtype:
                self._scratch = np.empty(self.dim, dtype=psi.dtype)
            for perm, vec in self._groups:
                np.take(psi, perm, out=self._scratch)
                self._scratch *= vec
                out += self._scratch
        return out

    def __matmul__(self, psi: np.ndarray) -> np.ndarray:
        return self.apply(psi)

    def expectation(self, psi: np.ndarray) -> float:
        val = np.vdot(psi, self.apply(psi))
        return float(val.real)


def apply_pauli_sum(h: PauliSum, psi: np.ndarray) -> np.ndarray:
    return PauliSumOperator(h).apply(psi)


def apply_pauli_rotation(
    p: PauliString, theta: float, psi: np.ndarray
) -> np.ndarray:
    """exp(-i * theta * P) applied to a state or stack of states."""
    if theta == 0.0:
        return psi.copy()
    return np.cos(theta) * psi - 1j * np.sin(theta) * apply_pauli(p, psi)


def expectation(h: PauliSum, psi: np.ndarray) -> float:
    """<psi|H|psi> for Hermitian H; raises if the imaginary residue is
    beyond tolerance."""
    if psi.shape[0] != (1 << h.n_qubits):
        raise ValueError("state dimension mismatch")
    val = np.vdot(psi, apply_pauli_sum(h, psi))
    if abs(val.imag) > NORM_TOL * max(1.0, abs(val.real)):
        raise ValueError(f"non-real expectation {val}; operator not Hermitian?")
    return float(val.real)


def normalize(psi: np.ndarray) -> np.ndarray:
    return psi / np.linalg.norm(psi)


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def neel_index(n_qubits: int) -> int:
    """Index of |01>^{n/2}: odd qubits occupied."""
    if n_qubits % 2:
        raise ValueError("Neel pattern needs an even qubit count")
    idx = 0
    for q in range(1, n_qubits, 2):
        idx |= 1 << q
    return idx


def neel_state(n_qubits: int) -> np.ndarray:
    return basis_state(n_qubits, neel_index(n_qubits))


@dataclass
class StateVector:
    """Thin wrapper pairing amplitudes with their register size."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude length != 2**n_qubits")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.n_qubits, normalize(self.amplitudes))


# Binary import/export: 8-byte little-endian header with n_qubits, then
# interleaved (re, im) little-endian doubles.

def save_statevector(path, state: StateVector) -> None:
    inter = np.empty(2 * state.amplitudes.size)
    inter[0::2] = state.amplitudes.real
    inter[1::2] = state.amplitudes.imag
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", state.n_qubits))
        fh.write(inter.astype("<f8").tobytes())


def load_statevector(path) -> StateVector:
    with open(path, "rb") as fh:
        (n_qubits,) = struct.unpack("<Q", fh.read(8))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 << n_qubits:
        raise ValueError("statevector payload length mismatch")
    amps = raw[0::2] + 1j * raw[1::2]
    return StateVector(int(n_qubits), amps)
