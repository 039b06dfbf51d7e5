"""Adaptive variational imaginary-time ground-state preparation.

The variational state is |psi> = prod_k exp(-i theta_k A_k) |Neel> with
Pauli-string generators A_k drawn adaptively from an all-to-all two- and
three-local pool.  Each imaginary-time step solves the regularized
McLachlan projection (M + lambda I) theta_dot = V and grows the ansatz
whenever the residual distance L^2 stays above threshold.

Performance notes.  The tangent matrix D (columns d|psi>/d(theta_mu)) is
the dominant cost, O(N^2 * 2^n) per construction; it is stored row-major in
a preallocated buffer, built with fused in-place Pauli rotations and
reduced with BLAS (HERK/GEMM).  Pool candidates are pre-ranked with an
exact-numerator score that needs only three vectors (psi, H psi, D
theta_dot); full denominators are then evaluated on a shortlist.  Between
metric refreshes the gradient V is recomputed exactly with an O(N * 2^n)
adjoint sweep while M is reused (refresh_every=1 disables the reuse).
Single-precision state storage is available for the largest runs; reported
energies and fidelities are insensitive to it at far below the quoted
tolerances.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve, get_blas_funcs

from .models import ModelSpec, build_hamiltonian
from .pauli import PauliString, PauliSum
from .statevector import PauliSumOperator, neel_state

DERIVATIVE_CHECK_TOL = 1e-10
_ROT_CHUNK_ELEMS = 1 << 22  # ~4M amplitudes per in-place rotation slab


class PoolKind(str, Enum):
    XY_YYZ = "xy_yyz"
    YY_YYZ = "yy_yyz"


@dataclass(frozen=True)
class OperatorPool:
    kind: PoolKind
    elements: tuple[PauliString, ...]

    def __len__(self):
        return len(self.elements)


def pool_size(n: int) -> int:
    return n * (n - 1) // 2 + n * (n - 1) * (n - 2) // 2


def build_pool(n: int, kind: PoolKind | str) -> OperatorPool:
    """All-to-all two-local {XY or YY} plus three-local YYZ generators."""
    kind = PoolKind(kind)
    if n < 3:
        raise ValueError("three-local pool members need at least 3 qubits")
    elems: list[PauliString] = []
    for i in range(n):
        for j in range(i + 1, n):
            yy = (1 << i) | (1 << j)
            if kind is PoolKind.XY_YYZ:
                # X on the smaller index, Y on the larger
                elems.append(PauliString(n, yy, 1 << j))
            else:
                elems.append(PauliString(n, yy, yy))
    for i in range(n):
        for j in range(i + 1, n):
            yy = (1 << i) | (1 << j)
            for k in range(n):
                if k == i or k == j:
                    continue
                elems.append(PauliString(n, yy, yy | (1 << k)))
    assert len(elems) == pool_size(n)
    return OperatorPool(kind, tuple(elems))


@dataclass
class AvqiteConfig:
    dtau: float = 0.02
    dtau_fine: float | None = None
    fine_below: float = 0.0
    l2_cut: float = 1e-2
    v_cut: float = 1e-4
    ridge: float = 1e-6
    max_ops_per_step: int = 5
    max_steps: int = 500
    energy_increase_tol: float = 1e-6
    max_halvings: int = 4
    refresh_every: int = 1
    shortlist: int = 64
    max_parameters: int | None = None

    def __post_init__(self):
        for name in ("dtau", "l2_cut", "v_cut", "ridge"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be at least 1")
        if self.dtau_fine is not None and self.dtau_fine <= 0:
            raise ValueError("dtau_fine must be positive when set")
        if self.fine_below < 0:
            raise ValueError("fine_below must be non-negative")

    def to_dict(self) -> dict:
        return {
            "dtau": self.dtau,
            "dtau_fine": self.dtau_fine,
            "fine_below": self.fine_below,
            "l2_cut": self.l2_cut,
            "v_cut": self.v_cut,
            "ridge": self.ridge,
            "max_ops_per_step": self.max_ops_per_step,
            "max_steps": self.max_steps,
            "refresh_every": self.refresh_every,
            "shortlist": self.shortlist,
        }

    @classmethod
    def from_json(cls, text: str) -> "AvqiteConfig":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# fused Pauli kernels on row-major state stacks
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _index_base(dim: int) -> np.ndarray:
    return np.arange(dim, dtype=np.uint64)


def _perm(dim: int, x_mask: int) -> np.ndarray:
    return (_index_base(dim) ^ np.uint64(x_mask)).astype(np.intp)


def _sign_column(n: int, x_mask: int, z_mask: int, rdtype) -> np.ndarray:
    """(-1)^{parity((j ^ x) & z)} over all j."""
    par = np.bitwise_count(
        (_index_base(1 << n) ^ np.uint64(x_mask)) & np.uint64(z_mask)
    )
    return (1.0 - 2.0 * (par & np.uint64(1))).astype(rdtype)


def _pauli_column(p: PauliString, cdtype, scale: complex = 1.0) -> np.ndarray:
    """scale * [phases of the canonical string] as a complex column, so
    (P psi)[j] = column[j] * psi[j ^ x]."""
    rdtype = np.float32 if cdtype == np.complex64 else np.float64
    sign = _sign_column(p.n_qubits, p.x_mask, p.z_mask, rdtype)
    full = scale * p.phase * (1j ** ((p.x_mask & p.z_mask).bit_count() % 4))
    return (sign * np.asarray(full, dtype=cdtype)).astype(cdtype, copy=False)


def _apply_pauli_vec(p: PauliString, psi: np.ndarray,
                     scale: complex = 1.0) -> np.ndarray:
    """scale * P |psi> for a single state vector."""
    out = np.take(psi, _perm(psi.size, p.x_mask))
    out *= _pauli_column(p, psi.dtype, scale)
    return out


def _rotate_rows(p: PauliString, theta: float, block: np.ndarray) -> None:
    """block <- exp(-i theta P) block, in place, rows being states."""
    if theta == 0.0 or block.size == 0:
        return
    vec = block.ndim == 1
    if vec:
        block = block.reshape(1, -1)
    dim = block.shape[1]
    perm = _perm(dim, p.x_mask)
    ph = _pauli_column(p, block.dtype, -1j * math.sin(theta))
    c = np.asarray(math.cos(theta), dtype=ph.real.dtype)
    rows = max(1, _ROT_CHUNK_ELEMS // dim)
    tmp = np.empty((min(rows, block.shape[0]), dim), dtype=block.dtype)
    for lo in range(0, block.shape[0], rows):
        part = block[lo:lo + rows]
        t = tmp[: part.shape[0]]
        np.take(part, perm, axis=1, out=t)
        t *= ph
        part *= c
        part += t


# ---------------------------------------------------------------------------
# ansatz state and tangent-space quantities
# ---------------------------------------------------------------------------


@dataclass
class AnsatzState:
    """Ordered generators with parameters plus the cached current state."""

    n_qubits: int
    generators: list[PauliString] = field(default_factory=list)
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reference: np.ndarray | None = None
    current: np.ndarray | None = None

    def __post_init__(self):
        if self.reference is None:
            self.reference = neel_state(self.n_qubits)
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.current is None:
            self.current = self.compute_state()

    @classmethod
    def initial(cls, n_qubits: int, reference: np.ndarray | None = None):
        return cls(n_qubits, [], np.zeros(0), reference)

    @property
    def n_parameters(self) -> int:
        return len(self.generators)

    @property
    def dtype(self):
        return self.reference.dtype

    def compute_state(self) -> np.ndarray:
        psi = self.reference.copy()
        for p, th in zip(self.generators, self.thetas):
            _rotate_rows(p, float(th), psi)
        return psi

    def refresh(self) -> None:
        self.current = self.compute_state()

    def with_parameters(self, thetas: np.ndarray) -> "AnsatzState":
        return AnsatzState(
            self.n_qubits, list(self.generators), np.asarray(thetas, float),
            self.reference,
        )

    def appended(self, generator: PauliString, theta: float = 0.0):
        return AnsatzState(
            self.n_qubits,
            list(self.generators) + [generator],
            np.concatenate([self.thetas, [theta]]),
            self.reference,
            None if theta != 0.0 else self.current.copy(),
        )

    def tangent_rows(self, out: np.ndarray | None = None) -> np.ndarray:
        """(n_parameters, dim) array whose row mu is d|psi>/d(theta_mu),
        built in one forward sweep: each new row is -i A_mu applied to the
        partially evolved state, and all existing rows are transported
        through subsequent rotations."""
        dim = 1 << self.n_qubits
        n_par = self.n_parameters
        rows = out[:n_par] if out is not None else np.empty(
            (n_par, dim), dtype=self.dtype
        )
        psi = self.reference.copy()
        for k, (p, th) in enumerate(zip(self.generators, self.thetas)):
            _rotate_rows(p, float(th), psi)
            _rotate_rows(p, float(th), rows[:k])
            rows[k] = _apply_pauli_vec(p, psi, scale=-1j)
        return rows

    def derivative_matrix(self) -> np.ndarray:
        """Columns d|psi>/d(theta_mu); see tangent_rows."""
        return self.tangent_rows().T

    def serialize(self) -> list[tuple[str, float]]:
        return [
            (p.label(), float(th))
            for p, th in zip(self.generators, self.thetas)
        ]


def metric_matrix(state: AnsatzState, d_matrix: np.ndarray | None = None) -> np.ndarray:
    """Quantum-geometric-tensor metric
    M = 2 Re <d_mu psi|d_nu psi> - 2 a_mu a_nu,  a_mu = Im <psi|d_mu psi>."""
    D = state.derivative_matrix() if d_matrix is None else d_matrix
    psi = state.current
    gram = D.conj().T @ D
    a = (psi.conj() @ D).imag
    m = 2.0 * gram.real - 2.0 * np.outer(a, a)
    return 0.5 * (m + m.T)


def gradient_vector(
    state: AnsatzState,
    h: PauliSum | PauliSumOperator,
    d_matrix: np.ndarray | None = None,
    h_psi: np.ndarray | None = None,
) -> np.ndarray:
    """V_mu = -2 Re <d_mu psi|H|psi> = -dE/d(theta_mu)."""
    op = h if isinstance(h, PauliSumOperator) else PauliSumOperator(h)
    D = state.derivative_matrix() if d_matrix is None else d_matrix
    if h_psi is None:
        h_psi = op.apply(state.current)
    return -2.0 * (D.conj().T @ h_psi).real


def mclachlan_distance(
    m: np.ndarray, v: np.ndarray, var_h: float, ridge: float = 1e-6
) -> float:
    """Residual distance at the optimal parameter velocity:
    L^2 = 2 Var(H) - V^T (M + ridge I)^{-1} V, clamped at zero."""
    if var_h < 0:
        if var_h < -1e-10:
            raise ValueError("negative variance")
        var_h = 0.0
    l2 = 2.0 * var_h
    if v.size:
        reg = m + ridge * np.eye(m.shape[0])
        l2 -= float(v @ cho_solve(cho_factor(reg), v))
    return max(l2, 0.0)


def _adjoint_gradient(
    state: AnsatzState, op: PauliSumOperator
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """(V, H psi, energy, Var H) in O(n_parameters * dim) via a reverse
    sweep that unwinds the circuit on both |psi> and H|psi>."""
    psi = state.current
    h_psi = op.apply(psi)
    energy = float(np.vdot(psi, h_psi).real)
    var_h = max(float(np.vdot(h_psi, h_psi).real) - energy**2, 0.0)
    v = np.empty(state.n_parameters)
    phi = psi.copy()
    lam = h_psi.astype(psi.dtype, copy=True)
    for k in range(state.n_parameters - 1, -1, -1):
        p, th = state.generators[k], float(state.thetas[k])
        a_phi = _apply_pauli_vec(p, phi)
        # V_k = -2 Re <d_k psi|H psi> = -2 Im <lambda|A_k|phi>
        v[k] = -2.0 * np.vdot(lam, a_phi).imag
        _rotate_rows(p, -th, phi)
        _rotate_rows(p, -th, lam)
    return v, h_psi, energy, var_h


# ---------------------------------------------------------------------------
# per-iteration workspace
# ---------------------------------------------------------------------------


class _TangentBuffer:
    """Reusable (capacity, dim) row store for the tangent matrix; grown
    geometrically but never beyond ``hard_cap`` rows (memory guard)."""

    def __init__(self, dim: int, dtype, hard_cap: int | None):
        self.dim = dim
        self.dtype = np.dtype(dtype)
        self.hard_cap = hard_cap
        self.buf = np.empty((0, dim), dtype=dtype)

    def ensure(self, n_rows: int) -> bool:
        if self.hard_cap is not None and n_rows > self.hard_cap:
            return False
        if n_rows > self.buf.shape[0]:
            # with a hard cap, allocate the full capacity once so the buffer
            # never has to be copied into a larger block mid-run
            if self.hard_cap is not None:
                cap = self.hard_cap
            else:
                cap = max(n_rows, 16, int(1.5 * self.buf.shape[0]))
            new = np.empty((cap, self.dim), dtype=self.dtype)
            new[: self.buf.shape[0]] = self.buf
            self.buf = new
        return True

    def rows(self, n_rows: int) -> np.ndarray:
        return self.buf[:n_rows]


@dataclass
class _Frame:
    Dr: np.ndarray  # (n_par, dim) rows = tangent vectors
    M: np.ndarray
    V: np.ndarray
    a: np.ndarray
    energy: float
    var_h: float
    h_psi: np.ndarray
    l2: float
    cho: tuple
    buf: _TangentBuffer | None = None

    @property
    def D(self) -> np.ndarray:  # column view for external consumers
        return self.Dr.T


def _regularized_cho(m: np.ndarray, ridge: float):
    return cho_factor(m + ridge * np.eye(m.shape[0]), lower=False)


def _finish_frame(Dr, psi, h_psi, energy, var_h, ridge, buf) -> _Frame:
    n_par = Dr.shape[0]
    if n_par:
        a = np.asarray((Dr @ psi.conj()).imag, dtype=float)
        herk, = get_blas_funcs(("herk",), (Dr,))
        gram = herk(1.0, Dr.T, trans=2)  # upper triangle of <D_mu|D_nu>
        gr = np.asarray(gram.real, dtype=float)
        gr = gr + gr.T - np.diag(np.diag(gr))
        m = 2.0 * gr - 2.0 * np.outer(a, a)
        v = np.asarray(-2.0 * (Dr @ h_psi.conj()).real, dtype=float)
        cho = _regularized_cho(m, ridge)
        l2 = max(2.0 * var_h - float(v @ cho_solve(cho, v)), 0.0)
    else:
        a = np.zeros(0)
        m = np.zeros((0, 0))
        v = np.zeros(0)
        cho = None
        l2 = 2.0 * var_h
    return _Frame(Dr, m, v, a, energy, var_h, h_psi, l2, cho, buf)


def _build_frame(
    state: AnsatzState,
    op: PauliSumOperator,
    ridge: float,
    buf: _TangentBuffer | None = None,
) -> _Frame:
    n_par = state.n_parameters
    if buf is not None:
        if not buf.ensure(n_par):
            raise MemoryError("tangent buffer capacity exceeded")
        Dr = state.tangent_rows(out=buf.buf)
    else:
        Dr = state.tangent_rows()
    psi = state.current
    h_psi = op.apply(psi)
    energy = float(np.vdot(psi, h_psi).real)
    var_h = max(float(np.vdot(h_psi, h_psi).real) - energy**2, 0.0)
    return _finish_frame(Dr, psi, h_psi, energy, var_h, ridge, buf)


def _extend_frame(
    frame: _Frame, state: AnsatzState, generator: PauliString, ridge: float
) -> _Frame:
    """Frame after appending ``generator`` at theta = 0 (state unchanged)."""
    psi = state.current
    xi = _apply_pauli_vec(generator, psi, scale=-1j)
    n_old = frame.M.shape[0]
    if frame.buf is not None:
        if not frame.buf.ensure(n_old + 1):
            raise MemoryError("tangent buffer capacity exceeded")
        frame.buf.buf[n_old] = xi
        Dr = frame.buf.rows(n_old + 1)
    else:
        Dr = np.concatenate([frame.Dr, xi[None, :]], axis=0)
    cross_re = np.asarray((frame.Dr @ xi.conj()).real, dtype=float)
    a_new = float(np.vdot(psi, xi).imag)
    m = np.empty((n_old + 1, n_old + 1))
    m[:n_old, :n_old] = frame.M
    cross = 2.0 * cross_re - 2.0 * frame.a * a_new
    m[:n_old, n_old] = cross
    m[n_old, :n_old] = cross
    m[n_old, n_old] = 2.0 - 2.0 * a_new**2
    v = np.append(frame.V, -2.0 * float(np.vdot(xi, frame.h_psi).real))
    a = np.append(frame.a, a_new)
    cho = _regularized_cho(m, ridge)
    l2 = max(2.0 * frame.var_h - float(v @ cho_solve(cho, v)), 0.0)
    return _Frame(Dr, m, v, a, frame.energy, frame.var_h, frame.h_psi,
                  l2, cho, frame.buf)


# ---------------------------------------------------------------------------
# pool candidate scoring
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _bit_parity_columns(n: int) -> np.ndarray:
    """(n, dim) float32 rows of (-1)^{bit_b(j)}."""
    idx = _index_base(1 << n)
    cols = np.empty((n, 1 << n), dtype=np.float32)
    for b in range(n):
        cols[b] = 1.0 - 2.0 * ((idx >> np.uint64(b)) & np.uint64(1)).astype(
            np.float32
        )
    return cols


def _bit_balances(t: np.ndarray) -> tuple[complex, np.ndarray]:
    """(sum t_j, [sum t_j (-1)^{bit_b(j)} for each bit b]) in O(dim)."""
    n = int(t.size).bit_length() - 1
    bal = np.empty(n, dtype=complex)
    cur = t
    for b in range(n):
        pairs = cur.reshape(-1, 2)
        bal[b] = (pairs[:, 0] - pairs[:, 1]).sum()
        cur = pairs[:, 0] + pairs[:, 1]
    return complex(cur[0]), bal


def _pool_linear_terms(
    frame: _Frame, state: AnsatzState, pool: OperatorPool, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(num, a_new, m_diag) for every pool element, where
    num = V_new - m_new . u is the exact numerator of the bordered score.

    All z-variants sharing an x-mask (both the two-local string and every
    YYZ completion) are reduced from one gather of |psi> via bit-balance
    folds, so the pass costs O(n^2 * dim) for the O(n^3) pool.
    """
    psi = state.current
    n = state.n_qubits
    dim = psi.size
    n_par = frame.M.shape[0]
    n2 = n * (n - 1) // 2
    w = (frame.Dr.T @ u.astype(frame.Dr.real.dtype)) if n_par else None
    au = float(frame.a @ u) if n_par else 0.0
    hc = frame.h_psi.conj()
    pc = psi.conj()
    wc = w.conj() if w is not None else None
    bits = _bit_parity_columns(n)

    num = np.empty(len(pool.elements))
    a_new = np.empty(len(pool.elements))
    two_is_xy = pool.kind is PoolKind.XY_YYZ
    pair_pos = 0
    for i in range(n):
        bi = bits[i]
        for j in range(i + 1, n):
            x = (1 << i) | (1 << j)
            g = np.take(psi, _perm(dim, x))
            chi = bi * bits[j]  # (-1)^{parity(j & x)}
            g *= chi

            th = g * hc
            tot_h, bal_h = _bit_balances(th)
            tp = g * pc
            tot_p, bal_p = _bit_balances(tp)
            if wc is not None:
                tw = g * wc
                tot_w, bal_w = _bit_balances(tw)

            def _accumulate(slot: int, dot_scale: complex,
                            h_dot: complex, p_dot: complex, w_dot: complex):
                # dots are <partner|A psi>; see gradient/metric identities
                dh = dot_scale * h_dot
                dp = dot_scale * p_dot
                a_c = -dp.real  # -<A>
                v_c = -2.0 * dh.imag
                mu = 0.0
                if wc is not None:
                    mu = 2.0 * (dot_scale * w_dot).imag - 2.0 * a_c * au
                num[slot] = v_c - mu
                a_new[slot] = a_c

            # two-local member of this pair
            if two_is_xy:
                # z = {j}: i^{|x&z|} = i, parity(x & z) odd, and the j-bit
                # sign equals chi times the bit-i balance
                _accumulate(pair_pos, -1j, bal_h[i], bal_p[i],
                            bal_w[i] if wc is not None else 0.0)
            else:
                # z = x: i^{|x&z|} = -1; parity(x & z) = 0 (even)
                _accumulate(pair_pos, -1.0, tot_h, tot_p,
                            tot_w if wc is not None else 0.0)
            # three-local YYZ completions, k ascending (pool ordering)
            base = n2 + pair_pos * (n - 2)
            off = 0
            for k in range(n):
                if k == i or k == j:
                    continue
                # z = x | {k}: i^{|x&z|} = -1, parity(x & z) even
                _accumulate(base + off, -1.0, bal_h[k], bal_p[k],
                            bal_w[k] if wc is not None else 0.0)
                off += 1
            pair_pos += 1
    m_diag = 2.0 - 2.0 * a_new**2
    return num, a_new, m_diag


def _score_candidates(
    frame: _Frame,
    state: AnsatzState,
    pool: OperatorPool,
    ridge: float,
    shortlist: int = 64,
) -> np.ndarray:
    """Decrease of L^2 from appending each pool element at theta = 0.

    Uses the bordered-matrix identity: with S = (M + ridge)^{-1}, u = S V,
    appending a row (m_A, v_A) increases V^T S V by
    (v_A - m_A.u)^2 / (m_AA + ridge - m_A.S.m_A).

    Numerators are exact for the whole pool; the (expensive) quadratic
    denominator correction is evaluated for the ``shortlist`` best
    candidates ranked by the guaranteed lower bound num^2/(m_AA + ridge).
    Entries outside the shortlist keep their lower bound, so the argmax is
    always at least as good as the best shortlisted candidate and exact
    whenever the pool fits inside the shortlist.
    """
    n_par = frame.M.shape[0]
    u = cho_solve(frame.cho, frame.V) if n_par else np.zeros(0)
    num, a_new, m_diag = _pool_linear_terms(frame, state, pool, u)
    scores = num**2 / (m_diag + ridge)
    if n_par == 0:
        return scores
    top = np.argsort(scores)[::-1][: min(shortlist, scores.size)]
    psi = state.current
    X = np.empty((top.size, psi.size), dtype=psi.dtype)
    for r, idx in enumerate(top):
        X[r] = _apply_pauli_vec(pool.elements[int(idx)], psi)
    # <A psi|D_nu> for the shortlist, then the Schur-complement denominator
    gemm, = get_blas_funcs(("gemm",), (X,))
    P = gemm(1.0, X.T, frame.Dr.T, trans_a=2)
    m_rows = -2.0 * np.asarray(P.imag, float) - 2.0 * np.outer(
        a_new[top], frame.a
    )
    wq = cho_solve(frame.cho, m_rows.T)
    quad = np.einsum("ij,ji->i", m_rows, wq)
    denom = m_diag[top] + ridge - quad
    ok = denom > 1e-14
    exact = np.zeros(top.size)
    exact[ok] = num[top][ok] ** 2 / denom[ok]
    scores[top] = exact
    return scores


# ---------------------------------------------------------------------------
# public stepping API
# ---------------------------------------------------------------------------


def _euler_update(
    state: AnsatzState,
    op: PauliSumOperator,
    cho,
    v: np.ndarray,
    energy: float,
    cfg: AvqiteConfig,
    dtau: float | None = None,
) -> tuple[AnsatzState, dict]:
    theta_dot = cho_solve(cho, v)
    scale = 1.0
    if dtau is None:
        dtau = cfg.dtau
    info = {"halvings": 0, "stalled": False}
    for attempt in range(cfg.max_halvings + 1):
        trial = state.with_parameters(state.thetas + scale * dtau * theta_dot)
        e_new = float(np.vdot(trial.current, op.apply(trial.current)).real)
        if e_new <= energy + cfg.energy_increase_tol:
            info["energy"] = e_new
            return trial, info
        scale *= 0.5
        info["halvings"] = attempt + 1
    info["stalled"] = True
    info["energy"] = e_new
    return trial, info


def step(
    state: AnsatzState,
    h: PauliSum | PauliSumOperator,
    cfg: AvqiteConfig,
    frame: _Frame | None = None,
) -> tuple[AnsatzState, dict]:
    """One Euler update theta += dtau (M + ridge)^{-1} V with step halving
    on energy increase."""
    op = h if isinstance(h, PauliSumOperator) else PauliSumOperator(h)
    if frame is None:
        frame = _build_frame(state, op, cfg.ridge)
    if state.n_parameters == 0:
        return state, {"halvings": 0, "stalled": False, "energy": frame.energy}
    return _euler_update(state, op, frame.cho, frame.V, frame.energy, cfg)


def adapt(
    state: AnsatzState,
    h: PauliSum | PauliSumOperator,
    pool: OperatorPool,
    cfg: AvqiteConfig,
    frame: _Frame | None = None,
) -> tuple[AnsatzState, _Frame, int]:
    """Greedily append pool generators (at theta = 0) while L^2 exceeds the
    threshold, up to cfg.max_ops_per_step additions."""
    op = h if isinstance(h, PauliSumOperator) else PauliSumOperator(h)
    if frame is None:
        frame = _build_frame(state, op, cfg.ridge)
    added = 0
    while frame.l2 > cfg.l2_cut and added < cfg.max_ops_per_step:
        scores = _score_candidates(frame, state, pool, cfg.ridge,
                                   cfg.shortlist)
        best = int(np.argmax(scores))
        if scores[best] <= 1e-14:
            break
        try:
            new_frame = _extend_frame(frame, state, pool.elements[best],
                                      cfg.ridge)
        except MemoryError:
            break
        state = state.appended(pool.elements[best])
        frame = new_frame
        added += 1
    return state, frame, added


@dataclass
class TraceRecord:
    step: int
    tau: float
    energy: float
    l2: float
    n_ops: int
    max_abs_v: float

    HEADER = ("step", "tau", "energy", "L2", "n_ops", "max_abs_V")

    def row(self):
        return (self.step, f"{self.tau:.6f}", repr(self.energy),
                repr(self.l2), self.n_ops, repr(self.max_abs_v))


@dataclass
class AvqiteResult:
    energy: float
    ansatz: AnsatzState
    trace: list[TraceRecord]
    converged: bool
    two_local_count: int
    three_local_count: int
    fidelity: float | None = None
    exact_energy: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def relative_energy_error(self) -> float | None:
        if self.exact_energy is None:
            return None
        return abs(self.energy - self.exact_energy) / abs(self.exact_energy)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TraceRecord.HEADER)
            for rec in self.trace:
                writer.writerow(rec.row())

    def summary_dict(self) -> dict:
        return {
            "energy": self.energy,
            "exact_energy": self.exact_energy,
            "relative_energy_error": self.relative_energy_error,
            "fidelity": self.fidelity,
            "converged": self.converged,
            "n_parameters": self.ansatz.n_parameters,
            "two_local_count": self.two_local_count,
            "three_local_count": self.three_local_count,
            "steps": len(self.trace),
            "warnings": self.warnings,
        }


def run_hamiltonian(
    h: PauliSum,
    cfg: AvqiteConfig,
    pool_kind: PoolKind | str = PoolKind.YY_YYZ,
    reference: np.ndarray | None = None,
    exact_state: np.ndarray | None = None,
    exact_energy: float | None = None,
    progress: bool = False,
    precision: str = "double",
) -> AvqiteResult:
    """Full adaptive flow from the Neel (or given) reference state."""
    if precision not in ("double", "single"):
        raise ValueError("precision must be 'double' or 'single'")
    dtype = np.complex128 if precision == "double" else np.complex64
    n = h.n_qubits
    op = PauliSumOperator(h, dtype=dtype)
    pool = build_pool(n, pool_kind)
    if reference is None:
        reference = neel_state(n)
    state = AnsatzState.initial(n, reference.astype(dtype))
    buf = _TangentBuffer(1 << n, dtype, cfg.max_parameters)
    trace: list[TraceRecord] = []
    warnings: list[str] = []
    converged = False
    frame: _Frame | None = None
    since_refresh = 0
    pool_stalled = False
    tau = 0.0
    fine_phase = False
    t0 = time.monotonic()
    for it in range(cfg.max_steps):
        if frame is not None and since_refresh < cfg.refresh_every:
            # cheap step: fresh gradient against the retained metric
            v, h_psi, energy, var_h = _adjoint_gradient(state, op)
            l2 = max(2.0 * var_h - float(v @ cho_solve(frame.cho, v)), 0.0) \
                if v.size else 2.0 * var_h
            if l2 > cfg.l2_cut and not pool_stalled:
                frame = None  # force an exact rebuild so adaptation can run
        if frame is None or since_refresh >= cfg.refresh_every:
            frame = _build_frame(state, op, cfg.ridge, buf)
            since_refresh = 0
            if frame.l2 > cfg.l2_cut:
                state, frame, added = adapt(state, op, pool, cfg, frame)
                pool_stalled = added == 0
            v, energy, l2 = frame.V, frame.energy, frame.l2
        max_v = float(np.max(np.abs(v))) if v.size else 0.0
        if cfg.dtau_fine is not None and max_v < cfg.fine_below:
            fine_phase = True  # latched: the flow has entered the fine regime
        dtau = cfg.dtau_fine if fine_phase else cfg.dtau
        trace.append(
            TraceRecord(it, tau, energy, l2, state.n_parameters, max_v)
        )
        if progress and it % 10 == 0:
            print(
                f"  step {it}: E={energy:.6f} L2={l2:.3e} "
                f"ops={state.n_parameters} max|V|={max_v:.3e} "
                f"[{time.monotonic() - t0:.1f}s]",
                flush=True,
            )
        if max_v < cfg.v_cut and state.n_parameters > 0:
            converged = True
            break
        if state.n_parameters == 0:
            break  # nothing to evolve and nothing worth adding
        trial, info = _euler_update(state, op, frame.cho, v, energy, cfg,
                                    dtau=dtau)
        if info["stalled"] and since_refresh > 0:
            # the retained metric gave a bad direction; retry with an
            # exact frame instead of accepting an uphill move
            since_refresh = cfg.refresh_every
            continue
        state = trial
        tau += dtau
        since_refresh += 1
        if info["stalled"]:
            warnings.append(f"flow stall at step {it} (energy increase persists)")
    psi = state.current
    nrm = float(np.linalg.norm(psi))
    final_energy = float(np.vdot(psi, op.apply(psi)).real) / nrm**2
    two_local = sum(1 for p in state.generators if p.weight == 2)
    three_local = sum(1 for p in state.generators if p.weight == 3)
    fidelity = None
    if exact_state is not None:
        fidelity = float(abs(np.vdot(exact_state, psi)) ** 2) / nrm**2
    return AvqiteResult(
        energy=final_energy,
        ansatz=state,
        trace=trace,
        converged=converged,
        two_local_count=two_local,
        three_local_count=three_local,
        fidelity=fidelity,
        exact_energy=exact_energy,
        warnings=warnings,
    )


def run(
    spec: ModelSpec,
    cfg: AvqiteConfig | None = None,
    pool_kind: PoolKind | str = PoolKind.YY_YYZ,
    compute_fidelity: bool | None = None,
    seed: int = 42,
    progress: bool = False,
    precision: str = "double",
) -> AvqiteResult:
    """AVQITE ground-state preparation for a model spec, starting from the
    Neel state.  Fidelity against the exact ground state is attached when
    the exact solver can reach the system size."""
    from .exact import ITERATIVE_QUBIT_LIMIT, ground_state_for

    cfg = cfg or AvqiteConfig()
    h = build_hamiltonian(spec)
    if compute_fidelity is None:
        compute_fidelity = spec.n_qubits <= ITERATIVE_QUBIT_LIMIT
    exact_state = exact_energy = None
    if compute_fidelity:
        res = ground_state_for(spec, seed=seed)
        exact_state = res.ground_state.amplitudes
        exact_energy = res.ground_energy
    return run_hamiltonian(
        h, cfg, pool_kind,
        reference=neel_state(spec.n_qubits),
        exact_state=exact_state,
        exact_energy=exact_energy,
        progress=progress,
        precision=precision,
    )
