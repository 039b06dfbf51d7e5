"""Exact eigensolvers and reference imaginary-time evolution.

Dense diagonalization at small sizes, deterministic matrix-free Lanczos
(ARPACK) beyond, and a step-halving RK4 integrator for the normalized
imaginary-time flow that serves as the oracle for the variational solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .models import ModelSpec, build_hamiltonian
from .pauli import CapacityError, PauliSum
from .statevector import (
    PauliSumOperator,
    StateVector,
    neel_state,
    normalize,
)

DENSE_QUBIT_LIMIT = 12
ITERATIVE_QUBIT_LIMIT = 24
RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-9
DEFAULT_SEED = 42


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass
class SpectrumResult:
    ground_energy: float
    gap: float
    ground_state: StateVector
    residual: float
    method: str
    seed: int | None = None

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_TOL

    def summary_json(self) -> str:
        return json.dumps(
            {
                "ground_energy": self.ground_energy,
                "gap": self.gap,
                "residual": self.residual,
                "method": self.method,
                "seed": self.seed,
                "degenerate": self.degenerate,
            }
        )


def ground_state(
    h: PauliSum,
    seed: int = DEFAULT_SEED,
    dense_limit: int = DENSE_QUBIT_LIMIT,
) -> SpectrumResult:
    """Lowest eigenpair and gap of a Hermitian PauliSum."""
    n = h.n_qubits
    if n > ITERATIVE_QUBIT_LIMIT:
        raise CapacityError(f"{n} qubits beyond the iterative solver limit")
    op = PauliSumOperator(h)
    if n <= dense_limit:
        mat = h.to_dense(max_dense_qubits=dense_limit)
        vals, vecs = np.linalg.eigh(mat)
        e0, e1 = float(vals[0]), float(vals[1])
        psi = vecs[:, 0]
        method, used_seed = "dense", None
    else:
        lo = LinearOperator((op.dim, op.dim), matvec=op.apply, dtype=complex)
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(op.dim)
        vals, vecs = eigsh(lo, k=2, which="SA", v0=v0, tol=1e-12)
        order = np.argsort(vals)
        e0, e1 = float(vals[order[0]]), float(vals[order[1]])
        psi = vecs[:, order[0]].astype(complex)
        method, used_seed = "lanczos", seed
    psi = normalize(psi)
    residual = float(np.linalg.norm(op.apply(psi) - e0 * psi))
    if residual > RESIDUAL_TOL:
        raise NonConvergenceError("eigensolver did not converge", residual)
    return SpectrumResult(
        ground_energy=e0,
        gap=max(e1 - e0, 0.0),
        ground_state=StateVector(n, psi),
        residual=residual,
        method=method,
        seed=used_seed,
    )


def ground_state_for(spec: ModelSpec, seed: int = DEFAULT_SEED) -> SpectrumResult:
    return ground_state(build_hamiltonian(spec), seed=seed)


def expectation(h: PauliSum, psi: StateVector | np.ndarray) -> float:
    amps = psi.amplitudes if isinstance(psi, StateVector) else psi
    from .statevector import expectation as _expect

    return _expect(h, amps)


def imaginary_time_evolve(
    h: PauliSum,
    psi0: np.ndarray,
    tau: float,
    dtau: float = 0.05,
    dense_limit: int = 10,
    tol: float = 1e-10,
) -> np.ndarray:
    """Normalized e^{-tau H} |psi0>.

    Dense spectral exponential when small enough, otherwise RK4 on the
    normalized flow  d(psi)/d(tau) = -(H - <H>) psi  with step halving until
    two successive refinements agree to ``tol``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if dtau <= 0:
        raise ValueError("dtau must be positive")
    psi0 = normalize(np.asarray(psi0, dtype=complex))
    if tau == 0:
        return psi0
    if h.n_qubits <= dense_limit:
        mat = h.to_dense(max_dense_qubits=dense_limit)
        vals, vecs = np.linalg.eigh(mat)
        coeff = vecs.conj().T @ psi0
        coeff *= np.exp(-tau * (vals - vals[0]))
        return normalize(vecs @ coeff)
    op = PauliSumOperator(h)
    psi = _rk4_flow(op, psi0, tau, dtau)
    for _ in range(16):
        dtau /= 2
        finer = _rk4_flow(op, psi0, tau, dtau)
        if np.linalg.norm(finer - psi) < tol:
            return finer
        psi = finer
    return psi


def _rk4_flow(op: PauliSumOperator, psi: np.ndarray, tau: float, dtau: float):
    def deriv(v):
        hv = op.apply(v)
        return -(hv - np.vdot(v, hv).real * v)

    steps = max(1, int(np.ceil(tau / dtau)))
    dt = tau / steps
    for _ in range(steps):
        k1 = deriv(psi)
        k2 = deriv(normalize(psi + 0.5 * dt * k1))
        k3 = deriv(normalize(psi + 0.5 * dt * k2))
        k4 = deriv(normalize(psi + dt * k3))
        psi = normalize(psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    return psi


def qite_time_bound(delta_sq: float, gap: float, eps: float) -> float:
    """Imaginary time needed for infidelity eps given initial overlap^2 and
    spectral gap: tau = ln((1/delta^2 - 1)/eps) / (2 gap)."""
    if not (0 < delta_sq <= 1):
        raise ValueError("delta_sq must lie in (0, 1]")
    if gap <= 0:
        raise ValueError("gap must be positive")
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    arg = (1.0 / delta_sq - 1.0) / eps
    if arg <= 1.0:
        return 0.0
    return float(np.log(arg) / (2.0 * gap))


def initial_overlap(spec: ModelSpec, seed: int = DEFAULT_SEED) -> float:
    """|<Neel|ground state>| for the built model."""
    result = ground_state_for(spec, seed=seed)
    neel = neel_state(spec.n_qubits)
    return float(abs(np.vdot(neel, result.ground_state.amplitudes)))
