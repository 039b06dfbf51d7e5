"""Toolkit for 1+1d multi-flavor Thirring and Gross-Neveu lattice models:
Hamiltonian construction, exact ground states, adaptive variational
imaginary-time ground-state preparation, fermion correlators, dynamical Lie
algebras, and Trotter/QSVT cost models."""

__version__ = "0.1.0"

from .models import Model, ModelSpec, build_hamiltonian, term_counts  # noqa: F401
from .pauli import PauliString, PauliSum  # noqa: F401
