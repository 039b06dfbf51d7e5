"""Trotter and QSVT resource estimation.

Commuting-cluster coloring of the anticommutation graph, commutator-norm
bounds, product-formula step counts, per-step gate counts under the
``rotation_ladder`` convention, LCU normalization, QSVT polynomial degree,
and the asymptotic cost-model curves.  Published gate-count tables follow
an unspecified circuit construction, so they are carried as reference data
next to the tool's own counts rather than reproduced.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import Model, ModelSpec
from .pauli import CapacityError, PauliString, PauliSum, commutes

GATE_CONVENTION = "rotation_ladder"

# Per-step CX / "Clifford+T" counts published for first-order Trotter
# circuits of the built models (convention unspecified; display only).
REFERENCE_GATE_COUNTS: dict[tuple[str, int, int], tuple[int, int]] = {
    ("gn", 10, 2): (624, 1400),
    ("gn", 20, 2): (1304, 2940),
    ("gn", 40, 2): (2664, 6020),
    ("gn", 100, 2): (6744, 15260),
    ("gn", 10, 4): (1604, 3291),
    ("gn", 10, 6): (2994, 5538),
    ("gn", 10, 8): (4902, 8348),
    ("thirring", 10, 2): (704, 1960),
    ("thirring", 20, 2): (1464, 3460),
    ("thirring", 40, 2): (2984, 8260),
    ("thirring", 100, 2): (7544, 20860),
    ("thirring", 10, 4): (2124, 4811),
    ("thirring", 10, 6): (4474, 8398),
    ("thirring", 10, 8): (8022, 13228),
}


@dataclass
class ClusterPartition:
    clusters: list[PauliSum]

    @property
    def gamma(self) -> int:
        return len(self.clusters)

    def validate(self) -> None:
        """Exhaustive pairwise commutation check within every cluster."""
        for c in self.clusters:
            strings = [PauliString(c.n_qubits, x, z) for (x, z) in c.terms]
            for i, p in enumerate(strings):
                for q in strings[i + 1:]:
                    if not commutes(p, q):
                        raise AssertionError(
                            f"cluster contains anticommuting pair "
                            f"{p.label()} / {q.label()}"
                        )


def color_clusters(h: PauliSum) -> ClusterPartition:
    """Greedy largest-degree-first coloring of the anticommutation graph;
    identity terms are dropped first."""
    items = [
        (PauliString(h.n_qubits, x, z), c)
        for (x, z), c in h.terms.items()
        if (x, z) != (0, 0)
    ]
    n_items = len(items)
    adj = [[] for _ in range(n_items)]
    for i in range(n_items):
        for j in range(i + 1, n_items):
            if not commutes(items[i][0], items[j][0]):
                adj[i].append(j)
                adj[j].append(i)
    order = sorted(range(n_items), key=lambda i: (-len(adj[i]), i))
    color = [-1] * n_items
    n_colors = 0
    for i in order:
        used = {color[j] for j in adj[i] if color[j] >= 0}
        c = 0
        while c in used:
            c += 1
        color[i] = c
        n_colors = max(n_colors, c + 1)
    clusters = []
    for c in range(n_colors):
        terms = {
            (p.x_mask, p.z_mask): w
            for (p, w), col in zip(items, color)
            if col == c
        }
        clusters.append(PauliSum(h.n_qubits, terms))
    return ClusterPartition(clusters)


def _spectral_norm(h: PauliSum) -> float:
    return float(np.linalg.norm(h.to_dense(), ord=2))


def _one_norm(h: PauliSum) -> float:
    return float(sum(abs(c) for c in h.terms.values()))


def commutator_bound(
    partition: ClusterPartition, mode: str = "norm_product"
) -> float:
    """alpha~ = sum_{j<k} ||[H_j, H_k]||.

    ``exact_dense`` computes spectral norms of the pairwise commutators
    (n <= 10); ``norm_product`` uses ||[A,B]|| <= 2 ||A|| ||B|| with
    triangle-inequality cluster norms, so exact <= bound always.
    """
    if mode not in ("exact_dense", "norm_product"):
        raise ValueError(f"unknown mode {mode!r}")
    clusters = partition.clusters
    if not clusters:
        return 0.0
    if mode == "exact_dense":
        n = clusters[0].n_qubits
        if n > 10:
            raise CapacityError(f"{n} qubits beyond the dense-norm guard")
        mats = [c.to_dense() for c in clusters]
        total = 0.0
        for j in range(len(mats)):
            for k in range(j + 1, len(mats)):
                comm = mats[j] @ mats[k] - mats[k] @ mats[j]
                total += float(np.linalg.norm(comm, ord=2))
        return total
    norms = [_one_norm(c) for c in clusters]
    total = 0.0
    for j in range(len(norms)):
        for k in range(j + 1, len(norms)):
            total += 2.0 * norms[j] * norms[k]
    return total


def trotter_steps(
    alpha: float, t: float, eps: float, p: int, gamma: int = 1
) -> int:
    """Product-formula step counts.

    p = 1: ceil(t^2 alpha~ / (2 eps)); even p: the worst-case chain
    alpha~_{p+1} <= 2^p alpha~^{p+1} gives
    ceil(Gamma t (t/eps)^{1/p} alpha~^{(p+1)/p} 2^{1/p}).
    """
    if t <= 0 or eps <= 0:
        raise ValueError("t and eps must be positive")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if p != 1 and (p < 2 or p % 2):
        raise ValueError("order must be 1 or an even integer")
    if alpha == 0.0:
        return 1
    if p == 1:
        return math.ceil(t * t * alpha / (2.0 * eps))
    val = (
        gamma * t * (t / eps) ** (1.0 / p)
        * alpha ** ((p + 1.0) / p) * 2.0 ** (1.0 / p)
    )
    return math.ceil(val)


@dataclass
class ResourceReport:
    pauli_terms: int
    cx_count: int
    clifford_count: int
    rotation_count: int
    convention: str = GATE_CONVENTION
    reference_cx: int | None = None
    reference_clifford_t: int | None = None
    gamma: int | None = None
    commutator_bound: float | None = None
    trotter_steps_p1: int | None = None
    unit_constants: dict = field(default_factory=lambda: {"gate_unit": 1})

    @property
    def cx_ratio(self) -> float | None:
        if not self.reference_cx:
            return None
        return self.cx_count / self.reference_cx

    def to_json(self) -> str:
        d = {
            "pauli_terms": self.pauli_terms,
            "cx_count": self.cx_count,
            "clifford_count": self.clifford_count,
            "rotation_count": self.rotation_count,
            "convention": self.convention,
            "reference_cx": self.reference_cx,
            "reference_clifford_t": self.reference_clifford_t,
            "cx_ratio": self.cx_ratio,
            "gamma": self.gamma,
            "commutator_bound": self.commutator_bound,
            "trotter_steps_p1": self.trotter_steps_p1,
            "unit_constants": self.unit_constants,
        }
        return json.dumps(d)


def gate_counts(
    h: PauliSum, convention: str = GATE_CONVENTION,
    reference: tuple[int, int] | None = None,
) -> ResourceReport:
    """Per-Trotter-step gate counts under the rotation-ladder convention:
    a weight-w string costs 2(w-1) CX, one parameterized Z-rotation, and
    two basis-change Cliffords per X or Y tensor factor."""
    if convention != GATE_CONVENTION:
        raise ValueError(f"unknown convention {convention!r}")
    cx = clifford = rotations = terms = 0
    for (x, z) in h.terms:
        if (x, z) == (0, 0):
            continue
        w = (x | z).bit_count()
        terms += 1
        rotations += 1
        cx += 2 * (w - 1)
        clifford += 2 * x.bit_count()  # X or Y factors need basis changes
    ref_cx, ref_ct = reference if reference else (None, None)
    return ResourceReport(
        pauli_terms=terms,
        cx_count=cx,
        clifford_count=clifford,
        rotation_count=rotations,
        reference_cx=ref_cx,
        reference_clifford_t=ref_ct,
    )


def model_gate_report(
    spec: ModelSpec, h: PauliSum | None = None
) -> ResourceReport:
    """Gate counts for a built model with published reference values
    attached when the (model, L, Nf) row exists."""
    from .models import build_hamiltonian

    h = h if h is not None else build_hamiltonian(spec)
    ref = REFERENCE_GATE_COUNTS.get((spec.model.value, spec.L, spec.Nf))
    report = gate_counts(h, reference=ref)
    part = color_clusters(h)
    report.gamma = part.gamma
    return report


def lcu_one_norm(h: PauliSum) -> float:
    """alpha = sum |c_j| over non-identity terms; rescales the spectrum of
    H/alpha into [-1, 1]."""
    return float(
        sum(abs(c) for (x, z), c in h.terms.items() if (x, z) != (0, 0))
    )


def qsvt_degree(alpha: float, t: float, eps: float) -> int:
    """d = ceil(alpha t + ln(1/eps)) with unit constants."""
    if alpha <= 0 or t <= 0 or not (0 < eps < 1):
        raise ValueError("need alpha, t > 0 and 0 < eps < 1")
    return math.ceil(alpha * t + math.log(1.0 / eps))


def cost_models(
    L: float, Nf: float, t: float, eps: float, p: int
) -> tuple[float, float]:
    """Asymptotic model costs (unit constants, natural logarithms):
    Cost_PF = L^2 Nf^4 t^{1+1/p} eps^{-1/p};
    Cost_QSVT = L Nf^2 g (t + ln(1/eps)),  g = Nf + ln(L Nf^2)."""
    if min(L, Nf, t) <= 0 or not (0 < eps < 1):
        raise ValueError("need positive L, Nf, t and 0 < eps < 1")
    if p < 1:
        raise ValueError("order must be at least 1")
    cost_pf = L**2 * Nf**4 * t ** (1.0 + 1.0 / p) * eps ** (-1.0 / p)
    g = Nf + math.log(L * Nf**2)
    cost_qsvt = L * Nf**2 * g * (t + math.log(1.0 / eps))
    return cost_pf, cost_qsvt


def select_prep_cost_model(
    L: int, Nf: int, k_groups: int = 3
) -> tuple[int, int, int]:
    """(prep, select, walk_query) in abstract gate units:
    prep = ceil(log2 K) + ceil(log2(L Nf^2)); select = (2Nf + 2) +
    ceil(log2(L Nf^2)); one walk query costs select + 2 prep."""
    if L < 1 or Nf < 1 or k_groups < 1:
        raise ValueError("need positive L, Nf, K")
    log_index = math.ceil(math.log2(L * Nf**2)) if L * Nf**2 > 1 else 0
    prep = (math.ceil(math.log2(k_groups)) if k_groups > 1 else 0) + log_index
    select = (2 * Nf + 2) + log_index
    return prep, select, select + 2 * prep


@dataclass
class CostCurve:
    axis: str  # "L" or "t"
    points: list[tuple[float, float, float]]

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow((self.axis, "cost_pf", "cost_qsvt"))
            for x, pf, qsvt in self.points:
                writer.writerow((x, repr(pf), repr(qsvt)))


def cost_curve(
    axis: str,
    values,
    L: float = 100,
    Nf: float = 6,
    t: float = 100,
    eps: float = 1e-6,
    p: int = 10,
) -> CostCurve:
    if axis not in ("L", "t"):
        raise ValueError("axis must be 'L' or 't'")
    points = []
    for v in values:
        if axis == "L":
            pf, q = cost_models(v, Nf, t, eps, p)
        else:
            pf, q = cost_models(L, Nf, v, eps, p)
        points.append((float(v), pf, q))
    return CostCurve(axis, points)
