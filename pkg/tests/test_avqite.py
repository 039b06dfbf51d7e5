import numpy as np
import pytest

from fourfermi import avqite
from fourfermi.avqite import (
    AnsatzState,
    AvqiteConfig,
    PoolKind,
    build_pool,
    gradient_vector,
    metric_matrix,
    mclachlan_distance,
    pool_size,
)
from fourfermi.models import Model, ModelSpec
from fourfermi.statevector import PauliSumOperator, neel_state

from conftest import random_hermitian_sum


def random_ansatz(n, n_ops, rng, kind=PoolKind.YY_YYZ):
    pool = build_pool(n, kind)
    state = AnsatzState.initial(n)
    for _ in range(n_ops):
        g = pool.elements[rng.integers(len(pool))]
        state = state.appended(g, float(rng.uniform(-0.5, 0.5)))
    state.refresh()
    return state


def test_pool_sizes():
    for n in (4, 6, 8):
        n2 = n * (n - 1) // 2
        expected = n2 + n2 * (n - 2)
        for kind in PoolKind:
            pool = build_pool(n, kind)
            assert len(pool) == pool_size(n) == expected


def test_pool_operator_shapes():
    pool = build_pool(4, PoolKind.YY_YYZ)
    labels = [p.label() for p in pool.elements]
    # two-local block first, all YY; then three-local with one Z attached
    assert labels[0] == "YYII"
    two_local = [lb for lb in labels if lb.count("I") == 2]
    assert all(lb.count("Y") == 2 for lb in two_local)
    pool_xy = build_pool(4, PoolKind.XY_YYZ)
    first = pool_xy.elements[0].label()
    assert first == "XYII"  # X on the smaller index, Y on the larger


def test_pool_block_structure():
    n = 6
    n2 = n * (n - 1) // 2
    for kind in PoolKind:
        elems = build_pool(n, kind).elements
        weights = [p.weight for p in elems]
        assert weights[:n2] == [2] * n2
        assert weights[n2:] == [3] * (n2 * (n - 2))
        assert all(p.phase == 1 for p in elems)
        assert len(set(p.key() for p in elems)) == len(elems)


def test_config_validation():
    with pytest.raises(ValueError):
        AvqiteConfig(dtau=-0.1)
    with pytest.raises(ValueError):
        AvqiteConfig(refresh_every=0)
    with pytest.raises(ValueError):
        AvqiteConfig(dtau_fine=0.0)
    with pytest.raises(ValueError):
        AvqiteConfig(fine_below=-1.0)


def test_tangent_rows_match_finite_differences():
    rng = np.random.default_rng(11)
    state = random_ansatz(4, 5, rng)
    rows = state.tangent_rows()
    eps = 1e-6
    for mu in range(state.n_parameters):
        tp = state.thetas.copy()
        tm = state.thetas.copy()
        tp[mu] += eps
        tm[mu] -= eps
        num = (
            state.with_parameters(tp).compute_state()
            - state.with_parameters(tm).compute_state()
        ) / (2 * eps)
        np.testing.assert_allclose(rows[mu], num, atol=1e-8)


def test_metric_and_gradient_match_finite_differences():
    rng = np.random.default_rng(13)
    h = random_hermitian_sum(4, rng, n_terms=10)
    op = PauliSumOperator(h)
    state = random_ansatz(4, 6, rng)
    m = metric_matrix(state)
    v = gradient_vector(state, op)
    eps = 1e-5

    def energy(thetas):
        psi = state.with_parameters(thetas).compute_state()
        return float(np.real(np.vdot(psi, op.apply(psi))))

    for mu in range(state.n_parameters):
        tp, tm = state.thetas.copy(), state.thetas.copy()
        tp[mu] += eps
        tm[mu] -= eps
        grad = (energy(tp) - energy(tm)) / (2 * eps)
        assert v[mu] == pytest.approx(-grad, abs=1e-6)
    assert m == pytest.approx(m.T, abs=1e-12)
    eigs = np.linalg.eigvalsh(m)
    assert eigs.min() > -1e-10


def test_adjoint_gradient_matches_direct():
    rng = np.random.default_rng(17)
    h = random_hermitian_sum(6, rng, n_terms=12)
    op = PauliSumOperator(h)
    state = random_ansatz(6, 8, rng)
    direct = gradient_vector(state, op)
    v, h_psi, energy, var_h = avqite._adjoint_gradient(state, op)
    np.testing.assert_allclose(v, direct, atol=1e-12)
    psi = state.current
    assert energy == pytest.approx(float(np.vdot(psi, h_psi).real), abs=1e-12)
    assert var_h >= 0.0


def test_mclachlan_distance_nonnegative_and_consistent():
    rng = np.random.default_rng(19)
    h = random_hermitian_sum(4, rng)
    op = PauliSumOperator(h)
    state = random_ansatz(4, 5, rng)
    cfg = AvqiteConfig()
    m = metric_matrix(state)
    v = gradient_vector(state, op)
    psi = state.current
    h_psi = op.apply(psi)
    energy = float(np.vdot(psi, h_psi).real)
    var_h = float(np.vdot(h_psi, h_psi).real) - energy**2
    l2 = mclachlan_distance(m, v, var_h, cfg.ridge)
    assert l2 >= 0.0
    # closed form: 2 Var(H) - V^T (M + ridge I)^{-1} V
    reg = m + cfg.ridge * np.eye(len(v))
    ref = 2.0 * var_h - float(v @ np.linalg.solve(reg, v))
    assert l2 == pytest.approx(max(ref, 0.0), abs=1e-10)


def test_candidate_scores_match_bruteforce_l2_decrease():
    rng = np.random.default_rng(23)
    spec = ModelSpec(Model.GROSS_NEVEU, 2, 1, 0.5, 0.2)
    from fourfermi.models import build_hamiltonian

    h = build_hamiltonian(spec)
    op = PauliSumOperator(h)
    cfg = AvqiteConfig()
    state = random_ansatz(spec.n_qubits, 4, rng)
    def trial_l2(trial):
        trial.refresh()
        m = metric_matrix(trial)
        v = gradient_vector(trial, op)
        psi = trial.current
        h_psi = op.apply(psi)
        energy = float(np.vdot(psi, h_psi).real)
        var_h = float(np.vdot(h_psi, h_psi).real) - energy**2
        return mclachlan_distance(m, v, var_h, cfg.ridge)

    for kind in PoolKind:
        pool = build_pool(spec.n_qubits, kind)
        frame = avqite._build_frame(state, op, cfg.ridge)
        scores = avqite._score_candidates(frame, state, pool, cfg.ridge,
                                          cfg.shortlist)
        base_l2 = frame.l2
        for idx, score in enumerate(scores):
            l2_trial = trial_l2(state.appended(pool.elements[idx], 0.0))
            assert score == pytest.approx(base_l2 - l2_trial, abs=1e-8)


def test_run_small_model_reaches_exact_state():
    spec = ModelSpec(Model.GROSS_NEVEU, 2, 1, 0.5, 0.2)
    res = avqite.run(spec, AvqiteConfig(v_cut=1e-3))
    assert res.converged
    assert res.fidelity > 0.999
    assert res.relative_energy_error < 1e-3
    assert res.two_local_count + res.three_local_count == \
        res.ansatz.n_parameters


def test_run_zero_steps_returns_reference_energy():
    spec = ModelSpec(Model.THIRRING, 2, 1, 0.5, 0.2)
    from fourfermi.exact import expectation
    from fourfermi.models import build_hamiltonian

    res = avqite.run(spec, AvqiteConfig(max_steps=0))
    neel_energy = expectation(
        build_hamiltonian(spec), neel_state(spec.n_qubits)
    )
    assert res.energy == pytest.approx(neel_energy, abs=1e-12)
    assert res.ansatz.n_parameters == 0
    assert not res.converged


def test_single_precision_agrees_with_double():
    spec = ModelSpec(Model.GROSS_NEVEU, 2, 1, 0.5, 0.2)
    cfg = AvqiteConfig(v_cut=1e-3)
    res_d = avqite.run(spec, cfg, precision="double")
    res_s = avqite.run(spec, cfg, precision="single")
    assert res_s.energy == pytest.approx(res_d.energy, abs=1e-4)
    assert res_s.fidelity == pytest.approx(res_d.fidelity, abs=1e-4)


def test_two_phase_step_schedule():
    spec = ModelSpec(Model.GROSS_NEVEU, 2, 1, 0.5, 0.2)
    cfg = AvqiteConfig(dtau=0.1, dtau_fine=0.02, fine_below=0.2,
                       v_cut=1e-3, max_steps=300)
    res = avqite.run(spec, cfg)
    assert res.converged
    assert res.relative_energy_error < 1e-3
    # the trace's tau increments must shrink from dtau to dtau_fine once
    # max|V| first drops below the threshold, and stay fine afterwards
    incs = [b.tau - a.tau for a, b in zip(res.trace, res.trace[1:])]
    # (a zero increment marks a stalled step that was retried)
    assert incs[0] == pytest.approx(0.1)
    fine = [i for i, rec in enumerate(res.trace) if rec.max_abs_v < 0.2]
    assert fine, "flow never reached the fine regime"
    for i in range(fine[0], len(incs)):
        assert incs[i] == pytest.approx(0.02) or incs[i] == 0.0


def test_trace_csv(tmp_path):
    spec = ModelSpec(Model.GROSS_NEVEU, 2, 1, 0.5, 0.2)
    res = avqite.run(spec, AvqiteConfig(v_cut=1e-3))
    path = tmp_path / "trace.csv"
    res.write_trace_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("step,")
    assert len(lines) == len(res.trace) + 1
