import math

import numpy as np
import pytest

from fairpc import (
    SolverConfig,
    derive_packing_params,
    feasibility_report,
    init_packing,
    instance_from_dense,
    packing_duality_gap,
    solve_packing,
    step,
)
from fairpc.errors import DualDomainError, InvalidAlpha, NegativeCoordinate

from conftest import identity_instance, single_row_instance


# ---- initialization ----

def test_init_alpha0():
    inst = identity_instance(2)
    state = init_packing(inst, SolverConfig(fairness=0.0, epsilon=0.1))
    np.testing.assert_allclose(state.x_hat, [0.45, 0.45], rtol=1e-15)
    # mirror state equals exp(eps/4) - 1 here
    assert state.z[0] == pytest.approx(0.025315120524428858, rel=1e-12)
    assert state.k == 0


def test_init_alpha1():
    inst = identity_instance(1)
    state = init_packing(inst, SolverConfig(fairness=1.0, epsilon=0.1))
    assert state.x_hat[0] == pytest.approx(math.log(0.9), rel=1e-15)
    assert state.z is None


def test_init_alpha2():
    inst = identity_instance(1)
    state = init_packing(inst, SolverConfig(fairness=2.0, epsilon=0.05))
    assert state.x_hat[0] == pytest.approx(1.0526315789473684, rel=1e-15)


def test_init_allocation_cache_consistent():
    inst = identity_instance(3)
    for alpha in (0.0, 0.5, 1.0, 2.0):
        eps = 0.1 if alpha <= 1.0 else 0.05
        state = init_packing(inst, SolverConfig(fairness=alpha, epsilon=eps))
        if alpha == 1.0:
            np.testing.assert_allclose(state.u, np.exp(state.x_hat), rtol=1e-12)
        else:
            np.testing.assert_allclose(state.u, state.x_hat ** (1 / (1 - alpha)), rtol=1e-12)


def test_mirror_consistency_first_iterate():
    # the first mirror recomputation must reproduce the initial iterate
    for alpha in (0.0, 0.3, 0.9):
        inst = identity_instance(2)
        config = SolverConfig(fairness=alpha, epsilon=0.1)
        params = derive_packing_params(2, 2, 1.0, alpha, 0.1)
        state = init_packing(inst, config, params)
        x0 = state.x_hat.copy()
        step(state, inst, params, alpha)
        np.testing.assert_allclose(state.x_hat, x0, rtol=1e-12)


# ---- single steps ----

def test_step_alpha1_hand_value():
    inst = identity_instance(1)
    config = SolverConfig(fairness=1.0, epsilon=0.1)
    params = derive_packing_params(1, 1, 1.0, 1.0, 0.1)
    assert params.beta == pytest.approx(3.38856288352271e-3, rel=1e-12)
    state = init_packing(inst, config, params)
    step(state, inst, params, 1.0)
    # gradient is -1 + O(1e-8), so the iterate moves up by beta/(4(1+beta))
    assert state.x_hat[0] == pytest.approx(-0.10451623583222594, rel=1e-9)


def test_step_alpha2_hand_value():
    inst = identity_instance(1)
    config = SolverConfig(fairness=2.0, epsilon=0.05)
    params = derive_packing_params(1, 1, 1.0, 2.0, 0.05)
    state = init_packing(inst, config, params)
    x0 = state.x_hat[0]
    step(state, inst, params, 2.0)
    factor = state.x_hat[0] / x0
    assert factor == pytest.approx(1.0 - 2.3726224597919732e-4, rel=1e-9)
    assert state.u[0] > 0.95  # allocation rises toward 1


def test_step_zero_gradient_fixed_point():
    # with (1-alpha) * grad == 0 the alpha > 1 iterate is unchanged
    inst = identity_instance(1)
    params = derive_packing_params(1, 1, 1.0, 2.0, 0.05)
    config = SolverConfig(fairness=2.0, epsilon=0.05)
    state = init_packing(inst, config, params)
    # the fixed point of the multiplicative rule: load with zero scaled gradient
    # x^alpha * C * load^{1/beta} = 1 at load = L*, x = L*
    target = math.exp(
        (2.0 * 0.0 - params.logC * params.beta) / (1.0 + 2.0 * params.beta)
    )  # solves 2 ln x + logC + ln(x)/beta = 0
    state.x_hat = np.array([target ** (1.0 - 2.0)])
    state.u = np.array([target])
    k0 = state.k
    step(state, inst, params, 2.0)
    assert state.k == k0 + 1
    assert state.x_hat[0] == pytest.approx(target ** -1.0, rel=1e-9)


# ---- feasibility report ----

def test_feasibility_report_examples():
    inst = identity_instance(2)
    rep = feasibility_report(inst, np.zeros(2))
    assert rep.max_load == 0.0 and rep.is_feasible
    rep = feasibility_report(inst, np.ones(2))
    assert rep.max_load == 1.0 and rep.is_feasible  # boundary counts as feasible
    rep = feasibility_report(inst, np.array([1.2, 0.0]))
    assert not rep.is_feasible and rep.violated_rows == [0]
    with pytest.raises(NegativeCoordinate):
        feasibility_report(inst, np.array([-0.1, 0.0]))


# ---- duality gap ----

def test_duality_gap_at_barrier_equilibrium():
    # 1x1 at allocation 1/(1+eps/2): dual weight is exactly 1 and the gap eps/2
    inst = identity_instance(1)
    params = derive_packing_params(1, 1, 1.0, 2.0, 0.05)
    x_hat = np.array([1.0 + 0.05 / 2.0])  # transformed: x = 1/(1+eps/2)
    gap = packing_duality_gap(inst, x_hat, params, 2.0)
    assert gap == pytest.approx(0.025, abs=1e-12)


def test_duality_gap_positive_off_optimum():
    inst = identity_instance(1)
    params = derive_packing_params(1, 1, 1.0, 2.0, 0.05)
    gap = packing_duality_gap(inst, np.array([1.0 / 0.9]), params, 2.0)
    assert gap > 0.0


def test_duality_gap_weak_duality_random():
    rng = np.random.default_rng(11)
    inst = single_row_instance([1.0, 2.0])
    params = derive_packing_params(1, 2, 2.0, 2.0, 0.05)
    for _ in range(25):
        x = rng.uniform(0.1, 0.3, 2)
        # keep the load high enough that the dual weight does not underflow
        x *= rng.uniform(0.6, 0.95) / float(np.dot([1.0, 2.0], x))
        x_hat = x ** (1.0 - 2.0)
        gap = packing_duality_gap(inst, x_hat, params, 2.0)
        assert gap >= -1e-9


def test_duality_gap_requires_alpha_above_one():
    inst = identity_instance(1)
    params = derive_packing_params(1, 1, 1.0, 0.5, 0.1)
    with pytest.raises(InvalidAlpha):
        packing_duality_gap(inst, np.array([0.5]), params, 0.5)


def test_duality_gap_zero_dual_mass():
    # a zero allocation coordinate makes its column's dual mass vanish
    inst = identity_instance(2)
    params = derive_packing_params(2, 2, 1.0, 2.0, 0.05)
    with pytest.raises(DualDomainError):
        # huge transformed value -> allocation underflows to 0 -> zero load row
        packing_duality_gap(inst, np.array([1e300, 2.0]), params, 2.0)


# ---- solve-level behavior ----

@pytest.mark.parametrize("alpha,eps", [(0.0, 0.1), (0.5, 0.1), (1.0, 0.1), (2.0, 0.05)])
def test_feasible_every_traced_iteration(alpha, eps):
    inst, _ = instance_from_dense(np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]]))
    config = SolverConfig(fairness=alpha, epsilon=eps, max_iters=400, trace_stride=1)
    sol = solve_packing(inst, config)
    assert all(row.max_load <= 1.0 for row in sol.trace)
    assert sol.is_feasible


@pytest.mark.parametrize("alpha,eps", [(0.0, 0.1), (0.5, 0.1), (1.0, 0.1), (2.0, 0.05)])
def test_monotone_descent(alpha, eps):
    inst, _ = instance_from_dense(np.array([[1.0, 2.0], [1.5, 1.0]]))
    config = SolverConfig(fairness=alpha, epsilon=eps, max_iters=300, trace_stride=1)
    sol = solve_packing(inst, config)
    values = [row.f_r for row in sol.trace]
    for prev, cur in zip(values, values[1:]):
        assert cur <= prev + 1e-9 * abs(prev)


def test_iterations_match_budget_and_formula():
    inst = identity_instance(1)
    config = SolverConfig(fairness=0.0, epsilon=0.1)
    params = derive_packing_params(1, 1, 1.0, 0.0, 0.1)
    sol = solve_packing(inst, config)
    assert sol.iterations_run == params.K == 19900
    sol = solve_packing(inst, SolverConfig(fairness=0.0, epsilon=0.1, max_iters=7))
    assert sol.iterations_run == 7


def test_solve_deterministic():
    inst, _ = instance_from_dense(np.array([[1.0, 2.0], [1.5, 1.0]]))
    config = SolverConfig(fairness=0.5, epsilon=0.1, max_iters=500)
    a = solve_packing(inst, config)
    b = solve_packing(inst, config)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.utility == b.utility


def test_scaling_record_maps_back():
    # same instance at two scales: original-space solutions must agree
    from fairpc import standardize

    entries = [(0, 0, 2.0), (0, 1, 4.0)]
    inst, rec = standardize(entries, 1, 2)
    assert rec.c == 2.0
    config = SolverConfig(fairness=1.0, epsilon=0.1, max_iters=2000)
    sol = solve_packing(inst, config, scaling=rec)
    raw_loads = np.array([2.0, 4.0]) @ sol.x
    assert raw_loads <= 1.0 + 1e-12
    base, rec1 = standardize([(0, 0, 1.0), (0, 1, 2.0)], 1, 2)
    sol_std = solve_packing(base, config, scaling=rec1)
    np.testing.assert_allclose(sol.x, sol_std.x / 2.0, rtol=1e-12)


def test_trace_row_zero_is_initial_state():
    inst = identity_instance(1)
    sol = solve_packing(inst, SolverConfig(fairness=1.0, epsilon=0.1, max_iters=50))
    assert sol.trace[0].k == 0
    assert sol.trace[0].utility == pytest.approx(math.log(0.9), rel=1e-12)


def test_early_stop_only_with_flag():
    inst = single_row_instance([1.0, 1.0])
    config = SolverConfig(fairness=2.0, epsilon=0.05, max_iters=3000, trace_stride=25)
    sol = solve_packing(inst, config)
    assert not sol.stopped_early and sol.iterations_run == 3000
    config = SolverConfig(fairness=2.0, epsilon=0.05, early_stop=True, trace_stride=25)
    sol = solve_packing(inst, config)
    assert sol.stopped_early
    assert sol.gap_estimate <= 10 * 0.05 * 1.0 * abs(sol.utility)
    assert sol.utility >= -6.0


def test_eps_f_forms():
    inst = identity_instance(1)
    sol = solve_packing(inst, SolverConfig(fairness=1.0, epsilon=0.1, max_iters=10))
    assert sol.eps_f == pytest.approx(3 * 0.1 * 1)
    assert sol.eps_f_form == "3*eps*n"
    sol = solve_packing(inst, SolverConfig(fairness=0.5, epsilon=0.1, max_iters=10))
    assert sol.eps_f == pytest.approx(3 * 0.1 * 0.5 * sol.utility)
