import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from graphon_mf import analysis
from graphon_mf import dynamics as D
from graphon_mf import kernels as K
from graphon_mf import meanfield as MF
from graphon_mf.stepfunction import StepFunction

BLOCK = [[0.8, 0.2], [0.2, 0.8]]


def logistic(u0, beta, t):
    """Closed form of u' = -u + beta u (1 - u)."""
    r = beta - 1.0
    cap = r / beta
    return cap / (1 + (cap / u0 - 1) * np.exp(-r * t))


def profile(M=160):
    return StepFunction.from_function(lambda x: np.column_stack([0.9 - 0.3 * x, 0.1 + 0.3 * x]), M, ("S", "I"))


def test_rhs_examples():
    one = K.discretize(K.constant(1.0), 1)
    out = MF.rhs(one, D.sis(2.0), MF.sis_initial(0.5))
    np.testing.assert_allclose(out.values, 0.0, atol=1e-16)
    p = 0.3
    out = MF.rhs(one, D.sis(2.0), MF.sis_initial(p))
    assert out.values[0, 1] == pytest.approx(-p + 2 * p * (1 - p), rel=1e-15)

    out = MF.rhs(K.blockwise(BLOCK), D.sis(2.0), MF.sis_initial([0.1, 0.3]))
    np.testing.assert_allclose(out.values[:, 1], [0.026, -0.118], rtol=1e-13)
    np.testing.assert_allclose(out.values.sum(axis=1), 0.0, atol=1e-16)

    zero = MF.rhs(K.blockwise(BLOCK), D.zero_model(), MF.sis_initial([0.1, 0.3]))
    assert np.all(zero.values == 0)
    with pytest.raises(ValueError):
        MF.rhs(K.blockwise(BLOCK), D.sis(2.0), MF.sis_initial([0.1, 0.3, 0.2]))


def test_rhs_matches_sis_pde_form(rng):
    M, beta = 30, 2.7
    W = K.discretize(K.product_xy(), M)
    u = rng.random(M)
    out = MF.rhs(W, D.sis(beta), MF.sis_initial(u)).values[:, 1]
    Wu = W.dense() @ u / M
    np.testing.assert_allclose(out, -u + beta * (1 - u) * Wu, rtol=1e-13, atol=1e-15)


def test_rhs_columns_conserve_mass(rng):
    m = D.RateModel(("A", "B", "C"), rng.random((3, 3)), rng.random((3, 3, 3)))
    v = rng.dirichlet(np.ones(3), size=12)
    out = MF.rhs(K.discretize(K.separable_poly([0.1, 0.8]), 12), m, StepFunction(v, m.states))
    np.testing.assert_allclose(out.values.sum(axis=1), 0.0, atol=1e-14)


def test_solve_trivial_cases():
    sol = MF.solve(K.constant(0.7), D.zero_model(), profile(), 10, 0.1, 3.0, record_dt=1.0)
    assert np.all(sol.values == sol.values[0])
    sol = MF.solve(K.constant(1.0), D.sis(2.0), MF.sis_initial(0.5), 1, 0.01, 5.0, record_dt=1.0)
    np.testing.assert_allclose(sol.values[:, 0, 1], 0.5, atol=1e-15)


def test_solve_matches_logistic_closed_form():
    sol = MF.solve(K.constant(1.0), D.sis(2.0), MF.sis_initial(0.1), 1, 1e-3, 20.0, record_dt=0.5)
    exact = logistic(0.1, 2.0, sol.times)
    assert np.abs(sol.values[:, 0, 1] - exact).max() < 1e-10
    assert abs(sol.values[-1, 0, 1] - 0.5) < 1e-4


def test_solve_input_errors():
    k, m = K.constant(1.0), D.sis(2.0)
    with pytest.raises(ValueError):
        MF.solve(k, m, MF.sis_initial(0.1), 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        MF.solve(k, m, MF.sis_initial(0.1), 1, 0.1, -1.0)
    with pytest.raises(ValueError):
        MF.solve(k, m, StepFunction([[0.6, 0.6]], ("S", "I")), 1, 0.1, 1.0)
    with pytest.raises(ValueError):
        MF.solve(k, m, StepFunction([[1.1, -0.1]], ("S", "I")), 1, 0.1, 1.0)


def test_record_times():
    sol = MF.solve(K.constant(1.0), D.sis(2.0), MF.sis_initial(0.1), 1, 0.3, 1.0, record_dt=0.6)
    np.testing.assert_allclose(sol.times, [0.0, 0.6, 1.0])
    sol = MF.solve(K.constant(1.0), D.sis(2.0), MF.sis_initial(0.1), 1, 0.25, 1.0)
    np.testing.assert_allclose(sol.times, [0.0, 1.0])


def test_initial_cells_are_cell_averages():
    u0 = profile(160)
    sol = MF.solve(K.constant(0.5), D.sis(1.0), u0, 8, 0.1, 0.1)
    np.testing.assert_allclose(sol.values[0], u0.on_grid(8).values, rtol=1e-14)


def test_simplex_drift_is_small():
    for kernel in (K.product_xy(), K.blockwise(BLOCK), K.separable_poly([0.1, 0.9])):
        T, dt = 20.0, 0.01
        sol = MF.solve(kernel, D.sis(4.0), profile(), 40, dt, T, record_dt=0.1)
        gap, low = sol.simplex_drift()
        assert gap <= 1e-8 * T / dt and low >= -1e-8 * T / dt


def test_constant_kernel_reduces_to_single_cell():
    ref = MF.solve(K.constant(1.0), D.sis(2.5), MF.sis_initial(0.05), 1, 0.01, 10.0, record_dt=0.5)
    for M in (2, 7, 16):
        sol = MF.solve(K.constant(1.0), D.sis(2.5), MF.sis_initial(0.05), M, 0.01, 10.0, record_dt=0.5)
        assert np.abs(sol.values - ref.values).max() < 1e-10


@pytest.mark.parametrize("kernel", [K.product_xy(), K.separable_poly([0.2, 0.7])], ids=str)
def test_grid_refinement_halves_error(kernel):
    u0 = profile(160)
    sols = {M: MF.solve(kernel, D.sis(3.0), u0, M, 0.01, 5.0, record_dt=0.1) for M in (10, 20, 40, 80, 160)}
    gaps = []
    for M in (10, 20, 40, 80):
        a, b = sols[M].values, sols[2 * M].values
        gaps.append(max(analysis.l1_distance(StepFunction(a[r]), StepFunction(b[r])) for r in range(len(a))))
    ratios = np.array(gaps[1:]) / gaps[:-1]
    assert np.all((ratios >= 0.4) & (ratios <= 0.6)), ratios


def test_fourth_order_in_time():
    finals = [MF.solve(K.product_xy(), D.sis(3.0), profile(), 20, dt, 5.0).values[-1] for dt in (0.2, 0.1, 0.05)]
    e1 = np.abs(finals[0] - finals[1]).sum()
    e2 = np.abs(finals[1] - finals[2]).sum()
    assert 8 <= e1 / e2 <= 32


def k_oracle(phi, beta):
    return brentq(lambda k: quad(lambda x: beta * phi(x) ** 2 / (1 + beta * phi(x) * k), 0, 1, epsabs=1e-13, epsrel=1e-13)[0] - 1, 0, 10, xtol=1e-15)


def test_separable_equilibrium():
    g = MF.sis_equilibrium_separable(lambda x: np.ones_like(x), 2.0, 1000)
    assert MF.separable_k(lambda x: np.ones_like(x), 2.0, 1000) == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(g.values, 0.5, atol=1e-12)
    assert MF.sis_equilibrium_separable(lambda x: np.ones_like(x), 0.5, 100) is MF.DIE_OUT

    k = MF.separable_k(lambda x: x, 6.0, 100_000, 1e-12)
    assert abs(k - k_oracle(lambda x: x, 6.0)) < 1e-8
    g = MF.sis_equilibrium_separable(lambda x: x, 6.0)
    x = (np.arange(100_000) + 0.5) / 100_000
    np.testing.assert_allclose(g.values[:, 0], 6 * x * k / (1 + 6 * x * k), rtol=1e-12)


def test_separable_equilibrium_accepts_kernels_and_steps():
    k1 = MF.separable_k(K.separable_poly([0.2, 0.6]), 4.0, 5000)
    k2 = MF.separable_k(lambda x: 0.2 + 0.6 * x, 4.0, 5000)
    assert k1 == pytest.approx(k2, rel=1e-12)
    k3 = MF.separable_k(StepFunction([0.5, 1.0]), 2.0, 2)
    assert abs(np.mean(2.0 * np.array([0.25, 1.0]) / (1 + 2.0 * np.array([0.5, 1.0]) * k3)) - 1) < 1e-12


def test_long_run_prevalence():
    assert MF.long_run_prevalence(K.constant(1.0), 0.5, M=1, T=50.0) < 1e-6
    assert MF.long_run_prevalence(K.constant(1.0), 2.0, M=1, T=50.0) == pytest.approx(0.5, abs=1e-3)
    # equilibrium of the grid-sampled separable kernel versus the long-run solve
    M = 100
    phi = K.separable_poly([0, 1])
    target = MF.sis_equilibrium_separable(phi, 3.5, M, nodes="right").integral()[0]
    assert MF.long_run_prevalence(phi, 3.5, M=M, T=200.0) == pytest.approx(target, abs=1e-3)


def test_solution_csv(tmp_path):
    sol = MF.solve(K.constant(1.0), D.sis(2.0), MF.sis_initial(0.1), 3, 0.1, 1.0, record_dt=0.5)
    sol.to_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "t,cell,state,value" and len(lines) == 1 + 3 * 3 * 2
