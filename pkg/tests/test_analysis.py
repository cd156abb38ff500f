import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphon_mf import analysis as A
from graphon_mf import dynamics as D
from graphon_mf import kernels as K
from graphon_mf import meanfield as MF
from graphon_mf import sampling as S
from graphon_mf.stepfunction import StepFunction

step_values = arrays(float, st.tuples(st.integers(1, 30), st.integers(1, 3)), elements=st.floats(-5, 5))


def test_interval_norm_examples():
    assert A.interval_norm(StepFunction.constant(0.0, 5)) == 0.0
    assert A.interval_norm(StepFunction.constant(-0.7, 3)) == pytest.approx(0.7)
    assert A.interval_norm(StepFunction([1.0, -1.0])) == 0.5
    assert A.interval_norm(StepFunction([1.0, 1.0, -1.0, -1.0])) == A.interval_norm_bruteforce(StepFunction([1.0, 1.0, -1.0, -1.0]))


def test_interval_norm_equals_bruteforce_exactly(rng):
    for _ in range(200):
        M = int(rng.integers(1, 51))
        S_ = int(rng.integers(1, 4))
        f = StepFunction(rng.normal(size=(M, S_)))
        assert A.interval_norm(f) == A.interval_norm_bruteforce(f)


@given(step_values)
def test_interval_norm_bounded_by_l1(v):
    f = StepFunction(v)
    assert A.interval_norm(f) <= A.l1_distance(f) + 1e-12
    g = StepFunction(np.abs(v))
    assert A.interval_norm(g) == pytest.approx(A.l1_distance(g), abs=1e-12)


def test_l1_distance_examples():
    f = StepFunction([[0.3, 0.1]])
    assert A.l1_distance(f, f) == 0
    assert A.l1_distance(StepFunction.constant(1.0), StepFunction.constant(0.0)) == 1.0
    assert A.l1_distance(StepFunction([[1.0, 0.0], [0.0, 1.0]]), StepFunction.constant([0.5, 0.5])) == 1.0
    # common refinement: 2 cells vs 3 cells
    assert A.l1_distance(StepFunction([1.0, 0.0]), StepFunction([0.0, 0.0, 0.0])) == pytest.approx(0.5)


def test_cut_surrogate_examples():
    assert A.interval_cut_surrogate(K.constant(0.0), 10) == 0.0
    assert A.interval_cut_surrogate(K.constant(0.35), 12) == pytest.approx(0.35)
    assert A.interval_cut_surrogate(K.product_xy(), 40) == pytest.approx(0.25, abs=1 / 40)


def test_cut_surrogate_matches_quartic_enumeration(rng):
    for _ in range(5):
        M = 7
        X = rng.normal(size=(M, M))
        b = K.Blockwise((X + X.T) / 2, in_w0=False)
        C = b.dense()
        best = 0.0
        for a in range(M):
            for bb in range(a + 1, M + 1):
                for c in range(M):
                    for d in range(c + 1, M + 1):
                        best = max(best, abs(C[a:bb, c:d].sum()) / M**2)
        assert A.interval_cut_surrogate(b, M) == pytest.approx(best, rel=1e-12)


def test_kernel_norms():
    assert A.kernel_l1(K.constant(0.4), 10) == pytest.approx(0.4)
    assert A.kernel_l2(K.constant(0.4), 10) == pytest.approx(0.4)


def small_pair(N=400, M=4, seed=0):
    kernel, model = K.constant(0.5), D.sis(2.0)
    u0 = StepFunction.constant([0.5, 0.5], 1, ("S", "I"))
    g = S.sample_graph(kernel, N, seed=seed)
    tr = D.init_process(g, model, u0, seed=seed).run(1.0, M, 0.1)
    mf = MF.solve(kernel, model, u0, M, 0.01, 1.0, record_dt=0.1)
    return tr, mf


def test_compare_trajectories():
    tr, mf = small_pair()
    cmp = A.compare_trajectories(tr, mf)
    assert cmp.times.size == 11
    assert np.all(cmp.interval_norm_gap <= cmp.l1_gap + 1e-15)
    assert cmp.sup_gap == cmp.interval_norm_gap.max()
    back = A.compare_trajectories(mf, tr)
    np.testing.assert_allclose(back.interval_norm_gap, cmp.interval_norm_gap, rtol=1e-14)
    same = A.compare_trajectories(mf, mf)
    assert same.sup_gap == 0.0 and same.sup_l1_gap == 0.0


def test_compare_zero_model_is_initial_error():
    g = S.sample_graph(K.constant(0.5), 300, seed=1)
    u0 = StepFunction.constant([0.4, 0.6], 1, ("S", "I"))
    tr = D.init_process(g, D.zero_model(), u0, seed=2).run(1.0, 5, 0.25)
    mf = MF.solve(K.constant(0.5), D.zero_model(), u0, 5, 0.05, 1.0, record_dt=0.25)
    cmp = A.compare_trajectories(tr, mf)
    np.testing.assert_allclose(cmp.interval_norm_gap, cmp.interval_norm_gap[0], rtol=1e-14)


def test_compare_errors():
    tr, mf = small_pair(M=4)
    _, mf5 = small_pair(M=5)
    with pytest.raises(ValueError):
        A.compare_trajectories(tr, mf5)
    coarse = MF.solve(K.constant(0.5), D.sis(2.0), StepFunction.constant([0.5, 0.5], 1, ("S", "I")), 4, 0.01, 1.0, record_dt=0.5)
    with pytest.raises(ValueError):
        A.compare_trajectories(tr, coarse)


def test_comparison_outputs(tmp_path):
    tr, mf = small_pair()
    cmp = A.compare_trajectories(tr, mf)
    cmp.to_csv(tmp_path / "c.csv")
    cmp.to_json(tmp_path / "c.json", N=400, M=4, seed=0)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,interval_gap,l1_gap"
    summary = json.loads((tmp_path / "c.json").read_text())
    assert summary["sup_gap"] == cmp.sup_gap and summary["N"] == 400
