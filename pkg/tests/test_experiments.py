import json
import math

import pytest

from graphon_mf import experiments as E


def test_config_validation():
    with pytest.raises(E.ExperimentError, match="config"):
        E.default_config("convergence", N_list=[500, 500])
    with pytest.raises(E.ExperimentError):
        E.default_config("convergence", kappa_gamma=1.0)
    with pytest.raises(E.ExperimentError):
        E.default_config("empirical_opnorm", kappa_gamma=1.0)
    with pytest.raises(E.ExperimentError):
        E.default_config("sparse_counterexample", kappa_gamma=0.5)
    with pytest.raises(E.ExperimentError):
        E.default_config("convergence", seeds=[])
    with pytest.raises(E.ExperimentError):
        E.ExperimentConfig(kind="nope")
    with pytest.raises(E.ExperimentError):
        E.ExperimentConfig.from_dict({"kind": "convergence", "N_list": [10], "bogus": 1})
    with pytest.raises(E.ExperimentError):
        E.default_config("threshold_sweep", beta_list=[1.0, 0.5])


def test_config_json_round_trip(tmp_path):
    cfg = E.default_config("threshold_sweep", beta_list=[0.5, 2.0])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert E.ExperimentConfig.from_json(path).to_dict() == cfg.to_dict()


def test_convergence_single_N_has_no_monotonicity_assertion():
    rep = E.run_convergence(E.default_config("convergence", N_list=[200], seeds=[0, 1], T=1.0))
    assert list(rep.results["median_sup_gap"]) == ["200"]
    assert "median_sup_gap_strictly_decreasing" not in rep.assertions
    assert rep.passed


def test_convergence_zero_model_is_sampling_error_only():
    cfg = E.default_config("convergence", model="zero", beta=None, N_list=[100, 1000, 10_000], kappa_c=0.01,
                           seeds=list(range(10)), T=0.5, M=5)
    rep = E.run_convergence(cfg)
    rows = rep.tables["runs"][1]
    for r in rows:
        assert float(r[2]) == pytest.approx(float(r[3]), rel=1e-12)  # sup gap equals initial gap
    assert rep.assertions["median_sup_gap_strictly_decreasing"]


def test_convergence_gap_at_N4000():
    rep = E.run_convergence(E.default_config("convergence", N_list=[4000]))
    assert rep.results["median_sup_gap"]["4000"] < 0.08


def test_threshold_sweep_constant_kernel():
    rep = E.run_threshold_sweep(E.default_config("threshold_sweep"))
    assert rep.passed
    cls = list(rep.results["classification"].values())
    assert cls == ["die-out", "die-out", "endemic", "endemic"]
    prev = rep.results["prevalence"]
    for beta in (1.2, 1.5):
        assert prev[repr(beta)] == pytest.approx(1 - 1 / beta, abs=1e-3)
    assert rep.results["flips"] == 1


def test_threshold_sweep_separable_kernel():
    cfg = E.default_config("threshold_sweep", kernel="separable_poly:0,1", beta_list=[2.5, 3.5], M=200, T=200.0)
    rep = E.run_threshold_sweep(cfg)
    assert rep.passed
    assert list(rep.results["classification"].values()) == ["die-out", "endemic"]
    assert rep.results["beta_c"] == pytest.approx(3.0, abs=0.05)


def test_threshold_sweep_all_subcritical():
    rep = E.run_threshold_sweep(E.default_config("threshold_sweep", beta_list=[0.3, 0.5, 0.7]))
    assert rep.results["flips"] == 0 and rep.passed


def test_flip_analysis_rejects_bad_patterns():
    ok, flips, _, consistent = E.flip_analysis([1, 2, 3], ["endemic", "die-out", "endemic"], 1.5)
    assert not ok
    ok, _, _, _ = E.flip_analysis([1, 2, 3, 4], ["die-out", "ambiguous", "ambiguous", "endemic"], 2.5)
    assert not ok
    ok, flips, bracket, consistent = E.flip_analysis([1, 2, 3], ["die-out", "ambiguous", "endemic"], 2.0)
    assert ok and flips == 1 and bracket == (1, 3) and consistent
    _, _, _, consistent = E.flip_analysis([1, 2, 3], ["die-out", "endemic", "endemic"], 5.0)
    assert not consistent


def test_sparse_counterexample_degenerate_beta():
    cfg = E.default_config("sparse_counterexample", beta=0.0, seeds=[0])
    rep = E.run_sparse_counterexample(cfg)
    assert "meanfield_diverges_from_decay" not in rep.assertions
    assert rep.passed
    header, rows = rep.tables["curves"]
    t1 = next(r for r in rows if abs(float(r[0]) - 1.0) < 1e-9)
    assert float(t1[2]) == pytest.approx(math.exp(-2), rel=1e-12)
    # with beta = 0 the mean-field curve is the same pure decay
    assert rep.results["sup_decay_vs_meanfield"] < 1e-8


def test_sparse_counterexample_slopes():
    rep = E.run_sparse_counterexample(E.default_config("sparse_counterexample", seeds=[0]))
    u = math.exp(-1)
    assert rep.results["initial_slope_meanfield"] == pytest.approx(-u + 2 * u * (1 - u))
    assert rep.results["initial_slope_meanfield"] == pytest.approx(0.097, abs=1e-3)
    assert rep.results["initial_slope_decay"] == pytest.approx(-0.368, abs=1e-3)


def test_empirical_opnorm_zero_kernel():
    rep = E.run_empirical_opnorm(E.default_config("empirical_opnorm", kernel="constant:0", N_list=[50, 100], seeds=[0, 1]))
    assert all(v == 0.0 for v in rep.results["median_opnorm"].values())


def test_equilibrium_crosscheck_cases():
    rep = E.run_equilibrium_crosscheck(E.default_config("equilibrium_crosscheck", kernel="constant:1", beta=2.0, M=1))
    assert rep.results["sup_cell_gap"] < 1e-6
    rep = E.run_equilibrium_crosscheck(E.default_config("equilibrium_crosscheck", beta=2.0))
    assert rep.results["die_out"] and rep.results["sup_cell_gap"] == 0.0 and rep.passed
    with pytest.raises(E.ExperimentError):
        E.run_equilibrium_crosscheck(E.default_config("equilibrium_crosscheck", kernel="product_xy"))


def test_report_embeds_config_and_reproduces(tmp_path):
    cfg = E.default_config("convergence", N_list=[150, 300], seeds=[3, 4], T=1.0, output_dir=str(tmp_path))
    rep = E.run_convergence(cfg)
    doc = json.loads((tmp_path / "convergence_report.json").read_text())
    assert doc["seeds"] == [3, 4] and doc["version"] and doc["rng_algorithm"]
    assert set(doc["assertions"]) == set(rep.assertions)
    assert (tmp_path / "convergence_runs.csv").exists()
    again = E.run_experiment(E.ExperimentConfig.from_dict({**doc["config"], "output_dir": None}))
    assert again.results == rep.results


def test_workers_do_not_change_results():
    cfg = E.default_config("convergence", N_list=[150, 300], seeds=[0, 1, 2], T=1.0)
    a = E.run_convergence(cfg)
    b = E.run_convergence(cfg.replace(workers=2))
    assert a.results == b.results


def test_golden_file():
    gold = E.load_golden()
    assert set(gold) >= {"convergence", "empirical_opnorm"}
    assert len(E.golden_hash()) == 16
    other = E.default_config("convergence", N_list=[100])
    assert E._golden_check(other, "convergence", {"100": 0.1}) == (None, None)
