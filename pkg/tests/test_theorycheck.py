"""Tests for the numerical verification battery."""

import numpy as np
import pytest

from mbib.errors import PreconditionViolated
from mbib.sem import implied_covariance, preset
from mbib.theorycheck import (
    TheoryReport,
    check_lossless,
    check_metric_identity,
    check_mismatch_identity,
    check_risk_transfer,
    concentration_sweep,
    format_report_table,
    lossless_suite,
    metric_identity_suite,
    n_only_shift_pair,
    random_sem,
    run_all,
)


class TestRandomSem:
    def test_deterministic(self):
        one_spec, one_target = random_sem(7)
        two_spec, two_target = random_sem(7)
        assert one_spec.dag == two_spec.dag
        assert one_spec.mechanisms == two_spec.mechanisms
        assert one_target == two_target

    def test_seeds_vary_the_instance(self):
        dags = {random_sem(s)[0].dag for s in range(10)}
        assert len(dags) > 1

    def test_instance_properties(self):
        for seed in range(20):
            spec, target = random_sem(seed)
            p = len(spec.dag.nodes)
            assert 4 <= p <= 12
            blanket_sizes = {v: len(spec.dag.markov_blanket(v)) for v in spec.dag.nodes}
            assert blanket_sizes[target] == max(blanket_sizes.values())
            for v in spec.dag.nodes:
                mech = spec.mechanisms[v]
                assert 0.5 <= mech.noise_std <= 2.0
                for w in mech.weights.values():
                    assert 0.1 < abs(w) <= 2.0


class TestLossless:
    def test_suite_passes(self):
        reports = lossless_suite(n_random=10)
        assert len(reports) == 12
        assert all(r.passed for r in reports)
        worst = max(r.measured["eig_rel_err"] for r in reports)
        assert worst <= 1e-8

    def test_report_structure(self):
        pair = preset("seven_node_covariate")
        report = check_lossless(pair.source, "T", "demo")
        assert report.name == "lossless_restriction"
        assert report.passed
        assert set(report.measured) == {
            "top_eig_global",
            "top_eig_blanket",
            "eig_rel_err",
            "lifted_subspace_residual",
        }
        assert report.instance["blanket"] == ["C1", "Z", "X", "P", "Y"]

    def test_blanket_equals_everything(self):
        # Complement empty: the restriction is the identity, still lossless.
        spec, _ = random_sem(0, p=4, edge_prob=0.9)
        for v in spec.dag.nodes:
            if set(spec.dag.markov_blanket(v)) == set(spec.dag.nodes) - {v}:
                report = check_lossless(spec, v)
                assert report.passed
                break


class TestMetricIdentity:
    def test_suite_passes(self):
        reports = metric_identity_suite(n_random=10)
        assert len(reports) == 12
        assert all(r.passed for r in reports)
        worst = max(r.measured["metric_rel_err"] for r in reports)
        assert worst <= 1e-9

    def test_single_instance(self):
        pair = preset("seven_node_covariate")
        report = check_metric_identity(pair.source, "T")
        assert report.passed
        assert report.measured["metric_rel_err"] <= 1e-9
        assert report.measured["cross_block_err"] <= 1e-9


class TestRiskTransfer:
    def test_n_only_pair_keeps_blanket_marginal(self):
        pair = n_only_shift_pair()
        blanket = pair.dag.markov_blanket("T")
        src = implied_covariance(pair.source)
        tgt = implied_covariance(pair.target)
        assert np.array_equal(
            src.cov_block(blanket, blanket), tgt.cov_block(blanket, blanket)
        )
        assert np.array_equal(src.mean_of(blanket), tgt.mean_of(blanket))
        assert pair.source.mechanism("T") == pair.target.mechanism("T")
        # the pair is not trivial: the irrelevant block did move
        assert pair.source.changed_nodes(pair.target) != []

    def test_identity_holds(self):
        pair = n_only_shift_pair()
        report = check_risk_transfer(pair.source, pair.target, "T")
        assert report.passed
        assert report.measured["max_gap"] <= 0.02 or all(
            r["gap"] <= r["tolerance"] for r in report.measured["per_seed"]
        )
        assert len(report.measured["per_seed"]) == 3

    def test_blanket_ancestry_shift_rejected(self):
        pair = preset("seven_node_covariate")  # C2 is an ancestor of Z and X
        with pytest.raises(PreconditionViolated):
            check_risk_transfer(pair.source, pair.target, "T")

    def test_target_shift_rejected(self):
        pair = preset("seven_node_target_shift")
        with pytest.raises(PreconditionViolated):
            check_risk_transfer(pair.source, pair.target, "T")


class TestMismatchIdentity:
    def test_fitted_predictor(self):
        pair = n_only_shift_pair()
        report = check_mismatch_identity(pair.source, pair.target, "T")
        assert report.passed
        assert report.measured["gap"] <= 2.0 * report.measured["mc_se"] + 1e-12

    def test_zero_predictor(self):
        pair = n_only_shift_pair()
        report = check_mismatch_identity(pair.source, pair.target, "T", predictor="zero")
        assert report.passed

    def test_population_predictor_is_exact(self):
        # Source Bayes predictor and invariant conditional: both sides vanish
        # pointwise, so the gap is exactly zero.
        pair = n_only_shift_pair()
        report = check_mismatch_identity(
            pair.source, pair.target, "T", predictor="population"
        )
        assert report.passed
        assert report.measured["gap"] == 0.0

    def test_covariate_shift_allowed(self):
        pair = preset("seven_node_covariate")
        report = check_mismatch_identity(pair.source, pair.target, "T")
        assert report.passed

    def test_guards(self):
        shift = preset("seven_node_target_shift")
        with pytest.raises(PreconditionViolated):
            check_mismatch_identity(shift.source, shift.target, "T")
        pair = n_only_shift_pair()
        with pytest.raises(PreconditionViolated):
            check_mismatch_identity(pair.source, pair.target, "T", predictor="oracle")


class TestConcentration:
    def test_rates_and_monotonicity(self):
        pair = preset("seven_node_covariate")
        report = concentration_sweep(pair.source, "T")
        assert report.passed
        assert -0.65 <= report.measured["slope_cov"] <= -0.35
        assert -0.65 <= report.measured["slope_sin_theta"] <= -0.35
        assert -1.3 <= report.measured["slope_excess_mse"] <= -0.7
        rows = report.measured["per_n"]
        assert [r["n"] for r in rows] == [250, 500, 1000, 2000, 4000, 8000, 16000]
        # errors at the largest n must sit well below the smallest-n errors
        for key in ("cov_err", "sin_theta", "excess_mse"):
            assert rows[-1][key] < rows[0][key]


class TestReporting:
    def test_format_table(self):
        reports = [
            TheoryReport("alpha", True, {"x": 1.0}, {"x": 2.0}, {}),
            TheoryReport("beta", False, {"y": 0.5}, {"y": 0.1}, {}),
        ]
        table = format_report_table(reports)
        assert "alpha" in table and "beta" in table
        assert "PASS" in table and "FAIL" in table
        assert table.splitlines()[0].startswith("check")

    def test_report_to_dict(self):
        r = TheoryReport("alpha", True, {"x": 1.0}, {"x": 2.0}, {"label": "demo"})
        d = r.to_dict()
        assert set(d) == {"name", "passed", "measured", "tolerances", "instance"}


class TestRunAll:
    def test_full_battery(self):
        reports = run_all()
        names = [r.name for r in reports]
        assert names == [
            "lossless_restriction_suite",
            "metric_identity_suite",
            "risk_transfer",
            "concentration",
            "mismatch_identity",
            "mismatch_identity",
            "mismatch_identity",
        ]
        assert all(r.passed for r in reports)
