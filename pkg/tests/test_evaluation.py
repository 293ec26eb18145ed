"""Tests for metrics, the joint-Gaussian baseline, and transfer diagnostics."""

import numpy as np
import pytest

from mbib.errors import ConfigError, DataError, DegenerateTruth, MissingColumn
from mbib.evaluation import (
    GaussianBnImputer,
    baseline_gaussian_bn,
    impose_mcar,
    load_bn,
    mb_invariance_diagnostic,
    metrics,
    population_bn,
    save_bn,
)
from mbib.gib import fit_gib, population_gib
from mbib.graph import Dag
from mbib.numstats import add_ridge, covariance, covariance_blocks
from mbib.sem import (
    Dataset,
    Mechanism,
    SemSpec,
    derive_seed,
    implied_covariance,
    preset,
    sample,
)


def chain_spec():
    dag = Dag(["A", "B", "C"], [("A", "B"), ("B", "C")])
    return SemSpec(
        dag,
        {
            "A": Mechanism(),
            "B": Mechanism(weights={"A": 1.5}),
            "C": Mechanism(weights={"B": -0.7}),
        },
    )


class TestMetrics:
    def test_hand_case(self):
        m = metrics([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
        assert abs(m.mae - 1.0) < 1e-12
        assert abs(m.rmse - np.sqrt(5.0 / 3.0)) < 1e-12
        assert abs(m.r2 - (-1.5)) < 1e-12
        assert m.n == 3

    def test_perfect_predictions(self):
        m = metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert m.mae == 0.0
        assert m.rmse == 0.0
        assert m.r2 == 1.0

    def test_rmse_squared_is_mse(self):
        rng = np.random.default_rng(0)
        truth = rng.standard_normal(100)
        pred = rng.standard_normal(100)
        m = metrics(truth, pred)
        assert abs(m.rmse ** 2 - np.mean((truth - pred) ** 2)) < 1e-12

    def test_validation(self):
        with pytest.raises(DataError):
            metrics([1.0, 2.0], [1.0])
        with pytest.raises(DataError):
            metrics([1.0], [1.0])
        with pytest.raises(DegenerateTruth):
            metrics([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_to_dict(self):
        d = metrics([0.0, 1.0], [0.0, 0.0]).to_dict()
        assert set(d) == {"mae", "rmse", "r2", "n"}


class TestBnImputer:
    def test_fit_matches_manual_formula(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((300, 2))
        t = 1.0 + 2.0 * X[:, 0] - X[:, 1] + 0.5 * rng.standard_normal(300)
        data = Dataset(("a", "b", "t"), np.column_stack([X, t]))
        imp = baseline_gaussian_bn(data, "t")
        assert imp.features == ("a", "b")

        full = data.matrix(("a", "b", "t"))
        cov = covariance(full)
        coef = np.linalg.solve(add_ridge(cov[:2, :2]), cov[:2, 2])
        want = full[:, 2].mean() + (full[:, :2] - full[:, :2].mean(axis=0)) @ coef
        assert np.abs(imp.predict(data) - want).max() < 1e-12

    def test_recovers_linear_signal(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((5000, 2))
        t = 3.0 + X[:, 0] - 2.0 * X[:, 1] + 0.1 * rng.standard_normal(5000)
        data = Dataset(("a", "b", "t"), np.column_stack([X, t]))
        imp = baseline_gaussian_bn(data, "t")
        assert np.abs(imp.coef - np.array([1.0, -2.0])).max() < 0.02
        assert abs(imp.mean_target - 3.0) < 0.05

    def test_validation(self):
        data = Dataset(("t",), [[1.0], [2.0]])
        with pytest.raises(ConfigError):
            baseline_gaussian_bn(data, "t")
        with pytest.raises(MissingColumn):
            baseline_gaussian_bn(data, "q")

    def test_population_uses_markov_structure(self):
        # E[C | A, B] = -0.7 B for the chain: the A coefficient vanishes.
        mom = implied_covariance(chain_spec())
        imp = population_bn(mom, "C")
        assert imp.features == ("A", "B")
        assert np.abs(imp.coef - np.array([0.0, -0.7])).max() < 1e-12

    def test_population_bn_equals_rank_one_bottleneck(self):
        # Scalar target: the d=1 closed-form bottleneck spans the same
        # regression direction, so population coefficients coincide.
        pair = preset("seven_node_covariate")
        mom = implied_covariance(pair.source)
        names = mom.names
        feats = tuple(v for v in names if v != "T")
        blocks = covariance_blocks(mom.cov_block(names, names), names, "T")
        W, decoder, _ = population_gib(blocks, dim=1)
        bn = population_bn(mom, "T")
        assert np.abs(W @ decoder - bn.coef).max() <= 1e-8
        assert bn.features == feats

    def test_serialization_round_trip(self, tmp_path):
        imp = GaussianBnImputer(("a",), "t", [1.0], 2.0, [0.5])
        path = tmp_path / "bn.json"
        save_bn(imp, path)
        back = load_bn(path)
        assert back.features == imp.features
        assert back.mean_target == imp.mean_target
        assert np.array_equal(back.coef, imp.coef)

    def test_format_guards(self, tmp_path):
        with pytest.raises(DataError):
            GaussianBnImputer.from_dict({"format": "gib-model"})
        with pytest.raises(DataError):
            GaussianBnImputer.from_dict({"format": "bn-imputer", "version": 2})
        with pytest.raises(DataError):
            load_bn(tmp_path / "nope.json")


class TestInvarianceDiagnostic:
    def test_no_flag_without_shift(self):
        pair = preset("seven_node_covariate")
        feats = pair.dag.markov_blanket("T")
        flags = 0
        for seed in range(20):
            src = sample(pair.source, 1000, derive_seed(seed, "source"))
            other = sample(pair.source, 1000, derive_seed(seed, "other"))
            model = fit_gib(src, feats, "T")
            report = mb_invariance_diagnostic(model, src, other)
            flags += int(report.flagged)
        assert flags <= 2

    def test_flags_target_mechanism_shift(self):
        pair = preset("seven_node_target_shift")
        feats = pair.dag.markov_blanket("T")
        src = sample(pair.source, 2000, derive_seed(0, "source"))
        tgt = sample(pair.target, 2000, derive_seed(0, "target"))
        model = fit_gib(src, feats, "T")
        report = mb_invariance_diagnostic(model, src, tgt)
        assert report.flagged is True
        assert report.mean_gap > 3.0 * report.pooled_se

    def test_covariate_shift_not_flagged_on_blanket(self):
        pair = preset("seven_node_covariate")
        feats = pair.dag.markov_blanket("T")
        src = sample(pair.source, 2000, derive_seed(0, "source"))
        tgt = sample(pair.target, 2000, derive_seed(0, "target"))
        model = fit_gib(src, feats, "T")
        report = mb_invariance_diagnostic(model, src, tgt)
        assert report.flagged is False

    def test_report_fields_consistent(self):
        pair = preset("seven_node_covariate")
        feats = pair.dag.markov_blanket("T")
        src = sample(pair.source, 500, derive_seed(1, "source"))
        tgt = sample(pair.target, 400, derive_seed(1, "target"))
        model = fit_gib(src, feats, "T")
        report = mb_invariance_diagnostic(model, src, tgt)
        assert report.source_n == 500
        assert report.target_n == 400
        assert abs(report.mean_gap - abs(report.target_mean - report.source_mean)) < 1e-15
        want_se = np.sqrt(
            report.source_var / report.source_n + report.target_var / report.target_n
        )
        assert abs(report.pooled_se - want_se) < 1e-15
        assert set(report.to_dict()) == {
            "source_mean",
            "source_var",
            "source_n",
            "target_mean",
            "target_var",
            "target_n",
            "mean_gap",
            "pooled_se",
            "flagged",
        }


class TestImposeMcar:
    def test_rate_zero_is_identity(self):
        data = Dataset(("a", "b"), [[1.0, 2.0], [3.0, 4.0]])
        assert impose_mcar(data, ("a",), 0.0, seed=0, fill_values={"a": 0.0}) is data

    def test_masking_rate_and_fill(self):
        rng = np.random.default_rng(3)
        n = 10_000
        data = Dataset(("a", "b"), rng.standard_normal((n, 2)) + 10.0)
        out = impose_mcar(data, ("a",), 0.5, seed=7, fill_values={"a": 0.0})
        a = out.column("a")
        masked = a == 0.0
        assert abs(masked.mean() - 0.5) < 0.03
        assert np.array_equal(a[~masked], data.column("a")[~masked])
        assert np.array_equal(out.column("b"), data.column("b"))

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        data = Dataset(("a",), rng.standard_normal((100, 1)))
        one = impose_mcar(data, ("a",), 0.3, seed=5, fill_values={"a": -1.0})
        two = impose_mcar(data, ("a",), 0.3, seed=5, fill_values={"a": -1.0})
        assert np.array_equal(one.values, two.values)

    def test_validation(self):
        data = Dataset(("a",), [[1.0], [2.0]])
        with pytest.raises(ConfigError):
            impose_mcar(data, ("a",), 1.0, seed=0, fill_values={"a": 0.0})
        with pytest.raises(ConfigError):
            impose_mcar(data, ("a",), -0.1, seed=0, fill_values={"a": 0.0})
        with pytest.raises(MissingColumn):
            impose_mcar(data, ("q",), 0.5, seed=0, fill_values={"q": 0.0})
