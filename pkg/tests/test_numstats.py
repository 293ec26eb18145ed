"""Tests for covariance estimation, eigentools, and standardization."""

import numpy as np
import pytest

from mbib.errors import (
    ConstantColumn,
    DataError,
    DimensionMismatch,
    IllConditioned,
    MissingColumn,
    NotOrthonormal,
    NotSymmetric,
    TooFewSamples,
)
from mbib.numstats import (
    CovarianceBlocks,
    Standardizer,
    add_ridge,
    blocks_from_dataset,
    covariance,
    covariance_blocks,
    inv_sqrt,
    operator_norm,
    sin_theta,
    sym_eig,
    sym_op_norm,
)
from mbib.sem import Dataset


def random_spd(rng, p):
    M = rng.standard_normal((p, p))
    return M @ M.T + p * np.eye(p)


class TestCovariance:
    def test_hand_case(self):
        cov = covariance([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert np.allclose(cov, [[4.0, 4.0], [4.0, 4.0]], atol=1e-12)

    def test_matches_numpy(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((30, 4))
            assert np.allclose(covariance(X), np.cov(X.T, ddof=1), atol=1e-12)

    def test_result_is_symmetric(self):
        rng = np.random.default_rng(0)
        cov = covariance(rng.standard_normal((50, 6)))
        assert np.array_equal(cov, cov.T)

    def test_input_validation(self):
        with pytest.raises(DataError):
            covariance(np.zeros(5))
        with pytest.raises(TooFewSamples):
            covariance(np.zeros((1, 3)))


class TestAddRidge:
    def test_default_scales_with_trace(self):
        out = add_ridge(np.eye(3))
        assert np.allclose(out, (1.0 + 1e-6) * np.eye(3), atol=1e-15)
        out = add_ridge(4.0 * np.eye(2))
        assert np.allclose(np.diag(out), 4.0 + 1e-6 * 4.0, atol=1e-15)

    def test_explicit_lambda(self):
        out = add_ridge(np.zeros((2, 2)), lam=0.5)
        assert np.allclose(out, 0.5 * np.eye(2), atol=1e-15)

    def test_zero_lambda_copies(self):
        A = np.eye(2)
        out = add_ridge(A, lam=0.0)
        assert np.array_equal(out, A)
        out[0, 0] = 9.0
        assert A[0, 0] == 1.0

    def test_nonpositive_trace_means_no_ridge(self):
        A = -np.eye(2)
        assert np.array_equal(add_ridge(A), A)


class TestSymEig:
    def test_hand_case(self):
        vals, vecs = sym_eig(np.diag([1.0, 3.0]))
        assert np.allclose(vals, [3.0, 1.0], atol=1e-12)
        assert np.allclose(vecs, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)

    def test_reconstruction_and_orthonormality(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = random_spd(rng, 5) - 3.0 * np.eye(5)
            vals, vecs = sym_eig(A)
            assert np.all(np.diff(vals) <= 1e-12)
            assert np.allclose(vecs @ np.diag(vals) @ vecs.T, A, atol=1e-9)
            assert np.allclose(vecs.T @ vecs, np.eye(5), atol=1e-10)

    def test_sign_convention(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = random_spd(rng, 4)
            _, vecs = sym_eig(A)
            for j in range(4):
                assert vecs[np.argmax(np.abs(vecs[:, j])), j] > 0.0

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        A = random_spd(rng, 6)
        vals1, vecs1 = sym_eig(A)
        vals2, vecs2 = sym_eig(A)
        assert np.array_equal(vals1, vals2)
        assert np.array_equal(vecs1, vecs2)

    def test_asymmetry_rejected(self):
        with pytest.raises(NotSymmetric):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(NotSymmetric):
            sym_eig(np.zeros((2, 3)))


class TestInvSqrt:
    def test_hand_case(self):
        out = inv_sqrt(np.diag([4.0, 9.0]))
        assert np.allclose(out, np.diag([0.5, 1.0 / 3.0]), atol=1e-12)

    def test_whitening_identity(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = random_spd(rng, 5)
            B = inv_sqrt(A)
            assert np.allclose(B @ A @ B, np.eye(5), atol=1e-8)
            assert np.array_equal(B, B.T)

    def test_ill_conditioned_rejected(self):
        with pytest.raises(IllConditioned):
            inv_sqrt(np.diag([1.0, 1e-12]))
        with pytest.raises(IllConditioned):
            inv_sqrt(-np.eye(2))

    def test_explicit_floor(self):
        inv_sqrt(np.diag([1.0, 1e-12]), floor=1e-13)
        with pytest.raises(IllConditioned):
            inv_sqrt(np.diag([1.0, 1e-12]), floor=1e-10)


class TestOperatorNorm:
    def test_matches_svd(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = rng.standard_normal((6, 4))
            want = float(np.linalg.svd(A, compute_uv=False)[0])
            assert abs(operator_norm(A) - want) < 1e-8 * want

    def test_vector_input(self):
        v = np.array([3.0, 4.0])
        assert abs(operator_norm(v) - 5.0) < 1e-10

    def test_zero_matrix(self):
        assert operator_norm(np.zeros((3, 3))) == 0.0

    def test_sym_op_norm(self):
        assert abs(sym_op_norm(np.array([[0.0, 1.0], [1.0, 0.0]])) - 1.0) < 1e-12
        for seed in range(20):
            rng = np.random.default_rng(seed)
            A = random_spd(rng, 5) - 4.0 * np.eye(5)
            want = float(np.abs(np.linalg.eigvalsh(A)).max())
            assert abs(sym_op_norm(A) - want) < 1e-12


class TestSinTheta:
    def test_identical_subspaces(self):
        U = np.eye(3)[:, :2]
        assert sin_theta(U, U) == 0.0

    def test_orthogonal_subspaces(self):
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        assert abs(sin_theta(e1, e2) - 1.0) < 1e-12

    def test_forty_five_degrees(self):
        e1 = np.array([1.0, 0.0])
        v = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert abs(sin_theta(e1, v) - np.sqrt(0.5)) < 1e-12

    def test_rotation_invariance(self):
        # A subspace equals itself under a change of orthonormal basis.
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        R = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
        # sqrt(1 - smin^2) amplifies roundoff near zero angle: sqrt(eps) scale
        assert sin_theta(Q, Q @ R) < 1e-6

    def test_validation(self):
        with pytest.raises(NotOrthonormal):
            sin_theta(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        with pytest.raises(DimensionMismatch):
            sin_theta(np.eye(3)[:, :1], np.eye(3)[:, :2])


class TestCovarianceBlocks:
    def test_split_hand_case(self):
        joint = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, 0.3], [0.2, 0.3, 3.0]])
        blocks = covariance_blocks(joint, ("a", "t", "b"), "t")
        assert blocks.feature_names == ("a", "b")
        assert blocks.target_name == "t"
        assert np.allclose(blocks.sigma_xx, [[1.0, 0.2], [0.2, 3.0]], atol=1e-15)
        assert np.allclose(blocks.sigma_xt, [0.5, 0.3], atol=1e-15)
        assert blocks.sigma_tt == 2.0

    def test_target_must_be_present(self):
        with pytest.raises(MissingColumn):
            covariance_blocks(np.eye(2), ("a", "b"), "t")

    def test_invariants_enforced(self):
        with pytest.raises(DimensionMismatch):
            CovarianceBlocks(("a",), "t", np.eye(2), np.zeros(1), 1.0)
        with pytest.raises(DimensionMismatch):
            CovarianceBlocks(("a",), "t", np.eye(1), np.zeros(2), 1.0)
        with pytest.raises(DataError):
            CovarianceBlocks(("a",), "t", np.eye(1), np.zeros(1), 0.0)

    def test_from_dataset_matches_manual_split(self):
        rng = np.random.default_rng(3)
        data = Dataset(("x1", "x2", "t"), rng.standard_normal((200, 3)))
        blocks = blocks_from_dataset(data, ("x1", "x2"), "t")
        full = covariance(data.matrix(("x1", "x2", "t")))
        assert np.allclose(blocks.sigma_xx, full[:2, :2], atol=1e-12)
        assert np.allclose(blocks.sigma_xt, full[:2, 2], atol=1e-12)
        assert abs(blocks.sigma_tt - full[2, 2]) < 1e-12


class TestStandardizer:
    def test_fit_apply_normalizes(self):
        rng = np.random.default_rng(5)
        data = Dataset(("a", "b"), rng.standard_normal((100, 2)) * 3.0 + 7.0)
        std = Standardizer.fit(data, ("a", "b"))
        out = std.apply(data)
        assert out.columns == ("a", "b")
        assert np.abs(out.values.mean(axis=0)).max() < 1e-12
        assert np.abs(out.values.std(axis=0, ddof=1) - 1.0).max() < 1e-12

    def test_source_params_applied_to_target(self):
        src = Dataset(("a",), [[0.0], [2.0]])  # mean 1, sd sqrt(2)
        tgt = Dataset(("a",), [[1.0], [3.0]])
        std = Standardizer.fit(src, ("a",))
        out = std.apply(tgt)
        want = (np.array([1.0, 3.0]) - 1.0) / np.sqrt(2.0)
        assert np.allclose(out.column("a"), want, atol=1e-12)

    def test_subset_and_order(self):
        data = Dataset(("a", "b", "c"), np.random.default_rng(6).standard_normal((50, 3)))
        std = Standardizer.fit(data, ("c", "a"))
        out = std.apply(data)
        assert out.columns == ("c", "a")

    def test_invert_column_round_trips(self):
        rng = np.random.default_rng(7)
        data = Dataset(("a",), rng.standard_normal((40, 1)) * 2.0 + 5.0)
        std = Standardizer.fit(data, ("a",))
        z = std.apply(data).column("a")
        assert np.allclose(std.invert_column("a", z), data.column("a"), atol=1e-10)
        with pytest.raises(MissingColumn):
            std.column_params("q")

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(8)
        data = Dataset(("a", "b"), rng.standard_normal((30, 2)))
        std = Standardizer.fit(data, ("a", "b"))
        back = Standardizer.from_dict(std.to_dict())
        assert back.columns == std.columns
        assert np.array_equal(back.mean, std.mean)
        assert np.array_equal(back.std, std.std)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ConstantColumn):
            Standardizer.fit(Dataset(("a",), [[1.0], [1.0], [1.0]]), ("a",))
        with pytest.raises(TooFewSamples):
            Standardizer.fit(Dataset(("a",), [[1.0]]), ("a",))
