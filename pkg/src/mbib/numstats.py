"""Covariance estimation, symmetric eigentools, and standardization.

Conventions used everywhere downstream:
  * sample covariance uses ddof=1 and is explicitly symmetrized;
  * eigenvalues come back in descending order with a deterministic sign
    (largest-magnitude entry of each eigenvector is positive);
  * inversions of ESTIMATED covariances go through add_ridge first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    DataError,
    DimensionMismatch,
    IllConditioned,
    MissingColumn,
    NoConvergence,
    NotOrthonormal,
    NotSymmetric,
    TooFewSamples,
)
from .sem import Dataset


def covariance(values):
    """ddof=1 sample covariance of an (n, p) matrix, symmetrized."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DataError(f"expected an (n, p) matrix, got shape {values.shape}")
    n = values.shape[0]
    if n < 2:
        raise TooFewSamples(f"covariance needs n >= 2, got n={n}")
    centered = values - values.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / (n - 1)
    return (cov + cov.T) / 2.0


def add_ridge(A, lam=None):
    """A + lam*I with lam defaulting to 1e-6 * trace(A)/p (0 if trace <= 0)."""
    A = np.asarray(A, dtype=float)
    p = A.shape[0]
    if lam is None:
        tr = float(np.trace(A))
        lam = 1e-6 * tr / p if tr > 0.0 else 0.0
    if lam == 0.0:
        return A.copy()
    return A + lam * np.eye(p)


@dataclass(frozen=True)
class CovarianceBlocks:
    """Joint second moments split around a scalar target column.

    sigma_xx : (p, p) symmetric
    sigma_xt : (p,) cross-covariance with the target
    sigma_tt : positive scalar target variance
    """

    feature_names: tuple
    target_name: str
    sigma_xx: np.ndarray
    sigma_xt: np.ndarray
    sigma_tt: float

    def __post_init__(self):
        p = len(self.feature_names)
        if self.sigma_xx.shape != (p, p):
            raise DimensionMismatch(
                f"sigma_xx must be ({p}, {p}), got {self.sigma_xx.shape}"
            )
        if self.sigma_xt.shape != (p,):
            raise DimensionMismatch(f"sigma_xt must be ({p},), got {self.sigma_xt.shape}")
        if not self.sigma_tt > 0.0:
            raise DataError(f"target variance must be positive, got {self.sigma_tt}")


def covariance_blocks(joint_cov, names, target):
    """Split a joint covariance over `names` into blocks around `target`."""
    names = tuple(names)
    joint_cov = np.asarray(joint_cov, dtype=float)
    if target not in names:
        raise MissingColumn(target)
    ti = names.index(target)
    fi = [i for i, v in enumerate(names) if v != target]
    features = tuple(v for v in names if v != target)
    sxx = joint_cov[np.ix_(fi, fi)]
    sxx = (sxx + sxx.T) / 2.0
    return CovarianceBlocks(
        feature_names=features,
        target_name=target,
        sigma_xx=sxx,
        sigma_xt=joint_cov[fi, ti].copy(),
        sigma_tt=float(joint_cov[ti, ti]),
    )


def blocks_from_dataset(data, features, target):
    """Estimate CovarianceBlocks from samples (ddof=1)."""
    names = tuple(features) + (target,)
    cov = covariance(data.matrix(names))
    return covariance_blocks(cov, names, target)


def sym_eig(A, rel_tol=1e-9):
    """Eigendecomposition of a symmetric matrix, descending eigenvalues.

    Symmetry is required up to rel_tol * ||A||_max. Each eigenvector's
    largest-magnitude entry is made positive so the decomposition is
    deterministic.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {A.shape}")
    scale = float(np.abs(A).max()) if A.size else 0.0
    asym = float(np.abs(A - A.T).max())
    if asym > rel_tol * max(scale, 1e-300):
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds {rel_tol:.0e} * max|A|")
    vals, vecs = np.linalg.eigh((A + A.T) / 2.0)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        i = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[i, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def inv_sqrt(A, floor=None):
    """Inverse matrix square root of a symmetric PSD matrix.

    Eigenvalues below `floor` (default 1e-8 * largest) raise IllConditioned
    rather than being clamped.
    """
    vals, vecs = sym_eig(A)
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    lam_max = float(vals[0])
    if lam_max <= 0.0:
        raise IllConditioned("matrix has no positive eigenvalue")
    if floor is None:
        floor = 1e-8 * lam_max
    if float(vals[-1]) < floor:
        raise IllConditioned(
            f"smallest eigenvalue {vals[-1]:.3e} below floor {floor:.3e}"
        )
    B = (vecs / np.sqrt(vals)) @ vecs.T
    return (B + B.T) / 2.0


def operator_norm(A, rel_tol=1e-10, max_iter=1000, seed=0):
    """Largest singular value via power iteration on A^T A."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.size == 0:
        return 0.0
    G = A.T @ A
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = float(v @ G @ v)
    for _ in range(max_iter):
        w = G @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(v @ G @ v)
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-300):
            return float(np.sqrt(max(lam_new, 0.0)))
        lam = lam_new
    raise NoConvergence(
        f"power iteration did not reach rel_tol={rel_tol} in {max_iter} iterations"
    )


def sym_op_norm(A):
    """Operator norm of a symmetric matrix, exactly, via its spectrum.

    Used for residual matrices in the theory checks, where power iteration's
    increment-based stop can stall on near-tied spectra.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvalsh((A + A.T) / 2.0)).max())


def sin_theta(U, V, ortho_tol=1e-8):
    """Largest principal-angle sine between equal-dimension subspaces.

    Columns of U and V must each be orthonormal. Returns
    sqrt(1 - sigma_min(U^T V)^2).
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    if U.shape != V.shape:
        raise DimensionMismatch(f"shapes differ: {U.shape} vs {V.shape}")
    d = U.shape[1]
    for name, M in (("first", U), ("second", V)):
        gram = M.T @ M
        if float(np.abs(gram - np.eye(d)).max()) > ortho_tol:
            raise NotOrthonormal(f"{name} basis is not orthonormal within {ortho_tol}")
    smin = float(np.linalg.svd(U.T @ V, compute_uv=False)[-1])
    return float(np.sqrt(max(0.0, 1.0 - min(smin, 1.0) ** 2)))


class Standardizer:
    """Per-column affine map to zero mean, unit variance (ddof=1).

    Fitted on one dataset (the source domain) and applied verbatim to any
    other, which is what zero-shot transfer requires.
    """

    def __init__(self, columns, mean, std):
        self.columns = tuple(columns)
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def fit(cls, data, columns):
        columns = tuple(columns)
        X = data.matrix(columns)
        if X.shape[0] < 2:
            raise TooFewSamples("standardizer fit needs n >= 2")
        mean = X.mean(axis=0)
        std = X.std(axis=0, ddof=1)
        for j, name in enumerate(columns):
            if not std[j] > 0.0:
                raise ConstantColumn(name)
        return cls(columns, mean, std)

    def apply(self, data):
        """Standardize; result holds exactly this standardizer's columns."""
        X = data.matrix(self.columns)
        return Dataset(self.columns, (X - self.mean) / self.std)

    def transform_values(self, data):
        return (data.matrix(self.columns) - self.mean) / self.std

    def column_params(self, name):
        if name not in self.columns:
            raise MissingColumn(name)
        j = self.columns.index(name)
        return float(self.mean[j]), float(self.std[j])

    def invert_column(self, name, values):
        mu, sd = self.column_params(name)
        return np.asarray(values, dtype=float) * sd + mu

    def to_dict(self):
        return {
            "columns": list(self.columns),
            "mean": [float(x) for x in self.mean],
            "std": [float(x) for x in self.std],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["columns"]), d["mean"], d["std"])
