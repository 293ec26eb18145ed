"""Closed-form linear-Gaussian information bottleneck via the CCA operator.

The compression operator

    Omega = Sigma_xx^{-1/2} Sigma_xt Sigma_tt^{-1} Sigma_tx Sigma_xx^{-1/2}

has the squared canonical correlations as eigenvalues. The encoder keeps the
top-d eigenvectors (unwhitened), and a least-squares readout maps the
compressed representation back to the target. Everything is fit on
standardized source data; predictions are de-standardized on the way out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionMismatch, TooFewSamples
from .numstats import (
    Standardizer,
    add_ridge,
    covariance,
    covariance_blocks,
    inv_sqrt,
    sym_eig,
)

_SPECTRUM_SLACK = 1e-8


def build_cca_operator(blocks, ridge=0.0):
    """Return (Omega, whitener) for the given covariance blocks.

    ridge is added to sigma_xx before the inverse square root; pass 0 for
    exact population inputs and a positive value (or use fit_gib's default)
    for estimated ones.
    """
    sxx = add_ridge(blocks.sigma_xx, ridge)
    whitener = inv_sqrt(sxx)
    s = whitener @ blocks.sigma_xt
    omega = np.outer(s, s) / blocks.sigma_tt
    return (omega + omega.T) / 2.0, whitener


def beta_to_dim(spectrum, beta):
    """Number of spectral directions kept at trade-off beta.

    Directions with eigenvalue above 1 - 1/beta stay active; beta <= 1 keeps
    a single direction, and the dimension never drops below 1.
    """
    if beta <= 0.0:
        raise ConfigError(f"beta must be positive, got {beta}")
    spectrum = np.asarray(spectrum, dtype=float)
    if beta <= 1.0:
        return 1
    cutoff = 1.0 - 1.0 / beta
    return max(1, int(np.sum(spectrum > cutoff)))


@dataclass
class GibModel:
    """Serializable linear encoder/decoder pair with its fit diagnostics."""

    features: tuple
    target: str
    encoder: np.ndarray  # (p, d)
    decoder: np.ndarray  # (d,)
    intercept: float
    spectrum: np.ndarray  # (p,) eigenvalues of the fitted operator, descending
    x_standardizer: Standardizer
    t_standardizer: Standardizer
    dim: int

    def __post_init__(self):
        p = len(self.features)
        if self.encoder.shape != (p, self.dim):
            raise DimensionMismatch(
                f"encoder must be ({p}, {self.dim}), got {self.encoder.shape}"
            )
        if np.linalg.matrix_rank(self.encoder) < self.dim:
            raise DataError("encoder columns are rank deficient")
        if self.spectrum.size and (
            self.spectrum.min() < -_SPECTRUM_SLACK
            or self.spectrum.max() > 1.0 + _SPECTRUM_SLACK
        ):
            raise DataError("spectrum entries must lie in [0, 1]")

    def compress(self, data):
        """Map inputs to the d-dimensional bottleneck representation."""
        X = self.x_standardizer.transform_values(data)
        return X @ self.encoder

    def linear_coefficients(self):
        """The fitted predictor as (alpha, beta) in ORIGINAL units.

        predict(x) == alpha + beta @ x exactly; handy for closed-form risk
        computations against population coefficients.
        """
        t_mu, t_sd = self.t_standardizer.column_params(self.target)
        v = self.encoder @ self.decoder  # weights on standardized features
        beta = t_sd * v / self.x_standardizer.std
        alpha = t_mu + t_sd * (
            self.intercept - float(np.sum(v * self.x_standardizer.mean / self.x_standardizer.std))
        )
        return float(alpha), beta

    def predict(self, data):
        z = self.compress(data)
        t_std = z @ self.decoder + self.intercept
        return self.t_standardizer.invert_column(self.target, t_std)

    def to_dict(self):
        return {
            "format": "gib-model",
            "version": 1,
            "features": list(self.features),
            "target": self.target,
            "dim": int(self.dim),
            "encoder": [[float(x) for x in row] for row in self.encoder],
            "decoder": [float(x) for x in self.decoder],
            "intercept": float(self.intercept),
            "spectrum": [float(x) for x in self.spectrum],
            "x_standardizer": self.x_standardizer.to_dict(),
            "t_standardizer": self.t_standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "gib-model":
            raise DataError(f"not a gib-model document: format={d.get('format')!r}")
        if d.get("version") != 1:
            raise DataError(f"unsupported gib-model version: {d.get('version')!r}")
        return cls(
            features=tuple(d["features"]),
            target=d["target"],
            encoder=np.array(d["encoder"], dtype=float).reshape(
                len(d["features"]), int(d["dim"])
            ),
            decoder=np.array(d["decoder"], dtype=float),
            intercept=float(d["intercept"]),
            spectrum=np.array(d["spectrum"], dtype=float),
            x_standardizer=Standardizer.from_dict(d["x_standardizer"]),
            t_standardizer=Standardizer.from_dict(d["t_standardizer"]),
            dim=int(d["dim"]),
        )


def save_gib(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_gib(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return GibModel.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def fit_gib(data, features, target, dim=None, beta=None, ridge=None):
    """Fit the closed-form bottleneck on source samples.

    Exactly one of dim/beta may be given; with neither, dim defaults to 1
    (lossless for a scalar target). ridge defaults to 1e-6 * trace/p on the
    estimated feature covariance.
    """
    features = tuple(features)
    if target in features:
        raise ConfigError(f"target {target!r} cannot be among the features")
    if not features:
        raise ConfigError("need at least one feature")
    if dim is not None and beta is not None:
        raise ConfigError("give dim or beta, not both")
    if data.n <= len(features):
        raise TooFewSamples(
            f"need n > p to fit: n={data.n}, p={len(features)}"
        )

    x_std = Standardizer.fit(data, features)
    t_std = Standardizer.fit(data, (target,))
    X = x_std.transform_values(data)
    t = t_std.transform_values(data.subset((target,)))[:, 0]

    p = len(features)
    joint = np.column_stack([X, t])
    blocks = covariance_blocks(covariance(joint), features + (target,), target)
    if ridge is None:
        ridge = 1e-6 * float(np.trace(blocks.sigma_xx)) / p
    omega, whitener = build_cca_operator(blocks, ridge=ridge)
    spectrum, vecs = sym_eig(omega)
    spectrum = np.clip(spectrum, 0.0, 1.0 + _SPECTRUM_SLACK)

    if dim is None:
        dim = beta_to_dim(spectrum, beta) if beta is not None else 1
    dim = int(dim)
    if dim < 1 or dim > p:
        raise ConfigError(f"dim must be in [1, {p}], got {dim}")

    W = whitener @ vecs[:, :dim]
    Z = X @ W
    design = np.column_stack([Z, np.ones(Z.shape[0])])
    coef, *_ = np.linalg.lstsq(design, t, rcond=None)
    return GibModel(
        features=features,
        target=target,
        encoder=W,
        decoder=coef[:dim],
        intercept=float(coef[dim]),
        spectrum=spectrum,
        x_standardizer=x_std,
        t_standardizer=t_std,
        dim=dim,
    )


def population_gib(blocks, dim=1):
    """Closed-form fit directly from population covariance blocks.

    Used by the theory checks; no standardization is applied, so the inputs
    are taken as already centered (means handled by the caller).
    """
    omega, whitener = build_cca_operator(blocks, ridge=0.0)
    spectrum, vecs = sym_eig(omega)
    W = whitener @ vecs[:, :dim]
    # least squares in population: decoder = (W' Sxx W)^{-1} W' Sxt
    G = W.T @ blocks.sigma_xx @ W
    decoder = np.linalg.solve(G, W.T @ blocks.sigma_xt)
    return W, decoder, np.clip(spectrum, 0.0, None)
