"""Metrics, the joint-Gaussian imputation baseline, and transfer diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateTruth, MissingColumn
from .numstats import add_ridge, covariance
from .sem import Dataset


@dataclass(frozen=True)
class Metrics:
    mae: float
    rmse: float
    r2: float
    n: int

    def to_dict(self):
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2, "n": self.n}


def metrics(truth, predicted):
    """MAE, RMSE, and R-squared (SST about the truth mean)."""
    truth = np.asarray(truth, dtype=float).reshape(-1)
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    if truth.shape != predicted.shape:
        raise DataError(
            f"length mismatch: truth {truth.shape[0]}, predicted {predicted.shape[0]}"
        )
    n = truth.shape[0]
    if n < 2:
        raise DataError(f"metrics need n >= 2, got n={n}")
    err = truth - predicted
    sst = float(np.sum((truth - truth.mean()) ** 2))
    if sst <= 0.0:
        raise DegenerateTruth("truth has zero variance; r2 undefined")
    sse = float(np.sum(err ** 2))
    return Metrics(
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        r2=1.0 - sse / sst,
        n=n,
    )


class GaussianBnImputer:
    """Joint-Gaussian conditional-mean imputer: E[T | all other columns]."""

    def __init__(self, features, target, mean_features, mean_target, coef):
        self.features = tuple(features)
        self.target = target
        self.mean_features = np.asarray(mean_features, dtype=float)
        self.mean_target = float(mean_target)
        self.coef = np.asarray(coef, dtype=float)

    def predict(self, data):
        X = data.matrix(self.features)
        return self.mean_target + (X - self.mean_features) @ self.coef

    def to_dict(self):
        return {
            "format": "bn-imputer",
            "version": 1,
            "features": list(self.features),
            "target": self.target,
            "mean_features": [float(x) for x in self.mean_features],
            "mean_target": self.mean_target,
            "coef": [float(x) for x in self.coef],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "bn-imputer":
            raise DataError(f"not a bn-imputer document: format={d.get('format')!r}")
        if d.get("version") != 1:
            raise DataError(f"unsupported bn-imputer version: {d.get('version')!r}")
        return cls(
            d["features"], d["target"], d["mean_features"], d["mean_target"], d["coef"]
        )


def save_bn(imputer, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(imputer.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bn(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return GaussianBnImputer.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def baseline_gaussian_bn(data, target, ridge=None):
    """Fit the joint-Gaussian baseline on source samples (ddof=1 moments).

    E[T | x] = mu_T + Sigma_{T,-T} Sigma_{-T,-T}^{-1} (x - mu_{-T}), with the
    usual ridge default on the feature block before inversion.
    """
    if target not in data:
        raise MissingColumn(target)
    features = tuple(c for c in data.columns if c != target)
    if not features:
        raise ConfigError("dataset holds only the target column")
    names = features + (target,)
    X = data.matrix(names)
    mean = X.mean(axis=0)
    cov = covariance(X)
    p = len(features)
    sxx = add_ridge(cov[:p, :p], ridge)
    sxt = cov[:p, p]
    coef = np.linalg.solve(sxx, sxt)
    return GaussianBnImputer(features, target, mean[:p], mean[p], coef)


def population_bn(moments, target, features=None):
    """Same imputer built from exact implied moments (no ridge)."""
    if features is None:
        features = tuple(v for v in moments.names if v != target)
    features = tuple(features)
    sxx = moments.cov_block(features, features)
    sxt = moments.cov_block(features, (target,))[:, 0]
    coef = np.linalg.solve(sxx, sxt)
    return GaussianBnImputer(
        features,
        target,
        moments.mean_of(features),
        moments.mean_of((target,))[0],
        coef,
    )


@dataclass(frozen=True)
class InvarianceReport:
    """Residual moments of one predictor across the two domains.

    The flag fires when the domain gap in mean residual exceeds three pooled
    standard errors, i.e. when the source-fit conditional visibly fails to
    transport.
    """

    source_mean: float
    source_var: float
    source_n: int
    target_mean: float
    target_var: float
    target_n: int
    mean_gap: float
    pooled_se: float
    flagged: bool

    def to_dict(self):
        return {
            "source_mean": self.source_mean,
            "source_var": self.source_var,
            "source_n": self.source_n,
            "target_mean": self.target_mean,
            "target_var": self.target_var,
            "target_n": self.target_n,
            "mean_gap": self.mean_gap,
            "pooled_se": self.pooled_se,
            "flagged": self.flagged,
        }


def mb_invariance_diagnostic(model, source, target_data):
    """Compare truth-minus-prediction residuals across domains.

    Both datasets must contain the model's target column (the target-domain
    copy is the audit column).
    """
    reports = []
    for data in (source, target_data):
        truth = data.column(model.target)
        resid = truth - model.predict(data)
        if resid.shape[0] < 2:
            raise DataError("diagnostic needs n >= 2 in each domain")
        reports.append(
            (float(resid.mean()), float(resid.var(ddof=1)), int(resid.shape[0]))
        )
    (sm, sv, sn), (tm, tv, tn) = reports
    gap = abs(tm - sm)
    pooled_se = float(np.sqrt(sv / sn + tv / tn))
    return InvarianceReport(
        source_mean=sm,
        source_var=sv,
        source_n=sn,
        target_mean=tm,
        target_var=tv,
        target_n=tn,
        mean_gap=gap,
        pooled_se=pooled_se,
        flagged=bool(gap > 3.0 * pooled_se),
    )


def impose_mcar(data, columns, rate, seed, fill_values):
    """Mask `columns` entries MCAR at `rate`, filling with given values.

    fill_values maps column name -> replacement (the source mean, i.e. a
    standardized zero, in the experiment harness).
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"missing rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return data
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    values = data.values.copy()
    index = {c: i for i, c in enumerate(data.columns)}
    for name in columns:
        if name not in index:
            raise MissingColumn(name)
        mask = rng.random(data.n) < rate
        values[mask, index[name]] = float(fill_values[name])
    return Dataset(data.columns, values)
