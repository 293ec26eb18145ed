"""Variational information bottleneck with explicit numpy gradients.

A small MLP encoder produces a diagonal-Gaussian posterior q(z|x); one
reparameterized sample per datum feeds an MLP decoder that outputs the
location of a gaussian/laplace/student_t likelihood with a single global
learned log-scale. The loss is

    mean NLL + beta * mean KL(q(z|x) || N(0, I))

and vib_loss returns both the scalar loss and the gradient for every
parameter tensor, so training is plain Adam over numpy arrays and every run
is bit-for-bit reproducible from the master seed.

The pure-DNN baseline is this module with beta=0, a deterministic encoder
(z = mu, no sampling), and a fixed unit gaussian scale, which reduces the
loss to mean squared error up to a constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    Diverged,
    NonFiniteLoss,
    NonPositiveScale,
    TooFewSamples,
)
from .numstats import Standardizer

LIKELIHOODS = ("gaussian", "laplace", "student_t")
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class VibConfig:
    latent_dim: int = 8
    beta: float = 0.003
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    likelihood: str = "gaussian"
    df: float = 4.0
    learning_rate: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 500
    patience: int = 20
    val_fraction: float = 0.2
    seed: int = 0
    deterministic_encoder: bool = False
    learn_scale: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.beta < 0.0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation not in ("tanh", "relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.likelihood not in LIKELIHOODS:
            raise ConfigError(f"unknown likelihood {self.likelihood!r}")
        if self.likelihood == "student_t" and not self.df > 2.0:
            raise ConfigError(f"student_t needs df > 2, got {self.df}")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs, patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")

    def to_dict(self):
        return {
            "latent_dim": self.latent_dim,
            "beta": self.beta,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "likelihood": self.likelihood,
            "df": self.df,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
            "deterministic_encoder": self.deterministic_encoder,
            "learn_scale": self.learn_scale,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (64, 64)))
        return cls(**d)


def dnn_config(**overrides):
    """Config for the deterministic regression baseline (MSE objective)."""
    base = dict(
        beta=0.0,
        deterministic_encoder=True,
        learn_scale=False,
        likelihood="gaussian",
    )
    base.update(overrides)
    return VibConfig(**base)


# ---------------------------------------------------------------------------
# losses

def kl_to_standard_normal(mu, logvar):
    """Per-datum KL(N(mu, diag(exp(logvar))) || N(0, I))."""
    mu = np.asarray(mu, dtype=float)
    logvar = np.asarray(logvar, dtype=float)
    return 0.5 * np.sum(mu ** 2 + np.exp(logvar) - 1.0 - logvar, axis=-1)


def nll(t, loc, scale, likelihood, df=None):
    """Per-datum negative log likelihood of a location-scale family."""
    if not scale > 0.0:
        raise NonPositiveScale(f"scale must be positive, got {scale}")
    t = np.asarray(t, dtype=float)
    loc = np.asarray(loc, dtype=float)
    r = (t - loc) / scale
    if likelihood == "gaussian":
        return 0.5 * _LOG_2PI + math.log(scale) + 0.5 * r ** 2
    if likelihood == "laplace":
        return math.log(2.0 * scale) + np.abs(r)
    if likelihood == "student_t":
        if df is None or not df > 0.0:
            raise ConfigError(f"student_t needs df > 0, got {df!r}")
        const = (
            -math.lgamma((df + 1.0) / 2.0)
            + math.lgamma(df / 2.0)
            + 0.5 * math.log(df * math.pi)
            + math.log(scale)
        )
        return const + ((df + 1.0) / 2.0) * np.log1p(r ** 2 / df)
    raise ConfigError(f"unknown likelihood {likelihood!r}")


def _nll_grads(t, loc, scale, likelihood, df):
    """(dNLL/dloc, dNLL/dlog_scale) per datum."""
    r = (t - loc) / scale
    if likelihood == "gaussian":
        return -r / scale, 1.0 - r ** 2
    if likelihood == "laplace":
        return -np.sign(r) / scale, 1.0 - np.abs(r)
    # student_t
    w = (df + 1.0) * r / (df + r ** 2)
    return -w / scale, 1.0 - w * r


# ---------------------------------------------------------------------------
# parameters

def _act(name):
    if name == "tanh":
        return np.tanh, lambda out: 1.0 - out ** 2
    return (lambda a: np.maximum(a, 0.0)), (lambda out: (out > 0.0).astype(float))


def _layer_names(prefix, n_layers):
    return [(f"{prefix}{i}.W", f"{prefix}{i}.b") for i in range(n_layers)]


def init_params(n_features, config, seed_seq):
    """Symmetric-uniform 1/sqrt(fan_in) weights, zero biases, zero log-scale."""
    rng = np.random.default_rng(seed_seq)
    params = {}

    def linear(wname, bname, fan_in, fan_out):
        bound = 1.0 / math.sqrt(fan_in)
        params[wname] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[bname] = np.zeros(fan_out)

    widths = [n_features] + list(config.hidden)
    for i, (wn, bn) in enumerate(_layer_names("enc", len(config.hidden))):
        linear(wn, bn, widths[i], widths[i + 1])
    linear("enc_mu.W", "enc_mu.b", widths[-1], config.latent_dim)
    linear("enc_logvar.W", "enc_logvar.b", widths[-1], config.latent_dim)

    dwidths = [config.latent_dim] + list(config.hidden)
    for i, (wn, bn) in enumerate(_layer_names("dec", len(config.hidden))):
        linear(wn, bn, dwidths[i], dwidths[i + 1])
    linear("dec_loc.W", "dec_loc.b", dwidths[-1], 1)
    params["log_scale"] = np.zeros(())
    return params


def _mlp_forward(params, prefix, X, n_layers, act_fn):
    h = X
    caches = []
    for wn, bn in _layer_names(prefix, n_layers):
        a = h @ params[wn] + params[bn]
        out = act_fn(a)
        caches.append((h, out))
        h = out
    return h, caches


def _mlp_backward(params, prefix, caches, d_out, act_deriv, grads):
    d = d_out
    names = _layer_names(prefix, len(caches))
    for i in range(len(caches) - 1, -1, -1):
        inp, out = caches[i]
        wn, bn = names[i]
        da = d * act_deriv(out)
        grads[wn] = inp.T @ da
        grads[bn] = da.sum(axis=0)
        d = da @ params[wn].T
    return d


def _encode(params, config, X, act_fn):
    h, caches = _mlp_forward(params, "enc", X, len(config.hidden), act_fn)
    mu = h @ params["enc_mu.W"] + params["enc_mu.b"]
    logvar = h @ params["enc_logvar.W"] + params["enc_logvar.b"]
    return mu, logvar, h, caches


def _decode(params, config, Z, act_fn):
    h, caches = _mlp_forward(params, "dec", Z, len(config.hidden), act_fn)
    loc = (h @ params["dec_loc.W"] + params["dec_loc.b"])[:, 0]
    return loc, h, caches


def _scale_of(params, config):
    if not config.learn_scale:
        return 1.0
    log_scale = float(params["log_scale"])
    try:
        scale = math.exp(log_scale)
    except OverflowError:
        scale = math.inf
    if not math.isfinite(scale) or scale <= 0.0:
        # exp(log_scale) under/overflowed: the parameters have blown up
        raise NonFiniteLoss(f"decoder scale degenerate (log_scale={log_scale!r})")
    return scale


def vib_loss(params, config, X, t, eps=None):
    """Scalar loss and the gradient for every parameter tensor.

    X and t must already be standardized. eps is the (n, latent_dim) matrix
    of standard-normal draws for the reparameterized sample; it is required
    unless the encoder is deterministic, and freezing it makes the loss a
    deterministic function of the parameters (finite differences check
    against exactly this).
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(t, dtype=float).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise DataError("batch is empty")
    act_fn, act_deriv = _act(config.activation)

    mu, logvar, h_enc, enc_caches = _encode(params, config, X, act_fn)
    if config.deterministic_encoder:
        z = mu
    else:
        if eps is None:
            raise ConfigError("eps is required for a stochastic encoder")
        eps = np.asarray(eps, dtype=float)
        if eps.shape != mu.shape:
            raise ConfigError(f"eps must have shape {mu.shape}, got {eps.shape}")
        sigma = np.exp(0.5 * logvar)
        z = mu + sigma * eps
    loc, h_dec, dec_caches = _decode(params, config, z, act_fn)
    scale = _scale_of(params, config)

    nll_i = nll(t, loc, scale, config.likelihood, config.df)
    kl_i = kl_to_standard_normal(mu, logvar)
    loss = float(nll_i.mean() + config.beta * kl_i.mean())

    grads = {}
    dloc_i, dlogs_i = _nll_grads(t, loc, scale, config.likelihood, config.df)
    dloc = dloc_i / n
    grads["dec_loc.W"] = h_dec.T @ dloc[:, None]
    grads["dec_loc.b"] = np.array([dloc.sum()])
    d_hdec = dloc[:, None] @ params["dec_loc.W"].T
    dz = _mlp_backward(params, "dec", dec_caches, d_hdec, act_deriv, grads)

    dmu = dz.copy()
    if config.deterministic_encoder:
        dlogvar = np.zeros_like(logvar)
    else:
        dlogvar = dz * eps * 0.5 * sigma
    if config.beta != 0.0:
        dmu = dmu + config.beta * mu / n
        dlogvar = dlogvar + config.beta * 0.5 * (np.exp(logvar) - 1.0) / n

    grads["enc_mu.W"] = h_enc.T @ dmu
    grads["enc_mu.b"] = dmu.sum(axis=0)
    grads["enc_logvar.W"] = h_enc.T @ dlogvar
    grads["enc_logvar.b"] = dlogvar.sum(axis=0)
    d_henc = dmu @ params["enc_mu.W"].T + dlogvar @ params["enc_logvar.W"].T
    _mlp_backward(params, "enc", enc_caches, d_henc, act_deriv, grads)

    grads["log_scale"] = (
        np.asarray(dlogs_i.mean()) if config.learn_scale else np.zeros(())
    )
    return loss, grads


def loss_components(params, config, X, t):
    """Deterministic (z = mu) NLL and KL means; used for validation."""
    act_fn, _ = _act(config.activation)
    mu, logvar, _, _ = _encode(params, config, X, act_fn)
    loc, _, _ = _decode(params, config, mu, act_fn)
    scale = _scale_of(params, config)
    nll_mean = float(nll(t, loc, scale, config.likelihood, config.df).mean())
    kl_mean = float(kl_to_standard_normal(mu, logvar).mean())
    return nll_mean, kl_mean


# ---------------------------------------------------------------------------
# model and training

@dataclass
class VibModel:
    features: tuple
    target: str
    config: VibConfig
    params: dict
    x_standardizer: Standardizer
    t_standardizer: Standardizer
    best_val_loss: float = math.nan
    epochs_run: int = 0

    def encode(self, data):
        X = self.x_standardizer.transform_values(data)
        act_fn, _ = _act(self.config.activation)
        mu, logvar, _, _ = _encode(self.params, self.config, X, act_fn)
        return mu, logvar

    def predict(self, data):
        mu, _ = self.encode(data)
        act_fn, _ = _act(self.config.activation)
        loc, _, _ = _decode(self.params, self.config, mu, act_fn)
        return self.t_standardizer.invert_column(self.target, loc)

    def mean_kl(self, data):
        mu, logvar = self.encode(data)
        return float(kl_to_standard_normal(mu, logvar).mean())

    def to_dict(self):
        return {
            "format": "vib-model",
            "version": 1,
            "features": list(self.features),
            "target": self.target,
            "config": self.config.to_dict(),
            "params": {
                k: {"shape": list(v.shape), "data": [float(x) for x in v.reshape(-1)]}
                for k, v in self.params.items()
            },
            "x_standardizer": self.x_standardizer.to_dict(),
            "t_standardizer": self.t_standardizer.to_dict(),
            "best_val_loss": float(self.best_val_loss),
            "epochs_run": int(self.epochs_run),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "vib-model":
            raise DataError(f"not a vib-model document: format={d.get('format')!r}")
        if d.get("version") != 1:
            raise DataError(f"unsupported vib-model version: {d.get('version')!r}")
        params = {
            k: np.array(v["data"], dtype=float).reshape(tuple(v["shape"]))
            for k, v in d["params"].items()
        }
        return cls(
            features=tuple(d["features"]),
            target=d["target"],
            config=VibConfig.from_dict(d["config"]),
            params=params,
            x_standardizer=Standardizer.from_dict(d["x_standardizer"]),
            t_standardizer=Standardizer.from_dict(d["t_standardizer"]),
            best_val_loss=float(d["best_val_loss"]),
            epochs_run=int(d["epochs_run"]),
        )


def save_vib(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_vib(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return VibModel.from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _adam_step(params, grads, state, lr, trainable, b1=0.9, b2=0.999, eps=1e-8):
    state["t"] += 1
    t_step = state["t"]
    for k in params:
        if k not in trainable:
            continue
        g = grads[k]
        state["m"][k] = b1 * state["m"][k] + (1.0 - b1) * g
        state["v"][k] = b2 * state["v"][k] + (1.0 - b2) * g * g
        m_hat = state["m"][k] / (1.0 - b1 ** t_step)
        v_hat = state["v"][k] / (1.0 - b2 ** t_step)
        params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + eps)


def _train_once(X, t, config, lr):
    """One full training run; raises NonFiniteLoss on divergence."""
    n = X.shape[0]
    root = np.random.SeedSequence(config.seed)
    init_ss, split_ss, shuffle_ss, eps_ss = root.spawn(4)

    params = init_params(X.shape[1], config, init_ss)
    trainable = {k for k in params if k != "log_scale" or config.learn_scale}

    rng_split = np.random.default_rng(split_ss)
    perm = rng_split.permutation(n)
    n_val = max(1, int(round(config.val_fraction * n)))
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    if train_idx.size == 0:
        raise TooFewSamples("validation split left no training rows")

    rng_shuffle = np.random.default_rng(shuffle_ss)
    rng_eps = np.random.default_rng(eps_ss)

    state = {"t": 0, "m": {k: np.zeros_like(v) for k, v in params.items()},
             "v": {k: np.zeros_like(v) for k, v in params.items()}}
    X_val, t_val = X[val_idx], t[val_idx]

    best_loss = math.inf
    best_params = None
    bad_epochs = 0
    epochs_run = 0
    for _epoch in range(config.max_epochs):
        order = train_idx[rng_shuffle.permutation(train_idx.size)]
        for start in range(0, order.size, config.batch_size):
            idx = order[start:start + config.batch_size]
            eps = None
            if not config.deterministic_encoder:
                eps = rng_eps.standard_normal((idx.size, config.latent_dim))
            # divergence is detected by the finiteness checks, not warnings
            with np.errstate(all="ignore"):
                loss, grads = vib_loss(params, config, X[idx], t[idx], eps)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss!r}")
            _adam_step(params, grads, state, lr, trainable)
        epochs_run += 1
        with np.errstate(all="ignore"):
            nll_mean, kl_mean = loss_components(params, config, X_val, t_val)
        val_loss = nll_mean + config.beta * kl_mean
        if not math.isfinite(val_loss):
            raise NonFiniteLoss(f"validation loss became {val_loss!r}")
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    return best_params, best_loss, epochs_run


def fit_vib(data, features, target, config=None):
    """Train on source samples; early stopping on a seeded validation split.

    A non-finite loss triggers one automatic restart at half the learning
    rate; a second failure raises Diverged.
    """
    config = config or VibConfig()
    features = tuple(features)
    if target in features:
        raise ConfigError(f"target {target!r} cannot be among the features")
    if data.n < 50:
        raise TooFewSamples(f"need n >= 50 to fit, got n={data.n}")

    x_std = Standardizer.fit(data, features)
    t_std = Standardizer.fit(data, (target,))
    X = x_std.transform_values(data)
    t = t_std.transform_values(data.subset((target,)))[:, 0]

    lr = config.learning_rate
    try:
        params, best_loss, epochs = _train_once(X, t, config, lr)
    except NonFiniteLoss:
        try:
            params, best_loss, epochs = _train_once(X, t, config, lr / 2.0)
        except NonFiniteLoss as exc:
            raise Diverged(
                f"loss non-finite even after halving the learning rate to {lr / 2.0}"
            ) from exc
    return VibModel(
        features=features,
        target=target,
        config=config,
        params=params,
        x_standardizer=x_std,
        t_standardizer=t_std,
        best_val_loss=best_loss,
        epochs_run=epochs,
    )
