"""Desk-scale posterior producers: reparameterized-ELBO VI and HMC.

These exist so the package is self-contained; the certification engine is
inference-agnostic and accepts any diagonal-Gaussian or sample posterior.
Training is plain numpy with a hand-rolled Adam loop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .net import Network, backprop, forward, forward_batch, softmax
from .posterior import GaussianPosterior, SamplePosterior

log = logging.getLogger("bnncert.trainer")


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.01
    prior_variance: float = 0.5
    likelihood: str = "categorical"     # "categorical" | "gaussian"
    noise_var: float = 0.1              # observation noise for gaussian likelihood
    kl_weight: float = 1.0

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if min(self.learning_rate, self.prior_variance, self.noise_var) <= 0:
            raise ValueError("learning_rate, prior_variance, noise_var must be positive")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be nonnegative")
        if self.likelihood not in ("categorical", "gaussian"):
            raise ValueError(f"unknown likelihood {self.likelihood!r}")


@dataclass
class HmcConfig:
    leapfrog_steps: int = 20
    step_size: float = 0.01
    num_samples: int = 100
    burn_in: int = 100
    prior_variance: float = 0.5

    def __post_init__(self):
        if min(self.leapfrog_steps, self.num_samples) < 1 or self.burn_in < 0:
            raise ValueError("leapfrog_steps, num_samples >= 1 and burn_in >= 0 required")
        if self.step_size <= 0 or self.prior_variance <= 0:
            raise ValueError("step_size and prior_variance must be positive")


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_deriv(x):
    return 1.0 / (1.0 + np.exp(-x))


def _softplus_inv(y):
    return np.log(np.expm1(y))


def _loss_and_logit_grad(y_pred, y_true, cfg: TrainConfig):
    """Negative log-likelihood of one example and its gradient in the logits."""
    if cfg.likelihood == "categorical":
        p = softmax(y_pred)
        c = int(y_true)
        nll = -np.log(max(p[c], 1e-300))
        g = p.copy()
        g[c] -= 1.0
        return nll, g
    resid = y_pred - np.atleast_1d(np.asarray(y_true, dtype=float))
    nll = 0.5 * float(resid @ resid) / cfg.noise_var
    return nll, resid / cfg.noise_var


def elbo(net: Network, X, Y, mean, raw_var, cfg: TrainConfig, rng) -> float:
    """One-sample ELBO estimate on the given data, used for monitoring."""
    var = _softplus(raw_var)
    w = mean + np.sqrt(var) * rng.standard_normal(mean.shape[0])
    nll = sum(_loss_and_logit_grad(forward(net, w, x), y, cfg)[0]
              for x, y in zip(X, Y))
    kl = 0.5 * np.sum(var / cfg.prior_variance
                      + mean ** 2 / cfg.prior_variance
                      - 1.0 + np.log(cfg.prior_variance) - np.log(var))
    return float(-nll - cfg.kl_weight * kl)


def fit_vi(net: Network, dataset, cfg: TrainConfig, seed: int = 0) -> GaussianPosterior:
    """Mean-field Gaussian VI with the reparameterization trick.

    dataset is (X, Y). One MC weight sample per step; Adam on the mean and
    on an unconstrained pre-softplus variance vector. The KL against the
    isotropic N(0, prior_variance) prior is analytic. NaN loss aborts with
    the epoch index in the error.
    """
    X, Y = dataset
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    n_data = X.shape[0]
    rng = np.random.default_rng(seed)

    mean = 0.05 * rng.standard_normal(net.n_weights)
    raw_var = np.full(net.n_weights, _softplus_inv(0.05 ** 2))

    adam_m = [np.zeros_like(mean), np.zeros_like(raw_var)]
    adam_v = [np.zeros_like(mean), np.zeros_like(raw_var)]
    b1, b2, eps_adam = 0.9, 0.999, 1e-8
    t = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_data)
        for start in range(0, n_data, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            var = _softplus(raw_var)
            std = np.sqrt(var)
            noise = rng.standard_normal(mean.shape[0])
            w = mean + std * noise

            g_w = np.zeros_like(mean)
            nll = 0.0
            for i in idx:
                y_pred = forward(net, w, X[i])
                loss_i, g_logits = _loss_and_logit_grad(y_pred, Y[i], cfg)
                nll += loss_i
                _, gw = backprop(net, w, X[i], g_logits)
                g_w += gw
            scale = n_data / len(idx)
            g_w *= scale
            nll *= scale

            if not np.isfinite(nll):
                raise FloatingPointError(f"VI diverged at epoch {epoch}: loss is not finite")

            # d KL / d mean and d KL / d var, then chain through the
            # reparameterization w = mean + sqrt(var) * noise.
            g_mean = g_w + cfg.kl_weight * mean / cfg.prior_variance
            g_var = (g_w * noise / (2.0 * std)
                     + cfg.kl_weight * 0.5 * (1.0 / cfg.prior_variance - 1.0 / var))
            g_raw = g_var * _softplus_deriv(raw_var)

            t += 1
            for k, (p, g) in enumerate(((mean, g_mean), (raw_var, g_raw))):
                adam_m[k] = b1 * adam_m[k] + (1 - b1) * g
                adam_v[k] = b2 * adam_v[k] + (1 - b2) * g * g
                m_hat = adam_m[k] / (1 - b1 ** t)
                v_hat = adam_v[k] / (1 - b2 ** t)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps_adam)
        if epoch % max(cfg.epochs // 10, 1) == 0:
            log.debug("epoch %d nll %.4f", epoch, nll)

    return GaussianPosterior(mean=mean, variance=_softplus(raw_var))


def _log_posterior_and_grad(net, X, Y, w, cfg_like, prior_variance):
    """Unnormalized log posterior and gradient for HMC."""
    logp = -0.5 * float(w @ w) / prior_variance
    g = -w / prior_variance
    for x, y in zip(X, Y):
        y_pred = forward(net, w, x)
        nll, g_logits = _loss_and_logit_grad(y_pred, y, cfg_like)
        logp -= nll
        _, gw = backprop(net, w, x, g_logits)
        g -= gw
    return logp, g


def sample_hmc(net: Network, dataset, cfg: HmcConfig, seed: int = 0,
               likelihood: str = "categorical",
               noise_var: float = 0.1) -> SamplePosterior:
    """Hamiltonian Monte Carlo over the flat weight vector.

    Standard leapfrog integrator with a Metropolis accept step; the
    dataset may be empty, in which case the chain targets the prior. The
    acceptance rate is recorded in the posterior metadata, with a warning
    flag when it falls below 0.1.
    """
    X, Y = dataset
    X = np.atleast_2d(np.asarray(X, dtype=float)) if len(X) else np.zeros((0, net.input_dim))
    cfg_like = TrainConfig(likelihood=likelihood, noise_var=noise_var,
                           prior_variance=cfg.prior_variance)
    rng = np.random.default_rng(seed)
    w = 0.05 * rng.standard_normal(net.n_weights)
    logp, g = _log_posterior_and_grad(net, X, Y, w, cfg_like, cfg.prior_variance)

    kept = []
    accepted = 0
    total = cfg.burn_in + cfg.num_samples
    for it in range(total):
        p0 = rng.standard_normal(net.n_weights)
        w_new, g_new, logp_new = w.copy(), g, logp
        p = p0 + 0.5 * cfg.step_size * g_new
        for step in range(cfg.leapfrog_steps):
            w_new = w_new + cfg.step_size * p
            logp_new, g_new = _log_posterior_and_grad(net, X, Y, w_new,
                                                      cfg_like, cfg.prior_variance)
            if step < cfg.leapfrog_steps - 1:
                p = p + cfg.step_size * g_new
        p = p + 0.5 * cfg.step_size * g_new

        h0 = -logp + 0.5 * float(p0 @ p0)
        h1 = -logp_new + 0.5 * float(p @ p)
        if np.isfinite(h1) and np.log(rng.uniform()) < h0 - h1:
            w, g, logp = w_new, g_new, logp_new
            accepted += 1
        if it >= cfg.burn_in:
            kept.append(w.copy())

    rate = accepted / total
    meta = {"acceptance_rate": rate}
    if rate < 0.1:
        meta["warning"] = "low HMC acceptance rate; decrease step_size"
        log.warning("HMC acceptance rate %.3f below 0.1", rate)
    return SamplePosterior(samples=np.stack(kept), metadata=meta)


# ---------------------------------------------------------------------------
# Bundled synthetic tasks


def make_blobs(n: int = 200, seed: int = 0):
    """Two linearly separable 2-D Gaussian blobs, labels 0/1."""
    rng = np.random.default_rng(seed)
    half = n // 2
    x0 = rng.normal([-1.5, -1.5], 0.5, size=(half, 2))
    x1 = rng.normal([1.5, 1.5], 0.5, size=(n - half, 2))
    X = np.vstack([x0, x1])
    Y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return X[perm], Y[perm]


def make_hcas_like(n: int = 500, seed: int = 0):
    """4-D collision-avoidance-flavored states with 5 advisory classes.

    State: (distance, bearing, heading, time-to-loss). Labels come from a
    simple deterministic rule, so a small network can fit them.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform([-1, -1, -1, -1], [1, 1, 1, 1], size=(n, 4))
    dist, bearing, heading, tau = X.T
    Y = np.zeros(n, dtype=int)                      # clear-of-conflict
    close = dist < 0.0
    Y[close & (bearing >= 0.5)] = 1                 # weak left
    Y[close & (bearing < 0.5) & (bearing >= 0.0)] = 2   # weak right
    urgent = close & (bearing < 0.0)
    Y[urgent & (heading >= tau)] = 3                # strong left
    Y[urgent & (heading < tau)] = 4                 # strong right
    return X, Y


def make_cubic(n: int = 100, seed: int = 0, noise: float = 0.1):
    """1-D regression task y = x^3 + noise on [-2, 2]."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, 1))
    Y = X[:, 0] ** 3 + noise * rng.standard_normal(n)
    return X, Y.reshape(-1, 1)
