"""Comparison estimators: plug-in DML through an inverted propensity, and kappa weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .crossfit import EstimateReport, EstimatorConfig, TrimPolicy, cross_fit_estimate
from .dataset import IVDataset
from .dictionary import DictionarySpec
from .errors import ConfigError, DegenerateWeightsError
from .moments import TargetSpec, monotone_cdf
from .optim import fit_l1_logistic
from .riesz import RieszHyper, theoretical_lambda


def plugin_alpha(pi_hat, z, policy: TrimPolicy = TrimPolicy()):
    """z / pi - (1 - z) / (1 - pi) under a trim/censor policy.

    Returns a float for scalar input, or None when trim mode excludes the row.
    Arrays give (alpha, keep) with alpha set to 0 on excluded rows.
    """
    scalar = np.ndim(pi_hat) == 0 and np.ndim(z) == 0
    pi = np.atleast_1d(np.asarray(pi_hat, dtype=float))
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    eps = policy.epsilon
    keep = np.ones(np.broadcast(pi, zz).shape, dtype=bool)
    if policy.mode == "censor":
        pi = np.clip(pi, eps, 1.0 - eps)
    elif policy.mode == "trim":
        keep = (pi >= eps) & (pi <= 1.0 - eps)
    alpha = zz / pi - (1.0 - zz) / (1.0 - pi)
    alpha = np.where(keep, alpha, 0.0)
    if scalar:
        return float(alpha[0]) if keep[0] else None
    return alpha, keep


def alpha_from_logit(eta, z, policy: TrimPolicy = TrimPolicy()):
    """plugin_alpha evaluated from the linear predictor, avoiding 1 - pi cancellation.

    1/pi = 1 + exp(-eta) and 1/(1 - pi) = 1 + exp(eta); the trim/censor bounds
    become logit(eps) and logit(1 - eps) on eta.
    """
    eta = np.asarray(eta, dtype=float)
    z = np.asarray(z, dtype=float)
    lo, hi = logit(policy.epsilon), -logit(policy.epsilon)
    keep = np.ones(eta.shape, dtype=bool)
    if policy.mode == "censor":
        eta = np.clip(eta, lo, hi)
    elif policy.mode == "trim":
        keep = (eta >= lo) & (eta <= hi)
    with np.errstate(over="ignore"):
        alpha = z * (1.0 + np.exp(-eta)) - (1.0 - z) * (1.0 + np.exp(eta))
    return np.where(keep, alpha, 0.0), keep


@dataclass
class PropensityFit:
    spec: DictionarySpec
    coef: np.ndarray
    lam: float
    converged: bool
    kkt_violation: float

    def logit(self, x) -> np.ndarray:
        return self.spec.q(x) @ self.coef

    def predict(self, x) -> np.ndarray:
        return expit(self.logit(x))


def fit_propensity(spec: DictionarySpec, z, x, lam: float | None = None,
                   lambda_scale: float = 0.5, hyper: RieszHyper = RieszHyper()) -> PropensityFit:
    """L1-logistic model of P(Z=1 | X) on q(x); intercept unpenalised.

    Without an explicit ``lam`` the level is ``lambda_scale`` times the
    quantile rule used for the balancing weight, and slopes carry their
    column standard deviation as penalty weight.
    """
    Q = spec.q(x)
    n, h = Q.shape
    sd = Q.std(axis=0)
    weights = np.where(sd > 0, sd, 1.0)
    weights[0] = 0.0
    if lam is None:
        lam = lambda_scale * theoretical_lambda(n, h, hyper.c1, hyper.c2)
    res = fit_l1_logistic(Q, z, lam, weights)
    return PropensityFit(spec, res.coef, float(lam), res.converged, res.kkt_violation)


class PluginAlpha:
    """Cross-fitted alpha from an inverted L1-logistic propensity."""

    name = "plugin"

    def __init__(self, spec: DictionarySpec, policy: TrimPolicy = TrimPolicy(),
                 hyper: RieszHyper = RieszHyper(), lambda_scale: float = 0.5):
        self.spec = spec
        self.policy = policy
        self.hyper = hyper
        self.lambda_scale = lambda_scale

    def fit(self, data: IVDataset):
        prop = fit_propensity(self.spec, data.z, data.x, lambda_scale=self.lambda_scale,
                              hyper=self.hyper)
        fitted = _FittedPlugin(self.spec, prop, self.policy)
        alpha, keep = fitted.predict(data.z, data.x)
        B = self.spec.basis(data.z, data.x)[keep]
        Delta = self.spec.contrast(data.x)[keep]
        gap = Delta.mean(axis=0) - B.T @ alpha[keep] / max(int(keep.sum()), 1)
        fitted.balance_sup_norm = float(np.max(np.abs(gap)))
        return fitted


@dataclass
class _FittedPlugin:
    spec: DictionarySpec
    propensity: PropensityFit
    policy: TrimPolicy
    balance_sup_norm: float = float("nan")

    def predict(self, z, x):
        return alpha_from_logit(self.propensity.logit(x), z, self.policy)

    def diagnostics(self) -> dict:
        return {
            "lambda": self.propensity.lam,
            "sparsity": int(np.count_nonzero(self.propensity.coef)),
            "balance_sup_norm": self.balance_sup_norm,
            "converged": self.propensity.converged,
        }


def fit_plugin_dml(data: IVDataset, target: TargetSpec, spec: DictionarySpec,
                   config: EstimatorConfig = EstimatorConfig(method="plugin"), **kw) -> EstimateReport:
    if config.method != "plugin":
        raise ConfigError("fit_plugin_dml needs method='plugin'")
    return cross_fit_estimate(data, target, spec, config, **kw)


# --- kappa weights -------------------------------------------------------------

def kappa_weights(d, z, pi):
    """(kappa0, kappa1, kappa) written through alpha(z, pi)."""
    d = np.asarray(d, dtype=float)
    z = np.asarray(z, dtype=float)
    pi = np.asarray(pi, dtype=float)
    alpha = z / pi - (1.0 - z) / (1.0 - pi)
    return alpha * (d - 1.0), alpha * d, alpha * (d - 1.0 + pi)


def kappa_weights_direct(d, z, pi):
    """Textbook form: k0 = (1-D)((1-Z) - (1-pi))/(pi(1-pi)), k1 = D(Z - pi)/(pi(1-pi)),
    k = 1 - D(1-Z)/(1-pi) - (1-D)Z/pi."""
    d = np.asarray(d, dtype=float)
    z = np.asarray(z, dtype=float)
    pi = np.asarray(pi, dtype=float)
    k0 = (1.0 - d) * ((1.0 - z) - (1.0 - pi)) / (pi * (1.0 - pi))
    k1 = d * (z - pi) / (pi * (1.0 - pi))
    k = 1.0 - d * (1.0 - z) / (1.0 - pi) - (1.0 - d) * z / pi
    return k0, k1, k


def _ratio(w, g):
    s = np.sum(w)
    if not abs(s) > 1e-12 * max(1.0, np.sum(np.abs(w))):
        raise DegenerateWeightsError("kappa weights sum to zero")
    theta = (w @ g) / s
    infl = w[:, None] * (g - theta) / np.mean(w)
    return theta, infl


def _kappa_parts(data: IVDataset, pi, target: TargetSpec):
    k0, k1, k = kappa_weights(data.d, data.z, pi)
    if target.kind == "late":
        t1, i1 = _ratio(k1, data.y[:, None])
        t0, i0 = _ratio(k0, data.y[:, None])
        return t1 - t0, i1 - i0
    if target.kind == "characteristics":
        f = data.x[:, list(target.characteristics)]
        return _ratio(k, f)
    ind = (data.y[:, None] <= np.asarray(target.grid)[None, :]).astype(float)
    tb, ib = _ratio(k0, ind)
    td, idl = _ratio(k1, ind)
    theta = np.empty(target.dim)
    infl = np.empty((data.n, target.dim))
    theta[0::2], theta[1::2] = tb, td
    infl[:, 0::2], infl[:, 1::2] = ib, idl
    return theta, infl


def kappa_estimate(data: IVDataset, pi_hat, target: TargetSpec) -> np.ndarray:
    """Self-normalised kappa-weighted complier means."""
    pi = np.asarray(pi_hat, dtype=float)
    if np.any((pi <= 0) | (pi >= 1)):
        raise ConfigError("propensity must lie in (0, 1)")
    return np.atleast_1d(_kappa_parts(data, pi, target)[0])


def kappa_report(data: IVDataset, target: TargetSpec, spec: DictionarySpec,
                 config: EstimatorConfig) -> EstimateReport:
    """kappa estimate with a full-sample unpenalised logistic propensity.

    The covariance treats the propensity as known.
    """
    spec = spec.fit(data.x) if not spec.fitted else spec
    prop = fit_propensity(spec, data.z, data.x, lam=0.0)
    pi = np.clip(prop.predict(data.x), 1e-15, 1.0 - 1e-15)
    theta, infl = _kappa_parts(data, pi, target)
    theta = np.atleast_1d(theta)
    omega = infl.T @ infl / data.n
    omega = 0.5 * (omega + omega.T)
    se = np.sqrt(np.diag(omega) / data.n)
    theta_raw = None
    if config.monotone and target.kind == "cdf":
        theta_raw, theta = theta, monotone_cdf(theta, target)
    return EstimateReport(
        method="kappa", target=target, labels=target.labels(), theta=theta, se=se, cov=omega,
        influence=infl, jacobian=-np.eye(target.dim), omega=omega, eta_mean=None, n=data.n,
        n_used=data.n, seed=config.seed, config=config.echo(),
        per_fold=[{"fold": -1, "lambda": 0.0, "sparsity": int(np.count_nonzero(prop.coef)),
                   "balance_sup_norm": float("nan"), "converged": prop.converged}],
        theta_raw=theta_raw,
    )


def overlap_filter(data: IVDataset, pi_hat) -> np.ndarray:
    """Row indices kept by the overlap pre-filter.

    Z=0 rows whose propensity falls outside the range seen among Z=1 rows are
    dropped; Z=1 rows are always kept.
    """
    pi = np.asarray(pi_hat, dtype=float)
    p1 = pi[data.z == 1]
    inside = (pi >= p1.min()) & (pi <= p1.max())
    return np.flatnonzero((data.z == 1) | inside)
