"""Cross-fitted estimation and sandwich variance.

For each fold the nuisances (regression gamma and balancing weight alpha) are
trained on the fold complement and evaluated on the held-out rows. The held-out
eta values are averaged over the whole sample, theta solves the exactly
identified moment, and C = J^{-1} Omega J^{-1}.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .dataset import IVDataset, partition_folds
from .dictionary import DictionarySpec
from .errors import ConfigError, SingularJacobianError, WeakFirstStageError
from .moments import TargetSpec, monotone_cdf, psi_at, solve_theta, v_matrix
from .riesz import RieszHyper, fit_balancing_weight, fit_regression_arrays

MAX_FOLDS = 10


@dataclass(frozen=True)
class TrimPolicy:
    mode: str = "none"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("none", "trim", "censor"):
            raise ConfigError(f"trim mode must be none|trim|censor, got {self.mode!r}")
        if not 0 < self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "auto"
    folds: int = 5
    seed: int = 0
    hyper: RieszHyper = field(default_factory=RieszHyper)
    gamma_hyper: RieszHyper | None = None
    alpha_lambda: float | None = None
    gamma_lambda: float | None = None
    trim: TrimPolicy = field(default_factory=TrimPolicy)
    logistic_lambda_scale: float = 0.5
    monotone: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.method not in ("auto", "plugin", "kappa"):
            raise ConfigError(f"method must be auto|plugin|kappa, got {self.method!r}")
        if not 2 <= self.folds <= MAX_FOLDS:
            raise ConfigError(f"folds must be in [2, {MAX_FOLDS}], got {self.folds}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("threads")
        return out


# --- nuisance learners -------------------------------------------------------

class LassoRegression:
    """Dictionary Lasso for each column of V, tuned like the balancing weight.

    Any object with ``fit(z, x, V) -> fitted`` where ``fitted.predict(z, x)``
    returns an (n, J) array can replace it.
    """

    def __init__(self, spec: DictionarySpec, hyper: RieszHyper = RieszHyper(),
                 fixed_lambda: float | None = None):
        self.spec = spec
        self.hyper = hyper
        self.fixed_lambda = fixed_lambda

    def fit(self, z, x, V):
        B = self.spec.basis(z, x)
        fits = [fit_regression_arrays(B, V[:, j], self.spec.intercept_indices, self.hyper,
                                      self.fixed_lambda) for j in range(V.shape[1])]
        return _FittedLasso(self.spec, fits)


@dataclass
class _FittedLasso:
    spec: DictionarySpec
    fits: list

    @property
    def coef(self) -> np.ndarray:
        return np.column_stack([f.coef for f in self.fits])

    def predict(self, z, x) -> np.ndarray:
        return self.spec.basis(z, x) @ self.coef

    def diagnostics(self) -> dict:
        return {
            "max_lambda": max(f.lambda_used for f in self.fits),
            "max_effective_lambda": max(f.effective_lambda for f in self.fits),
            "max_foc_sup_norm": max(f.foc_sup_norm for f in self.fits),
            "all_converged": all(f.converged for f in self.fits),
        }


class AutoAlpha:
    """Balancing weight learned directly from the dictionary moments."""

    name = "auto"

    def __init__(self, spec: DictionarySpec, hyper: RieszHyper = RieszHyper(),
                 fixed_lambda: float | None = None):
        self.spec = spec
        self.hyper = hyper
        self.fixed_lambda = fixed_lambda

    def fit(self, data: IVDataset):
        return _FittedAuto(self.spec, fit_balancing_weight(
            self.spec, data.z, data.x, self.hyper, self.fixed_lambda))


@dataclass
class _FittedAuto:
    spec: DictionarySpec
    fit: Any

    def predict(self, z, x):
        alpha = self.spec.basis(z, x) @ self.fit.rho
        return alpha, np.ones(alpha.shape[0], dtype=bool)

    def diagnostics(self) -> dict:
        return self.fit.diagnostics()


# --- report ------------------------------------------------------------------

@dataclass
class FoldNuisance:
    fold: int
    train: np.ndarray
    test: np.ndarray
    alpha: Any
    gamma: Any

    def diagnostics(self) -> dict:
        out = {"fold": self.fold, "n_train": int(self.train.size), "n_test": int(self.test.size)}
        out.update(self.alpha.diagnostics())
        gd = getattr(self.gamma, "diagnostics", None)
        if gd is not None:
            out["gamma"] = gd()
        return out


@dataclass
class EstimateReport:
    method: str
    target: TargetSpec
    labels: list
    theta: np.ndarray
    se: np.ndarray
    cov: np.ndarray
    influence: np.ndarray | None
    jacobian: np.ndarray | None
    omega: np.ndarray | None
    eta_mean: np.ndarray | None
    n: int
    n_used: int
    seed: int
    config: dict
    per_fold: list = field(default_factory=list)
    theta_raw: np.ndarray | None = None
    used: np.ndarray | None = None
    nuisances: list | None = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    @property
    def dropped(self) -> int:
        return self.n - self.n_used

    def scaled_influence(self) -> np.ndarray:
        """Rows J^{-1} psi_i: the per-observation contribution to theta - theta_0."""
        return np.linalg.solve(self.jacobian, self.influence.T).T


# --- estimation ----------------------------------------------------------------

def jacobian(eta_mean, target: TargetSpec | None = None, theta=None) -> np.ndarray:
    """d/dtheta of mean A(theta) eta: -mean(eta_D) * I, independent of theta."""
    eta_mean = np.asarray(eta_mean, dtype=float).reshape(-1)
    m = eta_mean.size - 1
    return -eta_mean[-1] * np.eye(m)


def sandwich(J, omega) -> np.ndarray:
    J = np.atleast_2d(J)
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
        raise SingularJacobianError("Jacobian is singular; the moment is not locally identified")
    left = np.linalg.solve(J, omega)
    C = np.linalg.solve(J, left.T).T
    return 0.5 * (C + C.T)


def _alpha_learner(spec, config: EstimatorConfig):
    if config.method == "auto":
        return AutoAlpha(spec, config.hyper, config.alpha_lambda)
    if config.method == "plugin":
        from .baselines import PluginAlpha
        return PluginAlpha(spec, config.trim, config.hyper, config.logistic_lambda_scale)
    raise ConfigError(f"method {config.method!r} has no cross-fitted alpha")


def _fit_fold(fold, folds, data, V, alpha_learner, gamma_learner):
    test = folds.indices(fold)
    train = folds.complement(fold)
    tr = data.subset(train)
    alpha_fit = alpha_learner.fit(tr)
    gamma_fit = gamma_learner.fit(tr.z, tr.x, V[train])
    xt = data.x[test]
    zt = data.z[test]
    ones = np.ones(test.size)
    g1 = gamma_fit.predict(ones, xt)
    g0 = gamma_fit.predict(0.0 * ones, xt)
    gz = gamma_fit.predict(zt, xt)
    alpha, keep = alpha_learner_predict(alpha_fit, zt, xt)
    eta = g1 - g0 + alpha[:, None] * (V[test] - gz)
    return FoldNuisance(fold, train, test, alpha_fit, gamma_fit), eta, keep


def alpha_learner_predict(alpha_fit, z, x):
    alpha, keep = alpha_fit.predict(z, x)
    return np.asarray(alpha, dtype=float), np.asarray(keep, dtype=bool)


def cross_fit_estimate(data: IVDataset, target: TargetSpec, spec: DictionarySpec,
                       config: EstimatorConfig = EstimatorConfig(),
                       gamma_learner=None, keep_nuisances: bool = False) -> EstimateReport:
    if config.method == "kappa":
        from .baselines import kappa_report
        return kappa_report(data, target, spec, config)
    if spec.k != data.k:
        raise ConfigError(f"dictionary expects {spec.k} covariates, data has {data.k}")
    if target.kind == "characteristics" and max(target.characteristics) >= data.k:
        raise ConfigError("characteristic index out of range")
    spec = spec.fit(data.x) if not spec.fitted else spec
    folds = partition_folds(data.n, config.folds, config.seed)
    V = v_matrix(target, data.y, data.d, data.x)
    alpha_learner = _alpha_learner(spec, config)
    if gamma_learner is None:
        gamma_learner = LassoRegression(spec, config.gamma_hyper or config.hyper, config.gamma_lambda)

    def run(fold):
        return _fit_fold(fold, folds, data, V, alpha_learner, gamma_learner)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run, range(folds.L)))
    else:
        results = [run(fold) for fold in range(folds.L)]

    eta = np.empty((data.n, V.shape[1]))
    keep = np.ones(data.n, dtype=bool)
    nuisances = []
    for nuis, eta_f, keep_f in results:
        eta[nuis.test] = eta_f
        keep[nuis.test] = keep_f
        nuisances.append(nuis)
    per_fold = [nu.diagnostics() for nu in nuisances]

    used = np.flatnonzero(keep)
    if used.size == 0:
        raise WeakFirstStageError("every observation was trimmed", per_fold)
    eta_used = eta[used]
    eta_mean = eta_used.mean(axis=0)
    try:
        theta = solve_theta(eta_mean, target)
    except WeakFirstStageError as err:
        raise WeakFirstStageError(str(err), per_fold) from None
    psi = psi_at(eta_used, theta)
    J = jacobian(eta_mean)
    omega = psi.T @ psi / used.size
    C = sandwich(J, omega)
    se = np.sqrt(np.diag(C) / used.size)

    theta_raw = None
    if config.monotone and target.kind == "cdf":
        theta_raw = theta
        theta = monotone_cdf(theta, target)

    return EstimateReport(
        method=config.method, target=target, labels=target.labels(), theta=theta, se=se,
        cov=C, influence=psi, jacobian=J, omega=omega, eta_mean=eta_mean, n=data.n,
        n_used=int(used.size), seed=config.seed, config=config.echo(), per_fold=per_fold,
        theta_raw=theta_raw, used=used, nuisances=nuisances if keep_nuisances else None,
    )


def estimate(data, target, spec, config: EstimatorConfig = EstimatorConfig(), **kw) -> EstimateReport:
    """Dispatch on ``config.method`` (auto, plugin, kappa)."""
    return cross_fit_estimate(data, target, spec, config, **kw)


def fold_orthogonality(nuisance: FoldNuisance, data: IVDataset, target: TargetSpec,
                       theta0) -> dict:
    """Fold-complement sup-norms of d psi / d beta and d psi / d rho at theta0.

    Requires the Lasso regression and automatic balancing weight on one shared
    dictionary. Also returns the bound (1 + |theta0_k|) * lambda_eff per
    parameter row, where lambda_eff is the largest effective penalty level
    (lambda times max penalty weight) among the fitted nuisances of the fold.
    """
    spec = nuisance.alpha.spec
    tr = data.subset(nuisance.train)
    B = spec.basis(tr.z, tr.x)
    Delta = spec.contrast(tr.x)
    V = v_matrix(target, tr.y, tr.d, tr.x)
    rho = nuisance.alpha.fit.rho
    beta = nuisance.gamma.coef
    A = np.hstack([np.eye(target.dim), -np.asarray(theta0, dtype=float)[:, None]])
    n_f = B.shape[0]
    balance = Delta.mean(axis=0) - B.T @ (B @ rho) / n_f
    # d psi_k / d beta_j averages to A_kj (M - G rho)
    d_beta = np.abs(A)[:, :, None] * np.abs(balance)[None, None, :]
    fit_resid = B.T @ (V - B @ beta) / n_f
    d_rho = fit_resid @ A.T
    lam_eff = max(nuisance.alpha.fit.effective_lambda,
                  max(f.effective_lambda for f in nuisance.gamma.fits))
    bound = (1.0 + np.abs(np.asarray(theta0, dtype=float))) * lam_eff
    return {
        "d_beta_sup": d_beta.max(axis=(1, 2)),
        "d_rho_sup": np.abs(d_rho).max(axis=0),
        "bound": bound,
        "lambda_eff": lam_eff,
    }
