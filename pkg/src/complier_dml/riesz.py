"""Automatic balancing weights alpha(z, x) = b(z, x)' rho fit by tuned Lasso.

The same self-normalising tuning loop also fits Lasso regressions of outcome
components on the dictionary; only the moment vector M and the per-row
score used for the normalisation D differ.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .dictionary import DictionarySpec, expand, sub_dictionary
from .errors import ConfigError, ShapeError
from .optim import QuadraticProblem, solve_quadratic_lasso

INNER_TOL = 1e-9
INNER_MAX_ITER = 20_000
OUTER_TOL = 1e-6


@dataclass(frozen=True)
class RieszHyper:
    c1: float = 1.0
    c2: float = 0.1
    c3: float = 0.1
    ridge_on_norm: float = 0.2
    max_outer_iter: int = 10
    lambda_multiplier: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "ridge_on_norm", "max_outer_iter", "lambda_multiplier"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class TunedFit:
    coef: np.ndarray
    lambda_used: float
    d_norm: np.ndarray
    penalty_weights: np.ndarray
    tuning_iterations: int
    foc_sup_norm: float
    kkt_violation: float
    converged: bool
    outer_converged: bool

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.coef))

    @property
    def effective_lambda(self) -> float:
        """lambda times the largest penalty weight: the sup-norm FOC bound."""
        return float(self.lambda_used * np.max(self.penalty_weights))

    def diagnostics(self) -> dict:
        return {
            "lambda": self.lambda_used,
            "sparsity": self.sparsity,
            "foc_sup_norm": self.foc_sup_norm,
            "effective_lambda": self.effective_lambda,
            "tuning_iterations": self.tuning_iterations,
            "converged": self.converged,
        }


class RieszFit(TunedFit):
    @property
    def rho(self) -> np.ndarray:
        return self.coef

    @property
    def balance_sup_norm(self) -> float:
        return self.foc_sup_norm

    def diagnostics(self) -> dict:
        out = super().diagnostics()
        out["balance_sup_norm"] = out.pop("foc_sup_norm")
        return out


def compute_moments(B, Delta):
    """G = mean of b b', M = mean of the instrument contrasts."""
    B = np.asarray(B, dtype=float)
    Delta = np.asarray(Delta, dtype=float)
    if B.ndim != 2 or B.shape != Delta.shape:
        raise ShapeError(f"basis {B.shape} and contrast {Delta.shape} rows must match")
    n_f = B.shape[0]
    if n_f < 1:
        raise ShapeError("need at least one row")
    G = B.T @ B / n_f
    G = 0.5 * (G + G.T)
    return G, Delta.mean(axis=0)


def theoretical_lambda(n_f: int, p: int, c1: float = 1.0, c2: float = 0.1) -> float:
    """(c1 / sqrt(n_f)) * Phi^{-1}(1 - c2 / (2p))."""
    if n_f < 2 or p < 1 or not (0 < c2 < 2 * p) or c1 <= 0:
        raise ConfigError(f"theoretical_lambda domain violated: n_f={n_f}, p={p}, c2={c2}")
    return float(c1 / np.sqrt(n_f) * ndtri(1.0 - c2 / (2.0 * p)))


def _check_fold_size(n_f, p):
    if n_f < max(p / 10.0, 20):
        raise ConfigError(f"fold complement too small for stable moments: n_f={n_f}, p={p}")


def _low_dim_init(G, M, sub):
    idx = np.asarray(sub.indices)
    init = np.zeros(M.shape[0])
    # pseudo-inverse covers a rank-deficient sub-dictionary Gram
    init[idx] = np.linalg.pinv(G[np.ix_(idx, idx)]) @ M[idx]
    return init


def tuned_lasso(G, M, score_rows: Callable[[np.ndarray], np.ndarray], n_f: int,
                intercepts=(0,), hyper: RieszHyper = RieszHyper(),
                fixed_lambda: float | None = None, fit_cls=TunedFit) -> TunedFit:
    """Iterate normalisation D, lambda and the weighted Lasso until coef settles.

    ``score_rows(coef)`` returns the (n_f, p) matrix whose column-wise root mean
    square is the normalisation D. With ``fixed_lambda`` the loop is skipped and
    a single unit-weight Lasso is solved at that level (zero allowed).
    """
    p = M.shape[0]
    if fixed_lambda is not None:
        weights = np.ones(p)
        res = solve_quadratic_lasso(QuadraticProblem(
            G, M, fixed_lambda, weights, None, INNER_TOL, INNER_MAX_ITER))
        foc = float(np.max(np.abs(M - G @ res.solution)))
        return fit_cls(res.solution, float(fixed_lambda), np.zeros(p), weights, 0, foc,
                       res.kkt_violation, res.converged, True)

    lam = theoretical_lambda(n_f, p, hyper.c1, hyper.c2) * hyper.lambda_multiplier
    if not lam > 0:
        raise ConfigError("regularisation level is zero; choose c2 < p")
    intercept_factor = np.ones(p)
    intercept_factor[list(intercepts)] = hyper.c3

    coef = _low_dim_init(G, M, sub_dictionary(p))
    res = None
    outer_converged = False
    it = 0
    for it in range(1, int(hyper.max_outer_iter) + 1):
        d_norm = np.sqrt(np.mean(score_rows(coef) ** 2, axis=0))
        weights = (d_norm + hyper.ridge_on_norm) * intercept_factor
        res = solve_quadratic_lasso(QuadraticProblem(
            G, M, lam, weights, coef, INNER_TOL, INNER_MAX_ITER))
        change = np.max(np.abs(res.solution - coef))
        coef = res.solution
        if change < OUTER_TOL:
            outer_converged = True
            break
    foc = float(np.max(np.abs(M - G @ coef)))
    return fit_cls(coef, lam, d_norm, weights, it, foc, res.kkt_violation,
                   res.converged, outer_converged)


def fit_balancing_weight_arrays(B, Delta, intercepts=(0,), hyper: RieszHyper = RieszHyper(),
                                fixed_lambda: float | None = None) -> RieszFit:
    """Balancing weight from basis rows B and contrast rows Delta of one fold complement."""
    G, M = compute_moments(B, Delta)
    n_f, p = B.shape
    if fixed_lambda is None:
        _check_fold_size(n_f, p)

    def score_rows(rho):
        return B * (B @ rho)[:, None] - Delta

    return tuned_lasso(G, M, score_rows, n_f, intercepts, hyper, fixed_lambda, RieszFit)


def fit_balancing_weight(spec: DictionarySpec, z, x, hyper: RieszHyper = RieszHyper(),
                         fixed_lambda: float | None = None) -> RieszFit:
    return fit_balancing_weight_arrays(spec.basis(z, x), spec.contrast(x),
                                       spec.intercept_indices, hyper, fixed_lambda)


def fit_regression_arrays(B, v, intercepts=(0,), hyper: RieszHyper = RieszHyper(),
                          fixed_lambda: float | None = None) -> TunedFit:
    """Lasso regression of v on B with the same tuning loop (score rows b_i (b_i'beta - v_i))."""
    v = np.asarray(v, dtype=float).reshape(-1)
    n_f, p = B.shape
    G = B.T @ B / n_f
    G = 0.5 * (G + G.T)
    M = B.T @ v / n_f
    if fixed_lambda is None:
        _check_fold_size(n_f, p)

    def score_rows(beta):
        return B * (B @ beta - v)[:, None]

    return tuned_lasso(G, M, score_rows, n_f, intercepts, hyper, fixed_lambda)


def predict_alpha(fit: RieszFit, spec: DictionarySpec, z, x) -> float:
    b = expand(spec, z, x)
    if b.shape != fit.rho.shape:
        raise ShapeError("dictionary width does not match fitted coefficients")
    return float(b @ fit.rho)


def split_balance(spec: DictionarySpec, z, x, rho):
    """Sample-balance sup-norms for the split layout.

    Returns (sup_z1, sup_z0) where sup_z1 = |mean q - mean q Z w1|_inf with
    w1 = q' rho_1 and sup_z0 = |mean q - mean q (1-Z) w0|_inf with
    w0 = -q' rho_0 (the z=0 block of alpha carries a negative sign).
    """
    if spec.layout != "split":
        raise ConfigError("balance diagnostic requires the split layout")
    q = spec.q(x)
    z = np.asarray(z, dtype=float)
    h = spec.q_width
    w1 = q @ rho[:h]
    w0 = -(q @ rho[h:])
    qbar = q.mean(axis=0)
    sup1 = np.max(np.abs(qbar - np.mean(q * (z * w1)[:, None], axis=0)))
    sup0 = np.max(np.abs(qbar - np.mean(q * ((1 - z) * w0)[:, None], axis=0)))
    return float(sup1), float(sup0)
