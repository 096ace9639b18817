"""Soft-thresholding solvers.

The quadratic Lasso minimises

    rho' G rho - 2 rho' M + 2 lam * sum_j w_j |rho_j|

by cyclic coordinate descent. Regression Lasso and the proximal-Newton
logistic solver both reduce to this form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from .errors import ConfigError, DegenerateLabelError, ShapeError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


def soft_threshold(v, t):
    """sign(v) * max(|v| - t, 0); works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ConfigError("threshold must be nonnegative")
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class QuadraticProblem:
    G: np.ndarray
    M: np.ndarray
    lam: float
    penalty_weights: np.ndarray | None = None
    init: np.ndarray | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        G = np.ascontiguousarray(self.G, dtype=float)
        M = np.ascontiguousarray(self.M, dtype=float).reshape(-1)
        p = M.shape[0]
        if G.shape != (p, p):
            raise ShapeError(f"G must be {p}x{p}, got {G.shape}")
        if not (np.isfinite(G).all() and np.isfinite(M).all()):
            raise ConfigError("G and M must be finite")
        scale = max(1.0, float(np.abs(G).max(initial=0.0)))
        if np.abs(G - G.T).max(initial=0.0) > 1e-12 * scale:
            raise ConfigError("G must be symmetric")
        if (np.diag(G) < -1e-12 * scale).any():
            raise ConfigError("G must have a nonnegative diagonal")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigError("lambda must be finite and >= 0")
        w = np.ones(p) if self.penalty_weights is None else np.asarray(
            self.penalty_weights, dtype=float).reshape(-1)
        if w.shape != (p,) or (w < 0).any() or not np.isfinite(w).all():
            raise ConfigError("penalty_weights must be p nonnegative finite values")
        init = np.zeros(p) if self.init is None else np.asarray(self.init, dtype=float).reshape(-1)
        if init.shape != (p,):
            raise ShapeError("init has wrong length")
        self.G, self.M, self.penalty_weights, self.init = G, M, w, init

    @property
    def penalty(self) -> np.ndarray:
        return self.lam * self.penalty_weights


@dataclass
class SolverResult:
    solution: np.ndarray
    iterations: int
    kkt_violation: float
    converged: bool
    objective: float = field(default=np.nan)


def quadratic_objective(G, M, pen, rho) -> float:
    return float(rho @ G @ rho - 2.0 * rho @ M + 2.0 * np.sum(pen * np.abs(rho)))


def kkt_violation(G, M, pen, rho) -> float:
    """Sup-norm violation of the subgradient conditions, recomputed from scratch.

    Coordinates with a zero diagonal are frozen and excluded.
    """
    g = G @ rho - M
    active = np.diag(G) > 0
    nz = rho != 0
    viol = np.where(nz, np.abs(g + pen * np.sign(rho)), np.maximum(np.abs(g) - pen, 0.0))
    viol = viol[active]
    return float(viol.max()) if viol.size else 0.0


@numba.njit(cache=True, nogil=True)
def _kkt_kernel(G, M, pen, rho):
    p = M.shape[0]
    worst = 0.0
    for j in range(p):
        if G[j, j] <= 0.0:
            continue
        g = -M[j]
        for m in range(p):
            g += G[j, m] * rho[m]
        if rho[j] > 0.0:
            v = abs(g + pen[j])
        elif rho[j] < 0.0:
            v = abs(g - pen[j])
        else:
            v = abs(g) - pen[j]
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _cd_kernel(G, M, pen, rho, tol, max_iter):
    p = M.shape[0]
    # g tracks G rho - M and is refreshed exactly before each KKT test
    g = G @ rho - M
    sweeps = 0
    converged = False
    kkt = np.inf
    for it in range(max_iter):
        max_change = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = rho[j]
            c = gjj * old - g[j]
            if c > pen[j]:
                new = (c - pen[j]) / gjj
            elif c < -pen[j]:
                new = (c + pen[j]) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                rho[j] = new
                for m in range(p):
                    g[m] += G[m, j] * delta
                if abs(delta) > max_change:
                    max_change = abs(delta)
        sweeps = it + 1
        if max_change < tol:
            kkt = _kkt_kernel(G, M, pen, rho)
            if kkt <= tol:
                converged = True
                break
            g = G @ rho - M
    if not converged:
        kkt = _kkt_kernel(G, M, pen, rho)
    return rho, sweeps, converged, kkt


def _cd_python(G, M, pen, rho, tol, max_iter):
    """Reference sweep loop; asserts the objective never increases."""
    p = M.shape[0]
    obj = quadratic_objective(G, M, pen, rho)
    for it in range(max_iter):
        max_change = 0.0
        for j in range(p):
            if G[j, j] <= 0:
                continue
            c = M[j] - (G[j] @ rho - G[j, j] * rho[j])
            new = float(soft_threshold(c, pen[j])) / G[j, j]
            max_change = max(max_change, abs(new - rho[j]))
            rho[j] = new
        new_obj = quadratic_objective(G, M, pen, rho)
        assert new_obj <= obj + 1e-12 * max(1.0, abs(obj)), "objective increased"
        obj = new_obj
        if max_change < tol and kkt_violation(G, M, pen, rho) <= tol:
            return rho, it + 1, True
    return rho, max_iter, False


def solve_quadratic_lasso(problem: QuadraticProblem, debug: bool = False) -> SolverResult:
    G, M, pen = problem.G, problem.M, problem.penalty
    rho = problem.init.copy()
    frozen = np.diag(G) <= 0
    if frozen.any():
        rho[frozen] = problem.init[frozen]
    if debug:
        rho, sweeps, converged = _cd_python(G, M, pen, rho, problem.tol, problem.max_iter)
    else:
        rho, sweeps, converged, _ = _cd_kernel(G, M, pen, rho, problem.tol, problem.max_iter)
    kkt = kkt_violation(G, M, pen, rho)
    return SolverResult(rho, int(sweeps), kkt, bool(converged and kkt <= problem.tol),
                        quadratic_objective(G, M, pen, rho))


def gram(X):
    X = np.asarray(X, dtype=float)
    return X.T @ X / X.shape[0]


def fit_lasso_regression(X, v, lam, penalty_weights=None, init=None,
                         tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> SolverResult:
    """Lasso of v on the columns of X via the quadratic solver.

    Solves b' (X'X/n) b - 2 b' (X'v/n) + 2 lam |w * b|_1, which is the usual
    (1/n)|v - X b|^2 + 2 lam |w * b|_1 up to a constant.
    """
    X = np.asarray(X, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != v.shape[0]:
        raise ShapeError("X rows and v length must agree")
    problem = QuadraticProblem(gram(X), X.T @ v / X.shape[0], lam, penalty_weights,
                               init, tol, max_iter)
    return solve_quadratic_lasso(problem)


# --- L1-regularised logistic regression ------------------------------------

@dataclass
class LogisticResult:
    coef: np.ndarray
    iterations: int
    kkt_violation: float
    converged: bool
    objective: float

    def predict_logit(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.predict_logit(X))


_PCLAMP = 1e-10


def logistic_objective(X, z, coef, lam, weights) -> float:
    eta = X @ coef
    return float(np.mean(np.logaddexp(0.0, eta) - z * eta) + lam * np.sum(weights * np.abs(coef)))


def logistic_kkt(X, z, coef, lam, weights) -> float:
    g = X.T @ (expit(X @ coef) - z) / X.shape[0]
    pen = lam * weights
    viol = np.where(coef != 0, np.abs(g + pen * np.sign(coef)), np.maximum(np.abs(g) - pen, 0.0))
    return float(viol.max())


def fit_l1_logistic(X, z, lam, penalty_weights=None, tol=DEFAULT_TOL, max_iter=200) -> LogisticResult:
    """Minimise mean logistic loss + lam * sum_j w_j |b_j| by proximal Newton.

    Column 0 must be the intercept; by default it is unpenalised and every
    other column carries weight 1. Each Newton step solves the penalised local
    quadratic model with the coordinate-descent kernel, followed by a
    backtracking line search on the true objective.
    """
    X = np.ascontiguousarray(X, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    n, p = X.shape
    if z.shape[0] != n:
        raise ShapeError("X rows and z length must agree")
    if not np.all((z == 0) | (z == 1)):
        raise ConfigError("labels must be 0/1")
    zbar = z.mean()
    if zbar == 0.0 or zbar == 1.0:
        raise DegenerateLabelError("all labels identical; propensity model not identifiable")
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    if penalty_weights is None:
        w = np.ones(p)
        w[0] = 0.0
    else:
        w = np.asarray(penalty_weights, dtype=float).reshape(-1)
    pen = lam * w

    coef = np.zeros(p)
    coef[0] = np.log(zbar / (1.0 - zbar))
    obj = logistic_objective(X, z, coef, lam, w)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ coef
        prob = np.clip(expit(eta), _PCLAMP, 1.0 - _PCLAMP)
        grad = X.T @ (prob - z) / n
        H = (X * (prob * (1.0 - prob))[:, None]).T @ X / n
        H = 0.5 * (H + H.T)
        target = H @ coef - grad
        prop, _, _, _ = _cd_kernel(H, target, pen, coef.copy(), tol * 1e-2, 10_000)
        step = prop - coef
        decrease = grad @ step + np.sum(pen * (np.abs(prop) - np.abs(coef)))
        t = 1.0
        for _ in range(60):
            cand = coef + t * step
            cand_obj = logistic_objective(X, z, cand, lam, w)
            if cand_obj <= obj + 0.25 * t * decrease or t < 1e-12:
                break
            t *= 0.5
        if cand_obj > obj:
            cand, cand_obj = coef, obj
        moved = np.max(np.abs(cand - coef))
        coef, obj = cand, cand_obj
        if logistic_kkt(X, z, coef, lam, w) <= tol:
            converged = True
            break
        if moved == 0.0:
            break
    kkt = logistic_kkt(X, z, coef, lam, w)
    return LogisticResult(coef, it, kkt, bool(converged and np.isfinite(obj)), obj)
