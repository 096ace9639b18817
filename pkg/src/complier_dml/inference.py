"""Simultaneous bands by Gaussian multiplier bootstrap and the instrument-equality Wald test."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError, SingularJacobianError

BLOCK = 20_000
EIG_TOL = 1e-10


@dataclass
class BandResult:
    c: float
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    B: int
    seed: int
    live: np.ndarray | None = None

    def covers(self, truth) -> bool:
        """Joint coverage over the coordinates that entered the band."""
        truth = np.asarray(truth, dtype=float)
        mask = np.ones(truth.size, dtype=bool) if self.live is None else self.live
        inside = (self.lower <= truth) & (truth <= self.upper)
        return bool(np.all(inside[mask]))

    def to_dict(self) -> dict:
        out = {"c": self.c, "alpha": self.alpha, "B": self.B, "seed": self.seed,
               "lower": list(self.lower), "upper": list(self.upper)}
        if self.live is not None:
            out["degenerate"] = [int(j) for j in np.flatnonzero(~self.live)]
        return out


def correlation_root(C) -> np.ndarray:
    """Symmetric square root of S^{-1/2} C S^{-1/2}, S = diag(C)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[0] != C.shape[1]:
        raise ConfigError("covariance must be square")
    diag = np.diag(C)
    if np.any(~(diag > 0)):
        raise ConfigError("covariance has a zero or negative diagonal entry (degenerate coordinate)")
    s = 1.0 / np.sqrt(diag)
    sigma = s[:, None] * C * s[None, :]
    sigma = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sigma)
    if vals.min() < -EIG_TOL:
        raise ConfigError(f"covariance is not positive semidefinite (eigenvalue {vals.min():.3g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def max_abs_draws(root, B: int, seed: int, threads: int = 1) -> np.ndarray:
    """|Q|_inf for B draws Q = root @ N(0, I), generated in seeded blocks."""
    d = root.shape[0]
    sizes = [BLOCK] * (B // BLOCK) + ([B % BLOCK] if B % BLOCK else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def block(i):
        g = np.random.default_rng(seeds[i]).standard_normal((sizes[i], d))
        return np.max(np.abs(g @ root.T), axis=1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(len(sizes))))
    else:
        parts = [block(i) for i in range(len(sizes))]
    return np.concatenate(parts)


def simultaneous_band(theta, C, n: int, alpha: float = 0.05, B: int = 10_000, seed: int = 0,
                      threads: int = 1) -> BandResult:
    """theta_j +- c sqrt(C_jj / n) with c the ceil((1-alpha)B)-th smallest |Q|_inf."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if B < 1000:
        raise ConfigError("need at least 1000 bootstrap draws")
    if n < 1:
        raise ConfigError("n must be positive")
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape != (theta.size, theta.size):
        raise ConfigError("covariance shape does not match theta")
    root = correlation_root(C)
    draws = np.sort(max_abs_draws(root, B, seed, threads))
    c = float(draws[math.ceil((1.0 - alpha) * B) - 1])
    half = c * np.sqrt(np.diag(C) / n)
    return BandResult(c, theta - half, theta + half, alpha, B, seed)


def band_skipping_degenerate(theta, C, n: int, alpha: float = 0.05, B: int = 10_000,
                             seed: int = 0, threads: int = 1) -> BandResult:
    """simultaneous_band over coordinates with positive variance.

    A zero-variance coordinate (for instance a CDF estimate that is exactly 1
    because every outcome lies below the grid point) has a point band at
    theta_j and is flagged in ``live``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    live = np.diag(C) > 0
    lower, upper = theta.copy(), theta.copy()
    c = float("nan")
    if live.any():
        idx = np.flatnonzero(live)
        band = simultaneous_band(theta[idx], C[np.ix_(idx, idx)], n, alpha, B, seed, threads)
        lower[idx], upper[idx], c = band.lower, band.upper, band.c
    return BandResult(c, lower, upper, alpha, B, seed, live)


@dataclass
class WaldTestResult:
    W: float
    df: int
    p_value: float
    alpha: float
    diff: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        return {"W": self.W, "df": self.df, "p": self.p_value, "alpha": self.alpha,
                "reject": self.reject, "theta1": list(self.theta1), "theta2": list(self.theta2)}


def _full_influence(report) -> np.ndarray:
    """J^{-1} psi_i on all n rows; trimmed rows contribute zero."""
    h = np.zeros((report.n, report.theta.size))
    rows = report.used if report.used is not None else np.arange(report.n)
    h[rows] = report.scaled_influence() * (report.n / report.n_used)
    return h


def wald_statistic(report1, report2, alpha: float = 0.05) -> WaldTestResult:
    """W = (t1 - t2)' [R C_joint R']^{-1} (t1 - t2) from two fits on one sample."""
    if report1.n != report2.n:
        raise ConfigError("both fits must use the same sample")
    diff = np.asarray(report1.theta - report2.theta, dtype=float)
    df = int(diff.size)
    if np.all(diff == 0.0):
        return WaldTestResult(0.0, df, 1.0, alpha, diff, report1.theta, report2.theta)
    h = _full_influence(report1) - _full_influence(report2)
    V = h.T @ h / report1.n
    V = 0.5 * (V + V.T)
    if np.linalg.cond(V) > 1e12:
        raise SingularJacobianError("R C R' is singular; the two instruments give indistinguishable influences")
    W = float(report1.n * diff @ np.linalg.solve(V, diff))
    W = max(W, 0.0)
    return WaldTestResult(W, df, float(chi2.sf(W, df)), alpha, diff, report1.theta, report2.theta)


def instrument_equality_test(data, z2, target, spec, config, alpha: float = 0.05) -> WaldTestResult:
    """Fit the same target with instrument data.z and with z2 on shared folds, then test equality."""
    from .crossfit import estimate

    if target.kind != "characteristics":
        raise ConfigError("the instrument-equality test compares complier characteristics")
    r1 = estimate(data, target, spec, config)
    r2 = estimate(data.with_instrument(z2), target, spec, config)
    return wald_statistic(r1, r2, alpha)
