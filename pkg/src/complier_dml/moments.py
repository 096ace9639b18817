"""Doubly robust moment systems for complier parameters.

Every target is written in the stacked form

    V = (V_1, ..., V_m, D),   A(theta) = [I_m, -theta]

so psi = A(theta) eta with eta = gamma(1,x) - gamma(0,x) + alpha(z,x) (v - gamma(z,x)).
For the counterfactual CDF on a grid y_1 < ... < y_K the numerators are
interleaved per grid point,

    V = ((D-1) 1{Y<=y_1}, D 1{Y<=y_1}, ..., (D-1) 1{Y<=y_K}, D 1{Y<=y_K}, D),

and the parameter vector is (beta_{y_1}, delta_{y_1}, ..., beta_{y_K}, delta_{y_K}).
For a single grid point A is the usual 2x3 block [[1, 0, -beta], [0, 1, -delta]].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import ConfigError, ShapeError, WeakFirstStageError

KINDS = ("late", "characteristics", "cdf")
WEAK_FIRST_STAGE_TOL = 1e-10


@dataclass(frozen=True)
class TargetSpec:
    """Which complier parameter to estimate.

    ``characteristics`` lists covariate column indices whose complier means are
    wanted (``f(x) = x[:, characteristics]``); ``grid`` is the ascending outcome
    grid for ``kind="cdf"``.
    """

    kind: str = "late"
    characteristics: tuple = ()
    grid: tuple = ()
    characteristic_names: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"target kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "cdf":
            g = np.asarray(self.grid, dtype=float)
            if g.size == 0:
                raise ConfigError("cdf target needs a nonempty grid")
            if not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
                raise ConfigError("cdf grid must be finite and strictly ascending")
            object.__setattr__(self, "grid", tuple(float(v) for v in g))
        if self.kind == "characteristics":
            if len(self.characteristics) == 0:
                raise ConfigError("characteristics target needs at least one covariate index")
            object.__setattr__(self, "characteristics", tuple(int(i) for i in self.characteristics))

    @property
    def dim(self) -> int:
        if self.kind == "late":
            return 1
        if self.kind == "characteristics":
            return len(self.characteristics)
        return 2 * len(self.grid)

    @property
    def width(self) -> int:
        return self.dim + 1

    def labels(self) -> list:
        if self.kind == "late":
            return ["late"]
        if self.kind == "characteristics":
            names = self.characteristic_names or tuple(f"x{i + 1}" for i in self.characteristics)
            return [f"char:{nm}" for nm in names]
        out = []
        for y in self.grid:
            out += [f"beta@{y:g}", f"delta@{y:g}"]
        return out

    def beta_index(self) -> np.ndarray:
        return np.arange(0, self.dim, 2) if self.kind == "cdf" else np.array([], dtype=int)

    def delta_index(self) -> np.ndarray:
        return np.arange(1, self.dim, 2) if self.kind == "cdf" else np.array([], dtype=int)


def v_matrix(target: TargetSpec, y, d, x) -> np.ndarray:
    """Stacked (n, m+1) matrix of V for every observation."""
    y = np.asarray(y, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if target.kind == "late":
        return np.column_stack([y, d])
    if target.kind == "characteristics":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        f = x[:, list(target.characteristics)]
        return np.column_stack([d[:, None] * f, d])
    grid = np.asarray(target.grid)
    ind = (y[:, None] <= grid[None, :]).astype(float)
    out = np.empty((y.shape[0], 2 * grid.size + 1))
    out[:, 0:-1:2] = (d - 1.0)[:, None] * ind
    out[:, 1:-1:2] = d[:, None] * ind
    out[:, -1] = d
    return out


def build_v(target: TargetSpec, y, d, x=None):
    """V for a single observation; for the CDF target one 3-vector per grid point."""
    if target.kind == "cdf":
        ind = [1.0 if y <= g else 0.0 for g in target.grid]
        return [np.array([(d - 1.0) * i, d * i, float(d)]) for i in ind]
    row = v_matrix(target, [y], [d], None if x is None else np.atleast_2d(x))
    return row[0]


def a_matrix(target: TargetSpec, theta) -> np.ndarray:
    """A(theta) = [I, -theta] in stacked form, shape (m, m+1)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = theta.shape[0]
    if target.kind != "cdf" and m != target.dim:
        raise ShapeError(f"theta has {m} entries, target needs {target.dim}")
    if target.kind == "cdf" and m not in (2, target.dim):
        raise ShapeError("cdf theta is (beta, delta) per grid point")
    return np.hstack([np.eye(m), -theta[:, None]])


def eta_values(v, gamma1, gamma0, gammaz, alpha) -> np.ndarray:
    """gamma(1,x) - gamma(0,x) + alpha (v - gamma(z,x)); rows are observations."""
    alpha = np.asarray(alpha, dtype=float)
    if np.ndim(v) == 2:
        alpha = alpha.reshape(-1, 1)
    return np.asarray(gamma1) - np.asarray(gamma0) + alpha * (np.asarray(v) - np.asarray(gammaz))


def psi(v, gamma1, gamma0, gammaz, alpha, target: TargetSpec, theta) -> np.ndarray:
    """m + phi = A(theta)[gamma(1,x) - gamma(0,x)] + alpha A(theta)[v - gamma(z,x)]."""
    A = a_matrix(target, theta)
    widths = {np.shape(a)[-1] for a in (v, gamma1, gamma0, gammaz)}
    if widths != {A.shape[1]}:
        raise ShapeError("moment vector widths do not match the target")
    m = (np.asarray(gamma1) - np.asarray(gamma0)) @ A.T
    phi = np.asarray(alpha, dtype=float)[..., None] * ((np.asarray(v) - np.asarray(gammaz)) @ A.T)
    return m + phi


def solve_theta(eta_mean, target: TargetSpec | None = None) -> np.ndarray:
    """Exact root of mean A(theta) eta = 0: numerators over the treatment contrast."""
    eta_mean = np.asarray(eta_mean, dtype=float).reshape(-1)
    denom = eta_mean[-1]
    if not abs(denom) >= WEAK_FIRST_STAGE_TOL:
        raise WeakFirstStageError(
            f"treatment contrast {denom:.3g} is below {WEAK_FIRST_STAGE_TOL}: no complier mass")
    theta = eta_mean[:-1] / denom
    if target is not None and target.kind == "cdf" and theta.size not in (2, target.dim):
        raise ShapeError("eta width does not match target")
    return theta


def psi_at(eta, theta) -> np.ndarray:
    """Per-observation psi_i(theta) = eta_num_i - theta * eta_D_i."""
    eta = np.asarray(eta, dtype=float)
    return eta[:, :-1] - np.outer(eta[:, -1], theta)


def monotone_cdf(theta, target: TargetSpec) -> np.ndarray:
    """Pool-adjacent-violators fit of beta and delta across the grid, clipped to [0, 1]."""
    theta = np.array(theta, dtype=float)
    for idx in (target.beta_index(), target.delta_index()):
        if idx.size:
            theta[idx] = np.clip(isotonic_regression(theta[idx]).x, 0.0, 1.0)
    return theta
